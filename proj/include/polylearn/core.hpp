#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace polylearn {

/// Binary incidence vector of an action, stored by its sorted active indices.
class ActionVector {
 public:
  ActionVector() = default;

  ActionVector(std::size_t dim, std::vector<int> active)
      : dim_(dim), active_(std::move(active)) {
    std::sort(active_.begin(), active_.end());
    for (std::size_t i = 0; i < active_.size(); ++i) {
      if (active_[i] < 0 || static_cast<std::size_t>(active_[i]) >= dim_) {
        throw std::out_of_range("ActionVector: active index " +
                                std::to_string(active_[i]) +
                                " outside dimension " + std::to_string(dim_));
      }
      if (i > 0 && active_[i] == active_[i - 1]) {
        throw std::invalid_argument("ActionVector: duplicate active index " +
                                    std::to_string(active_[i]));
      }
    }
  }

  static ActionVector from_bits(const Eigen::VectorXd& bits) {
    std::vector<int> active;
    for (Eigen::Index j = 0; j < bits.size(); ++j) {
      if (bits[j] == 1.0) {
        active.push_back(static_cast<int>(j));
      } else if (bits[j] != 0.0) {
        throw std::invalid_argument("ActionVector: non-binary entry");
      }
    }
    return ActionVector(static_cast<std::size_t>(bits.size()), std::move(active));
  }

  std::size_t dim() const { return dim_; }
  std::size_t count() const { return active_.size(); }
  const std::vector<int>& active() const { return active_; }

  bool contains(int j) const {
    return std::binary_search(active_.begin(), active_.end(), j);
  }

  Eigen::VectorXd bits() const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
    for (int j : active_) out[j] = 1.0;
    return out;
  }

  double dot(const Eigen::VectorXd& x) const {
    if (static_cast<std::size_t>(x.size()) != dim_) {
      throw std::invalid_argument("ActionVector::dot: dimension mismatch");
    }
    double total = 0.0;
    for (int j : active_) total += x[j];
    return total;
  }

  friend bool operator==(const ActionVector& a, const ActionVector& b) {
    return a.dim_ == b.dim_ && a.active_ == b.active_;
  }
  friend bool operator<(const ActionVector& a, const ActionVector& b) {
    return a.active_ < b.active_;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<int> active_;
};

/// Per-coordinate losses in [0, 1].
inline void check_loss_vector(const Eigen::VectorXd& loss, std::size_t dim) {
  if (static_cast<std::size_t>(loss.size()) != dim) {
    throw std::invalid_argument("loss vector has length " +
                                std::to_string(loss.size()) + ", expected " +
                                std::to_string(dim));
  }
  for (Eigen::Index j = 0; j < loss.size(); ++j) {
    if (!(loss[j] >= 0.0 && loss[j] <= 1.0)) {
      throw std::domain_error("loss entry " + std::to_string(j) +
                              " outside [0, 1]");
    }
  }
}

/// Set of at most two coordinates forced to zero: the all-ones vector, e_j-bar
/// or e_{j,j'}-bar.
class Mask {
 public:
  static Mask none() { return Mask(); }
  static Mask one(int j) {
    Mask m;
    m.zeroed_ = {j};
    return m;
  }
  static Mask pair(int j, int jp) {
    Mask m;
    m.zeroed_ = {std::min(j, jp), std::max(j, jp)};
    if (j == jp) m.zeroed_.pop_back();
    return m;
  }

  const std::vector<int>& zeroed() const { return zeroed_; }
  bool zeroes(int h) const {
    return std::find(zeroed_.begin(), zeroed_.end(), h) != zeroed_.end();
  }
  bool empty() const { return zeroed_.empty(); }

  /// Coordinate-wise product of `weights` with the mask.
  Eigen::VectorXd apply(const Eigen::VectorXd& weights) const {
    Eigen::VectorXd out = weights;
    for (int j : zeroed_) {
      if (j < 0 || j >= weights.size()) {
        throw std::out_of_range("Mask: index outside weight vector");
      }
      out[j] = 0.0;
    }
    return out;
  }

 private:
  std::vector<int> zeroed_;
};

/// Exponential cumulative-loss weights C(j) = exp(-eta * c(j)), stored relative
/// to a global log-space offset so the largest weight stays representable.
class ExpWeights {
 public:
  /// Relative floor applied after rescaling; keeps every weight strictly
  /// positive when a coordinate's cumulative loss is astronomically large.
  static constexpr double kFloor = 1e-300;
  static constexpr double kLogUpper = 230.2585092994046;  // log(1e100)
  static constexpr double kLogLower = -230.2585092994046;
  /// Stand-in for an infinite weight.
  static constexpr double kSurrogateMax = 1e30;

  ExpWeights() = default;
  ExpWeights(std::size_t dim, double eta)
      : cumulative_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))),
        eta_(eta),
        weights_(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(dim))) {
    if (!(eta > 0.0)) throw std::invalid_argument("ExpWeights: eta must be > 0");
  }

  /// Weights given directly; cumulative losses become -log(C) with eta = 1.
  /// Weights above kSurrogateMax (including +inf) are capped there.
  static ExpWeights from_weights(const Eigen::VectorXd& weights) {
    ExpWeights w(static_cast<std::size_t>(weights.size()), 1.0);
    for (Eigen::Index j = 0; j < weights.size(); ++j) {
      if (!(weights[j] > 0.0)) {
        throw std::invalid_argument("ExpWeights: weights must be positive");
      }
      w.cumulative_[j] = -std::log(std::min(weights[j], kSurrogateMax));
    }
    w.refresh(true);
    return w;
  }

  std::size_t dim() const { return static_cast<std::size_t>(cumulative_.size()); }
  double eta() const { return eta_; }
  const Eigen::VectorXd& cumulative() const { return cumulative_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  double log_scale() const { return log_scale_; }

  /// Exact log-weights -eta * c(j), independent of the rescaling.
  Eigen::VectorXd log_weights() const { return -eta_ * cumulative_; }

  void accumulate(const Eigen::VectorXd& increment) {
    if (increment.size() != cumulative_.size()) {
      throw std::invalid_argument("ExpWeights::accumulate: dimension mismatch");
    }
    cumulative_ += increment;
    refresh(false);
  }

 private:
  void refresh(bool force_rescale) {
    const Eigen::VectorXd logw = log_weights();
    const double top = logw.maxCoeff();
    if (!std::isfinite(top)) {
      throw std::domain_error("ExpWeights: non-finite cumulative loss");
    }
    const double rel = top - log_scale_;
    if (force_rescale || rel > kLogUpper || rel < kLogLower) log_scale_ = top;
    weights_.resize(logw.size());
    for (Eigen::Index j = 0; j < logw.size(); ++j) {
      weights_[j] = std::max(std::exp(logw[j] - log_scale_), kFloor);
    }
  }

  Eigen::VectorXd cumulative_;
  double eta_ = 1.0;
  Eigen::VectorXd weights_;
  double log_scale_ = 0.0;
};

inline void check_positive_weights(const Eigen::VectorXd& weights, std::size_t dim,
                                   const char* who) {
  if (static_cast<std::size_t>(weights.size()) != dim) {
    throw std::invalid_argument(std::string(who) + ": weight vector has length " +
                                std::to_string(weights.size()) + ", expected " +
                                std::to_string(dim));
  }
  for (Eigen::Index j = 0; j < weights.size(); ++j) {
    if (!(weights[j] > 0.0) || !std::isfinite(weights[j])) {
      throw std::invalid_argument(std::string(who) + ": weight " +
                                  std::to_string(j) + " is not positive");
    }
  }
}

/// log(exp(a) + exp(b)) without overflow.
inline double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

/// Second-moment matrix assembled from kernels through the inclusion-exclusion
/// identity 1{j,j' in v} = 1 + 1{j,j' not in v} - 1{j not in v} - 1{j' not in v}.
/// Kernel values are given relative to K(C, 1) (i.e. divided by it).
/// `pair_sign` exists only so verification can inject a sign fault.
inline Eigen::MatrixXd assemble_second_moment(const Eigen::VectorXd& single,
                                              const Eigen::MatrixXd& pair,
                                              double pair_sign = 1.0) {
  const Eigen::Index d = single.size();
  Eigen::MatrixXd sigma(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index jp = 0; jp < d; ++jp) {
      sigma(j, jp) = 1.0 - (single[j] + single[jp] - pair_sign * pair(j, jp));
    }
  }
  return sigma;
}

/// First moment from leave-one-out kernels (relative to K(C, 1)).
inline Eigen::VectorXd assemble_first_moment(const Eigen::VectorXd& single) {
  return Eigen::VectorXd::Ones(single.size()) - single;
}

/// Second moment sum_v p(v) v v^T of an explicit distribution.
inline Eigen::MatrixXd autocorrelation(std::span<const ActionVector> actions,
                                       std::span<const double> probabilities) {
  if (actions.size() != probabilities.size() || actions.empty()) {
    throw std::invalid_argument("autocorrelation: size mismatch");
  }
  const auto d = static_cast<Eigen::Index>(actions.front().dim());
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const auto& act = actions[i].active();
    for (int a : act) {
      for (int b : act) sigma(a, b) += probabilities[i];
    }
  }
  return sigma;
}

}  // namespace polylearn
