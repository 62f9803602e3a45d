#pragma once

#include <chrono>
#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "polylearn/core.hpp"
#include "polylearn/oracle.hpp"
#include "polylearn/rng.hpp"
#include "polylearn/spanner.hpp"

namespace polylearn {

enum class Feedback { full, semi_bandit, bandit };

inline Feedback parse_feedback(const std::string& s) {
  if (s == "full") return Feedback::full;
  if (s == "semi_bandit") return Feedback::semi_bandit;
  if (s == "bandit") return Feedback::bandit;
  throw std::invalid_argument("unknown feedback mode '" + s + "' (expected full, semi_bandit or bandit)");
}

inline std::string to_string(Feedback f) {
  switch (f) {
    case Feedback::full: return "full";
    case Feedback::semi_bandit: return "semi_bandit";
    case Feedback::bandit: return "bandit";
  }
  return "?";
}

struct LearnerConfig {
  Feedback feedback = Feedback::full;
  double eta = 0.1;
  double gamma = 0.0;
  bool optimism = false;
  std::size_t T = 1;

  void validate() const {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw std::invalid_argument("learner: eta must be > 0");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("learner: gamma must lie in [0, 1]");
    if (optimism && feedback != Feedback::full) {
      throw std::invalid_argument("learner: optimism requires full feedback");
    }
  }
};

struct DefaultParams {
  double eta = 0.0;
  double gamma = 0.0;
  bool short_horizon = false;  // bandit only: T < 8 d^2 m
};

/// Step size and exploration defaults. For bandit feedback `d` should be the
/// spanner's reduced dimension; `multiplier` is the constant in the bandit eta.
inline DefaultParams default_params(Feedback feedback, std::size_t d, std::size_t m, std::size_t T,
                                    bool optimism = false, double multiplier = 4.0) {
  if (T == 0 || d == 0 || m == 0) throw std::invalid_argument("default_params: d, m, T must be >= 1");
  const double dd = static_cast<double>(d);
  const double mm = static_cast<double>(m);
  const double tt = static_cast<double>(T);
  DefaultParams p;
  switch (feedback) {
    case Feedback::bandit:
      p.eta = 1.0 / (multiplier * std::cbrt(dd * dd * dd * dd * mm * mm * tt));
      p.gamma = std::min(1.0, std::cbrt(dd * dd * mm / tt));
      p.short_horizon = tt < 8.0 * dd * dd * mm;
      break;
    case Feedback::semi_bandit:
      p.eta = 1.0 / std::sqrt(dd * tt);
      p.gamma = std::min(1.0, mm / std::sqrt(dd * tt));
      break;
    case Feedback::full:
      p.eta = optimism ? 1.0 / (4.0 * mm) : 1.0 / std::sqrt(mm * tt);
      break;
  }
  return p;
}

/// Wall-clock seconds spent per phase.
struct PhaseTimes {
  double kernels = 0.0;
  double sampling = 0.0;
  double solves = 0.0;

  PhaseTimes& operator+=(const PhaseTimes& o) {
    kernels += o.kernels;
    sampling += o.sampling;
    solves += o.solves;
    return *this;
  }
};

namespace learner_detail {

class Stopwatch {
 public:
  explicit Stopwatch(double& sink) : sink_(sink), start_(std::chrono::steady_clock::now()) {}
  ~Stopwatch() {
    sink_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }
  Stopwatch(const Stopwatch&) = delete;
  Stopwatch& operator=(const Stopwatch&) = delete;

 private:
  double& sink_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace learner_detail

/// One player's no-regret learner over a kernel oracle. Each round calls
/// act() once, then exactly one observe_*() matching the feedback mode.
/// The policy, the sample and every estimator of round t use the weights
/// left by round t-1.
template <KernelOracle Oracle>
class Learner {
 public:
  Learner(const Oracle& oracle, LearnerConfig config, std::shared_ptr<const Spanner> spanner = nullptr)
      : oracle_(&oracle), config_(config), spanner_(std::move(spanner)), weights_(oracle.dim(), config.eta) {
    config_.validate();
    if (config_.feedback == Feedback::bandit) {
      if (!spanner_) throw std::invalid_argument("learner: bandit feedback requires a spanner");
      if (spanner_->dim() != oracle.dim()) throw std::invalid_argument("learner: spanner dimension mismatch");
      const Eigen::MatrixXd& b = spanner_->basis();
      exploration_ = b * b.transpose() / static_cast<double>(spanner_->reduced_dim());
    }
    const auto d = static_cast<Eigen::Index>(oracle.dim());
    previous_loss_ = Eigen::VectorXd::Zero(d);
    estimate_ = Eigen::VectorXd::Zero(d);
  }

  const LearnerConfig& config() const { return config_; }
  const ExpWeights& weights() const { return weights_; }
  const Spanner* spanner() const { return spanner_.get(); }
  const Eigen::VectorXd& last_estimate() const { return estimate_; }
  const PhaseTimes& times() const { return times_; }
  std::size_t pinv_fallbacks() const { return pinv_fallbacks_; }
  std::size_t round() const { return round_; }
  bool explored() const { return explored_; }

  ActionVector act(Rng& rng) {
    if (pending_) throw std::logic_error("learner: act() called twice without observe");
    learner_detail::Stopwatch sw(times_.sampling);
    explored_ = false;
    if (config_.feedback == Feedback::bandit && rng.bernoulli(config_.gamma)) {
      explored_ = true;
      last_action_ = spanner_->columns()[rng.index(spanner_->reduced_dim())];
    } else {
      last_action_ = oracle_->sample(weights_, rng);
    }
    pending_ = true;
    return last_action_;
  }

  /// Dispatches on the configured feedback mode; `loss` is the full vector
  /// and only the part the mode reveals is used.
  void observe(const Eigen::VectorXd& loss) {
    switch (config_.feedback) {
      case Feedback::full: observe_full(loss); break;
      case Feedback::semi_bandit: observe_semi_bandit(loss); break;
      case Feedback::bandit: observe_bandit(last_action_.dot(loss)); break;
    }
  }

  void observe_full(const Eigen::VectorXd& loss) {
    begin_observe(Feedback::full);
    check_loss_vector(loss, oracle_->dim());
    estimate_ = config_.optimism ? Eigen::VectorXd(2.0 * loss - previous_loss_) : loss;
    previous_loss_ = loss;
    finish();
  }

  /// Only loss(j) for active j is read.
  void observe_semi_bandit(const Eigen::VectorXd& loss) {
    begin_observe(Feedback::semi_bandit);
    const auto d = static_cast<Eigen::Index>(oracle_->dim());
    if (loss.size() != d) throw std::invalid_argument("observe_semi_bandit: loss length mismatch");
    Eigen::VectorXd x;
    {
      learner_detail::Stopwatch sw(times_.kernels);
      x = oracle_->first_moments(weights_);
    }
    estimate_ = Eigen::VectorXd::Zero(d);
    for (int j : last_action_.active()) {
      const double xj = x[j];
      if (!(xj >= -1e-9 && xj <= 1.0 + 1e-9)) {
        throw std::logic_error("ix_step: first moment " + std::to_string(xj) + " at coordinate " +
                               std::to_string(j) + " is outside [0, 1]");
      }
      const double lj = loss[j];
      if (!(lj >= 0.0 && lj <= 1.0)) throw std::invalid_argument("observe_semi_bandit: loss outside [0, 1]");
      estimate_[j] = lj / (std::max(xj, 0.0) + config_.gamma);
      if (!std::isfinite(estimate_[j])) {
        throw std::logic_error("ix_step: zero marginal on a sampled coordinate with gamma = 0");
      }
    }
    finish();
  }

  void observe_bandit(double realized) {
    begin_observe(Feedback::bandit);
    if (!(realized >= 0.0) || !std::isfinite(realized)) {
      throw std::invalid_argument("observe_bandit: realized loss must be finite and >= 0");
    }
    estimate_ = bandit_estimate(last_action_, realized);
    const double value = std::abs(estimate_.dot(last_action_.bits()));
    if (config_.gamma > 0.0) {
      const double dr = static_cast<double>(spanner_->reduced_dim());
      const double c = spanner_->constant();
      const double bound = dr * dr * static_cast<double>(oracle_->max_active()) * c * c / config_.gamma;
      if (value > bound * (1.0 + 1e-9)) {
        std::ostringstream os;
        os << "geometric_hedge_step: |estimate . v| = " << value << " exceeds bound " << bound;
        throw std::logic_error(os.str());
      }
    }
    finish();
  }

  /// Mixed-policy autocorrelation in the spanner chart,
  /// (1 - gamma) Q^T Sigma(q) Q + (gamma / d_r) B B^T, at the current weights.
  Eigen::MatrixXd reduced_covariance(double pair_sign = 1.0) {
    if (!spanner_) throw std::logic_error("learner: no spanner");
    Eigen::MatrixXd sigma;
    {
      learner_detail::Stopwatch sw(times_.kernels);
      sigma = oracle_->second_moment_batch(weights_).second_moment(pair_sign);
    }
    const Eigen::MatrixXd& q = spanner_->chart();
    return (1.0 - config_.gamma) * (q.transpose() * sigma * q) + config_.gamma * exploration_;
  }

  /// L * Q Sigma_r^{-1} Q^T v at the current weights.
  Eigen::VectorXd bandit_estimate(const ActionVector& v, double realized, double pair_sign = 1.0) {
    const auto d = static_cast<Eigen::Index>(oracle_->dim());
    if (realized == 0.0) return Eigen::VectorXd::Zero(d);
    const Eigen::MatrixXd sigma = reduced_covariance(pair_sign);
    learner_detail::Stopwatch sw(times_.solves);
    const Eigen::VectorXd rhs = spanner_->reduce(v.bits());
    Eigen::VectorXd z;
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(sigma);
    if (lu.isInvertible() && lu.rcond() > 1e-14) {
      z = lu.solve(rhs);
    } else {
      ++pinv_fallbacks_;
      const Eigen::JacobiSVD<Eigen::MatrixXd> svd(sigma, Eigen::ComputeThinU | Eigen::ComputeThinV);
      const Eigen::VectorXd s = svd.singularValues();
      const double cutoff = 1e-10 * (s.size() > 0 ? s[0] : 0.0);
      Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
      for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s[i] > cutoff) inv[i] = 1.0 / s[i];
      }
      z = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose() * rhs;
      if (!z.allFinite() || s.size() == 0 || !(s[0] > 0.0)) {
        std::ostringstream os;
        os << "geometric_hedge_step: covariance solve failed (gamma = " << config_.gamma
           << ", condition estimate = " << (s.size() ? s[0] / s[s.size() - 1] : 0.0) << ")";
        throw std::runtime_error(os.str());
      }
    }
    return realized * (spanner_->chart() * z);
  }

 private:
  void begin_observe(Feedback mode) {
    if (!pending_) throw std::logic_error("learner: observe without act");
    if (mode != config_.feedback) {
      throw std::logic_error("learner: configured for " + to_string(config_.feedback) + " feedback, got " +
                             to_string(mode));
    }
  }

  void finish() {
    weights_.accumulate(estimate_);
    pending_ = false;
    ++round_;
  }

  const Oracle* oracle_;
  LearnerConfig config_;
  std::shared_ptr<const Spanner> spanner_;
  ExpWeights weights_;
  Eigen::MatrixXd exploration_;
  Eigen::VectorXd previous_loss_;
  Eigen::VectorXd estimate_;
  ActionVector last_action_;
  PhaseTimes times_;
  std::size_t pinv_fallbacks_ = 0;
  std::size_t round_ = 0;
  bool pending_ = false;
  bool explored_ = false;
};

}  // namespace polylearn
