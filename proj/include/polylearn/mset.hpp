#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "polylearn/core.hpp"
#include "polylearn/oracle.hpp"
#include "polylearn/rng.hpp"
#include "polylearn/truncated_poly.hpp"

namespace polylearn {

/// Selections of exactly m out of d items.
struct MSetSpec {
  int d = 0;
  int m = 0;

  void validate() const {
    if (d < 1) throw std::invalid_argument("m-set: d must be positive");
    if (m < 1 || m > d) {
      throw std::invalid_argument("m-set: need 1 <= m <= d, got m=" + std::to_string(m) +
                                  ", d=" + std::to_string(d));
    }
  }
};

namespace mset_detail {

/// Weights shifted so the heaviest m-subset has weight near one, then clamped
/// to a safe exponent range. The shift multiplies every subset by the same
/// constant, so no ratio changes.
inline std::vector<double> balanced_weights(const Eigen::VectorXd& log_weights, int m,
                                            double* log_shift = nullptr) {
  std::vector<double> sorted(log_weights.data(), log_weights.data() + log_weights.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double shift = 0.0;
  for (int i = 0; i < m; ++i) shift += sorted[static_cast<std::size_t>(i)];
  shift /= m;
  if (log_shift) *log_shift = shift * m;
  std::vector<double> c(static_cast<std::size_t>(log_weights.size()));
  for (std::size_t j = 0; j < c.size(); ++j) {
    c[j] = std::exp(std::clamp(log_weights[static_cast<Eigen::Index>(j)] - shift, -600.0, 600.0));
  }
  return c;
}

inline double coefficient_log(const TruncatedPoly& p, std::size_t y) {
  const double v = p[y];
  return v > 0.0 ? std::log(v) + p.log_scale() : -std::numeric_limits<double>::infinity();
}

/// log of (a * b)(t).
inline double convolution_log(const TruncatedPoly& a, const TruncatedPoly& b, int t) {
  if (t < 0) return -std::numeric_limits<double>::infinity();
  double s = 0.0;
  for (int y = 0; y <= t; ++y) s += a[static_cast<std::size_t>(y)] * b[static_cast<std::size_t>(t - y)];
  return s > 0.0 ? std::log(s) + a.log_scale() + b.log_scale()
                 : -std::numeric_limits<double>::infinity();
}

}  // namespace mset_detail

struct MSetMoments {
  Eigen::VectorXd first;
  Eigen::MatrixXd second;
};

class MSetOracle {
 public:
  explicit MSetOracle(MSetSpec spec) : spec_(spec) { spec_.validate(); }

  const MSetSpec& spec() const { return spec_; }
  std::size_t dim() const { return static_cast<std::size_t>(spec_.d); }
  std::size_t max_active() const { return static_cast<std::size_t>(spec_.m); }

  /// f_d(m) of the masked weights: the elementary symmetric polynomial e_m.
  double kernel(const Eigen::VectorXd& weights, const Mask& mask) const {
    check_positive_weights(weights, dim(), "mset_kernel");
    const Eigen::VectorXd c = mask.apply(weights);
    TruncatedPoly f = TruncatedPoly::one(static_cast<std::size_t>(spec_.m));
    for (int h = 0; h < spec_.d; ++h) f.times_linear(c[h]);
    return f[static_cast<std::size_t>(spec_.m)] * std::exp(f.log_scale());
  }

  KernelBatch first_moment_batch(const Eigen::VectorXd& weights) const {
    return batch(log_of(weights), false).kernels;
  }
  KernelBatch first_moment_batch(const ExpWeights& w) const {
    return batch(w.log_weights(), false).kernels;
  }
  KernelBatch second_moment_batch(const Eigen::VectorXd& weights) const {
    return batch(log_of(weights), true).kernels;
  }
  KernelBatch second_moment_batch(const ExpWeights& w) const {
    return batch(w.log_weights(), true).kernels;
  }

  /// First and second moments read directly off the interval partition functions.
  MSetMoments moments(const Eigen::VectorXd& weights) const {
    return batch(log_of(weights), true).moments;
  }
  MSetMoments moments(const ExpWeights& w) const { return batch(w.log_weights(), true).moments; }

  Eigen::VectorXd first_moments(const ExpWeights& w) const {
    return batch(w.log_weights(), false).moments.first;
  }

  ActionVector sample(const Eigen::VectorXd& weights, Rng& rng) const {
    return sample_log(log_of(weights), rng);
  }
  ActionVector sample(const ExpWeights& w, Rng& rng) const { return sample_log(w.log_weights(), rng); }

  /// The m least-loss items, ties to the lower index.
  ActionVector best_response(const Eigen::VectorXd& losses) const {
    if (losses.size() != spec_.d) throw std::invalid_argument("mset_best_response: length mismatch");
    std::vector<int> order(dim());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return losses[a] < losses[b]; });
    order.resize(max_active());
    return ActionVector(dim(), std::move(order));
  }

  double conditional_kernel(const Eigen::VectorXd& weights, Fixing fixed) const {
    double forced = 1.0;
    int need = spec_.m;
    std::vector<double> e(static_cast<std::size_t>(spec_.m) + 1, 0.0);
    e[0] = 1.0;
    for (int h = 0; h < spec_.d; ++h) {
      if (fixed[static_cast<std::size_t>(h)] == 1) {
        forced *= weights[h];
        --need;
      } else if (fixed[static_cast<std::size_t>(h)] == -1) {
        for (std::size_t y = e.size(); y-- > 1;) e[y] += weights[h] * e[y - 1];
      }
    }
    if (need < 0) return 0.0;
    return forced * e[static_cast<std::size_t>(need)];
  }

 private:
  struct Batch {
    KernelBatch kernels;
    MSetMoments moments;
  };

  Eigen::VectorXd log_of(const Eigen::VectorXd& weights) const {
    check_positive_weights(weights, dim(), "m-set oracle");
    return weights.array().log().matrix();
  }

  /// Prefix and suffix partition functions over the balanced weights.
  void partitions(const std::vector<double>& c, std::vector<TruncatedPoly>& pre,
                  std::vector<TruncatedPoly>& suf) const {
    const auto d = static_cast<std::size_t>(spec_.d);
    const auto m = static_cast<std::size_t>(spec_.m);
    pre.assign(d + 1, TruncatedPoly::one(m));
    suf.assign(d + 1, TruncatedPoly::one(m));
    for (std::size_t h = 0; h < d; ++h) {
      pre[h + 1] = pre[h];
      pre[h + 1].times_linear(c[h]);
    }
    for (std::size_t h = d; h-- > 0;) {
      suf[h] = suf[h + 1];
      suf[h].times_linear(c[h]);
    }
  }

  Batch batch(const Eigen::VectorXd& log_weights, bool with_pairs) const {
    const int d = spec_.d;
    const int m = spec_.m;
    double log_shift = 0.0;
    const std::vector<double> c = mset_detail::balanced_weights(log_weights, m, &log_shift);
    std::vector<TruncatedPoly> pre, suf;
    partitions(c, pre, suf);
    const double log_k = mset_detail::coefficient_log(pre[static_cast<std::size_t>(d)],
                                                      static_cast<std::size_t>(m));
    if (!std::isfinite(log_k)) throw std::domain_error("m-set kernel underflow");

    Batch out;
    out.kernels.log_total = log_k + log_shift;
    out.kernels.single.resize(d);
    out.moments.first.resize(d);
    for (int h = 0; h < d; ++h) {
      const auto& a = pre[static_cast<std::size_t>(h)];
      const auto& b = suf[static_cast<std::size_t>(h) + 1];
      out.kernels.single[h] = std::exp(mset_detail::convolution_log(a, b, m) - log_k);
      out.moments.first[h] =
          c[static_cast<std::size_t>(h)] * std::exp(mset_detail::convolution_log(a, b, m - 1) - log_k);
    }
    if (!with_pairs) return out;

    out.kernels.pair.resize(d, d);
    out.moments.second.resize(d, d);
    for (int h = 0; h < d; ++h) {
      out.kernels.pair(h, h) = out.kernels.single[h];
      out.moments.second(h, h) = out.moments.first[h];
      TruncatedPoly g = pre[static_cast<std::size_t>(h)];
      for (int hp = h + 1; hp < d; ++hp) {
        const auto& b = suf[static_cast<std::size_t>(hp) + 1];
        const double kp = std::exp(mset_detail::convolution_log(g, b, m) - log_k);
        const double sp = c[static_cast<std::size_t>(h)] * c[static_cast<std::size_t>(hp)] *
                          std::exp(mset_detail::convolution_log(g, b, m - 2) - log_k);
        out.kernels.pair(h, hp) = out.kernels.pair(hp, h) = kp;
        out.moments.second(h, hp) = out.moments.second(hp, h) = sp;
        g.times_linear(c[static_cast<std::size_t>(hp)]);
      }
    }
    return out;
  }

  /// Items decided from the last to the first; item h is included with
  /// probability c_h f_h(r-1) / f_{h+1}(r) given r still to choose.
  ActionVector sample_log(const Eigen::VectorXd& log_weights, Rng& rng) const {
    const std::vector<double> c = mset_detail::balanced_weights(log_weights, spec_.m);
    std::vector<TruncatedPoly> pre, suf;
    partitions(c, pre, suf);
    std::vector<int> active;
    int r = spec_.m;
    for (int h = spec_.d - 1; h >= 0; --h) {
      if (r == 0) break;
      double p;
      if (r == h + 1) {
        p = 1.0;
      } else {
        const double num = mset_detail::coefficient_log(pre[static_cast<std::size_t>(h)],
                                                        static_cast<std::size_t>(r - 1));
        const double den = mset_detail::coefficient_log(pre[static_cast<std::size_t>(h) + 1],
                                                        static_cast<std::size_t>(r));
        p = std::clamp(c[static_cast<std::size_t>(h)] * std::exp(num - den), 0.0, 1.0);
      }
      if (rng.uniform() < p) {
        active.push_back(h);
        --r;
      }
    }
    return ActionVector(dim(), std::move(active));
  }

  MSetSpec spec_;
};

}  // namespace polylearn
