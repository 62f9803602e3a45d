#pragma once

#include <algorithm>
#include <optional>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "polylearn/core.hpp"
#include "polylearn/oracle.hpp"
#include "polylearn/rng.hpp"
#include "polylearn/truncated_poly.hpp"

namespace polylearn {

/// n soldiers over k battlefields; coordinate (h, s) means s soldiers on h.
struct BlottoSpec {
  int n = 0;
  int k = 1;

  void validate() const {
    if (n < 0) throw std::invalid_argument("blotto: n must be nonnegative");
    if (k < 1) throw std::invalid_argument("blotto: k must be positive");
  }
  int dim() const { return (n + 1) * k; }
  int index(int h, int s) const { return h * (n + 1) + s; }
  int battlefield(int j) const { return j / (n + 1); }
  int soldiers(int j) const { return j % (n + 1); }

  /// Incidence vector of a soldier allocation (one count per battlefield).
  ActionVector action(const std::vector<int>& allocation) const {
    if (static_cast<int>(allocation.size()) != k) {
      throw std::invalid_argument("blotto: allocation has wrong battlefield count");
    }
    int total = 0;
    std::vector<int> active;
    for (int h = 0; h < k; ++h) {
      if (allocation[static_cast<std::size_t>(h)] < 0) {
        throw std::invalid_argument("blotto: negative allocation");
      }
      total += allocation[static_cast<std::size_t>(h)];
      if (allocation[static_cast<std::size_t>(h)] > n) break;
      active.push_back(index(h, allocation[static_cast<std::size_t>(h)]));
    }
    if (total != n) {
      throw std::invalid_argument("blotto: allocation sums to " + std::to_string(total) +
                                  ", expected " + std::to_string(n));
    }
    return ActionVector(static_cast<std::size_t>(dim()), std::move(active));
  }

  std::vector<int> allocation(const ActionVector& v) const {
    if (v.count() != static_cast<std::size_t>(k)) {
      throw std::invalid_argument("blotto: action must have one coordinate per battlefield");
    }
    std::vector<int> out(static_cast<std::size_t>(k), -1);
    int total = 0;
    for (int j : v.active()) {
      const int h = battlefield(j);
      if (out[static_cast<std::size_t>(h)] != -1) {
        throw std::invalid_argument("blotto: two counts on one battlefield");
      }
      out[static_cast<std::size_t>(h)] = soldiers(j);
      total += soldiers(j);
    }
    if (total != n) throw std::invalid_argument("blotto: action does not place all soldiers");
    return out;
  }
};

class BlottoOracle {
 public:
  explicit BlottoOracle(BlottoSpec spec,
                        ConvolutionMethod method = ConvolutionMethod::automatic)
      : spec_(spec), method_(method) {
    spec_.validate();
  }

  const BlottoSpec& spec() const { return spec_; }
  std::size_t dim() const { return static_cast<std::size_t>(spec_.dim()); }
  std::size_t max_active() const { return static_cast<std::size_t>(spec_.k); }
  ConvolutionMethod method() const { return method_; }

  /// Coefficient of z^n in prod_h sum_s C[h,s] mask[h,s] z^s, as a log value
  /// (-inf when the mask leaves no allocation).
  double log_kernel(const Eigen::VectorXd& weights, const Mask& mask,
                    ConvolutionMethod method) const {
    check_positive_weights(weights, dim(), "blotto_kernel");
    const Eigen::VectorXd c = mask.apply(weights);
    const auto deg = static_cast<std::size_t>(spec_.n);
    TruncatedPoly prod = TruncatedPoly::one(deg);
    for (int h = 0; h < spec_.k; ++h) prod = prod.times(block(c, h), method);
    const double top = prod[deg];
    return top > 0.0 ? std::log(top) + prod.log_scale()
                     : -std::numeric_limits<double>::infinity();
  }

  double kernel(const Eigen::VectorXd& weights, const Mask& mask) const {
    return std::exp(log_kernel(weights, mask, method_));
  }
  double kernel(const Eigen::VectorXd& weights, const Mask& mask, ConvolutionMethod method) const {
    return std::exp(log_kernel(weights, mask, method));
  }

  KernelBatch first_moment_batch(const Eigen::VectorXd& weights) const {
    check_positive_weights(weights, dim(), "blotto_first_moment_batch");
    return Partials(*this, weights).first_moments();
  }
  KernelBatch first_moment_batch(const ExpWeights& w) const {
    KernelBatch b = first_moment_batch(w.weights());
    b.log_total += spec_.k * w.log_scale();
    return b;
  }

  KernelBatch second_moment_batch(const Eigen::VectorXd& weights) const {
    check_positive_weights(weights, dim(), "blotto_second_moment_batch");
    return Partials(*this, weights, ConvolutionMethod::naive).second_moments();
  }
  KernelBatch second_moment_batch(const ExpWeights& w) const {
    KernelBatch b = second_moment_batch(w.weights());
    b.log_total += spec_.k * w.log_scale();
    return b;
  }

  Eigen::VectorXd first_moments(const ExpWeights& w) const {
    return Partials(*this, w.weights()).marginals();
  }
  Eigen::VectorXd first_moments(const Eigen::VectorXd& weights) const {
    check_positive_weights(weights, dim(), "blotto first moments");
    return Partials(*this, weights).marginals();
  }

  /// Co-occurrence probabilities through interval partition functions:
  /// Pr[(h,s),(h',s')] = C[h,s] C[h',s'] (f_{<h} * (f_{h..h'} * f_{>h'}))(n-s-s') / K.
  /// Coded independently of the batch path, with plain quadratic convolutions.
  Eigen::MatrixXd second_moment_by_intervals(const Eigen::VectorXd& weights) const {
    check_positive_weights(weights, dim(), "blotto interval second moment");
    const int n = spec_.n, k = spec_.k;
    const auto len = static_cast<std::size_t>(n) + 1;
    auto interval = [&](int first, int last) {
      std::vector<double> f(len, 0.0);
      f[0] = 1.0;
      for (int h = first; h <= last; ++h) {
        std::vector<double> g(len, 0.0);
        for (int y = 0; y <= n; ++y) {
          for (int s = 0; s <= y; ++s) g[static_cast<std::size_t>(y)] += weights[spec_.index(h, s)] * f[static_cast<std::size_t>(y - s)];
        }
        f = std::move(g);
      }
      return f;
    };
    auto at = [&](const std::vector<double>& a, const std::vector<double>& b, int t) {
      double s = 0.0;
      for (int y = 0; y <= t; ++y) s += a[static_cast<std::size_t>(y)] * b[static_cast<std::size_t>(t - y)];
      return s;
    };
    auto conv = [&](const std::vector<double>& a, const std::vector<double>& b) {
      std::vector<double> out(len, 0.0);
      for (int t = 0; t <= n; ++t) out[static_cast<std::size_t>(t)] = at(a, b, t);
      return out;
    };
    const double total = interval(0, k - 1)[len - 1];
    const auto d = static_cast<Eigen::Index>(dim());
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(d, d);
    for (int h = 0; h < k; ++h) {
      const std::vector<double> left = interval(0, h - 1);
      const std::vector<double> rest = interval(h + 1, k - 1);
      for (int s = 0; s <= n; ++s) {
        const int j = spec_.index(h, s);
        sigma(j, j) = weights[j] * at(left, rest, n - s) / total;
      }
      for (int hp = h + 1; hp < k; ++hp) {
        const std::vector<double> inner = conv(interval(h + 1, hp - 1), interval(hp + 1, k - 1));
        for (int s = 0; s <= n; ++s) {
          for (int sp = 0; s + sp <= n; ++sp) {
            const int j = spec_.index(h, s), jp = spec_.index(hp, sp);
            const double p = weights[j] * weights[jp] * at(left, inner, n - s - sp) / total;
            sigma(j, jp) = sigma(jp, j) = p;
          }
        }
      }
    }
    return sigma;
  }

  ActionVector sample(const Eigen::VectorXd& weights, Rng& rng) const {
    check_positive_weights(weights, dim(), "blotto_sample");
    return sample_impl(weights, rng);
  }
  ActionVector sample(const ExpWeights& w, Rng& rng) const { return sample_impl(w.weights(), rng); }

  /// Maximum-reward allocation by dynamic programming over the layered graph
  /// whose layer-h node i means i soldiers placed on battlefields before h.
  /// Ties go to fewer soldiers on earlier battlefields.
  ActionVector best_response_reward(const Eigen::VectorXd& reward) const {
    if (reward.size() != spec_.dim()) {
      throw std::invalid_argument("blotto_best_response: reward length mismatch");
    }
    const int n = spec_.n, k = spec_.k;
    const double neg = -std::numeric_limits<double>::infinity();
    // value[h][r]: best reward of battlefields h..k-1 using exactly r soldiers.
    std::vector<std::vector<double>> value(static_cast<std::size_t>(k) + 1,
                                           std::vector<double>(static_cast<std::size_t>(n) + 1, neg));
    value[static_cast<std::size_t>(k)][0] = 0.0;
    for (int h = k - 1; h >= 0; --h) {
      for (int r = 0; r <= n; ++r) {
        double best = neg;
        for (int s = 0; s <= r; ++s) {
          const double tail = value[static_cast<std::size_t>(h) + 1][static_cast<std::size_t>(r - s)];
          if (tail == neg) continue;
          best = std::max(best, reward[spec_.index(h, s)] + tail);
        }
        value[static_cast<std::size_t>(h)][static_cast<std::size_t>(r)] = best;
      }
    }
    std::vector<int> alloc(static_cast<std::size_t>(k), 0);
    int r = n;
    for (int h = 0; h < k; ++h) {
      const double target = value[static_cast<std::size_t>(h)][static_cast<std::size_t>(r)];
      for (int s = 0; s <= r; ++s) {
        const double tail = value[static_cast<std::size_t>(h) + 1][static_cast<std::size_t>(r - s)];
        if (tail != neg && reward[spec_.index(h, s)] + tail == target) {
          alloc[static_cast<std::size_t>(h)] = s;
          break;
        }
      }
      r -= alloc[static_cast<std::size_t>(h)];
    }
    return spec_.action(alloc);
  }

  /// Loss-minimizing allocation (the reward is the negated loss).
  ActionVector best_response(const Eigen::VectorXd& losses) const {
    return best_response_reward(-losses);
  }

  double conditional_kernel(const Eigen::VectorXd& weights, Fixing fixed) const {
    const int n = spec_.n;
    std::vector<double> f(static_cast<std::size_t>(n) + 1, 0.0);
    f[0] = 1.0;
    for (int h = 0; h < spec_.k; ++h) {
      std::vector<double> b(static_cast<std::size_t>(n) + 1, 0.0);
      int forced = -1;
      for (int s = 0; s <= n; ++s) {
        if (fixed[static_cast<std::size_t>(spec_.index(h, s))] == 1) {
          if (forced != -1) return 0.0;
          forced = s;
        }
      }
      for (int s = 0; s <= n; ++s) {
        const int j = spec_.index(h, s);
        const bool allowed = forced == -1 ? fixed[static_cast<std::size_t>(j)] != 0 : s == forced;
        if (allowed) b[static_cast<std::size_t>(s)] = weights[j];
      }
      f = convolve(f, b, static_cast<std::size_t>(n) + 1, ConvolutionMethod::naive);
    }
    return f[static_cast<std::size_t>(n)];
  }

 private:
  TruncatedPoly block(const Eigen::VectorXd& c, int h) const {
    std::vector<double> coeffs(static_cast<std::size_t>(spec_.n) + 1);
    for (int s = 0; s <= spec_.n; ++s) coeffs[static_cast<std::size_t>(s)] = c[spec_.index(h, s)];
    TruncatedPoly p(std::move(coeffs));
    p.normalize();
    return p;
  }

  /// Left products L[h] = prod_{i<h} b_i and right products R[h] = prod_{i>=h} b_i.
  class Partials {
   public:
    // The second-moment batch is quadratic per block pair anyway, so it runs
    // every product directly.
    Partials(const BlottoOracle& o, const Eigen::VectorXd& c, std::optional<ConvolutionMethod> method = std::nullopt)
        : o_(o), c_(c), method_(method.value_or(o.method_)) {
      const int k = o.spec_.k;
      const auto deg = static_cast<std::size_t>(o.spec_.n);
      blocks_.reserve(static_cast<std::size_t>(k));
      for (int h = 0; h < k; ++h) blocks_.push_back(o.block(c, h));
      left_.assign(static_cast<std::size_t>(k) + 1, TruncatedPoly::one(deg));
      right_.assign(static_cast<std::size_t>(k) + 1, TruncatedPoly::one(deg));
      for (std::size_t h = 0; h < static_cast<std::size_t>(k); ++h) {
        left_[h + 1] = left_[h].times(blocks_[h], method_);
      }
      for (std::size_t h = static_cast<std::size_t>(k); h-- > 0;) {
        right_[h] = blocks_[h].times(right_[h + 1], method_);
      }
      const TruncatedPoly& all = left_.back();
      log_total_ = std::log(all[deg]) + all.log_scale();
      if (!std::isfinite(log_total_)) throw std::domain_error("blotto kernel underflow");
    }

    /// Product of every block except h.
    TruncatedPoly without(int h) const {
      return left_[static_cast<std::size_t>(h)].times(right_[static_cast<std::size_t>(h) + 1], method_);
    }

    /// Per-battlefield W_s = C[h,s] [P_{-h}]_{n-s}, relative to K.
    std::vector<double> block_terms(const TruncatedPoly& without_h, int h) const {
      const int n = o_.spec_.n;
      std::vector<double> w(static_cast<std::size_t>(n) + 1);
      double total = 0.0;
      for (int s = 0; s <= n; ++s) {
        w[static_cast<std::size_t>(s)] = c_[o_.spec_.index(h, s)] * without_h[static_cast<std::size_t>(n - s)];
        total += w[static_cast<std::size_t>(s)];
      }
      for (double& x : w) x /= total;
      return w;
    }

    Eigen::VectorXd marginals() const {
      Eigen::VectorXd x(static_cast<Eigen::Index>(o_.dim()));
      for (int h = 0; h < o_.spec_.k; ++h) {
        const std::vector<double> w = block_terms(without(h), h);
        for (int s = 0; s <= o_.spec_.n; ++s) x[o_.spec_.index(h, s)] = w[static_cast<std::size_t>(s)];
      }
      return x;
    }

    KernelBatch first_moments() const {
      KernelBatch out;
      out.log_total = log_total_;
      out.single.resize(static_cast<Eigen::Index>(o_.dim()));
      for (int h = 0; h < o_.spec_.k; ++h) fill_single(out.single, block_terms(without(h), h), h);
      return out;
    }

    KernelBatch second_moments() const {
      const BlottoSpec& sp = o_.spec_;
      const int n = sp.n, k = sp.k;
      const auto d = static_cast<Eigen::Index>(o_.dim());
      KernelBatch out;
      out.log_total = log_total_;
      out.single.resize(d);
      out.pair.resize(d, d);

      // alpha[h][y] = [P_{-h}]_y / K so that C[h,s] alpha[h][n-s] is the marginal.
      std::vector<std::vector<double>> alpha(static_cast<std::size_t>(k));
      for (int h = 0; h < k; ++h) {
        const TruncatedPoly p = without(h);
        const double scale = std::exp(p.log_scale() - log_total_);
        auto& a = alpha[static_cast<std::size_t>(h)];
        a.resize(static_cast<std::size_t>(n) + 1);
        for (int y = 0; y <= n; ++y) a[static_cast<std::size_t>(y)] = p[static_cast<std::size_t>(y)] * scale;
        fill_single(out.single, block_terms(p, h), h);
      }

      // Reversed copies so every column is a forward stream:
      // ra[h][t] = alpha[h][n-t] and, for h < h', rb[h][h'][u] = [P_{-h,-h'}]_{n-u} / K.
      const auto len = static_cast<std::size_t>(n) + 1;
      const auto kk = static_cast<std::size_t>(k);
      std::vector<double> ra(kk * len);
      std::vector<double> rb(kk * kk * len);
      for (std::size_t h = 0; h < kk; ++h) {
        for (std::size_t t = 0; t < len; ++t) ra[h * len + t] = alpha[h][len - 1 - t];
      }
      for (std::size_t h = 0; h < kk; ++h) {
        // Deflate block h out of P_{-h'}.
        TruncatedPoly running = left_[h];
        for (std::size_t hp = h + 1; hp < kk; ++hp) {
          const TruncatedPoly both = running.times(right_[hp + 1], method_);
          const double scale = std::exp(both.log_scale() - log_total_);
          double* r = &rb[(h * kk + hp) * len];
          for (std::size_t u = 0; u < len; ++u) r[u] = both[len - 1 - u] * scale;
          running = running.times(blocks_[hp], method_);
        }
      }

      // One column at a time, top to bottom, so the matrix is written in
      // memory order. Each off-diagonal block uses the same expression from
      // either side, which keeps the result exactly symmetric.
      const double* c = c_.data();
      const double* single = out.single.data();
      for (std::size_t a = 0; a < kk; ++a) {
        const double* ra_a = &ra[a * len];
        for (int s = 0; s <= n; ++s) {
          const Eigen::Index j = sp.index(static_cast<int>(a), s);
          const double cj = c[j];
          const double sj = single[j];
          const int reach = n - s;
          double* col = &out.pair(0, j);
          for (std::size_t b = 0; b < kk; ++b) {
            double* seg = col + b * len;
            const double* cb = c + b * len;
            const double* ra_b = &ra[b * len];
            if (b == a) {
              // Same battlefield: the two coordinates never co-occur.
              for (std::size_t t = 0; t < len; ++t) seg[t] = sj - cb[t] * ra_b[t];
              seg[s] = sj;
            } else if (b > a) {
              const double* rbs = &rb[(a * kk + b) * len] + s;
              for (int t = 0; t <= reach; ++t) seg[t] = sj - cb[t] * (ra_b[t] - cj * rbs[t]);
              for (int t = reach + 1; t <= n; ++t) seg[t] = sj - cb[t] * ra_b[t];
            } else {
              const double* sb = single + b * len;
              const double* rbs = &rb[(b * kk + a) * len] + s;
              const double at = ra_a[s];
              for (int t = 0; t <= reach; ++t) seg[t] = sb[t] - cj * (at - cb[t] * rbs[t]);
              for (int t = reach + 1; t <= n; ++t) seg[t] = sb[t] - cj * at;
            }
          }
        }
      }
      return out;
    }

   private:
    /// K(e_{h,s}-bar) / K as the sum of the other terms of the block.
    void fill_single(Eigen::VectorXd& single, const std::vector<double>& w, int h) const {
      const int n = o_.spec_.n;
      std::vector<double> prefix(static_cast<std::size_t>(n) + 2, 0.0);
      for (int s = 0; s <= n; ++s) prefix[static_cast<std::size_t>(s) + 1] = prefix[static_cast<std::size_t>(s)] + w[static_cast<std::size_t>(s)];
      double suffix = 0.0;
      for (int s = n; s >= 0; --s) {
        single[o_.spec_.index(h, s)] = prefix[static_cast<std::size_t>(s)] + suffix;
        suffix += w[static_cast<std::size_t>(s)];
      }
    }

    const BlottoOracle& o_;
    const Eigen::VectorXd& c_;
    ConvolutionMethod method_;
    std::vector<TruncatedPoly> blocks_;
    std::vector<TruncatedPoly> left_;
    std::vector<TruncatedPoly> right_;
    double log_total_ = 0.0;
  };

  /// Last battlefield first from C[k-1,s] f_{k-1}(n-s), then downward with the
  /// remaining soldiers; f_h is the prefix partition function (f_0 = delta_0).
  ActionVector sample_impl(const Eigen::VectorXd& c, Rng& rng) const {
    const int n = spec_.n, k = spec_.k;
    const auto deg = static_cast<std::size_t>(n);
    std::vector<TruncatedPoly> prefix(static_cast<std::size_t>(k), TruncatedPoly::one(deg));
    for (int h = 1; h < k; ++h) {
      prefix[static_cast<std::size_t>(h)] = prefix[static_cast<std::size_t>(h) - 1].times(block(c, h - 1), method_);
    }
    std::vector<int> alloc(static_cast<std::size_t>(k), 0);
    std::vector<double> probs(static_cast<std::size_t>(n) + 1);
    int remaining = n;
    for (int h = k - 1; h >= 0; --h) {
      const TruncatedPoly& f = prefix[static_cast<std::size_t>(h)];
      for (int s = 0; s <= n; ++s) {
        probs[static_cast<std::size_t>(s)] = s <= remaining ? c[spec_.index(h, s)] * f[static_cast<std::size_t>(remaining - s)] : 0.0;
      }
      const int s = static_cast<int>(rng.categorical(probs));
      alloc[static_cast<std::size_t>(h)] = s;
      remaining -= s;
    }
    return spec_.action(alloc);
  }

  BlottoSpec spec_;
  ConvolutionMethod method_;
};

}  // namespace polylearn
