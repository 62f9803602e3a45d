#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "polylearn/core.hpp"
#include "polylearn/rng.hpp"

namespace polylearn {

/// Leave-one-out and leave-two-out kernels of one weight vector, all relative
/// to K(C, 1). `pair` is empty for first-moment batches; its diagonal repeats
/// `single`.
struct KernelBatch {
  double log_total = 0.0;  // log K(C, 1)
  Eigen::VectorXd single;  // K(C, e_j-bar) / K(C, 1)
  Eigen::MatrixXd pair;    // K(C, e_{j,j'}-bar) / K(C, 1)

  double total() const { return std::exp(log_total); }
  Eigen::VectorXd first_moment() const { return assemble_first_moment(single); }
  Eigen::MatrixXd second_moment(double pair_sign = 1.0) const {
    return assemble_second_moment(single, pair, pair_sign);
  }
};

/// Fixed coordinate state for conditional kernels: -1 free, 0 excluded, 1 included.
using Fixing = std::span<const std::int8_t>;

/// What a learner needs from an action-set family.
template <class O>
concept KernelOracle = requires(const O& o, const ExpWeights& w, const Eigen::VectorXd& v,
                                const Mask& mask, Rng& rng, Fixing fixed) {
  { o.dim() } -> std::convertible_to<std::size_t>;
  { o.max_active() } -> std::convertible_to<std::size_t>;
  { o.kernel(v, mask) } -> std::convertible_to<double>;
  { o.first_moment_batch(w) } -> std::same_as<KernelBatch>;
  { o.second_moment_batch(w) } -> std::same_as<KernelBatch>;
  { o.first_moments(w) } -> std::convertible_to<Eigen::VectorXd>;
  { o.sample(w, rng) } -> std::same_as<ActionVector>;
  { o.best_response(v) } -> std::same_as<ActionVector>;
  { o.conditional_kernel(v, fixed) } -> std::convertible_to<double>;
};

/// Sum over explicit actions of prod_{j in v} x(j) y(j).
inline double brute_force_kernel(std::span<const ActionVector> actions,
                                 const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (actions.empty()) throw std::invalid_argument("brute_force_kernel: no actions");
  if (x.size() != y.size()) {
    throw std::invalid_argument("brute_force_kernel: x and y lengths differ");
  }
  double total = 0.0;
  for (const auto& v : actions) {
    if (static_cast<Eigen::Index>(v.dim()) != x.size()) {
      throw std::invalid_argument("brute_force_kernel: action dimension mismatch");
    }
    double prod = 1.0;
    for (int j : v.active()) prod *= x[j] * y[j];
    total += prod;
  }
  return total;
}

inline double brute_force_kernel(std::span<const ActionVector> actions,
                                 const Eigen::VectorXd& x, const Mask& mask) {
  return brute_force_kernel(actions, x, mask.apply(Eigen::VectorXd::Ones(x.size())));
}

/// p(v) proportional to exp(-eta * sum_{j in v} c(j)), normalized in log space.
inline std::vector<double> brute_force_mwu_distribution(std::span<const ActionVector> actions,
                                                        const ExpWeights& weights) {
  if (actions.empty()) {
    throw std::invalid_argument("brute_force_mwu_distribution: no actions");
  }
  const Eigen::VectorXd logw = weights.log_weights();
  std::vector<double> logp(actions.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < actions.size(); ++i) {
    double s = 0.0;
    for (int j : actions[i].active()) s += logw[j];
    logp[i] = s;
    top = std::max(top, s);
  }
  double z = 0.0;
  for (double& lp : logp) {
    lp = std::exp(lp - top);
    z += lp;
  }
  for (double& lp : logp) lp /= z;
  return logp;
}

/// Chain-rule sampler over any oracle's conditional kernel: decide coordinates
/// 0..d-1 in order, including j with probability K(fixed + {j}) / K(fixed).
/// Reference implementation; the families ship specialized samplers.
template <class O>
ActionVector generic_sample(const O& oracle, const Eigen::VectorXd& weights, Rng& rng) {
  const std::size_t d = oracle.dim();
  std::vector<std::int8_t> fixed(d, -1);
  double current = oracle.conditional_kernel(weights, fixed);
  if (!(current > 0.0)) throw std::domain_error("generic_sample: kernel is zero");
  std::vector<int> active;
  for (std::size_t j = 0; j < d; ++j) {
    fixed[j] = 1;
    const double with = oracle.conditional_kernel(weights, fixed);
    const double p = std::clamp(with / current, 0.0, 1.0);
    if (rng.uniform() < p) {
      active.push_back(static_cast<int>(j));
      current = with;
    } else {
      fixed[j] = 0;
      current = oracle.conditional_kernel(weights, fixed);
    }
  }
  return ActionVector(d, std::move(active));
}

}  // namespace polylearn
