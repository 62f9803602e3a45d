#pragma once

// Brute-force equivalence suite: every oracle against explicit enumeration.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <Eigen/Dense>

#include "polylearn/blotto.hpp"
#include "polylearn/dag.hpp"
#include "polylearn/game.hpp"
#include "polylearn/learners.hpp"
#include "polylearn/matroid.hpp"
#include "polylearn/mset.hpp"
#include "polylearn/spanner.hpp"
#include "polylearn/testing/enumerate.hpp"

namespace polylearn::verify {

enum class Scale { small, medium };

inline Scale parse_scale(const std::string& s) {
  if (s == "small") return Scale::small;
  if (s == "medium") return Scale::medium;
  throw std::invalid_argument("unknown scale '" + s + "' (expected small or medium)");
}

struct Options {
  Scale scale = Scale::small;
  std::uint64_t seed = 1;
  std::size_t instances = 0;  // per family; 0 picks 10 (small) or 50 (medium)
  long sampler_draws = 100000;
  std::size_t certificate_samples = 10000;
  double pair_sign = 1.0;  // -1 corrupts second-moment assembly
};

struct CheckResult {
  std::string name;
  std::size_t instances = 0;
  double max_error = 0.0;  // relative, or the statistic named by `metric`
  double tolerance = 0.0;
  std::string metric = "rel";
  bool passed = true;
  double seconds = 0.0;
};

/// Relative error with an absolute floor: a value passes when err <= rel,
/// which is the same as |a - b| <= max(rel |b|, floor).
class ErrorTracker {
 public:
  explicit ErrorTracker(double rel) : rel_(rel) {}

  void compare(double a, double b, double floor) {
    const double scale = std::max(std::abs(b), floor / rel_);
    const double err = scale > 0.0 ? std::abs(a - b) / scale : std::abs(a - b);
    if (!(err <= rel_)) ok_ = false;
    if (err > worst_ || std::isnan(err)) worst_ = std::isnan(err) ? INFINITY : err;
  }

  double worst() const { return worst_; }
  bool ok() const { return ok_; }
  double rel() const { return rel_; }

 private:
  double rel_;
  double worst_ = 0.0;
  bool ok_ = true;
};

/// Random instances inside the enumeration limits.
struct Instances {
  std::vector<BlottoSpec> blotto;
  std::vector<WeightedGraph> graphs;
  std::vector<DagSpec> dags;
  std::vector<MSetSpec> msets;
};

inline std::size_t count_paths(const DagSpec& dag) { return testing::enumerate_paths(dag).size(); }

inline Instances make_instances(Scale scale, std::size_t count, Rng& rng) {
  const bool medium = scale == Scale::medium;
  const int max_n = medium ? 6 : 4;
  const int max_k = medium ? 4 : 3;
  const int max_vertices = medium ? 7 : 5;
  const int max_nodes = medium ? 10 : 7;
  const int max_d = medium ? 12 : 8;
  const std::size_t max_trees = 5000;
  const std::size_t max_paths = medium ? 200 : 60;
  auto pick = [&rng](int lo, int hi) { return lo + static_cast<int>(rng.index(static_cast<std::size_t>(hi - lo + 1))); };

  Instances out;
  // The largest shapes first so every scale covers its stated extremes.
  out.blotto.push_back({max_n, max_k});
  out.msets.push_back({max_d, max_d / 2});
  while (out.blotto.size() < count) out.blotto.push_back({pick(1, max_n), pick(2, max_k)});
  while (out.msets.size() < count) {
    const int d = pick(2, max_d);
    out.msets.push_back({d, pick(1, d)});
  }
  bool largest = true;
  while (out.graphs.size() < count) {
    const int v = largest ? max_vertices : pick(3, max_vertices);
    const int e = pick(v - 1, std::min(v * (v - 1) / 2, 2 * v));
    WeightedGraph g = testing::random_graph(v, e, rng);
    if (testing::enumerate_trees(g).size() > max_trees) continue;
    out.graphs.push_back(std::move(g));
    largest = false;
  }
  largest = true;
  while (out.dags.size() < count) {
    const int n = largest ? max_nodes : pick(3, max_nodes);
    const int e = pick(n - 1, std::min(n * (n - 1) / 2, 2 * n));
    DagSpec dag = testing::random_dag(n, e, rng);
    if (count_paths(dag) > max_paths) continue;
    out.dags.push_back(std::move(dag));
    largest = false;
  }
  return out;
}

namespace detail {

inline std::vector<ActionVector> enumerate(const BlottoSpec& s) { return testing::enumerate_blotto(s); }
inline std::vector<ActionVector> enumerate(const WeightedGraph& g) { return testing::enumerate_trees(g); }
inline std::vector<ActionVector> enumerate(const DagSpec& d) { return testing::enumerate_paths(d); }
inline std::vector<ActionVector> enumerate(const MSetSpec& s) { return testing::enumerate_msets(s); }

inline BlottoOracle oracle_of(const BlottoSpec& s) { return BlottoOracle(s); }
inline MatroidOracle oracle_of(const WeightedGraph& g) { return MatroidOracle(g); }
inline DagOracle oracle_of(const DagSpec& d) { return DagOracle(d); }
inline MSetOracle oracle_of(const MSetSpec& s) { return MSetOracle(s); }

/// Kernels for the all-ones mask and every leave-one-out and leave-two-out
/// mask, both directly and through the batched routes.
template <class Oracle>
void kernels(const Oracle& o, const std::vector<ActionVector>& acts, const Eigen::VectorXd& c, ErrorTracker& t) {
  const auto d = static_cast<int>(o.dim());
  const double total = brute_force_kernel(acts, c, Mask::none());
  const double floor = 1e-12 * total;
  t.compare(o.kernel(c, Mask::none()), total, floor);
  const KernelBatch b = o.second_moment_batch(c);
  t.compare(b.total(), total, floor);
  for (int j = 0; j < d; ++j) {
    const double want = brute_force_kernel(acts, c, Mask::one(j));
    t.compare(o.kernel(c, Mask::one(j)), want, floor);
    t.compare(b.single[j] * total, want, floor);
    for (int jp = j + 1; jp < d; ++jp) {
      const double pair = brute_force_kernel(acts, c, Mask::pair(j, jp));
      t.compare(o.kernel(c, Mask::pair(j, jp)), pair, floor);
      t.compare(b.pair(j, jp) * total, pair, floor);
    }
  }
}

template <class Oracle>
void first_moments(const Oracle& o, const std::vector<ActionVector>& acts, const Eigen::VectorXd& c,
                   ErrorTracker& t) {
  const Eigen::VectorXd want = testing::enumerated_first_moment(acts, testing::product_distribution(acts, c));
  const Eigen::VectorXd got = o.first_moment_batch(c).first_moment();
  for (Eigen::Index j = 0; j < want.size(); ++j) t.compare(got[j], want[j], 1e-12);
}

inline void compare_matrices(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want, ErrorTracker& t) {
  for (Eigen::Index i = 0; i < want.rows(); ++i) {
    for (Eigen::Index j = 0; j < want.cols(); ++j) t.compare(got(i, j), want(i, j), 1e-12);
  }
}

template <class Oracle>
void second_moments(const Oracle& o, const std::vector<ActionVector>& acts, const Eigen::VectorXd& c,
                    double pair_sign, ErrorTracker& t) {
  const Eigen::MatrixXd want = testing::enumerated_second_moment(acts, testing::product_distribution(acts, c));
  compare_matrices(o.second_moment_batch(c).second_moment(pair_sign), want, t);
}

template <class Oracle>
double sampler_tv(const Oracle& o, const std::vector<ActionVector>& acts, const Eigen::VectorXd& c, long draws,
                  Rng& rng) {
  std::map<std::vector<int>, long> counts;
  for (long i = 0; i < draws; ++i) ++counts[o.sample(c, rng).active()];
  return testing::total_variation(acts, testing::product_distribution(acts, c), counts, draws);
}

inline Eigen::VectorXd uniform_loss(std::size_t d, Rng& rng) {
  Eigen::VectorXd l(static_cast<Eigen::Index>(d));
  for (Eigen::Index j = 0; j < l.size(); ++j) l[j] = rng.uniform();
  return l;
}

template <class Oracle>
void warm_up(Learner<Oracle>& learner, std::size_t dim, Rng& rng, int rounds) {
  for (int t = 0; t < rounds; ++t) {
    learner.act(rng);
    learner.observe(uniform_loss(dim, rng));
  }
}

/// Exact expectation of the bandit estimate over the mixed sampling
/// distribution, against the projection of the loss onto span(V) and
/// against the loss of every action.
template <class Oracle>
void bandit_unbiased(const Oracle& o, const std::vector<ActionVector>& acts, double gamma, Rng& rng,
                     double pair_sign, ErrorTracker& t) {
  auto sp = std::make_shared<const Spanner>(build_spanner(o));
  Learner<Oracle> l(o, {Feedback::bandit, 0.4, gamma}, sp);
  warm_up(l, o.dim(), rng, 8);
  const Eigen::VectorXd loss = uniform_loss(o.dim(), rng);
  const std::vector<double> q = brute_force_mwu_distribution(acts, l.weights());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(o.dim()));
  for (std::size_t i = 0; i < acts.size(); ++i) {
    double p = (1.0 - gamma) * q[i];
    for (const auto& b : sp->columns()) {
      if (b == acts[i]) p += gamma / static_cast<double>(sp->reduced_dim());
    }
    mean += p * l.bandit_estimate(acts[i], acts[i].dot(loss), pair_sign);
  }
  const Eigen::VectorXd projected = sp->chart() * (sp->chart().transpose() * loss);
  for (Eigen::Index j = 0; j < mean.size(); ++j) t.compare(mean[j], projected[j], 1e-8);
  for (const auto& v : acts) t.compare(v.dot(mean), v.dot(loss), 1e-8);
}

/// Largest |mean - l x / (x + gamma)| in units of its Monte Carlo standard error.
template <class Oracle>
double ix_zscore(const Oracle& o, double gamma, long draws, Rng& rng) {
  Learner<Oracle> base(o, {Feedback::semi_bandit, 0.3, gamma});
  warm_up(base, o.dim(), rng, 10);
  const Eigen::VectorXd x = o.first_moment_batch(base.weights()).first_moment();
  const Eigen::VectorXd loss = uniform_loss(o.dim(), rng);
  const auto d = static_cast<Eigen::Index>(o.dim());
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(d);
  for (long i = 0; i < draws; ++i) {
    Learner<Oracle> l = base;
    l.act(rng);
    l.observe(loss);
    sum += l.last_estimate();
    sq += l.last_estimate().cwiseProduct(l.last_estimate());
  }
  double worst = 0.0;
  const double n = static_cast<double>(draws);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double mean = sum[j] / n;
    const double se = std::sqrt(std::max(sq[j] / n - mean * mean, 0.0) / n);
    const double want = loss[j] * x[j] / (x[j] + gamma);
    const double diff = std::abs(mean - want);
    worst = std::max(worst, se > 0.0 ? diff / se : (diff > 1e-12 ? INFINITY : 0.0));
  }
  return worst;
}

/// Gap by substituting every action into the recorded joint play.
template <class Oracle>
std::vector<double> enumerated_gap(const Game<Oracle>& game, const std::vector<std::vector<ActionVector>>& joint,
                                   const std::vector<ActionVector>& acts) {
  std::vector<double> gap(game.players());
  const double T = static_cast<double>(joint.size());
  for (std::size_t i = 0; i < game.players(); ++i) {
    double incurred = 0.0;
    for (const auto& round : joint) incurred += round[i].dot(game.round_losses(round)[i]);
    double best = INFINITY;
    for (const auto& v : acts) {
      double total = 0.0;
      for (auto round : joint) {
        round[i] = v;
        total += v.dot(game.round_losses(round)[i]);
      }
      best = std::min(best, total);
    }
    gap[i] = (incurred - best) / T;
  }
  return gap;
}

template <class Oracle>
void gap_check(const Game<Oracle>& game, const std::vector<ActionVector>& acts, std::uint64_t seed,
               ErrorTracker& t) {
  std::vector<LearnerConfig> configs(game.players(), {Feedback::semi_bandit, 0.3, 0.05});
  const RunResult r = run_dynamics(game, configs, 40, seed);
  const std::vector<double> gap = game_cce_gap(game, r.trajectory.actions, seed);
  const std::vector<double> want = enumerated_gap(game, r.trajectory.actions, acts);
  for (std::size_t i = 0; i < gap.size(); ++i) {
    t.compare(gap[i], want[i], 1e-12);
    t.compare(r.trajectory.cumulative_regret.back()[i] / 40.0, want[i], 1e-12);
  }
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Runs `body` over every instance of one family with a fresh tracker.
template <class Spec, class Body>
CheckResult per_instance(const std::string& name, const std::vector<Spec>& specs, double rel, Rng& rng,
                         Body&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  ErrorTracker t(rel);
  for (const auto& spec : specs) {
    const auto o = detail::oracle_of(spec);
    const auto acts = detail::enumerate(spec);
    const Eigen::VectorXd c = testing::random_weights(o.dim(), rng);
    body(o, acts, c, t);
  }
  return {name, specs.size(), t.worst(), rel, "rel", t.ok(), detail::seconds_since(t0)};
}

inline std::vector<CheckResult> kernel_checks(const Instances& in, Rng& rng) {
  auto body = [](const auto& o, const auto& acts, const auto& c, ErrorTracker& t) { detail::kernels(o, acts, c, t); };
  return {per_instance("kernel blotto", in.blotto, 1e-9, rng, body),
          per_instance("kernel spanning_tree", in.graphs, 1e-9, rng, body),
          per_instance("kernel dag_path", in.dags, 1e-9, rng, body),
          per_instance("kernel mset", in.msets, 1e-9, rng, body)};
}

inline std::vector<CheckResult> moment_checks(const Instances& in, double pair_sign, Rng& rng) {
  auto first = [](const auto& o, const auto& acts, const auto& c, ErrorTracker& t) {
    detail::first_moments(o, acts, c, t);
  };
  auto second = [pair_sign](const auto& o, const auto& acts, const auto& c, ErrorTracker& t) {
    detail::second_moments(o, acts, c, pair_sign, t);
  };
  auto intervals = [pair_sign](const BlottoOracle& o, const auto&, const auto& c, ErrorTracker& t) {
    detail::compare_matrices(o.second_moment_by_intervals(c), o.second_moment_batch(c).second_moment(pair_sign), t);
  };
  return {per_instance("first_moment blotto", in.blotto, 1e-9, rng, first),
          per_instance("first_moment spanning_tree", in.graphs, 1e-9, rng, first),
          per_instance("first_moment dag_path", in.dags, 1e-9, rng, first),
          per_instance("first_moment mset", in.msets, 1e-9, rng, first),
          per_instance("second_moment blotto", in.blotto, 1e-9, rng, second),
          per_instance("second_moment spanning_tree", in.graphs, 1e-9, rng, second),
          per_instance("second_moment dag_path", in.dags, 1e-9, rng, second),
          per_instance("second_moment mset", in.msets, 1e-9, rng, second),
          per_instance("second_moment blotto intervals", in.blotto, 1e-9, rng, intervals)};
}

/// Fixed instances small enough that 1e5 draws resolve TV well below 0.02.
inline std::vector<CheckResult> sampler_checks(long draws, Rng& rng) {
  std::vector<CheckResult> out;
  auto tv_check = [&](const std::string& name, const auto& spec) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto o = detail::oracle_of(spec);
    const auto acts = detail::enumerate(spec);
    const Eigen::VectorXd c = testing::random_weights(o.dim(), rng, 0.5, 2.0);
    const double tv = detail::sampler_tv(o, acts, c, draws, rng);
    out.push_back({name, 1, tv, 0.02, "tv", tv <= 0.02, detail::seconds_since(t0)});
  };
  tv_check("sampler blotto", BlottoSpec{3, 3});
  tv_check("sampler spanning_tree", WeightedGraph(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 4}, {0, 2}, {1, 3}}));
  tv_check("sampler dag_path", DagSpec(6, {{0, 1}, {0, 2}, {1, 2}, {1, 3}, {2, 3}, {2, 4}, {3, 4}, {3, 5}, {4, 5}, {1, 5}}, 0, 5));
  tv_check("sampler mset", MSetSpec{6, 3});

  // Generic chain-rule sampler over the conditional-kernel interface.
  {
    const auto t0 = std::chrono::steady_clock::now();
    const WeightedGraph g(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}, {0, 2}});
    const MatroidOracle o(g);
    const auto acts = testing::enumerate_trees(g);
    const Eigen::VectorXd c = testing::random_weights(o.dim(), rng, 0.5, 2.0);
    std::map<std::vector<int>, long> counts;
    for (long i = 0; i < draws; ++i) ++counts[generic_sample(o, c, rng).active()];
    const double tv = testing::total_variation(acts, testing::product_distribution(acts, c), counts, draws);
    out.push_back({"sampler generic", 1, tv, 0.02, "tv", tv <= 0.02, detail::seconds_since(t0)});
  }
  // Uniform path sampler on a DAG with exactly five paths.
  {
    const auto t0 = std::chrono::steady_clock::now();
    const DagOracle o(DagSpec(5, {{0, 1}, {0, 2}, {0, 3}, {1, 4}, {2, 4}, {3, 4}, {1, 2}, {0, 4}}, 0, 4));
    const auto acts = testing::enumerate_paths(o.spec());
    std::map<std::vector<int>, long> counts;
    for (long i = 0; i < draws; ++i) ++counts[o.uniform_sample(rng).active()];
    double chi2 = 0.0;
    const double expected = static_cast<double>(draws) / static_cast<double>(acts.size());
    long seen = 0;
    for (const auto& a : acts) {
      const long n = counts.count(a.active()) ? counts.at(a.active()) : 0;
      seen += n;
      chi2 += (n - expected) * (n - expected) / expected;
    }
    const double p = seen == draws && acts.size() == 5
                         ? boost::math::cdf(boost::math::complement(
                               boost::math::chi_squared(static_cast<double>(acts.size() - 1)), chi2))
                         : 0.0;
    out.push_back({"sampler uniform_dag chi2", 1, p, 0.001, "p-value", p > 0.001, detail::seconds_since(t0)});
  }
  return out;
}

inline std::vector<CheckResult> estimator_checks(double pair_sign, long ix_draws, Rng& rng) {
  std::vector<CheckResult> out;
  {
    const auto t0 = std::chrono::steady_clock::now();
    ErrorTracker t(1e-8);
    std::size_t n = 0;
    for (int m = 1; m <= 3; ++m, ++n) {
      const MSetSpec s{6, m};
      detail::bandit_unbiased(MSetOracle(s), testing::enumerate_msets(s), 0.1 * m, rng, pair_sign, t);
    }
    const BlottoSpec blotto{2, 3};
    detail::bandit_unbiased(BlottoOracle(blotto), testing::enumerate_blotto(blotto), 0.2, rng, pair_sign, t);
    const WeightedGraph g(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}, {0, 2}});
    detail::bandit_unbiased(MatroidOracle(g), testing::enumerate_trees(g), 0.3, rng, pair_sign, t);
    const DagSpec dag(5, {{0, 1}, {0, 2}, {1, 2}, {1, 3}, {2, 3}, {2, 4}, {3, 4}}, 0, 4);
    detail::bandit_unbiased(DagOracle(dag), testing::enumerate_paths(dag), 0.25, rng, pair_sign, t);
    n += 3;
    out.push_back({"estimator bandit exact", n, t.worst(), 1e-8, "rel", t.ok(), detail::seconds_since(t0)});
  }
  {
    const auto t0 = std::chrono::steady_clock::now();
    double z = 0.0;
    z = std::max(z, detail::ix_zscore(MSetOracle({6, 2}), 0.1, ix_draws, rng));
    z = std::max(z, detail::ix_zscore(BlottoOracle({3, 3}), 0.05, ix_draws, rng));
    z = std::max(z, detail::ix_zscore(MatroidOracle(WeightedGraph(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}, {0, 2}})), 0.1,
                                      ix_draws, rng));
    z = std::max(z, detail::ix_zscore(
                        DagOracle(DagSpec(5, {{0, 1}, {0, 2}, {1, 2}, {1, 3}, {2, 3}, {2, 4}, {3, 4}}, 0, 4)), 0.2,
                        ix_draws, rng));
    out.push_back({"estimator ix monte_carlo", 4, z, 4.0, "sigma", z <= 4.0, detail::seconds_since(t0)});
  }
  return out;
}

/// Certificates on `samples` oracle-extreme actions plus exhaustive bounds
/// and rank agreement on enumerable instances.
inline std::vector<CheckResult> spanner_checks(const Instances& in, std::size_t per_family, std::size_t samples,
                                               Rng& rng) {
  std::vector<CheckResult> out;
  auto run = [&](const std::string& name, const auto& specs) {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    bool ok = true;
    const std::size_t n = std::min(per_family, specs.size());
    for (std::size_t i = 0; i < n; ++i) {
      const auto o = detail::oracle_of(specs[i]);
      const Spanner s = build_spanner(o);
      const SpannerCertificate cert = certify_spanner(s, o, rng, samples);
      worst = std::max(worst, cert.max_coefficient);
      ok = ok && cert.passed;
      const auto acts = detail::enumerate(specs[i]);
      Eigen::MatrixXd a(static_cast<Eigen::Index>(o.dim()), static_cast<Eigen::Index>(acts.size()));
      for (std::size_t q = 0; q < acts.size(); ++q) {
        a.col(static_cast<Eigen::Index>(q)) = acts[q].bits();
        const double coef = s.coefficients(acts[q]).cwiseAbs().maxCoeff();
        worst = std::max(worst, coef);
        ok = ok && coef <= s.constant() + 1e-6 && s.span_residual(acts[q]) <= 1e-9;
      }
      ok = ok && Eigen::FullPivLU<Eigen::MatrixXd>(a).rank() == static_cast<Eigen::Index>(s.reduced_dim());
    }
    out.push_back({name, n, worst, 2.0 + 1e-6, "max |alpha|", ok, detail::seconds_since(t0)});
  };
  run("spanner blotto", in.blotto);
  run("spanner spanning_tree", in.graphs);
  run("spanner dag_path", in.dags);
  run("spanner mset", in.msets);
  return out;
}

inline std::vector<CheckResult> gap_checks(std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  ErrorTracker t(1e-9);
  const BlottoSpec blotto{3, 3};
  detail::gap_check(make_blotto_game(blotto, 2, BlottoRule::winner_take_all), testing::enumerate_blotto(blotto),
                    seed, t);
  detail::gap_check(make_blotto_game(blotto, 3, BlottoRule::proportional), testing::enumerate_blotto(blotto), seed,
                    t);
  const WeightedGraph g(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}, {0, 2}});
  detail::gap_check(make_congestion_game(MatroidOracle(g), 2), testing::enumerate_trees(g), seed, t);
  const DagSpec dag(5, {{0, 1}, {0, 2}, {1, 2}, {1, 3}, {2, 3}, {2, 4}, {3, 4}}, 0, 4);
  detail::gap_check(make_congestion_game(DagOracle(dag), 3), testing::enumerate_paths(dag), seed, t);
  const MSetSpec mset{5, 2};
  detail::gap_check(make_congestion_game(MSetOracle(mset), 2), testing::enumerate_msets(mset), seed, t);
  return {{"gap enumeration", 5, t.worst(), 1e-9, "rel", t.ok(), detail::seconds_since(t0)}};
}

inline std::vector<CheckResult> run_all(const Options& opt) {
  Rng rng(opt.seed);
  const std::size_t count = opt.instances > 0 ? opt.instances : (opt.scale == Scale::medium ? 50 : 10);
  const Instances in = make_instances(opt.scale, count, rng);
  std::vector<CheckResult> out;
  auto append = [&out](std::vector<CheckResult> more) { out.insert(out.end(), more.begin(), more.end()); };
  append(kernel_checks(in, rng));
  append(moment_checks(in, opt.pair_sign, rng));
  append(sampler_checks(opt.sampler_draws, rng));
  append(estimator_checks(opt.pair_sign, 20000, rng));
  append(spanner_checks(in, opt.scale == Scale::medium ? 5 : 2, opt.certificate_samples, rng));
  append(gap_checks(opt.seed));
  return out;
}

}  // namespace polylearn::verify
