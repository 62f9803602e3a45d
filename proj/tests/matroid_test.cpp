#include <cmath>
#include <map>
#include <vector>

#include <gtest/gtest.h>

#include "polylearn/matroid.hpp"
#include "polylearn/oracle.hpp"
#include "polylearn/testing/enumerate.hpp"

namespace polylearn {
namespace {

using testing::close;

static_assert(KernelOracle<MatroidOracle>);

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

// Edges a=(0,1), b=(1,2), c=(0,2).
WeightedGraph triangle() { return WeightedGraph(3, {{0, 1}, {1, 2}, {0, 2}}); }

WeightedGraph complete(int n) {
  std::vector<std::pair<int, int>> e;
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) e.push_back({u, v});
  }
  return WeightedGraph(n, e);
}

TEST(WeightedGraph, RejectsInvalidInput) {
  EXPECT_THROW(WeightedGraph(3, {{0, 1}}), std::invalid_argument);
  EXPECT_THROW(WeightedGraph(2, {{0, 0}, {0, 1}}), std::invalid_argument);
  EXPECT_THROW(WeightedGraph(2, {{0, 2}}), std::invalid_argument);
}

TEST(WeightedGraph, LaplacianRowsSumToZero) {
  const WeightedGraph g = complete(5);
  Rng rng(1);
  const Eigen::MatrixXd a = g.laplacian(testing::random_weights(g.num_edges(), rng));
  EXPECT_LT(a.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((a - a.transpose()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(MatroidKernel, Triangle) {
  const MatroidOracle o(triangle());
  const Eigen::VectorXd c = vec({1, 2, 3});
  EXPECT_NEAR(o.kernel(c, Mask::none()), 11.0, 1e-12);
  EXPECT_NEAR(o.kernel(c, Mask::one(0)), 6.0, 1e-12);
  EXPECT_EQ(o.kernel(c, Mask::pair(0, 1)), 0.0);
}

TEST(MatroidKernel, Cayley) {
  EXPECT_NEAR(MatroidOracle(complete(4)).kernel(Eigen::VectorXd::Ones(6), Mask::none()), 16.0, 1e-10);
  EXPECT_NEAR(MatroidOracle(complete(6)).kernel(Eigen::VectorXd::Ones(15), Mask::none()), 1296.0, 1e-8);
}

TEST(MatroidKernel, CofactorChoiceInvariance) {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const WeightedGraph g = testing::random_graph(6, 9, rng);
    const MatroidOracle o(g);
    const Eigen::VectorXd c = testing::random_weights(g.num_edges(), rng);
    const double k0 = o.kernel(c, Mask::none(), 0);
    for (int u = 1; u < 6; ++u) EXPECT_TRUE(close(o.kernel(c, Mask::none(), u), k0, 1e-9, 0.0));
  }
}

TEST(MatroidFirstMoment, TriangleMarginals) {
  const MatroidOracle o(triangle());
  const auto b = o.first_moment_batch(vec({1, 2, 3}));
  EXPECT_NEAR(b.total(), 11.0, 1e-12);
  const Eigen::VectorXd x = b.first_moment();
  EXPECT_NEAR(x[0], 5.0 / 11.0, 1e-14);
  EXPECT_NEAR(x[1], 8.0 / 11.0, 1e-14);
  EXPECT_NEAR(x[2], 9.0 / 11.0, 1e-14);
  EXPECT_NEAR(x.sum(), 2.0, 1e-14);
}

TEST(MatroidFirstMoment, K4UnitWeightsIsHalf) {
  const Eigen::VectorXd x = MatroidOracle(complete(4)).first_moments(Eigen::VectorXd::Ones(6));
  for (int j = 0; j < 6; ++j) EXPECT_NEAR(x[j], 0.5, 1e-14);
}

TEST(MatroidFirstMoment, BridgesAreExact) {
  // Triangle plus a pendant edge (2,3).
  const MatroidOracle o(WeightedGraph(4, {{0, 1}, {1, 2}, {0, 2}, {2, 3}}));
  const auto b = o.first_moment_batch(vec({1, 2, 3, 4}));
  EXPECT_EQ(b.single[3], 0.0);
  EXPECT_EQ(b.first_moment()[3], 1.0);
}

TEST(MatroidFirstMoment, MatchesNaiveAndEnumeration) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const WeightedGraph g = testing::random_graph(6, 10, rng);
    const MatroidOracle o(g);
    const auto trees = testing::enumerate_trees(g);
    const Eigen::VectorXd c = testing::random_weights(g.num_edges(), rng);
    const auto b = o.first_moment_batch(c);
    const double total = brute_force_kernel(trees, c, Mask::none());
    EXPECT_TRUE(close(b.total(), total, 1e-9, 0.0));
    const Eigen::VectorXd naive = o.naive_single(c);
    const Eigen::VectorXd x = testing::enumerated_first_moment(trees, testing::product_distribution(trees, c));
    EXPECT_NEAR(b.first_moment().sum(), 5.0, 1e-9);
    for (std::size_t j = 0; j < g.num_edges(); ++j) {
      const auto e = static_cast<Eigen::Index>(j);
      EXPECT_TRUE(close(b.single[e], naive[e], 1e-8, 1e-12));
      EXPECT_TRUE(close(b.single[e] * total, brute_force_kernel(trees, c, Mask::one(static_cast<int>(j))), 1e-9, 1e-12 * total));
      EXPECT_TRUE(close(b.first_moment()[e], x[e], 1e-9, 1e-12));
    }
  }
}

TEST(MatroidSecondMoment, TrianglePair) {
  const MatroidOracle o(triangle());
  const auto b = o.second_moment_batch(vec({1, 2, 3}));
  EXPECT_EQ(b.pair(0, 1), 0.0);
  // Pr[tree = {a, b}] = 1*2 / 11.
  EXPECT_NEAR(b.second_moment()(0, 1), 2.0 / 11.0, 1e-14);
}

TEST(MatroidSecondMoment, MatchesEnumeration) {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const WeightedGraph g = testing::random_graph(6, trial % 2 ? 10 : 7, rng);
    const MatroidOracle o(g);
    const auto trees = testing::enumerate_trees(g);
    const Eigen::VectorXd c = testing::random_weights(g.num_edges(), rng);
    const auto b = o.second_moment_batch(c);
    const double total = brute_force_kernel(trees, c, Mask::none());
    const auto p = testing::product_distribution(trees, c);
    const Eigen::MatrixXd s = testing::enumerated_second_moment(trees, p);
    const Eigen::MatrixXd sigma = b.second_moment();
    for (int j = 0; j < static_cast<int>(g.num_edges()); ++j) {
      EXPECT_NEAR(sigma(j, j), b.first_moment()[j], 1e-15);
      for (int k = 0; k < static_cast<int>(g.num_edges()); ++k) {
        const double fresh = o.kernel(c, Mask::pair(j, k));
        EXPECT_TRUE(close(b.pair(j, k) * total, fresh, 1e-8, 1e-12 * total));
        EXPECT_TRUE(close(b.pair(j, k) * total, brute_force_kernel(trees, c, Mask::pair(j, k)), 1e-9, 1e-12 * total));
        EXPECT_TRUE(close(sigma(j, k), s(j, k), 1e-9, 1e-12));
      }
    }
  }
}

TEST(MetaGraph, ParallelEdgesMergeAfterContraction) {
  const WeightedGraph g = triangle();
  const Eigen::VectorXd c = vec({1, 2, 3});
  MetaGraph meta(g, c);
  meta.include(0);
  ASSERT_EQ(meta.groups().size(), 1u);
  EXPECT_EQ(meta.groups().begin()->second, (std::vector<int>{1, 2}));
  EXPECT_NEAR(std::exp(meta.log_kernel()), 1.0 * (2.0 + 3.0), 1e-12);
  EXPECT_NEAR(meta.inclusion_probability(1), 2.0 / 5.0, 1e-14);
}

TEST(MetaGraph, KernelEqualsConditionalKernelAtEveryStep) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const WeightedGraph g = testing::random_graph(6, 9, rng);
    const MatroidOracle o(g);
    const Eigen::VectorXd c = testing::random_weights(g.num_edges(), rng);
    MetaGraph meta(g, c);
    std::vector<std::int8_t> fixed(g.num_edges(), -1);
    for (int j = 0; j < static_cast<int>(g.num_edges()); ++j) {
      const double expected = o.conditional_kernel(c, fixed);
      EXPECT_TRUE(close(std::exp(meta.log_kernel()), expected, 1e-9, 0.0));
      const double p = meta.inclusion_probability(j);
      std::vector<std::int8_t> with = fixed;
      with[static_cast<std::size_t>(j)] = 1;
      EXPECT_TRUE(close(p, o.conditional_kernel(c, with) / expected, 1e-9, 1e-12));
      if (rng.uniform() < p) {
        meta.include(j);
        fixed[static_cast<std::size_t>(j)] = 1;
      } else {
        meta.exclude(j);
        fixed[static_cast<std::size_t>(j)] = 0;
      }
    }
  }
}

TEST(MatroidSample, TriangleTreeProbability) {
  const MatroidOracle o(triangle());
  Rng rng(6);
  const long n = 100000;
  long hits = 0;
  for (long i = 0; i < n; ++i) hits += o.sample(vec({1, 2, 3}), rng).active() == std::vector<int>{1, 2};
  const double p = 6.0 / 11.0;
  EXPECT_NEAR(static_cast<double>(hits) / n, p, 4.0 * std::sqrt(p * (1 - p) / n));
}

TEST(MatroidSample, TotalVariationAgainstEnumeration) {
  Rng grng(7);
  const WeightedGraph g = testing::random_graph(6, 8, grng);
  const MatroidOracle o(g);
  const auto trees = testing::enumerate_trees(g);
  const Eigen::VectorXd c = testing::random_weights(g.num_edges(), grng);
  std::map<std::vector<int>, long> counts;
  Rng rng(8);
  const long n = 100000;
  for (long i = 0; i < n; ++i) ++counts[o.sample(c, rng).active()];
  EXPECT_LE(testing::total_variation(trees, testing::product_distribution(trees, c), counts, n), 0.02);
}

TEST(MstBestResponse, Examples) {
  const MatroidOracle o(triangle());
  const ActionVector t = o.best_response(vec({1, 2, 3}));
  EXPECT_EQ(t.active(), (std::vector<int>{0, 1}));
  EXPECT_DOUBLE_EQ(t.dot(vec({1, 2, 3})), 3.0);
  EXPECT_EQ(o.best_response(vec({1, 1, 1})).active(), (std::vector<int>{0, 1}));
}

TEST(MstBestResponse, MatchesEnumeration) {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const WeightedGraph g = testing::random_graph(8, 11, rng);
    const MatroidOracle o(g);
    const auto trees = testing::enumerate_trees(g);
    const Eigen::VectorXd l = testing::random_weights(g.num_edges(), rng, 0.01, 1.0);
    double best = 1e300;
    for (const auto& t : trees) best = std::min(best, t.dot(l));
    EXPECT_NEAR(o.best_response(l).dot(l), best, 1e-12);
  }
}

}  // namespace
}  // namespace polylearn
