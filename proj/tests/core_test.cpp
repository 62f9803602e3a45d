#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "polylearn/blotto.hpp"
#include "polylearn/core.hpp"
#include "polylearn/mset.hpp"
#include "polylearn/oracle.hpp"
#include "polylearn/regret.hpp"
#include "polylearn/rng.hpp"
#include "polylearn/testing/enumerate.hpp"
#include "polylearn/truncated_poly.hpp"

namespace polylearn {
namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

TEST(ActionVector, BitsAndActiveAgree) {
  const ActionVector v(5, {3, 0, 4});
  EXPECT_EQ(v.active(), (std::vector<int>{0, 3, 4}));
  EXPECT_EQ(ActionVector::from_bits(v.bits()), v);
  EXPECT_TRUE(v.contains(3));
  EXPECT_FALSE(v.contains(1));
  EXPECT_DOUBLE_EQ(v.dot(vec({1, 2, 3, 4, 5})), 1 + 4 + 5);
}

TEST(ActionVector, RejectsBadIndices) {
  EXPECT_THROW(ActionVector(3, {3}), std::out_of_range);
  EXPECT_THROW(ActionVector(3, {1, 1}), std::invalid_argument);
  EXPECT_THROW(ActionVector::from_bits(vec({0, 0.5})), std::invalid_argument);
}

TEST(Mask, ZeroesAtMostTwo) {
  EXPECT_TRUE(Mask::none().empty());
  EXPECT_EQ(Mask::pair(4, 1).zeroed(), (std::vector<int>{1, 4}));
  EXPECT_EQ(Mask::pair(2, 2).zeroed(), (std::vector<int>{2}));
  EXPECT_EQ(Mask::one(1).apply(vec({3, 4, 5})), vec({3, 0, 5}));
}

TEST(ExpWeights, WeightsMatchCumulativeLosses) {
  ExpWeights w(4, 0.5);
  Rng rng(3);
  for (int t = 0; t < 2000; ++t) {
    w.accumulate(testing::random_weights(4, rng, 0.5, 2.0));
    for (Eigen::Index j = 0; j < 4; ++j) {
      ASSERT_GT(w.weights()[j], 0.0);
      const double lhs = std::log(w.weights()[j]) + w.log_scale();
      EXPECT_NEAR(lhs, -0.5 * w.cumulative()[j], 1e-12 * std::max(1.0, std::abs(lhs)));
    }
  }
  EXPECT_LE(w.weights().maxCoeff(), 1e100);
  EXPECT_GE(w.weights().maxCoeff(), 1e-100);
}

TEST(ExpWeights, RescalesAndStaysPositive) {
  ExpWeights w(2, 1.0);
  w.accumulate(vec({1e5, 0.0}));
  EXPECT_GT(w.weights()[0], 0.0);
  w.accumulate(vec({0.0, 2000.0}));
  EXPECT_NEAR(std::log(w.weights()[1]) + w.log_scale(), -2000.0, 1e-9);
  EXPECT_THROW(ExpWeights(2, 0.0), std::invalid_argument);
}

TEST(BruteForceKernel, SingletonsSumWeights) {
  const std::vector<ActionVector> acts{{3, {0}}, {3, {1}}, {3, {2}}};
  EXPECT_DOUBLE_EQ(brute_force_kernel(acts, vec({2, 3, 5}), Eigen::VectorXd::Ones(3)), 10.0);
}

TEST(BruteForceKernel, UnitWeightsCountActions) {
  const auto acts = testing::enumerate_blotto({3, 3});
  EXPECT_DOUBLE_EQ(brute_force_kernel(acts, Eigen::VectorXd::Ones(12), Eigen::VectorXd::Ones(12)),
                   static_cast<double>(acts.size()));
}

TEST(BruteForceKernel, TwoSubsets) {
  const auto acts = testing::enumerate_msets({3, 2});
  EXPECT_DOUBLE_EQ(brute_force_kernel(acts, vec({1, 2, 3}), Eigen::VectorXd::Ones(3)), 11.0);
  EXPECT_THROW(brute_force_kernel(acts, vec({1, 2}), Eigen::VectorXd::Ones(3)), std::invalid_argument);
}

TEST(BruteForceDistribution, UniformWeightsUniformLaw) {
  const auto acts = testing::enumerate_msets({5, 2});
  const auto p = brute_force_mwu_distribution(acts, ExpWeights(5, 1.0));
  for (double x : p) EXPECT_NEAR(x, 1.0 / 10.0, 1e-15);
}

TEST(BruteForceDistribution, TwoActionBlotto) {
  const BlottoSpec spec{1, 2};
  const auto acts = testing::enumerate_blotto(spec);
  const auto w = ExpWeights::from_weights(vec({2, 3, 5, 7}));
  const auto p = brute_force_mwu_distribution(acts, w);
  double sum = 0.0;
  for (std::size_t i = 0; i < acts.size(); ++i) {
    sum += p[i];
    if (acts[i] == spec.action({1, 0})) EXPECT_NEAR(p[i], 15.0 / 29.0, 1e-15);
    if (acts[i] == spec.action({0, 1})) EXPECT_NEAR(p[i], 14.0 / 29.0, 1e-15);
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(BruteForceDistribution, MatchesRecomputationFromCumulativeLosses) {
  const auto acts = testing::enumerate_blotto({3, 3});
  ExpWeights w(12, 0.3);
  Rng rng(11);
  for (int t = 0; t < 50; ++t) w.accumulate(testing::random_weights(12, rng, 0.01, 1.0));
  const auto p = brute_force_mwu_distribution(acts, w);
  std::vector<double> q(acts.size());
  double z = 0.0;
  for (std::size_t i = 0; i < acts.size(); ++i) {
    double s = 0.0;
    for (int j : acts[i].active()) s += w.cumulative()[j];
    q[i] = std::exp(-0.3 * s);
    z += q[i];
  }
  for (std::size_t i = 0; i < acts.size(); ++i) EXPECT_NEAR(p[i], q[i] / z, 1e-12);
  EXPECT_THROW(brute_force_mwu_distribution({}, w), std::invalid_argument);
}

TEST(BruteForceDistribution, ScaleInvariantForFixedCardinality) {
  const auto acts = testing::enumerate_msets({6, 3});
  Rng rng(5);
  const Eigen::VectorXd c = testing::random_weights(6, rng);
  const auto p = testing::product_distribution(acts, c);
  const auto q = testing::product_distribution(acts, 17.0 * c);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], q[i], 1e-15);
}

TEST(Autocorrelation, DiagonalIsFirstMomentAndPsd) {
  const auto acts = testing::enumerate_blotto({3, 3});
  Rng rng(8);
  const auto p = testing::product_distribution(acts, testing::random_weights(12, rng));
  const Eigen::MatrixXd sigma = autocorrelation(acts, p);
  const Eigen::VectorXd x = testing::enumerated_first_moment(acts, p);
  EXPECT_LT((sigma - sigma.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  for (Eigen::Index j = 0; j < 12; ++j) EXPECT_NEAR(sigma(j, j), x[j], 1e-15);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sigma).eigenvalues().minCoeff(), -1e-8);
  EXPECT_GE(sigma.minCoeff(), 0.0);
  EXPECT_LE(sigma.maxCoeff(), 1.0 + 1e-12);
}

TEST(Assembly, InclusionExclusionReproducesBruteForce) {
  const auto acts = testing::enumerate_msets({5, 2});
  Rng rng(21);
  const Eigen::VectorXd c = testing::random_weights(5, rng);
  const double total = brute_force_kernel(acts, c, Mask::none());
  Eigen::VectorXd single(5);
  Eigen::MatrixXd pair(5, 5);
  for (int j = 0; j < 5; ++j) {
    single[j] = brute_force_kernel(acts, c, Mask::one(j)) / total;
    for (int k = 0; k < 5; ++k) pair(j, k) = brute_force_kernel(acts, c, Mask::pair(j, k)) / total;
  }
  const auto p = testing::product_distribution(acts, c);
  EXPECT_LT((assemble_second_moment(single, pair) - autocorrelation(acts, p)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((assemble_first_moment(single) - testing::enumerated_first_moment(acts, p)).cwiseAbs().maxCoeff(), 1e-14);
  // A flipped pair sign must be visible.
  EXPECT_GT((assemble_second_moment(single, pair, -1.0) - autocorrelation(acts, p)).cwiseAbs().maxCoeff(), 0.1);
}

TEST(Regret, HindsightOptimalPlayHasZeroRegret) {
  const MSetOracle oracle({2, 1});
  Trajectory tr(1, 2);
  const Eigen::VectorXd l = vec({0.5, 0.2});
  for (int t = 0; t < 4; ++t) {
    tr.cumulative_loss[0] += l;
    tr.cumulative_realized[0] += 0.2;
  }
  EXPECT_DOUBLE_EQ(realized_regret(tr, 0, oracle), 0.0);
}

TEST(Regret, SingleRound) {
  const MSetOracle oracle({2, 1});
  Trajectory tr(1, 2);
  tr.cumulative_loss[0] = vec({0.5, 0.2});
  tr.cumulative_realized[0] = 0.5;
  EXPECT_NEAR(realized_regret(tr, 0, oracle), 0.3, 1e-15);
}

TEST(Regret, MatchesEnumerationOverFixedActions) {
  const MSetSpec spec{6, 2};
  const MSetOracle oracle(spec);
  const auto acts = testing::enumerate_msets(spec);
  Rng rng(4);
  Trajectory tr(1, 6);
  for (int t = 0; t < 40; ++t) {
    Eigen::VectorXd l(6);
    for (int j = 0; j < 6; ++j) l[j] = rng.uniform();
    const ActionVector& v = acts[rng.index(acts.size())];
    tr.cumulative_loss[0] += l;
    tr.cumulative_realized[0] += v.dot(l);
  }
  double best = 1e300;
  for (const auto& v : acts) best = std::min(best, v.dot(tr.cumulative_loss[0]));
  EXPECT_NEAR(realized_regret(tr, 0, oracle), tr.cumulative_realized[0] - best, 1e-12);
  EXPECT_GE(realized_regret(tr, 0, oracle), -1e-9);
}

TEST(Rng, StreamsAreDeterministicAndDistinct) {
  Rng a(stream_seed(7, 0)), b(stream_seed(7, 0)), c(stream_seed(7, 1));
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform();
    EXPECT_EQ(x, b.uniform());
    EXPECT_GE(x, 0.0);
    EXPECT_LT(x, 1.0);
  }
  EXPECT_NE(Rng(stream_seed(7, 0)).uniform(), c.uniform());
  const std::vector<double> w{0.0, 1.0, 0.0};
  for (int i = 0; i < 20; ++i) EXPECT_EQ(a.categorical(w), 1u);
}

TEST(Convolution, FastMatchesNaive) {
  Rng rng(9);
  for (std::size_t n : {1, 5, 40, 100, 513}) {
    std::vector<double> a(n), b(n);
    for (auto& x : a) x = rng.uniform();
    for (auto& x : b) x = rng.uniform();
    const auto naive = convolve(a, b, n, ConvolutionMethod::naive);
    const auto fast = convolve(a, b, n, ConvolutionMethod::fft);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NEAR(fast[i], naive[i], 1e-12 * std::max(1.0, naive[i]));
    }
  }
}

TEST(TruncatedPoly, ProductAgreesWithExactLowDegreeTerms) {
  TruncatedPoly a({1.0, 2.0, 3.0});
  TruncatedPoly b({4.0, 5.0, 6.0});
  const TruncatedPoly p = a.times(b, ConvolutionMethod::fft);
  const double s = std::exp(p.log_scale());
  EXPECT_NEAR(p[0] * s, 4.0, 1e-12);
  EXPECT_NEAR(p[1] * s, 13.0, 1e-12);
  EXPECT_NEAR(p[2] * s, 28.0, 1e-12);
  EXPECT_EQ(p.coeffs().size(), 3u);
}

}  // namespace
}  // namespace polylearn
