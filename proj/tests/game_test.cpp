#include <cmath>
#include <memory>
#include <vector>

#include <gtest/gtest.h>

#include "polylearn/game.hpp"
#include "polylearn/testing/enumerate.hpp"

namespace polylearn {
namespace {

// Average loss of the best fixed deviation, found by substituting every
// action into the recorded rounds.
template <class O>
std::vector<double> enumerated_gap(const Game<O>& game, const std::vector<ActionVector>& actions,
                                   const std::vector<std::vector<ActionVector>>& joint) {
  std::vector<double> gap;
  const double t = static_cast<double>(joint.size());
  for (std::size_t i = 0; i < game.players(); ++i) {
    double incurred = 0.0;
    for (const auto& round : joint) incurred += round[i].dot(game.round_losses(round)[i]);
    double best = 1e300;
    for (const auto& v : actions) {
      double total = 0.0;
      for (auto round : joint) {
        round[i] = v;
        total += v.dot(game.round_losses(round)[i]);
      }
      best = std::min(best, total);
    }
    gap.push_back((incurred - best) / t);
  }
  return gap;
}

TEST(RoundLosses, BlottoSplitBattlefields) {
  const BlottoSpec spec{1, 2};
  const auto game = make_blotto_game(spec, 2, BlottoRule::winner_take_all);
  const std::vector<ActionVector> joint{spec.action({1, 0}), spec.action({0, 1})};
  const auto l = game.round_losses(joint);
  EXPECT_DOUBLE_EQ(joint[0].dot(l[0]), 1.0);
  EXPECT_DOUBLE_EQ(joint[1].dot(l[1]), 1.0);
}

TEST(RoundLosses, BlottoRules) {
  const BlottoSpec spec{4, 2};
  const std::vector<ActionVector> joint{spec.action({2, 2}), spec.action({2, 2}), spec.action({1, 3})};
  const auto wta = blotto_losses(spec, BlottoRule::winner_take_all, joint);
  EXPECT_EQ(wta[0][spec.index(0, 2)], 1.0);  // tie with player 1
  EXPECT_EQ(wta[0][spec.index(0, 3)], 0.0);
  const auto split = blotto_losses(spec, BlottoRule::winner_take_all_split, joint);
  EXPECT_DOUBLE_EQ(split[0][spec.index(0, 2)], 0.5);
  EXPECT_DOUBLE_EQ(split[2][spec.index(1, 2)], 1.0 - 1.0 / 3.0);
  const auto prop = blotto_losses(spec, BlottoRule::proportional, joint);
  EXPECT_DOUBLE_EQ(prop[2][spec.index(1, 3)], 1.0 - 3.0 / 7.0);
  EXPECT_DOUBLE_EQ(prop[2][spec.index(0, 0)], 1.0);
  const BlottoSpec empty{0, 1};
  EXPECT_DOUBLE_EQ(blotto_losses(empty, BlottoRule::proportional, {empty.action({0}), empty.action({0})})[0][0], 1.0);
}

TEST(RoundLosses, TwoPlayerSplitIsConstantSum) {
  const BlottoSpec spec{5, 3};
  const BlottoOracle o(spec);
  const auto game = make_blotto_game(spec, 2, BlottoRule::winner_take_all_split);
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const Eigen::VectorXd w = testing::random_weights(o.dim(), rng);
    const std::vector<ActionVector> joint{o.sample(w, rng), o.sample(w, rng)};
    const auto l = game.round_losses(joint);
    EXPECT_DOUBLE_EQ(joint[0].dot(l[0]) + joint[1].dot(l[1]), 3.0);
  }
}

TEST(RoundLosses, CongestionSharedEdge) {
  const WeightedGraph g(3, {{0, 1}, {1, 2}, {0, 2}});
  const auto game = make_congestion_game(MatroidOracle(g), 2);
  const auto l = game.round_losses({ActionVector(3, {0, 1}), ActionVector(3, {0, 2})});
  EXPECT_DOUBLE_EQ(l[0][0], 1.0);
  EXPECT_DOUBLE_EQ(l[0][1], 0.5);
  EXPECT_DOUBLE_EQ(l[0][2], 1.0);
}

TEST(RoundLosses, CongestionMatchesDirectSummation) {
  Rng rng(2);
  const WeightedGraph g = testing::random_graph(6, 10, rng);
  const MatroidOracle o(g);
  const auto game = make_congestion_game(o, 3);
  for (int t = 0; t < 50; ++t) {
    std::vector<ActionVector> joint;
    for (int i = 0; i < 3; ++i) joint.push_back(o.sample(testing::random_weights(o.dim(), rng), rng));
    const auto l = game.round_losses(joint);
    for (std::size_t i = 0; i < 3; ++i) {
      double direct = 0.0;
      for (int e : joint[i].active()) {
        int users = 0;
        for (const auto& v : joint) users += v.contains(e);
        direct += users / 3.0;
      }
      EXPECT_NEAR(joint[i].dot(l[i]), direct, 1e-12);
    }
  }
}

TEST(RoundLosses, CongestionMonotone) {
  const MSetSpec spec{5, 2};
  Rng rng(3);
  const MSetOracle o(spec);
  std::vector<ActionVector> joint{o.sample(Eigen::VectorXd::Ones(5), rng), o.sample(Eigen::VectorXd::Ones(5), rng)};
  const auto before = congestion_losses(5, joint);
  joint.push_back(joint[0]);
  const auto after = congestion_losses(5, joint);
  for (int j : joint[0].active()) EXPECT_GT(after[0][j] * 3.0, before[0][j] * 2.0);
}

TEST(RoundLosses, InvalidActionsRejected) {
  const WeightedGraph g(3, {{0, 1}, {1, 2}, {0, 2}});
  const auto tree_game = make_congestion_game(MatroidOracle(g), 2);
  EXPECT_THROW(tree_game.round_losses({ActionVector(3, {0, 1}), ActionVector(3, {0})}), std::invalid_argument);
  const auto blotto = make_blotto_game({2, 2}, 2, BlottoRule::winner_take_all);
  EXPECT_THROW(blotto.round_losses({ActionVector(6, {0, 3}), ActionVector(6, {1, 4})}), std::invalid_argument);
  EXPECT_THROW(blotto.round_losses({ActionVector(6, {2, 3})}), std::invalid_argument);
  const DagSpec dag(4, {{0, 1}, {0, 2}, {1, 3}, {2, 3}}, 0, 3);
  const auto paths = make_congestion_game(DagOracle(dag), 1);
  EXPECT_NO_THROW(paths.round_losses({ActionVector(4, {1, 3})}));
  EXPECT_THROW(paths.round_losses({ActionVector(4, {0, 3})}), std::invalid_argument);
  EXPECT_THROW(paths.round_losses({ActionVector(4, {0, 1, 2})}), std::invalid_argument);
}

TEST(Dynamics, SinglePlayerReducesToOnlineLearning) {
  const MSetOracle o({6, 2});
  const auto game = make_congestion_game(o, 1);
  AdversarySpec adv{AdversarySpec::Kind::bernoulli, Eigen::VectorXd::LinSpaced(6, 0.2, 0.8)};
  const LearnerConfig cfg{Feedback::semi_bandit, 0.1, 0.05};
  const std::uint64_t seed = 11;
  const RunResult run = run_dynamics(game, {cfg}, 300, seed, nullptr, adv);

  Learner<MSetOracle> learner(o, cfg);
  Rng rng(stream_seed(seed, 0));
  Adversary env(adv, 6, stream_seed(seed, kAdversaryStream));
  double realized = 0.0;
  Eigen::VectorXd cumulative = Eigen::VectorXd::Zero(6);
  for (int t = 0; t < 300; ++t) {
    const ActionVector v = learner.act(rng);
    const Eigen::VectorXd l = env.next();
    learner.observe(l);
    realized += v.dot(l);
    cumulative += l;
    EXPECT_EQ(run.trajectory.actions[static_cast<std::size_t>(t)][0], v);
  }
  EXPECT_EQ(realized_regret(run.trajectory, 0, o), realized_regret(realized, cumulative, o));
}

TEST(Dynamics, WorstCoordinateAdversaryIsBalanced) {
  Adversary adv({AdversarySpec::Kind::worst_coordinate, {}}, 3, 0);
  Eigen::VectorXd total = Eigen::VectorXd::Zero(3);
  for (int t = 0; t < 9; ++t) {
    const Eigen::VectorXd l = adv.next();
    EXPECT_EQ(l[t % 3], 1.0);
    total += l;
  }
  EXPECT_EQ(total, Eigen::VectorXd::Constant(3, 3.0));
}

TEST(Dynamics, DeterministicGivenSeedAndThreads) {
  const auto game = make_blotto_game({3, 2}, 3, BlottoRule::winner_take_all);
  const std::vector<LearnerConfig> cfg{{Feedback::semi_bandit, 0.1, 0.05},
                                       {Feedback::bandit, 0.01, 0.2},
                                       {Feedback::full, 0.1}};
  const RunResult a = run_dynamics(game, cfg, 200, 5);
  const RunResult b = run_dynamics(game, cfg, 200, 5);
  RunOptions threaded;
  threaded.threads = 3;
  const RunResult c = run_dynamics(game, cfg, 200, 5, nullptr, std::nullopt, threaded);
  const RunResult d = run_dynamics(game, cfg, 200, 6);
  EXPECT_EQ(a.trajectory.actions, b.trajectory.actions);
  EXPECT_EQ(a.trajectory.cumulative_regret, b.trajectory.cumulative_regret);
  EXPECT_EQ(a.trajectory.actions, c.trajectory.actions);
  EXPECT_EQ(a.trajectory.realized, c.trajectory.realized);
  EXPECT_NE(a.trajectory.actions, d.trajectory.actions);
}

TEST(Dynamics, CumulativeLossesArePrefixSums) {
  const auto game = make_blotto_game({3, 2}, 2, BlottoRule::proportional);
  const RunResult r = run_dynamics(game, {{Feedback::full, 0.2}, {Feedback::semi_bandit, 0.2, 0.1}}, 100, 3);
  const Trajectory& t = r.trajectory;
  ASSERT_EQ(t.rounds(), 100u);
  for (std::size_t i = 0; i < 2; ++i) {
    double sum = 0.0;
    for (std::size_t s = 0; s < t.rounds(); ++s) sum += t.realized[s][i];
    EXPECT_NEAR(sum, t.cumulative_realized[i], 1e-12);
    EXPECT_GE(t.cumulative_regret.back()[i], -1e-9);
  }
}

TEST(Evaluate, GapEqualsAverageRegret) {
  Rng rng(4);
  const WeightedGraph g = testing::random_graph(5, 7, rng);
  const auto game = make_congestion_game(MatroidOracle(g), 3);
  const std::uint64_t seed = 9;
  const RunResult r = run_dynamics(game, std::vector<LearnerConfig>(3, {Feedback::semi_bandit, 0.2, 0.1}), 150, seed);
  const auto gap = game_cce_gap(game, r.trajectory.actions, seed);
  const auto brute = enumerated_gap(game, testing::enumerate_trees(g), r.trajectory.actions);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(gap[i], realized_regret(r.trajectory, i, game.oracle()) / 150.0, 1e-9);
    EXPECT_NEAR(gap[i], brute[i], 1e-9);
  }
}

TEST(Evaluate, AdversarialGapIsRegenerated) {
  const MSetOracle o({5, 2});
  const auto game = make_congestion_game(o, 1);
  const AdversarySpec adv{AdversarySpec::Kind::bernoulli, Eigen::VectorXd::Constant(5, 0.5)};
  const RunResult r = run_dynamics(game, {{Feedback::bandit, 0.05, 0.3}}, 200, 21, nullptr, adv);
  const auto gap = game_cce_gap(game, r.trajectory.actions, 21, adv);
  EXPECT_NEAR(gap[0], realized_regret(r.trajectory, 0, o) / 200.0, 1e-9);
}

TEST(Evaluate, FixedPureProfile) {
  const BlottoSpec spec{3, 2};
  const auto game = make_blotto_game(spec, 2, BlottoRule::winner_take_all);
  const std::vector<ActionVector> profile{spec.action({2, 1}), spec.action({2, 1})};
  const std::vector<std::vector<ActionVector>> joint(10, profile);
  const auto gap = game_cce_gap(game, joint, 0);
  const auto l = game.round_losses(profile);
  for (std::size_t i = 0; i < 2; ++i) {
    const ActionVector br = game.oracle().best_response(l[i]);
    EXPECT_NEAR(gap[i], profile[i].dot(l[i]) - br.dot(l[i]), 1e-12);
  }
  // Both battlefields tie and lose; (3, 0) wins one of them.
  EXPECT_NEAR(gap[0], 1.0, 1e-12);
  EXPECT_NEAR(gap[1], 1.0, 1e-12);
}

TEST(Evaluate, UniformSymmetricBlottoHasZeroGap) {
  const BlottoSpec spec{1, 2};
  const auto game = make_blotto_game(spec, 2, BlottoRule::winner_take_all);
  const ActionVector a = spec.action({1, 0});
  const ActionVector b = spec.action({0, 1});
  const std::vector<std::vector<ActionVector>> joint{{a, a}, {a, b}, {b, a}, {b, b}};
  for (double g : game_cce_gap(game, joint, 0)) EXPECT_NEAR(g, 0.0, 1e-15);
}

TEST(Evaluate, HandBuiltTwoRoundTrajectory) {
  const BlottoSpec spec{1, 2};
  const auto game = make_blotto_game(spec, 2, BlottoRule::winner_take_all);
  const ActionVector a = spec.action({1, 0});
  const ActionVector b = spec.action({0, 1});
  const auto gap = game_cce_gap(game, {{a, b}, {a, a}}, 0);
  EXPECT_NEAR(gap[0], 0.0, 1e-15);
  EXPECT_NEAR(gap[1], 0.5, 1e-15);
}

TEST(Evaluate, SmallGamesMatchEnumeration) {
  const BlottoSpec spec{3, 3};
  const auto game = make_blotto_game(spec, 2, BlottoRule::winner_take_all);
  const RunResult r = run_dynamics(game, {{Feedback::semi_bandit, 0.1, 0.05}, {Feedback::full, 0.1}}, 100, 8);
  const auto gap = game_cce_gap(game, r.trajectory.actions, 8);
  const auto brute = enumerated_gap(game, testing::enumerate_blotto(spec), r.trajectory.actions);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(gap[i], brute[i], 1e-9);
}

}  // namespace
}  // namespace polylearn
