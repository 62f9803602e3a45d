#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "polylearn/blotto.hpp"
#include "polylearn/core.hpp"
#include "polylearn/dag.hpp"
#include "polylearn/learners.hpp"
#include "polylearn/matroid.hpp"
#include "polylearn/mset.hpp"
#include "polylearn/regret.hpp"
#include "polylearn/rng.hpp"
#include "polylearn/spanner.hpp"

namespace polylearn {

/// Per-battlefield loss of a Blotto player. Ties lose under winner_take_all;
/// winner_take_all_split shares one unit of winning among the tied leaders,
/// which makes the two-player game constant-sum.
enum class BlottoRule { winner_take_all, winner_take_all_split, proportional };

inline BlottoRule parse_blotto_rule(const std::string& s) {
  if (s == "winner_take_all") return BlottoRule::winner_take_all;
  if (s == "winner_take_all_split") return BlottoRule::winner_take_all_split;
  if (s == "proportional") return BlottoRule::proportional;
  throw std::invalid_argument("unknown blotto rule '" + s +
                              "' (expected winner_take_all, winner_take_all_split or proportional)");
}

inline std::string to_string(BlottoRule r) {
  switch (r) {
    case BlottoRule::winner_take_all: return "winner_take_all";
    case BlottoRule::winner_take_all_split: return "winner_take_all_split";
    case BlottoRule::proportional: return "proportional";
  }
  return "?";
}

inline void validate_action(const BlottoOracle& o, const ActionVector& v) {
  if (v.dim() != o.dim()) throw std::invalid_argument("blotto action has wrong dimension");
  o.spec().allocation(v);
}

inline void validate_action(const MSetOracle& o, const ActionVector& v) {
  if (v.dim() != o.dim() || v.count() != o.max_active()) {
    throw std::invalid_argument("m-set action must have exactly m active coordinates");
  }
}

inline void validate_action(const MatroidOracle& o, const ActionVector& v) {
  const WeightedGraph& g = o.graph();
  if (v.dim() != o.dim() || v.count() != o.max_active()) {
    throw std::invalid_argument("spanning tree must have |V| - 1 edges");
  }
  UnionFind uf(g.num_vertices());
  for (int e : v.active()) {
    if (!uf.unite(g.u(e), g.v(e))) throw std::invalid_argument("spanning tree contains a cycle");
  }
}

inline void validate_action(const DagOracle& o, const ActionVector& v) {
  const DagSpec& dag = o.spec();
  if (v.dim() != o.dim() || v.count() == 0) throw std::invalid_argument("path action has wrong dimension");
  std::vector<int> next(static_cast<std::size_t>(dag.num_nodes()), -1);
  for (int e : v.active()) {
    int& slot = next[static_cast<std::size_t>(dag.edge(e).tail)];
    if (slot >= 0) throw std::invalid_argument("path leaves a node twice");
    slot = e;
  }
  int node = dag.source();
  std::size_t used = 0;
  while (node != dag.sink()) {
    const int e = next[static_cast<std::size_t>(node)];
    if (e < 0) throw std::invalid_argument("edges do not form a source-sink path");
    node = dag.edge(e).head;
    ++used;
  }
  if (used != v.count()) throw std::invalid_argument("edges do not form a source-sink path");
}

/// Coordinate losses of every player: entry (h, s) is what the player would
/// lose on battlefield h with s soldiers against the opponents' allocations.
inline std::vector<Eigen::VectorXd> blotto_losses(const BlottoSpec& spec, BlottoRule rule,
                                                  const std::vector<ActionVector>& joint) {
  const std::size_t players = joint.size();
  std::vector<std::vector<int>> alloc(players);
  for (std::size_t i = 0; i < players; ++i) alloc[i] = spec.allocation(joint[i]);
  std::vector<Eigen::VectorXd> out(players, Eigen::VectorXd::Zero(spec.dim()));
  for (std::size_t i = 0; i < players; ++i) {
    for (int h = 0; h < spec.k; ++h) {
      int best = -1;
      int at_best = 0;
      int others = 0;
      for (std::size_t q = 0; q < players; ++q) {
        if (q == i) continue;
        const int a = alloc[q][static_cast<std::size_t>(h)];
        others += a;
        if (a > best) {
          best = a;
          at_best = 1;
        } else if (a == best) {
          ++at_best;
        }
      }
      for (int s = 0; s <= spec.n; ++s) {
        double loss = 1.0;
        switch (rule) {
          case BlottoRule::winner_take_all:
            loss = s > best ? 0.0 : 1.0;
            break;
          case BlottoRule::winner_take_all_split:
            loss = s > best ? 0.0 : (s == best ? 1.0 - 1.0 / (at_best + 1) : 1.0);
            break;
          case BlottoRule::proportional:
            loss = s + others == 0 ? 1.0 : 1.0 - static_cast<double>(s) / (s + others);
            break;
        }
        out[i][spec.index(h, s)] = loss;
      }
    }
  }
  return out;
}

/// Resource loss (1 + opponents on it) / |P|: the load a player would share.
inline std::vector<Eigen::VectorXd> congestion_losses(std::size_t dim, const std::vector<ActionVector>& joint) {
  const auto d = static_cast<Eigen::Index>(dim);
  Eigen::VectorXd load = Eigen::VectorXd::Zero(d);
  for (const auto& v : joint) {
    for (int j : v.active()) load[j] += 1.0;
  }
  const double p = static_cast<double>(joint.size());
  std::vector<Eigen::VectorXd> out;
  out.reserve(joint.size());
  for (const auto& v : joint) {
    Eigen::VectorXd l = (load.array() + 1.0) / p;
    for (int j : v.active()) l[j] -= 1.0 / p;
    out.push_back(l);
  }
  return out;
}

/// A repeated game in which every player shares one action family.
template <class Oracle>
class Game {
 public:
  using LossModel = std::function<std::vector<Eigen::VectorXd>(const std::vector<ActionVector>&)>;

  Game(Oracle oracle, std::size_t players, LossModel model)
      : oracle_(std::move(oracle)), players_(players), model_(std::move(model)) {
    if (players_ == 0) throw std::invalid_argument("game: need at least one player");
  }

  const Oracle& oracle() const { return oracle_; }
  std::size_t players() const { return players_; }
  std::size_t dim() const { return oracle_.dim(); }

  std::vector<Eigen::VectorXd> round_losses(const std::vector<ActionVector>& joint) const {
    if (joint.size() != players_) throw std::invalid_argument("round_losses: one action per player required");
    for (const auto& v : joint) validate_action(oracle_, v);
    return model_(joint);
  }

 private:
  Oracle oracle_;
  std::size_t players_;
  LossModel model_;
};

inline Game<BlottoOracle> make_blotto_game(const BlottoSpec& spec, std::size_t players, BlottoRule rule) {
  return Game<BlottoOracle>(BlottoOracle(spec), players, [spec, rule](const std::vector<ActionVector>& joint) {
    return blotto_losses(spec, rule, joint);
  });
}

template <class Oracle>
Game<Oracle> make_congestion_game(Oracle oracle, std::size_t players) {
  const std::size_t d = oracle.dim();
  return Game<Oracle>(std::move(oracle), players,
                      [d](const std::vector<ActionVector>& joint) { return congestion_losses(d, joint); });
}

/// Oblivious loss sequences for single-learner runs. bernoulli draws each
/// coordinate independently with the given means; worst_coordinate puts
/// loss 1 on the coordinate with the least loss so far (lowest index on ties).
struct AdversarySpec {
  enum class Kind { bernoulli, worst_coordinate };
  Kind kind = Kind::bernoulli;
  Eigen::VectorXd means;
};

constexpr std::uint64_t kAdversaryStream = 0xad7e55a5ULL;

class Adversary {
 public:
  Adversary(AdversarySpec spec, std::size_t dim, std::uint64_t seed)
      : spec_(std::move(spec)), rng_(seed), so_far_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))) {
    if (spec_.kind == AdversarySpec::Kind::bernoulli) {
      if (static_cast<std::size_t>(spec_.means.size()) != dim) {
        throw std::invalid_argument("adversary: means must have one entry per coordinate");
      }
      if (spec_.means.minCoeff() < 0.0 || spec_.means.maxCoeff() > 1.0) {
        throw std::invalid_argument("adversary: means must lie in [0, 1]");
      }
    }
  }

  Eigen::VectorXd next() {
    Eigen::VectorXd l = Eigen::VectorXd::Zero(so_far_.size());
    if (spec_.kind == AdversarySpec::Kind::bernoulli) {
      for (Eigen::Index j = 0; j < l.size(); ++j) l[j] = rng_.bernoulli(spec_.means[j]) ? 1.0 : 0.0;
    } else {
      Eigen::Index j = 0;
      so_far_.minCoeff(&j);
      l[j] = 1.0;
    }
    so_far_ += l;
    return l;
  }

 private:
  AdversarySpec spec_;
  Rng rng_;
  Eigen::VectorXd so_far_;
};

struct RunOptions {
  std::size_t threads = 1;
  std::size_t checkpoint_every = 0;
  std::function<void(const Trajectory&)> on_checkpoint;
};

struct RunResult {
  Trajectory trajectory;
  std::vector<PhaseTimes> learner_times;
  std::vector<std::size_t> pinv_fallbacks;
  double loss_seconds = 0.0;
  double regret_seconds = 0.0;
  double wall_seconds = 0.0;
};

namespace game_detail {

template <class Fn>
void for_players(std::size_t players, std::size_t threads, Fn&& fn) {
  if (threads <= 1 || players <= 1) {
    for (std::size_t i = 0; i < players; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (std::size_t i = w; i < players; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace game_detail

/// Runs T rounds: every player samples, losses are computed for the joint
/// action, then every player updates. Player i draws only from the stream
/// stream_seed(seed, i), so the result depends on the seed alone.
template <class Oracle>
RunResult run_dynamics(const Game<Oracle>& game, const std::vector<LearnerConfig>& configs, std::size_t T,
                       std::uint64_t seed, std::shared_ptr<const Spanner> spanner = nullptr,
                       const std::optional<AdversarySpec>& adversary = std::nullopt,
                       const RunOptions& options = {}) {
  const std::size_t players = game.players();
  if (configs.size() != players) throw std::invalid_argument("run_dynamics: one learner config per player");
  if (adversary && players != 1) throw std::invalid_argument("run_dynamics: an adversary needs exactly one player");
  const auto start = std::chrono::steady_clock::now();

  bool any_bandit = false;
  for (const auto& c : configs) any_bandit = any_bandit || c.feedback == Feedback::bandit;
  if (any_bandit && !spanner) spanner = std::make_shared<const Spanner>(build_spanner(game.oracle()));

  std::vector<Learner<Oracle>> learners;
  std::vector<Rng> rngs;
  for (std::size_t i = 0; i < players; ++i) {
    learners.emplace_back(game.oracle(), configs[i], spanner);
    rngs.emplace_back(stream_seed(seed, i));
  }
  std::optional<Adversary> adv;
  if (adversary) adv.emplace(*adversary, game.dim(), stream_seed(seed, kAdversaryStream));

  RunResult result;
  Trajectory& traj = result.trajectory;
  traj = Trajectory(players, game.dim());
  traj.actions.reserve(T);
  traj.realized.reserve(T);
  traj.cumulative_regret.reserve(T);

  std::vector<ActionVector> joint(players);
  for (std::size_t t = 0; t < T; ++t) {
    game_detail::for_players(players, options.threads, [&](std::size_t i) { joint[i] = learners[i].act(rngs[i]); });

    auto phase = std::chrono::steady_clock::now();
    const std::vector<Eigen::VectorXd> losses = adv ? std::vector<Eigen::VectorXd>{adv->next()} : game.round_losses(joint);
    if (adv) validate_action(game.oracle(), joint[0]);
    result.loss_seconds += game_detail::seconds_since(phase);

    game_detail::for_players(players, options.threads, [&](std::size_t i) { learners[i].observe(losses[i]); });

    phase = std::chrono::steady_clock::now();
    std::vector<double> realized(players);
    std::vector<double> regret(players);
    for (std::size_t i = 0; i < players; ++i) {
      realized[i] = joint[i].dot(losses[i]);
      traj.cumulative_loss[i] += losses[i];
      traj.cumulative_realized[i] += realized[i];
      regret[i] = realized_regret(traj.cumulative_realized[i], traj.cumulative_loss[i], game.oracle());
    }
    result.regret_seconds += game_detail::seconds_since(phase);
    traj.actions.push_back(joint);
    traj.realized.push_back(std::move(realized));
    traj.cumulative_regret.push_back(std::move(regret));
    if (options.checkpoint_every > 0 && options.on_checkpoint && (t + 1) % options.checkpoint_every == 0) {
      options.on_checkpoint(traj);
    }
  }
  for (const auto& l : learners) {
    result.learner_times.push_back(l.times());
    result.pinv_fallbacks.push_back(l.pinv_fallbacks());
  }
  result.wall_seconds = game_detail::seconds_since(start);
  return result;
}

/// Per-player CCE gap recomputed from the joint actions alone; adversarial
/// losses are regenerated from the seed.
template <class Oracle>
std::vector<double> game_cce_gap(const Game<Oracle>& game, const std::vector<std::vector<ActionVector>>& joint,
                                 std::uint64_t seed, const std::optional<AdversarySpec>& adversary = std::nullopt) {
  if (adversary) {
    Adversary adv(*adversary, game.dim(), stream_seed(seed, kAdversaryStream));
    return cce_gap(joint, 1, game.oracle(), [&adv](const std::vector<ActionVector>&) {
      return std::vector<Eigen::VectorXd>{adv.next()};
    });
  }
  return cce_gap(joint, game.players(), game.oracle(),
                 [&game](const std::vector<ActionVector>& round) { return game.round_losses(round); });
}

}  // namespace polylearn
