#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "polylearn/core.hpp"

namespace polylearn {

/// Joint play of a repeated game. Loss vectors are kept only as per-player
/// running sums, which is all the hindsight comparisons need.
struct Trajectory {
  std::size_t players = 0;
  std::size_t dim = 0;
  std::vector<std::vector<ActionVector>> actions;     // [round][player]
  std::vector<std::vector<double>> realized;          // [round][player]
  std::vector<std::vector<double>> cumulative_regret;  // [round][player]
  std::vector<Eigen::VectorXd> cumulative_loss;       // [player], sum over rounds
  std::vector<double> cumulative_realized;            // [player]

  std::size_t rounds() const { return actions.size(); }

  Trajectory() = default;
  Trajectory(std::size_t num_players, std::size_t d)
      : players(num_players),
        dim(d),
        cumulative_loss(num_players, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d))),
        cumulative_realized(num_players, 0.0) {}
};

/// sum_t v_t . l_t - min_v v . sum_t l_t.
template <class Oracle>
double realized_regret(double cumulative_realized, const Eigen::VectorXd& cumulative_loss,
                       const Oracle& oracle) {
  const ActionVector best = oracle.best_response(cumulative_loss);
  return cumulative_realized - best.dot(cumulative_loss);
}

template <class Oracle>
double realized_regret(const Trajectory& trajectory, std::size_t player, const Oracle& oracle) {
  if (player >= trajectory.players) throw std::out_of_range("realized_regret: no such player");
  return realized_regret(trajectory.cumulative_realized[player], trajectory.cumulative_loss[player],
                         oracle);
}

/// Per-player CCE gap of the empirical joint distribution. `losses` maps one
/// round's joint actions to every player's coordinate loss vector, so the gap
/// is recomputed from the actions alone.
template <class Oracle, class LossFn>
std::vector<double> cce_gap(const std::vector<std::vector<ActionVector>>& joint_actions,
                            std::size_t players, const Oracle& oracle, LossFn&& losses) {
  if (joint_actions.empty()) throw std::invalid_argument("cce_gap: empty trajectory");
  const auto d = static_cast<Eigen::Index>(oracle.dim());
  std::vector<Eigen::VectorXd> total(players, Eigen::VectorXd::Zero(d));
  std::vector<double> incurred(players, 0.0);
  for (const auto& round : joint_actions) {
    const std::vector<Eigen::VectorXd> l = losses(round);
    for (std::size_t i = 0; i < players; ++i) {
      total[i] += l[i];
      incurred[i] += round[i].dot(l[i]);
    }
  }
  const double t = static_cast<double>(joint_actions.size());
  std::vector<double> gap(players);
  for (std::size_t i = 0; i < players; ++i) {
    gap[i] = realized_regret(incurred[i], total[i], oracle) / t;
  }
  return gap;
}

}  // namespace polylearn
