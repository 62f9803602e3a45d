#pragma once

// Brute-force reference enumerations used by tests and `verify`. These never
// call the family oracles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "polylearn/blotto.hpp"
#include "polylearn/core.hpp"
#include "polylearn/dag.hpp"
#include "polylearn/matroid.hpp"
#include "polylearn/mset.hpp"
#include "polylearn/rng.hpp"

namespace polylearn::testing {

inline std::vector<ActionVector> enumerate_blotto(const BlottoSpec& spec) {
  std::vector<ActionVector> out;
  std::vector<int> active;
  std::function<void(int, int)> rec = [&](int h, int left) {
    if (h == spec.k - 1) {
      active.push_back(h * (spec.n + 1) + left);
      out.emplace_back(static_cast<std::size_t>(spec.dim()), active);
      active.pop_back();
      return;
    }
    for (int s = 0; s <= left; ++s) {
      active.push_back(h * (spec.n + 1) + s);
      rec(h + 1, left - s);
      active.pop_back();
    }
  };
  rec(0, spec.n);
  return out;
}

inline std::vector<ActionVector> enumerate_msets(const MSetSpec& spec) {
  std::vector<ActionVector> out;
  std::vector<int> active;
  std::function<void(int)> rec = [&](int next) {
    if (static_cast<int>(active.size()) == spec.m) {
      out.emplace_back(static_cast<std::size_t>(spec.d), active);
      return;
    }
    for (int h = next; h < spec.d; ++h) {
      active.push_back(h);
      rec(h + 1);
      active.pop_back();
    }
  };
  rec(0);
  return out;
}

/// Every (|V|-1)-edge subset without a cycle.
inline std::vector<ActionVector> enumerate_trees(const WeightedGraph& g) {
  std::vector<ActionVector> out;
  const int need = g.num_vertices() - 1;
  const int d = static_cast<int>(g.num_edges());
  std::vector<int> active;
  std::function<void(int)> rec = [&](int next) {
    if (static_cast<int>(active.size()) == need) {
      UnionFind uf(g.num_vertices());
      for (int e : active) {
        if (!uf.unite(g.u(e), g.v(e))) return;
      }
      out.emplace_back(static_cast<std::size_t>(d), active);
      return;
    }
    if (d - next < need - static_cast<int>(active.size())) return;
    for (int e = next; e < d; ++e) {
      active.push_back(e);
      rec(e + 1);
      active.pop_back();
    }
  };
  rec(0);
  return out;
}

/// Every source-to-sink path by depth-first search.
inline std::vector<ActionVector> enumerate_paths(const DagSpec& dag) {
  std::vector<ActionVector> out;
  std::vector<int> active;
  std::function<void(int)> rec = [&](int u) {
    if (u == dag.sink()) {
      out.emplace_back(dag.num_edges(), active);
      return;
    }
    for (std::size_t e = 0; e < dag.num_edges(); ++e) {
      if (dag.edge(static_cast<int>(e)).tail != u) continue;
      active.push_back(static_cast<int>(e));
      rec(dag.edge(static_cast<int>(e)).head);
      active.pop_back();
    }
  };
  rec(dag.source());
  return out;
}

/// p(v) proportional to prod_{j in v} C(j).
inline std::vector<double> product_distribution(const std::vector<ActionVector>& actions,
                                                const Eigen::VectorXd& weights) {
  std::vector<double> p(actions.size());
  double z = 0.0;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    double prod = 1.0;
    for (int j : actions[i].active()) prod *= weights[j];
    p[i] = prod;
    z += prod;
  }
  for (double& x : p) x /= z;
  return p;
}

inline Eigen::VectorXd enumerated_first_moment(const std::vector<ActionVector>& actions,
                                               const std::vector<double>& p) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(actions.front().dim()));
  for (std::size_t i = 0; i < actions.size(); ++i) {
    for (int j : actions[i].active()) x[j] += p[i];
  }
  return x;
}

inline Eigen::MatrixXd enumerated_second_moment(const std::vector<ActionVector>& actions,
                                                const std::vector<double>& p) {
  return autocorrelation(actions, p);
}

/// Total-variation distance between a sample histogram and exact probabilities.
inline double total_variation(const std::vector<ActionVector>& actions, const std::vector<double>& p,
                              const std::map<std::vector<int>, long>& counts, long draws) {
  double tv = 0.0;
  long matched = 0;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const auto it = counts.find(actions[i].active());
    const long c = it == counts.end() ? 0 : it->second;
    matched += c;
    tv += std::abs(static_cast<double>(c) / static_cast<double>(draws) - p[i]);
  }
  tv += static_cast<double>(draws - matched) / static_cast<double>(draws);
  return 0.5 * tv;
}

inline Eigen::VectorXd random_weights(std::size_t d, Rng& rng, double lo = 0.25, double hi = 4.0) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(d));
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    w[j] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * rng.uniform());
  }
  return w;
}

/// Connected random multigraph-free graph: a random spanning tree plus extra edges.
inline WeightedGraph random_graph(int vertices, int edges, Rng& rng) {
  std::vector<std::pair<int, int>> list;
  std::vector<std::vector<char>> used(static_cast<std::size_t>(vertices),
                                      std::vector<char>(static_cast<std::size_t>(vertices), 0));
  for (int v = 1; v < vertices; ++v) {
    const int u = static_cast<int>(rng.index(static_cast<std::size_t>(v)));
    list.push_back({u, v});
    used[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] = used[static_cast<std::size_t>(v)][static_cast<std::size_t>(u)] = 1;
  }
  const int max_edges = vertices * (vertices - 1) / 2;
  edges = std::min(edges, max_edges);
  while (static_cast<int>(list.size()) < edges) {
    const int u = static_cast<int>(rng.index(static_cast<std::size_t>(vertices)));
    const int v = static_cast<int>(rng.index(static_cast<std::size_t>(vertices)));
    if (u == v || used[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)]) continue;
    used[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] = used[static_cast<std::size_t>(v)][static_cast<std::size_t>(u)] = 1;
    list.push_back({std::min(u, v), std::max(u, v)});
  }
  // Shuffle edge ids so tree edges are not always first.
  for (std::size_t i = list.size(); i > 1; --i) std::swap(list[i - 1], list[rng.index(i)]);
  return WeightedGraph(vertices, list);
}

/// Random layered DAG from node 0 to node nodes-1 with forward edges only.
inline DagSpec random_dag(int nodes, int edges, Rng& rng) {
  std::vector<std::pair<int, int>> list;
  for (int v = 1; v < nodes; ++v) list.push_back({v - 1, v});
  std::vector<std::vector<char>> used(static_cast<std::size_t>(nodes), std::vector<char>(static_cast<std::size_t>(nodes), 0));
  for (const auto& [u, v] : list) used[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] = 1;
  const int max_edges = nodes * (nodes - 1) / 2;
  edges = std::min(edges, max_edges);
  while (static_cast<int>(list.size()) < edges) {
    int u = static_cast<int>(rng.index(static_cast<std::size_t>(nodes)));
    int v = static_cast<int>(rng.index(static_cast<std::size_t>(nodes)));
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    if (used[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)]) continue;
    used[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] = 1;
    list.push_back({u, v});
  }
  for (std::size_t i = list.size(); i > 1; --i) std::swap(list[i - 1], list[rng.index(i)]);
  return DagSpec(nodes, list, 0, nodes - 1);
}

/// |a - b| <= rel |b|, or |a - b| <= floor when b is (near) zero.
inline bool close(double a, double b, double rel, double floor) {
  return std::abs(a - b) <= std::max(rel * std::abs(b), floor);
}

}  // namespace polylearn::testing
