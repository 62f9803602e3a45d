#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "polylearn/core.hpp"
#include "polylearn/oracle.hpp"
#include "polylearn/rng.hpp"

namespace polylearn {

/// Source-to-sink paths of a DAG. Construction keeps only nodes and edges on
/// some s-t path; surviving edges are renumbered 0..d-1 in input order and
/// `original_id` maps them back.
class DagSpec {
 public:
  struct Edge {
    int tail;
    int head;
  };

  DagSpec() = default;
  DagSpec(int num_nodes, const std::vector<std::pair<int, int>>& edges, int source, int sink)
      : num_nodes_(num_nodes), source_(source), sink_(sink) {
    if (num_nodes < 1) throw std::invalid_argument("dag: need at least one node");
    auto check_node = [&](int x, const char* what) {
      if (x < 0 || x >= num_nodes) {
        throw std::invalid_argument(std::string("dag: ") + what + " " + std::to_string(x) +
                                    " outside 0.." + std::to_string(num_nodes - 1));
      }
    };
    check_node(source, "source");
    check_node(sink, "sink");
    if (source == sink) throw std::invalid_argument("dag: source equals sink");
    for (const auto& [u, v] : edges) {
      check_node(u, "edge endpoint");
      check_node(v, "edge endpoint");
      if (u == v) throw std::invalid_argument("dag: self-loop at node " + std::to_string(u));
    }
    const std::vector<int> full_order = topological_order(num_nodes, edges);

    // Reachable from s and co-reachable to t.
    std::vector<char> from_s(static_cast<std::size_t>(num_nodes), 0), to_t(static_cast<std::size_t>(num_nodes), 0);
    from_s[static_cast<std::size_t>(source)] = 1;
    to_t[static_cast<std::size_t>(sink)] = 1;
    std::vector<std::vector<int>> out(static_cast<std::size_t>(num_nodes)), in(static_cast<std::size_t>(num_nodes));
    for (std::size_t e = 0; e < edges.size(); ++e) {
      out[static_cast<std::size_t>(edges[e].first)].push_back(static_cast<int>(e));
      in[static_cast<std::size_t>(edges[e].second)].push_back(static_cast<int>(e));
    }
    for (int u : full_order) {
      if (!from_s[static_cast<std::size_t>(u)]) continue;
      for (int e : out[static_cast<std::size_t>(u)]) from_s[static_cast<std::size_t>(edges[static_cast<std::size_t>(e)].second)] = 1;
    }
    for (auto it = full_order.rbegin(); it != full_order.rend(); ++it) {
      if (!to_t[static_cast<std::size_t>(*it)]) continue;
      for (int e : in[static_cast<std::size_t>(*it)]) to_t[static_cast<std::size_t>(edges[static_cast<std::size_t>(e)].first)] = 1;
    }
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const auto [u, v] = edges[e];
      if (from_s[static_cast<std::size_t>(u)] && to_t[static_cast<std::size_t>(v)]) {
        edges_.push_back({u, v});
        original_id_.push_back(static_cast<int>(e));
      }
    }
    if (edges_.empty()) throw std::invalid_argument("dag: no path from source to sink");

    out_.assign(static_cast<std::size_t>(num_nodes), {});
    in_.assign(static_cast<std::size_t>(num_nodes), {});
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      out_[static_cast<std::size_t>(edges_[e].tail)].push_back(static_cast<int>(e));
      in_[static_cast<std::size_t>(edges_[e].head)].push_back(static_cast<int>(e));
    }
    position_.assign(static_cast<std::size_t>(num_nodes), -1);
    for (int u : full_order) {
      if (from_s[static_cast<std::size_t>(u)] && to_t[static_cast<std::size_t>(u)]) {
        position_[static_cast<std::size_t>(u)] = static_cast<int>(order_.size());
        order_.push_back(u);
      }
    }
    // Longest path length in edges.
    std::vector<int> depth(static_cast<std::size_t>(num_nodes), 0);
    for (int u : order_) {
      for (int e : out_[static_cast<std::size_t>(u)]) {
        auto& dv = depth[static_cast<std::size_t>(edges_[static_cast<std::size_t>(e)].head)];
        dv = std::max(dv, depth[static_cast<std::size_t>(u)] + 1);
      }
    }
    max_length_ = depth[static_cast<std::size_t>(sink)];
  }

  int num_nodes() const { return num_nodes_; }
  int source() const { return source_; }
  int sink() const { return sink_; }
  std::size_t num_edges() const { return edges_.size(); }
  const Edge& edge(int e) const { return edges_[static_cast<std::size_t>(e)]; }
  const std::vector<Edge>& edges() const { return edges_; }
  int original_id(int e) const { return original_id_[static_cast<std::size_t>(e)]; }
  const std::vector<int>& out_edges(int u) const { return out_[static_cast<std::size_t>(u)]; }
  const std::vector<int>& in_edges(int u) const { return in_[static_cast<std::size_t>(u)]; }
  /// Nodes on some s-t path, in topological order.
  const std::vector<int>& order() const { return order_; }
  int position(int u) const { return position_[static_cast<std::size_t>(u)]; }
  int max_length() const { return max_length_; }

 private:
  static std::vector<int> topological_order(int n, const std::vector<std::pair<int, int>>& edges) {
    std::vector<int> indegree(static_cast<std::size_t>(n), 0);
    std::vector<std::vector<int>> succ(static_cast<std::size_t>(n));
    for (const auto& [u, v] : edges) {
      succ[static_cast<std::size_t>(u)].push_back(v);
      ++indegree[static_cast<std::size_t>(v)];
    }
    std::priority_queue<int, std::vector<int>, std::greater<>> ready;
    for (int u = 0; u < n; ++u) {
      if (indegree[static_cast<std::size_t>(u)] == 0) ready.push(u);
    }
    std::vector<int> order;
    while (!ready.empty()) {
      const int u = ready.top();
      ready.pop();
      order.push_back(u);
      for (int v : succ[static_cast<std::size_t>(u)]) {
        if (--indegree[static_cast<std::size_t>(v)] == 0) ready.push(v);
      }
    }
    if (static_cast<int>(order.size()) != n) throw std::invalid_argument("dag: graph has a cycle");
    return order;
  }

  int num_nodes_ = 0;
  int source_ = 0;
  int sink_ = 0;
  std::vector<Edge> edges_;
  std::vector<int> original_id_;
  std::vector<std::vector<int>> out_;
  std::vector<std::vector<int>> in_;
  std::vector<int> order_;
  std::vector<int> position_;
  int max_length_ = 0;
};

/// Path kernels by weight pushing. Paths have different lengths, so weights
/// cannot be rescaled globally; moments and samplers work with log weights.
class DagOracle {
 public:
  explicit DagOracle(DagSpec spec) : spec_(std::move(spec)) {}

  const DagSpec& spec() const { return spec_; }
  std::size_t dim() const { return spec_.num_edges(); }
  std::size_t max_active() const { return static_cast<std::size_t>(spec_.max_length()); }

  /// F(s) of the backward recursion F(u) = sum_{u->v} C mask F(v), F(t) = 1.
  double kernel(const Eigen::VectorXd& weights, const Mask& mask) const {
    check_positive_weights(weights, dim(), "dag_kernel");
    const Eigen::VectorXd c = mask.apply(weights);
    std::vector<double> f(static_cast<std::size_t>(spec_.num_nodes()), 0.0);
    f[static_cast<std::size_t>(spec_.sink())] = 1.0;
    const auto& order = spec_.order();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if (*it == spec_.sink()) continue;
      double total = 0.0;
      for (int e : spec_.out_edges(*it)) total += c[e] * f[static_cast<std::size_t>(spec_.edge(e).head)];
      f[static_cast<std::size_t>(*it)] = total;
    }
    return f[static_cast<std::size_t>(spec_.source())];
  }

  KernelBatch first_moment_batch(const Eigen::VectorXd& weights) const {
    return batch(log_of(weights), false);
  }
  KernelBatch first_moment_batch(const ExpWeights& w) const { return batch(w.log_weights(), false); }
  KernelBatch second_moment_batch(const Eigen::VectorXd& weights) const {
    return batch(log_of(weights), true);
  }
  KernelBatch second_moment_batch(const ExpWeights& w) const { return batch(w.log_weights(), true); }

  /// Pr[e in path] = G(u) C(e) F(v) / F(s).
  Eigen::VectorXd first_moments(const Eigen::VectorXd& weights) const {
    return marginals(log_of(weights));
  }
  Eigen::VectorXd first_moments(const ExpWeights& w) const { return marginals(w.log_weights()); }

  /// Pr[e, e' in path] = G(u) C(e) M(v, u') C(e') F(v') / F(s) for e before e'.
  Eigen::MatrixXd second_moments(const Eigen::VectorXd& weights) const {
    return co_occurrence(log_of(weights));
  }
  Eigen::MatrixXd second_moments(const ExpWeights& w) const { return co_occurrence(w.log_weights()); }

  ActionVector sample(const Eigen::VectorXd& weights, Rng& rng) const {
    return walk(log_of(weights), rng);
  }
  ActionVector sample(const ExpWeights& w, Rng& rng) const { return walk(w.log_weights(), rng); }

  /// Every s-t path with probability 1 / (number of paths).
  ActionVector uniform_sample(Rng& rng) const {
    std::vector<double> count(static_cast<std::size_t>(spec_.num_nodes()), 0.0);
    count[static_cast<std::size_t>(spec_.sink())] = 1.0;
    const auto& order = spec_.order();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if (*it == spec_.sink()) continue;
      double total = 0.0;
      for (int e : spec_.out_edges(*it)) total += count[static_cast<std::size_t>(spec_.edge(e).head)];
      count[static_cast<std::size_t>(*it)] = total;
    }
    std::vector<int> active;
    std::vector<double> probs;
    int u = spec_.source();
    while (u != spec_.sink()) {
      const auto& outs = spec_.out_edges(u);
      probs.assign(outs.size(), 0.0);
      for (std::size_t i = 0; i < outs.size(); ++i) {
        probs[i] = count[static_cast<std::size_t>(spec_.edge(outs[i]).head)];
      }
      const int e = outs[rng.categorical(probs)];
      active.push_back(e);
      u = spec_.edge(e).head;
    }
    return ActionVector(dim(), std::move(active));
  }

  /// Number of s-t paths.
  double path_count() const { return kernel(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(dim())), Mask::none()); }

  /// Least-loss path; at each node the lowest-id optimal edge is taken.
  ActionVector best_response(const Eigen::VectorXd& losses) const {
    if (losses.size() != static_cast<Eigen::Index>(dim())) {
      throw std::invalid_argument("dag_best_response: loss length mismatch");
    }
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(static_cast<std::size_t>(spec_.num_nodes()), inf);
    dist[static_cast<std::size_t>(spec_.sink())] = 0.0;
    const auto& order = spec_.order();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if (*it == spec_.sink()) continue;
      double best = inf;
      for (int e : spec_.out_edges(*it)) {
        best = std::min(best, losses[e] + dist[static_cast<std::size_t>(spec_.edge(e).head)]);
      }
      dist[static_cast<std::size_t>(*it)] = best;
    }
    std::vector<int> active;
    int u = spec_.source();
    while (u != spec_.sink()) {
      int chosen = -1;
      for (int e : spec_.out_edges(u)) {
        if (losses[e] + dist[static_cast<std::size_t>(spec_.edge(e).head)] == dist[static_cast<std::size_t>(u)]) {
          chosen = e;
          break;
        }
      }
      active.push_back(chosen);
      u = spec_.edge(chosen).head;
    }
    return ActionVector(dim(), std::move(active));
  }

  /// Paths containing every fixed-1 edge and no fixed-0 edge: the forced
  /// edges must chain in topological order, joined by free segments.
  double conditional_kernel(const Eigen::VectorXd& weights, Fixing fixed) const {
    std::vector<int> forced;
    for (std::size_t e = 0; e < dim(); ++e) {
      if (fixed[e] == 1) forced.push_back(static_cast<int>(e));
    }
    std::sort(forced.begin(), forced.end(), [&](int a, int b) {
      return spec_.position(spec_.edge(a).tail) < spec_.position(spec_.edge(b).tail);
    });
    auto segment = [&](int from, int to) {
      std::vector<double> g(static_cast<std::size_t>(spec_.num_nodes()), 0.0);
      g[static_cast<std::size_t>(from)] = 1.0;
      for (int u : spec_.order()) {
        if (spec_.position(u) < spec_.position(from)) continue;
        if (u == to) break;
        for (int e : spec_.out_edges(u)) {
          if (fixed[static_cast<std::size_t>(e)] == -1) {
            g[static_cast<std::size_t>(spec_.edge(e).head)] += g[static_cast<std::size_t>(u)] * weights[e];
          }
        }
      }
      return g[static_cast<std::size_t>(to)];
    };
    double total = 1.0;
    int at = spec_.source();
    for (int e : forced) {
      total *= segment(at, spec_.edge(e).tail) * weights[e];
      at = spec_.edge(e).head;
      if (total == 0.0) return 0.0;
    }
    return total * segment(at, spec_.sink());
  }

 private:
  static constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  Eigen::VectorXd log_of(const Eigen::VectorXd& weights) const {
    check_positive_weights(weights, dim(), "dag oracle");
    return weights.array().log().matrix();
  }

  /// Log backward weights F(u): paths u -> t.
  std::vector<double> backward(const Eigen::VectorXd& logc) const {
    std::vector<double> f(static_cast<std::size_t>(spec_.num_nodes()), kNegInf);
    f[static_cast<std::size_t>(spec_.sink())] = 0.0;
    const auto& order = spec_.order();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if (*it == spec_.sink()) continue;
      double total = kNegInf;
      for (int e : spec_.out_edges(*it)) {
        total = log_add(total, logc[e] + f[static_cast<std::size_t>(spec_.edge(e).head)]);
      }
      f[static_cast<std::size_t>(*it)] = total;
    }
    return f;
  }

  /// Log forward weights from `from`: paths from -> u.
  std::vector<double> forward(const Eigen::VectorXd& logc, int from) const {
    std::vector<double> g(static_cast<std::size_t>(spec_.num_nodes()), kNegInf);
    g[static_cast<std::size_t>(from)] = 0.0;
    for (int u : spec_.order()) {
      if (spec_.position(u) < spec_.position(from)) continue;
      const double gu = g[static_cast<std::size_t>(u)];
      if (gu == kNegInf) continue;
      for (int e : spec_.out_edges(u)) {
        auto& gv = g[static_cast<std::size_t>(spec_.edge(e).head)];
        gv = log_add(gv, gu + logc[e]);
      }
    }
    return g;
  }

  Eigen::VectorXd marginals(const Eigen::VectorXd& logc) const {
    const std::vector<double> f = backward(logc);
    const std::vector<double> g = forward(logc, spec_.source());
    const double log_total = f[static_cast<std::size_t>(spec_.source())];
    Eigen::VectorXd x(static_cast<Eigen::Index>(dim()));
    for (std::size_t e = 0; e < dim(); ++e) {
      const auto& ed = spec_.edge(static_cast<int>(e));
      x[static_cast<Eigen::Index>(e)] = std::exp(g[static_cast<std::size_t>(ed.tail)] + logc[static_cast<Eigen::Index>(e)] +
                                                 f[static_cast<std::size_t>(ed.head)] - log_total);
    }
    return x;
  }

  Eigen::MatrixXd co_occurrence(const Eigen::VectorXd& logc) const {
    const std::vector<double> f = backward(logc);
    const std::vector<double> g = forward(logc, spec_.source());
    const double log_total = f[static_cast<std::size_t>(spec_.source())];
    const auto d = static_cast<Eigen::Index>(dim());
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(d, d);
    // M(v, .) memoized per distinct left endpoint head v.
    std::vector<std::vector<double>> between(static_cast<std::size_t>(spec_.num_nodes()));
    for (Eigen::Index e = 0; e < d; ++e) {
      const auto& a = spec_.edge(static_cast<int>(e));
      const double left = g[static_cast<std::size_t>(a.tail)] + logc[e];
      sigma(e, e) = std::exp(left + f[static_cast<std::size_t>(a.head)] - log_total);
      auto& m = between[static_cast<std::size_t>(a.head)];
      if (m.empty()) m = forward(logc, a.head);
      for (Eigen::Index ep = 0; ep < d; ++ep) {
        if (ep == e) continue;
        const auto& b = spec_.edge(static_cast<int>(ep));
        if (spec_.position(a.head) > spec_.position(b.tail)) continue;
        const double mid = m[static_cast<std::size_t>(b.tail)];
        if (mid == kNegInf) continue;
        const double p = std::exp(left + mid + logc[ep] + f[static_cast<std::size_t>(b.head)] - log_total);
        sigma(e, ep) = p;
        sigma(ep, e) = p;
      }
    }
    return sigma;
  }

  KernelBatch batch(const Eigen::VectorXd& logc, bool with_pairs) const {
    KernelBatch out;
    out.log_total = backward(logc)[static_cast<std::size_t>(spec_.source())];
    const auto d = static_cast<Eigen::Index>(dim());
    if (!with_pairs) {
      out.single = Eigen::VectorXd::Ones(d) - marginals(logc);
      out.single = out.single.cwiseMax(0.0);
      return out;
    }
    const Eigen::MatrixXd sigma = co_occurrence(logc);
    const Eigen::VectorXd x = sigma.diagonal();
    out.single = (Eigen::VectorXd::Ones(d) - x).cwiseMax(0.0);
    out.pair.resize(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
      for (Eigen::Index jp = 0; jp < d; ++jp) {
        out.pair(j, jp) = j == jp ? out.single[j]
                                  : std::max(0.0, 1.0 - x[j] - x[jp] + sigma(j, jp));
      }
    }
    return out;
  }

  /// Weight-pushing walk: from u take u->v with probability C(u->v) F(v) / F(u).
  ActionVector walk(const Eigen::VectorXd& logc, Rng& rng) const {
    const std::vector<double> f = backward(logc);
    std::vector<int> active;
    std::vector<double> probs;
    int u = spec_.source();
    while (u != spec_.sink()) {
      const auto& outs = spec_.out_edges(u);
      probs.assign(outs.size(), 0.0);
      for (std::size_t i = 0; i < outs.size(); ++i) {
        probs[i] = std::exp(logc[outs[i]] + f[static_cast<std::size_t>(spec_.edge(outs[i]).head)] -
                            f[static_cast<std::size_t>(u)]);
      }
      const int e = outs[rng.categorical(probs)];
      active.push_back(e);
      u = spec_.edge(e).head;
    }
    return ActionVector(dim(), std::move(active));
  }

  DagSpec spec_;
};

}  // namespace polylearn
