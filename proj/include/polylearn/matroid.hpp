#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "polylearn/core.hpp"
#include "polylearn/oracle.hpp"
#include "polylearn/rng.hpp"

namespace polylearn {

class UnionFind {
 public:
  explicit UnionFind(int n = 0) : parent_(static_cast<std::size_t>(n)) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int x) {
    while (parent_[static_cast<std::size_t>(x)] != x) {
      parent_[static_cast<std::size_t>(x)] = parent_[static_cast<std::size_t>(parent_[static_cast<std::size_t>(x)])];
      x = parent_[static_cast<std::size_t>(x)];
    }
    return x;
  }
  /// False when already joined.
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (b < a) std::swap(a, b);
    parent_[static_cast<std::size_t>(b)] = a;
    return true;
  }

 private:
  std::vector<int> parent_;
};

namespace matroid_detail {

struct Link {
  int u;
  int v;
};

/// Bridges of a multigraph; `skip` removes one edge first. Parallel edges are
/// never bridges because the DFS skips the tree edge by id, not by endpoint.
inline std::vector<char> bridges(int n, const std::vector<Link>& links, int skip = -1) {
  std::vector<std::vector<std::pair<int, int>>> adj(static_cast<std::size_t>(n));
  for (std::size_t e = 0; e < links.size(); ++e) {
    if (static_cast<int>(e) == skip) continue;
    adj[static_cast<std::size_t>(links[e].u)].push_back({links[e].v, static_cast<int>(e)});
    adj[static_cast<std::size_t>(links[e].v)].push_back({links[e].u, static_cast<int>(e)});
  }
  std::vector<char> is_bridge(links.size(), 0);
  std::vector<int> disc(static_cast<std::size_t>(n), -1), low(static_cast<std::size_t>(n), 0);
  int timer = 0;
  struct Frame {
    int node;
    int via;
    std::size_t next;
  };
  for (int root = 0; root < n; ++root) {
    if (disc[static_cast<std::size_t>(root)] != -1) continue;
    std::vector<Frame> stack{{root, -1, 0}};
    disc[static_cast<std::size_t>(root)] = low[static_cast<std::size_t>(root)] = timer++;
    while (!stack.empty()) {
      Frame& f = stack.back();
      const auto& nbrs = adj[static_cast<std::size_t>(f.node)];
      if (f.next < nbrs.size()) {
        const auto [w, e] = nbrs[f.next++];
        if (e == f.via) continue;
        if (disc[static_cast<std::size_t>(w)] == -1) {
          disc[static_cast<std::size_t>(w)] = low[static_cast<std::size_t>(w)] = timer++;
          stack.push_back({w, e, 0});
        } else {
          low[static_cast<std::size_t>(f.node)] = std::min(low[static_cast<std::size_t>(f.node)], disc[static_cast<std::size_t>(w)]);
        }
      } else {
        const Frame done = f;
        stack.pop_back();
        if (!stack.empty()) {
          const int parent = stack.back().node;
          low[static_cast<std::size_t>(parent)] = std::min(low[static_cast<std::size_t>(parent)], low[static_cast<std::size_t>(done.node)]);
          if (low[static_cast<std::size_t>(done.node)] > disc[static_cast<std::size_t>(parent)]) {
            is_bridge[static_cast<std::size_t>(done.via)] = 1;
          }
        }
      }
    }
  }
  return is_bridge;
}

inline bool connected(int n, const std::vector<Link>& links, const Eigen::VectorXd& weights) {
  UnionFind uf(n);
  int components = n;
  for (std::size_t e = 0; e < links.size(); ++e) {
    if (weights[static_cast<Eigen::Index>(e)] > 0.0 && uf.unite(links[e].u, links[e].v)) --components;
  }
  return components == 1;
}

inline Eigen::MatrixXd laplacian(int n, const std::vector<Link>& links, const Eigen::VectorXd& weights) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t e = 0; e < links.size(); ++e) {
    const double w = weights[static_cast<Eigen::Index>(e)];
    const int u = links[e].u, v = links[e].v;
    a(u, u) += w;
    a(v, v) += w;
    a(u, v) -= w;
    a(v, u) -= w;
  }
  return a;
}

/// The Laplacian with row and column `anchor` deleted.
inline Eigen::MatrixXd minor(const Eigen::MatrixXd& a, int anchor) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd m(n - 1, n - 1);
  for (Eigen::Index i = 0, ri = 0; i < n; ++i) {
    if (i == anchor) continue;
    for (Eigen::Index j = 0, rj = 0; j < n; ++j) {
      if (j == anchor) continue;
      m(ri, rj++) = a(i, j);
    }
    ++ri;
  }
  return m;
}

inline double log_abs_det(const Eigen::MatrixXd& m) {
  if (m.rows() == 0) return 0.0;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  const auto& packed = lu.matrixLU();
  double s = 0.0;
  for (Eigen::Index i = 0; i < packed.rows(); ++i) s += std::log(std::abs(packed(i, i)));
  return s;
}

/// log of the weighted spanning-tree sum (-inf when disconnected).
inline double log_tree_sum(int n, const std::vector<Link>& links, const Eigen::VectorXd& weights,
                           int anchor = 0) {
  if (!connected(n, links, weights)) return -std::numeric_limits<double>::infinity();
  return log_abs_det(minor(laplacian(n, links, weights), anchor));
}

inline int reduced(int vertex, int anchor) { return vertex < anchor ? vertex : vertex - 1; }

}  // namespace matroid_detail

/// Connected undirected multigraph without self-loops; edge ids are 0..d-1.
class WeightedGraph {
 public:
  WeightedGraph() = default;
  WeightedGraph(int num_vertices, std::vector<std::pair<int, int>> edges)
      : num_vertices_(num_vertices) {
    if (num_vertices < 1) throw std::invalid_argument("graph: need at least one vertex");
    for (const auto& [u, v] : edges) {
      if (u < 0 || v < 0 || u >= num_vertices || v >= num_vertices) {
        throw std::invalid_argument("graph: edge (" + std::to_string(u) + ", " + std::to_string(v) +
                                    ") has an endpoint outside 0.." + std::to_string(num_vertices - 1));
      }
      if (u == v) throw std::invalid_argument("graph: self-loop at vertex " + std::to_string(u));
      links_.push_back({u, v});
    }
    if (!matroid_detail::connected(num_vertices, links_, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(links_.size())))) {
      throw std::invalid_argument("graph: not connected");
    }
  }

  int num_vertices() const { return num_vertices_; }
  std::size_t num_edges() const { return links_.size(); }
  int u(int e) const { return links_[static_cast<std::size_t>(e)].u; }
  int v(int e) const { return links_[static_cast<std::size_t>(e)].v; }
  const std::vector<matroid_detail::Link>& links() const { return links_; }

  Eigen::MatrixXd laplacian(const Eigen::VectorXd& weights) const {
    return matroid_detail::laplacian(num_vertices_, links_, weights);
  }

 private:
  int num_vertices_ = 0;
  std::vector<matroid_detail::Link> links_;
};

/// Contraction state of the spanning-tree sampler: vertices merged by
/// included edges, undecided parallel edges grouped into one meta-edge whose
/// weight is the sum of its members.
class MetaGraph {
 public:
  MetaGraph(const WeightedGraph& graph, const Eigen::VectorXd& weights)
      : graph_(&graph), weights_(&weights), uf_(graph.num_vertices()) {
    for (int e = 0; e < static_cast<int>(graph.num_edges()); ++e) {
      groups_[key(graph.u(e), graph.v(e))].push_back(e);
    }
  }

  /// Number of meta-nodes.
  int num_nodes() const {
    int count = 0;
    for (int x = 0; x < graph_->num_vertices(); ++x) count += uf_.find(x) == x;
    return count;
  }
  const std::map<std::pair<int, int>, std::vector<int>>& groups() const { return groups_; }
  double log_included_weight() const { return log_weight_; }

  /// log of (included weight) * (spanning-tree sum of the meta-graph).
  double log_kernel() const {
    const auto [index, links, w] = compact();
    return log_weight_ + matroid_detail::log_tree_sum(static_cast<int>(index.size()), links, w);
  }

  /// Probability that edge j joins the tree given all earlier decisions.
  double inclusion_probability(int j) const {
    const int a = uf_.find(graph_->u(j)), b = uf_.find(graph_->v(j));
    if (a == b) return 0.0;
    const auto it = groups_.find(key(a, b));
    if (it == groups_.end() || std::find(it->second.begin(), it->second.end(), j) == it->second.end()) {
      throw std::logic_error("meta-graph: edge " + std::to_string(j) + " is not undecided");
    }
    double group_weight = 0.0;
    for (int e : it->second) group_weight += (*weights_)[e];
    const double cj = (*weights_)[j];

    const auto [index, links, w] = compact();
    std::size_t slot = 0;
    for (auto g = groups_.begin(); g != it; ++g) ++slot;
    const int n = static_cast<int>(index.size());
    if (matroid_detail::bridges(n, links)[slot]) return cj / group_weight;

    // C_j times the effective resistance between the two meta-nodes.
    const int ia = index.at(a), ib = index.at(b);
    const Eigen::MatrixXd m = matroid_detail::minor(matroid_detail::laplacian(n, links, w), ia);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n - 1);
    rhs[matroid_detail::reduced(ib, ia)] = 1.0;
    const Eigen::VectorXd x = Eigen::PartialPivLU<Eigen::MatrixXd>(m).solve(rhs);
    const double p = cj * x[matroid_detail::reduced(ib, ia)];
    if (!std::isfinite(p)) throw std::domain_error("meta-graph: conditional kernel vanished");
    return std::clamp(p, 0.0, 1.0);
  }

  /// Keep edge j: contract its endpoints, merge parallel meta-edges, and drop
  /// the meta-edges that became self-loops.
  void include(int j) {
    const int a = uf_.find(graph_->u(j)), b = uf_.find(graph_->v(j));
    if (a == b) throw std::logic_error("meta-graph: including an edge that closes a cycle");
    log_weight_ += std::log((*weights_)[j]);
    uf_.unite(a, b);
    std::map<std::pair<int, int>, std::vector<int>> merged;
    for (auto& [k, members] : groups_) {
      const int x = uf_.find(k.first), y = uf_.find(k.second);
      if (x == y) continue;
      auto& dest = merged[key(x, y)];
      for (int e : members) {
        if (e != j) dest.push_back(e);
      }
    }
    for (auto& [k, members] : merged) std::sort(members.begin(), members.end());
    groups_ = std::move(merged);
  }

  /// Drop edge j from its meta-edge; an emptied meta-edge disappears.
  void exclude(int j) {
    const int a = uf_.find(graph_->u(j)), b = uf_.find(graph_->v(j));
    if (a == b) return;
    auto it = groups_.find(key(a, b));
    if (it == groups_.end()) return;
    auto& members = it->second;
    members.erase(std::remove(members.begin(), members.end(), j), members.end());
    if (members.empty()) groups_.erase(it);
  }

 private:
  static std::pair<int, int> key(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

  struct Compact {
    std::map<int, int> index;
    std::vector<matroid_detail::Link> links;
    Eigen::VectorXd weights;
  };

  /// Meta-nodes renumbered 0..n-1 with one link per meta-edge, in key order.
  Compact compact() const {
    Compact c;
    for (int x = 0; x < graph_->num_vertices(); ++x) {
      const int r = uf_.find(x);
      if (!c.index.count(r)) c.index.emplace(r, static_cast<int>(c.index.size()));
    }
    c.weights.resize(static_cast<Eigen::Index>(groups_.size()));
    Eigen::Index i = 0;
    for (const auto& [k, members] : groups_) {
      c.links.push_back({c.index.at(k.first), c.index.at(k.second)});
      double w = 0.0;
      for (int e : members) w += (*weights_)[e];
      c.weights[i++] = w;
    }
    return c;
  }

  const WeightedGraph* graph_;
  const Eigen::VectorXd* weights_;
  mutable UnionFind uf_;
  std::map<std::pair<int, int>, std::vector<int>> groups_;
  double log_weight_ = 0.0;
};

/// Spanning trees of a connected graph through the weighted Matrix-Tree theorem.
class MatroidOracle {
 public:
  explicit MatroidOracle(WeightedGraph graph) : graph_(std::move(graph)) {}

  const WeightedGraph& graph() const { return graph_; }
  std::size_t dim() const { return graph_.num_edges(); }
  std::size_t max_active() const { return static_cast<std::size_t>(graph_.num_vertices() - 1); }

  /// Cofactor of the masked Laplacian with row and column `anchor` deleted.
  double kernel(const Eigen::VectorXd& weights, const Mask& mask, int anchor = 0) const {
    check_positive_weights(weights, dim(), "matroid_kernel");
    if (anchor < 0 || anchor >= graph_.num_vertices()) {
      throw std::out_of_range("matroid_kernel: anchor vertex out of range");
    }
    return std::exp(matroid_detail::log_tree_sum(graph_.num_vertices(), graph_.links(),
                                                 mask.apply(weights), anchor));
  }

  KernelBatch first_moment_batch(const Eigen::VectorXd& weights) const {
    check_positive_weights(weights, dim(), "matroid_first_moment_batch");
    return batch(weights, false);
  }
  KernelBatch first_moment_batch(const ExpWeights& w) const {
    KernelBatch b = batch(w.weights(), false);
    b.log_total += static_cast<double>(max_active()) * w.log_scale();
    return b;
  }
  KernelBatch second_moment_batch(const Eigen::VectorXd& weights) const {
    check_positive_weights(weights, dim(), "matroid_second_moment_batch");
    return batch(weights, true);
  }
  KernelBatch second_moment_batch(const ExpWeights& w) const {
    KernelBatch b = batch(w.weights(), true);
    b.log_total += static_cast<double>(max_active()) * w.log_scale();
    return b;
  }

  Eigen::VectorXd first_moments(const ExpWeights& w) const { return batch(w.weights(), false).first_moment(); }
  Eigen::VectorXd first_moments(const Eigen::VectorXd& weights) const {
    return first_moment_batch(weights).first_moment();
  }

  /// Leave-one-out kernels by one fresh determinant per edge (no updates).
  Eigen::VectorXd naive_single(const Eigen::VectorXd& weights) const {
    const double log_k = matroid_detail::log_tree_sum(graph_.num_vertices(), graph_.links(), weights);
    Eigen::VectorXd out(static_cast<Eigen::Index>(dim()));
    for (std::size_t j = 0; j < dim(); ++j) {
      const double lk = matroid_detail::log_tree_sum(graph_.num_vertices(), graph_.links(),
                                                     Mask::one(static_cast<int>(j)).apply(weights));
      out[static_cast<Eigen::Index>(j)] = std::exp(lk - log_k);
    }
    return out;
  }

  /// Edges in id order, each kept with its conditional probability given the
  /// decisions so far, on a contracted meta-graph.
  ActionVector sample(const Eigen::VectorXd& weights, Rng& rng) const {
    check_positive_weights(weights, dim(), "matroid_sample");
    MetaGraph meta(graph_, weights);
    std::vector<int> active;
    for (int j = 0; j < static_cast<int>(dim()); ++j) {
      const double p = meta.inclusion_probability(j);
      if (p > 0.0 && rng.uniform() < p) {
        meta.include(j);
        active.push_back(j);
      } else {
        meta.exclude(j);
      }
    }
    if (active.size() != max_active()) {
      throw std::logic_error("matroid_sample: produced " + std::to_string(active.size()) +
                             " edges, expected " + std::to_string(max_active()));
    }
    return ActionVector(dim(), std::move(active));
  }
  ActionVector sample(const ExpWeights& w, Rng& rng) const { return sample(w.weights(), rng); }

  /// Kruskal with ties by lowest edge id.
  ActionVector best_response(const Eigen::VectorXd& losses) const {
    if (losses.size() != static_cast<Eigen::Index>(dim())) {
      throw std::invalid_argument("mst_best_response: loss length mismatch");
    }
    std::vector<int> order(dim());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return losses[a] < losses[b]; });
    UnionFind uf(graph_.num_vertices());
    std::vector<int> tree;
    for (int e : order) {
      if (uf.unite(graph_.u(e), graph_.v(e))) tree.push_back(e);
    }
    return ActionVector(dim(), std::move(tree));
  }

  /// Fixed-1 edges contracted (a cycle among them gives 0), fixed-0 deleted.
  double conditional_kernel(const Eigen::VectorXd& weights, Fixing fixed) const {
    UnionFind uf(graph_.num_vertices());
    double forced = 1.0;
    for (std::size_t e = 0; e < dim(); ++e) {
      if (fixed[e] != 1) continue;
      if (!uf.unite(graph_.u(static_cast<int>(e)), graph_.v(static_cast<int>(e)))) return 0.0;
      forced *= weights[static_cast<Eigen::Index>(e)];
    }
    std::map<int, int> index;
    for (int x = 0; x < graph_.num_vertices(); ++x) {
      const int r = uf.find(x);
      if (!index.count(r)) index.emplace(r, static_cast<int>(index.size()));
    }
    std::vector<matroid_detail::Link> links;
    std::vector<double> w;
    for (std::size_t e = 0; e < dim(); ++e) {
      if (fixed[e] != -1) continue;
      const int a = index.at(uf.find(graph_.u(static_cast<int>(e))));
      const int b = index.at(uf.find(graph_.v(static_cast<int>(e))));
      if (a == b) continue;
      links.push_back({a, b});
      w.push_back(weights[static_cast<Eigen::Index>(e)]);
    }
    const Eigen::VectorXd wv = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    return forced * std::exp(matroid_detail::log_tree_sum(static_cast<int>(index.size()), links, wv));
  }

 private:
  /// Anchor for each edge: one of its endpoints, chosen greedily so that few
  /// distinct anchors (and hence few inverses) are needed.
  std::vector<int> choose_anchors() const {
    const int n = graph_.num_vertices();
    std::vector<int> anchor(dim(), -1);
    std::vector<int> degree(static_cast<std::size_t>(n), 0);
    for (const auto& l : graph_.links()) {
      ++degree[static_cast<std::size_t>(l.u)];
      ++degree[static_cast<std::size_t>(l.v)];
    }
    std::size_t covered = 0;
    while (covered < dim()) {
      const int best = static_cast<int>(std::max_element(degree.begin(), degree.end()) - degree.begin());
      for (std::size_t e = 0; e < dim(); ++e) {
        const auto& l = graph_.links()[e];
        if (anchor[e] != -1 || (l.u != best && l.v != best)) continue;
        anchor[e] = best;
        ++covered;
        --degree[static_cast<std::size_t>(l.u)];
        --degree[static_cast<std::size_t>(l.v)];
      }
    }
    return anchor;
  }

  KernelBatch batch(const Eigen::VectorXd& weights, bool with_pairs) const {
    using matroid_detail::reduced;
    const int n = graph_.num_vertices();
    const auto& links = graph_.links();
    const auto d = static_cast<Eigen::Index>(dim());
    const Eigen::MatrixXd lap = graph_.laplacian(weights);

    KernelBatch out;
    out.log_total = matroid_detail::log_abs_det(matroid_detail::minor(lap, 0));
    out.single.resize(d);

    const std::vector<int> anchor = choose_anchors();
    std::map<int, Eigen::MatrixXd> inverse;
    for (int a : anchor) {
      if (!inverse.count(a)) {
        inverse.emplace(a, Eigen::PartialPivLU<Eigen::MatrixXd>(matroid_detail::minor(lap, a)).inverse());
      }
    }
    const std::vector<char> bridge = matroid_detail::bridges(n, links);
    auto other = [&](Eigen::Index j) {
      const auto& l = links[static_cast<std::size_t>(j)];
      return l.u == anchor[static_cast<std::size_t>(j)] ? l.v : l.u;
    };

    // Deleting j is the rank-1 change -C_j e_w e_w^T of the anchored minor.
    for (Eigen::Index j = 0; j < d; ++j) {
      if (bridge[static_cast<std::size_t>(j)]) {
        out.single[j] = 0.0;
        continue;
      }
      const int a = anchor[static_cast<std::size_t>(j)];
      const int w = reduced(other(j), a);
      out.single[j] = std::clamp(1.0 - weights[j] * inverse.at(a)(w, w), 0.0, 1.0);
    }
    if (!with_pairs) return out;

    // Deleting j and j' is a rank-2 change; det(I - D W^T M^-1 W) by hand.
    out.pair.resize(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
      out.pair(j, j) = out.single[j];
      const std::vector<char> cut = matroid_detail::bridges(n, links, static_cast<int>(j));
      const int a = anchor[static_cast<std::size_t>(j)];
      const Eigen::MatrixXd& minv = inverse.at(a);
      const int w = reduced(other(j), a);
      for (Eigen::Index jp = j + 1; jp < d; ++jp) {
        double value;
        if (bridge[static_cast<std::size_t>(j)] || bridge[static_cast<std::size_t>(jp)] ||
            cut[static_cast<std::size_t>(jp)]) {
          value = 0.0;
        } else {
          const auto& l = links[static_cast<std::size_t>(jp)];
          // Second column e_x - e_y with the anchor component dropped.
          auto column_dot = [&](int row_or_col, bool as_row) {
            double s = 0.0;
            if (l.u != a) s += as_row ? minv(reduced(l.u, a), row_or_col) : minv(row_or_col, reduced(l.u, a));
            if (l.v != a) s -= as_row ? minv(reduced(l.v, a), row_or_col) : minv(row_or_col, reduced(l.v, a));
            return s;
          };
          const double g00 = minv(w, w);
          const double g01 = column_dot(w, false);
          double g11 = 0.0;
          if (l.u != a) g11 += column_dot(reduced(l.u, a), true);
          if (l.v != a) g11 -= column_dot(reduced(l.v, a), true);
          const double cj = weights[j], cjp = weights[jp];
          value = (1.0 - cj * g00) * (1.0 - cjp * g11) - cj * cjp * g01 * g01;
          value = std::clamp(value, 0.0, 1.0);
        }
        out.pair(j, jp) = value;
        out.pair(jp, j) = value;
      }
    }
    return out;
  }

  WeightedGraph graph_;
};

}  // namespace polylearn
