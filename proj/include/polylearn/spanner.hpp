#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "polylearn/core.hpp"
#include "polylearn/rng.hpp"

namespace polylearn {

/// C-approximate barycentric spanner of an action set that may not be
/// full-dimensional. `chart` is an orthonormal d x d_r basis of span(V);
/// columns are expressed in it as the d_r x d_r matrix `basis`.
class Spanner {
 public:
  Spanner() = default;

  static Spanner from_columns(std::vector<ActionVector> columns, double constant) {
    if (columns.empty()) throw std::invalid_argument("spanner: no columns");
    Spanner s;
    s.constant_ = constant;
    s.columns_ = std::move(columns);
    const auto d = static_cast<Eigen::Index>(s.columns_.front().dim());
    const auto r = static_cast<Eigen::Index>(s.columns_.size());
    Eigen::MatrixXd v(d, r);
    for (Eigen::Index i = 0; i < r; ++i) v.col(i) = s.columns_[static_cast<std::size_t>(i)].bits();
    if (r == d) {
      s.chart_ = Eigen::MatrixXd::Identity(d, d);
    } else {
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(v);
      s.chart_ = qr.householderQ() * Eigen::MatrixXd::Identity(d, r);
    }
    s.basis_ = s.chart_.transpose() * v;
    s.lu_.compute(s.basis_);
    const Eigen::VectorXd diag = s.lu_.matrixLU().diagonal();
    s.log_abs_det_ = diag.cwiseAbs().array().log().sum();
    if (!std::isfinite(s.log_abs_det_) || (v - s.chart_ * s.basis_).cwiseAbs().maxCoeff() > 1e-9) {
      throw std::invalid_argument("spanner: columns are linearly dependent");
    }
    return s;
  }

  std::size_t dim() const { return static_cast<std::size_t>(chart_.rows()); }
  std::size_t reduced_dim() const { return columns_.size(); }
  double constant() const { return constant_; }
  double log_abs_det() const { return log_abs_det_; }
  const std::vector<ActionVector>& columns() const { return columns_; }
  const Eigen::MatrixXd& chart() const { return chart_; }
  const Eigen::MatrixXd& basis() const { return basis_; }

  Eigen::VectorXd reduce(const Eigen::VectorXd& x) const { return chart_.transpose() * x; }

  /// alpha with sum_i alpha_i b_i = v.
  Eigen::VectorXd coefficients(const ActionVector& v) const { return lu_.solve(reduce(v.bits())); }

  /// Distance from v to the span of the columns.
  double span_residual(const ActionVector& v) const {
    const Eigen::VectorXd x = v.bits();
    return (x - chart_ * reduce(x)).cwiseAbs().maxCoeff();
  }

 private:
  double constant_ = 2.0;
  double log_abs_det_ = 0.0;
  std::vector<ActionVector> columns_;
  Eigen::MatrixXd chart_;
  Eigen::MatrixXd basis_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

struct SpannerStats {
  std::size_t oracle_calls = 0;
  std::size_t swaps = 0;
  std::vector<double> log_det_history;
};

namespace spanner_detail {

constexpr double kZero = 1e-9;

inline Eigen::MatrixXd complement(const Eigen::MatrixXd& u, Eigen::Index d) {
  if (u.cols() == 0) return Eigen::MatrixXd::Identity(d, d);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(u);
  const Eigen::MatrixXd full = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
  return full.rightCols(d - u.cols());
}

// Maximizes |objective . v| with two calls to the loss-minimizing oracle.
template <class Oracle>
ActionVector extreme(const Oracle& oracle, const Eigen::VectorXd& objective, double& value,
                     SpannerStats& stats) {
  const ActionVector lo = oracle.best_response(objective);
  const ActionVector hi = oracle.best_response(-objective);
  stats.oracle_calls += 2;
  const double a = lo.dot(objective);
  const double b = hi.dot(objective);
  if (std::abs(b) > std::abs(a)) {
    value = b;
    return hi;
  }
  value = a;
  return lo;
}

}  // namespace spanner_detail

/// Orthonormal basis of span(V) discovered through the oracle. Terminates
/// once every direction in the orthogonal complement has zero extreme value,
/// which certifies that the complement is orthogonal to all of V.
template <class Oracle>
Eigen::MatrixXd span_chart(const Oracle& oracle, SpannerStats& stats) {
  using spanner_detail::kZero;
  const auto d = static_cast<Eigen::Index>(oracle.dim());
  Eigen::MatrixXd u(d, 0);
  for (;;) {
    const Eigen::MatrixXd z = spanner_detail::complement(u, d);
    bool grew = false;
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      double value = 0.0;
      const ActionVector v = spanner_detail::extreme(oracle, z.col(c), value, stats);
      if (std::abs(value) <= kZero) continue;
      Eigen::VectorXd r = v.bits();
      for (int pass = 0; pass < 2; ++pass) r -= u * (u.transpose() * r);
      const double norm = r.norm();
      if (norm <= kZero) continue;
      u.conservativeResize(Eigen::NoChange, u.cols() + 1);
      u.col(u.cols() - 1) = r / norm;
      grew = true;
    }
    if (!grew || u.cols() == d) break;
  }
  if (u.cols() == 0) throw std::invalid_argument("build_spanner: degenerate action set");
  return u;
}

/// Awerbuch-Kleinberg: fill a basis column by column maximizing |det|, then
/// swap in any action that multiplies |det| by more than C.
template <class Oracle>
Spanner build_spanner(const Oracle& oracle, double constant = 2.0, SpannerStats* out = nullptr) {
  if (!(constant > 1.0)) throw std::invalid_argument("build_spanner: C must exceed 1");
  SpannerStats stats;
  const Eigen::MatrixXd u = span_chart(oracle, stats);
  const Eigen::Index r = u.cols();
  Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(r, r);
  std::vector<ActionVector> columns(static_cast<std::size_t>(r));
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis);

  const auto log_det = [&]() { return lu.matrixLU().diagonal().cwiseAbs().array().log().sum(); };
  // Row i of B^{-1}: alpha_i = g . (U^T v) is the det ratio of swapping v into i.
  const auto direction = [&](Eigen::Index i) -> Eigen::VectorXd {
    const Eigen::VectorXd g = lu.transpose().solve(Eigen::VectorXd::Unit(r, i));
    return u * g;
  };

  for (Eigen::Index i = 0; i < r; ++i) {
    double value = 0.0;
    const ActionVector v = spanner_detail::extreme(oracle, direction(i), value, stats);
    if (std::abs(value) <= spanner_detail::kZero) {
      throw std::invalid_argument("build_spanner: degenerate action set");
    }
    columns[static_cast<std::size_t>(i)] = v;
    basis.col(i) = u.transpose() * v.bits();
    lu.compute(basis);
  }
  stats.log_det_history.push_back(log_det());

  for (bool improved = true; improved;) {
    improved = false;
    for (Eigen::Index i = 0; i < r; ++i) {
      double value = 0.0;
      const ActionVector v = spanner_detail::extreme(oracle, direction(i), value, stats);
      if (std::abs(value) <= constant * (1.0 + 1e-12)) continue;
      columns[static_cast<std::size_t>(i)] = v;
      basis.col(i) = u.transpose() * v.bits();
      lu.compute(basis);
      ++stats.swaps;
      stats.log_det_history.push_back(log_det());
      improved = true;
    }
  }
  if (out != nullptr) *out = stats;
  return Spanner::from_columns(std::move(columns), constant);
}

struct SpannerCertificate {
  double max_coefficient = 0.0;
  double max_span_residual = 0.0;
  std::size_t samples = 0;
  bool passed = false;
};

/// Checks |alpha| <= C + tol on extreme actions of random linear objectives.
template <class Oracle>
SpannerCertificate certify_spanner(const Spanner& spanner, const Oracle& oracle, Rng& rng,
                                   std::size_t samples = 10000, double tol = 1e-6) {
  std::normal_distribution<double> normal;
  const auto d = static_cast<Eigen::Index>(oracle.dim());
  SpannerCertificate cert;
  cert.samples = samples;
  Eigen::VectorXd c(d);
  for (std::size_t s = 0; s < samples; ++s) {
    for (Eigen::Index j = 0; j < d; ++j) c[j] = normal(rng.engine());
    const ActionVector v = oracle.best_response(c);
    cert.max_coefficient = std::max(cert.max_coefficient, spanner.coefficients(v).cwiseAbs().maxCoeff());
    cert.max_span_residual = std::max(cert.max_span_residual, spanner.span_residual(v));
  }
  cert.passed = cert.max_coefficient <= spanner.constant() + tol && cert.max_span_residual <= 1e-9;
  return cert;
}

/// FNV-1a, used to key cached spanners by a canonical game description.
inline std::string spec_hash(const std::string& description) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : description) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

inline void save_spanner_csv(const std::string& path, const std::string& key, const Spanner& s) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write spanner cache " + path);
  out << "key," << key << "\n";
  out << "dim," << s.dim() << "\n";
  out << "constant," << std::setprecision(17) << s.constant() << "\n";
  for (const auto& col : s.columns()) {
    out << "column,";
    for (std::size_t i = 0; i < col.active().size(); ++i) out << (i ? ";" : "") << col.active()[i];
    out << "\n";
  }
}

/// Returns nothing when the file is missing or was written for another key.
inline std::optional<Spanner> load_spanner_csv(const std::string& path, const std::string& key) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::string line;
  std::string file_key;
  std::size_t dim = 0;
  double constant = 2.0;
  std::vector<ActionVector> columns;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    const std::string tag = line.substr(0, comma);
    const std::string rest = line.substr(comma + 1);
    if (tag == "key") {
      file_key = rest;
    } else if (tag == "dim") {
      dim = std::stoul(rest);
    } else if (tag == "constant") {
      constant = std::stod(rest);
    } else if (tag == "column") {
      std::vector<int> active;
      std::stringstream ss(rest);
      std::string item;
      while (std::getline(ss, item, ';')) {
        if (!item.empty()) active.push_back(std::stoi(item));
      }
      columns.emplace_back(dim, std::move(active));
    }
  }
  if (file_key != key || columns.empty()) return std::nullopt;
  return Spanner::from_columns(std::move(columns), constant);
}

}  // namespace polylearn
