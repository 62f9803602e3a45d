#pragma once

// Timing of kernel batches and sampling across doubling size grids.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <unistd.h>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <Eigen/Dense>

#include "polylearn/blotto.hpp"
#include "polylearn/dag.hpp"
#include "polylearn/matroid.hpp"
#include "polylearn/mset.hpp"
#include "polylearn/rng.hpp"
#include "polylearn/testing/enumerate.hpp"

namespace polylearn::bench {

struct Row {
  std::string family;
  int size = 0;  // n for blotto, |V| for graphs, nodes for DAGs, d for m-sets
  std::size_t dim = 0;
  double first_moment = 0.0;
  double second_moment = NAN;  // NaN when skipped
  double sample = 0.0;
  double naive_first_moment = NAN;  // matroid only: one determinant per edge
};

struct Options {
  int blotto_k = 8;
  bool second_moments = true;
  int min_reps = 5;
  double budget = 1.0;  // seconds per timed quantity and grid point
  std::uint64_t seed = 1;
  int cold_reps = 30;
  std::size_t evict_bytes = 0;  // 0: 1.5x the last-level cache
};

/// Keeps large blocks on the heap between repetitions. Otherwise glibc maps
/// fresh pages for every matrix above its mmap threshold and the timing
/// measures page faults rather than the batch.
inline void pin_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_MAX, 0);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

inline std::size_t last_level_cache_bytes() {
#if defined(_SC_LEVEL3_CACHE_SIZE)
  const long l3 = sysconf(_SC_LEVEL3_CACHE_SIZE);
  if (l3 > 0) return static_cast<std::size_t>(l3);
  const long l2 = sysconf(_SC_LEVEL2_CACHE_SIZE);
  if (l2 > 0) return static_cast<std::size_t>(l2);
#endif
  return std::size_t{64} << 20;
}

/// Reads a buffer larger than the last-level cache so the next call starts
/// from memory. The lines stay clean, so evicting them costs nothing later.
inline void evict_caches(std::size_t bytes) {
  static std::vector<double> buffer;
  const std::size_t words = std::max<std::size_t>(bytes / sizeof(double), 1);
  if (buffer.size() != words) buffer.assign(words, 1.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < words; i += 8) sum += buffer[i];
  static volatile double keep = 0.0;
  keep = keep + sum;
}

inline double seconds(const std::function<void()>& fn, int inner) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < inner; ++i) fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / inner;
}

/// Minimum per-call time of each function. Repetitions are interleaved
/// across the functions so slow phases of a shared machine hit every grid
/// point alike; calls shorter than 0.2 ms are batched. With `cold`, every
/// sample is one call made right after evicting the caches, for quantities
/// whose footprint crosses cache levels along the grid: otherwise each grid
/// point would start from whatever the previous one left behind.
inline std::vector<double> interleaved_min(const std::vector<std::function<void()>>& fns, const Options& opt,
                                           bool cold = false) {
  std::vector<int> inner(fns.size(), 1);
  std::vector<double> best(fns.size(), INFINITY);
  const std::size_t evict = opt.evict_bytes > 0 ? opt.evict_bytes : last_level_cache_bytes() / 2 * 3;
  for (std::size_t i = 0; i < fns.size(); ++i) {
    const double once = seconds(fns[i], 1);
    if (!cold) inner[i] = static_cast<int>(std::clamp(std::ceil(2e-4 / std::max(once, 1e-9)), 1.0, 1e5));
    seconds(fns[i], inner[i]);
  }
  const auto start = std::chrono::steady_clock::now();
  const int min_reps = cold ? std::max(opt.min_reps, opt.cold_reps) : opt.min_reps;
  double spent = 0.0;
  const double budget = opt.budget * static_cast<double>(fns.size());
  for (int r = 0; r < 10000 && (r < min_reps || spent < budget); ++r) {
    for (std::size_t i = 0; i < fns.size(); ++i) {
      if (cold) evict_caches(evict);
      const double t = seconds(fns[i], inner[i]);
      best[i] = std::min(best[i], t);
      if (!cold) spent += t * inner[i];
    }
    // Cold rounds are dominated by eviction, so they count wall time.
    if (cold) spent = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return best;
}

/// Dense random graph with about |V|^2 / 4 edges.
inline WeightedGraph bench_graph(int vertices, Rng& rng) {
  return testing::random_graph(vertices, vertices * (vertices - 1) / 4, rng);
}

namespace detail {

struct Probe {
  Row row;
  std::function<void()> first, second, sample, naive;
};

inline volatile double sink = 0.0;

template <class Oracle>
Probe probe(const std::string& family, int size, std::shared_ptr<const Oracle> o, Rng& rng) {
  auto c = std::make_shared<const Eigen::VectorXd>(testing::random_weights(o->dim(), rng, 0.5, 2.0));
  auto local = std::make_shared<Rng>(rng.index(1u << 30));
  Probe p;
  p.row.family = family;
  p.row.size = size;
  p.row.dim = o->dim();
  p.first = [o, c] { sink = sink + o->first_moment_batch(*c).single[0]; };
  p.second = [o, c] { sink = sink + o->second_moment_batch(*c).pair(0, 0); };
  p.sample = [o, c, local] { sink = sink + static_cast<double>(o->sample(*c, *local).count()); };
  return p;
}

}  // namespace detail

inline std::vector<Row> run(const std::string& family, const std::vector<int>& sizes, const Options& opt) {
  pin_allocator();
  Rng rng(opt.seed);
  std::vector<detail::Probe> probes;
  for (int size : sizes) {
    if (size <= 0) throw std::invalid_argument("bench: sizes must be positive");
    if (family == "blotto") {
      probes.push_back(detail::probe(family, size, std::make_shared<const BlottoOracle>(BlottoSpec{size, opt.blotto_k}), rng));
    } else if (family == "matroid") {
      auto o = std::make_shared<const MatroidOracle>(bench_graph(std::max(size, 3), rng));
      detail::Probe p = detail::probe(family, size, o, rng);
      auto c = std::make_shared<const Eigen::VectorXd>(testing::random_weights(o->dim(), rng, 0.5, 2.0));
      p.naive = [o, c] { detail::sink = detail::sink + o->naive_single(*c)[0]; };
      probes.push_back(std::move(p));
    } else if (family == "dag") {
      probes.push_back(detail::probe(
          family, size, std::make_shared<const DagOracle>(testing::random_dag(std::max(size, 2), 4 * size, rng)), rng));
    } else if (family == "mset") {
      probes.push_back(
          detail::probe(family, size, std::make_shared<const MSetOracle>(MSetSpec{size, std::max(1, size / 8)}), rng));
    } else {
      throw std::invalid_argument("unknown bench family '" + family + "' (expected blotto, matroid, dag or mset)");
    }
  }
  auto timed = [&](std::function<void()> detail::Probe::*fn, double Row::*field, bool cold = false) {
    std::vector<std::function<void()>> fns;
    for (const auto& p : probes) fns.push_back(p.*fn);
    const std::vector<double> t = interleaved_min(fns, opt, cold);
    for (std::size_t i = 0; i < probes.size(); ++i) probes[i].row.*field = t[i];
  };
  timed(&detail::Probe::first, &Row::first_moment);
  // The second-moment output is d x d and outgrows each cache level in turn.
  if (opt.second_moments) timed(&detail::Probe::second, &Row::second_moment, true);
  timed(&detail::Probe::sample, &Row::sample);
  if (family == "matroid") timed(&detail::Probe::naive, &Row::naive_first_moment);
  std::vector<Row> rows;
  for (const auto& p : probes) rows.push_back(p.row);
  return rows;
}

/// Time ratio between consecutive grid points, one entry per step.
inline std::vector<double> ratios(const std::vector<Row>& rows, double Row::*field) {
  std::vector<double> out;
  for (std::size_t i = 1; i < rows.size(); ++i) out.push_back(rows[i].*field / rows[i - 1].*field);
  return out;
}

/// Least-squares slope of log time against log size.
inline double growth_exponent(const std::vector<Row>& rows, double Row::*field) {
  double sx = 0.0;
  double sy = 0.0;
  double sxx = 0.0;
  double sxy = 0.0;
  const double n = static_cast<double>(rows.size());
  for (const auto& r : rows) {
    const double x = std::log(static_cast<double>(r.size));
    const double y = std::log(r.*field);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline void write_csv(std::ostream& out, const std::vector<Row>& rows) {
  out << "family,size,dim,first_moment_s,second_moment_s,sample_s,naive_first_moment_s\n";
  for (const auto& r : rows) {
    out << r.family << ',' << r.size << ',' << r.dim << ',' << r.first_moment << ',' << r.second_moment << ','
        << r.sample << ',' << r.naive_first_moment << '\n';
  }
}

}  // namespace polylearn::bench
