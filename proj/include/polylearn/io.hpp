#pragma once

// Experiment configs, run artifacts and the offline gap report.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "polylearn/game.hpp"
#include "polylearn/spanner.hpp"

namespace polylearn {

namespace fs = std::filesystem;
using nlohmann::json;

/// Bad input, reported as "file:line: message".
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GameConfig {
  std::string kind;  // blotto, matroid_congestion, network_congestion, mset_congestion
  std::size_t players = 0;
  BlottoSpec blotto{};
  BlottoRule rule = BlottoRule::winner_take_all;
  int nodes = 0;  // vertices of the graph or DAG
  int source = 0;
  int sink = 0;
  std::vector<std::pair<int, int>> edges;
  MSetSpec mset{};
};

struct PlayerConfig {
  Feedback feedback = Feedback::semi_bandit;
  std::optional<double> eta;  // empty means auto
  std::optional<double> gamma;
  bool optimism = false;
  double eta_multiplier = 4.0;
};

struct RunConfig {
  std::size_t T = 0;
  std::uint64_t seed = 0;
  fs::path output = "out";
  std::size_t checkpoint = 0;
  std::size_t threads = 1;
  std::optional<fs::path> spanner_cache;
};

struct ExperimentConfig {
  GameConfig game;
  std::vector<PlayerConfig> learners;  // one per player
  std::optional<AdversarySpec> adversary;
  RunConfig run;
};

namespace io_detail {

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ":1: cannot open file");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline std::string join_path(const std::vector<std::string>& path) {
  std::string out;
  for (const auto& p : path) {
    if (!p.empty() && std::isdigit(static_cast<unsigned char>(p[0]))) {
      out += "[" + p + "]";
    } else {
      out += (out.empty() ? "" : ".") + p;
    }
  }
  return out;
}

/// Finds the line of a key path by scanning for each quoted key in turn.
class LineIndex {
 public:
  explicit LineIndex(std::string text) : text_(std::move(text)) {}

  int line_at(std::size_t byte) const {
    byte = std::min(byte, text_.size());
    return 1 + static_cast<int>(std::count(text_.begin(), text_.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
  }

  int line_of(const std::vector<std::string>& path) const {
    std::size_t pos = 0;
    for (const auto& key : path) {
      if (key.empty() || std::isdigit(static_cast<unsigned char>(key[0]))) continue;
      const std::string quoted = "\"" + key + "\"";
      std::size_t at = pos;
      for (;;) {
        at = text_.find(quoted, at);
        if (at == std::string::npos) return line_at(pos);
        std::size_t after = at + quoted.size();
        while (after < text_.size() && std::isspace(static_cast<unsigned char>(text_[after]))) ++after;
        if (after < text_.size() && text_[after] == ':') break;
        at += quoted.size();
      }
      pos = at;
    }
    return line_at(pos);
  }

 private:
  std::string text_;
};

class Reader {
 public:
  Reader(std::string source, std::string text) : source_(std::move(source)), index_(std::move(text)) {}

  [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& message) const {
    throw ConfigError(source_ + ":" + std::to_string(index_.line_of(path)) + ": " + join_path(path) + ": " +
                      message);
  }

  const json& require(const json& obj, std::vector<std::string> path, const std::string& key) const {
    if (!obj.contains(key)) {
      fail(path, "missing required key '" + key + "'");
    }
    return obj.at(key);
  }

  std::uint64_t uint(const json& v, const std::vector<std::string>& path) const {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      fail(path, "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  double number(const json& v, const std::vector<std::string>& path) const {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
  }

  std::string string(const json& v, const std::vector<std::string>& path) const {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
  }

  bool boolean(const json& v, const std::vector<std::string>& path) const {
    if (!v.is_boolean()) fail(path, "expected true or false");
    return v.get<bool>();
  }

  void object(const json& v, const std::vector<std::string>& path) const {
    if (!v.is_object()) fail(path, "expected an object");
  }

  void known_keys(const json& obj, const std::vector<std::string>& path,
                  std::initializer_list<const char*> keys) const {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; })) {
        auto p = path;
        p.push_back(it.key());
        fail(p, "unknown key");
      }
    }
  }

 private:
  std::string source_;
  LineIndex index_;
};

inline std::vector<std::string> child(std::vector<std::string> path, const std::string& key) {
  path.push_back(key);
  return path;
}

/// Edge-list text: one "u v" pair per line, '#' starts a comment.
inline std::vector<std::pair<int, int>> read_edge_list(const fs::path& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  std::vector<std::pair<int, int>> edges;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    long u = 0;
    long v = 0;
    std::string extra;
    if (!(fields >> u)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected \"u v\"");
    }
    if (!(fields >> v) || (fields >> extra) || u < 0 || v < 0) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected \"u v\" with non-negative ids");
    }
    edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
  }
  return edges;
}

inline std::vector<std::pair<int, int>> parse_edges(const Reader& r, const json& block,
                                                    const std::vector<std::string>& path, const fs::path& base,
                                                    const char* file_key) {
  if (block.contains(file_key)) {
    const auto p = child(path, file_key);
    fs::path file = r.string(block.at(file_key), p);
    if (file.is_relative()) file = base / file;
    return read_edge_list(file);
  }
  const auto p = child(path, "edges");
  const json& list = r.require(block, path, "edges");
  if (!list.is_array()) r.fail(p, "expected an array of [u, v] pairs");
  std::vector<std::pair<int, int>> edges;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const json& e = list[i];
    if (!e.is_array() || e.size() != 2) r.fail(p, "edge " + std::to_string(i) + " is not a [u, v] pair");
    edges.emplace_back(static_cast<int>(r.uint(e[0], p)), static_cast<int>(r.uint(e[1], p)));
  }
  return edges;
}

inline int infer_nodes(const std::vector<std::pair<int, int>>& edges) {
  int n = 0;
  for (const auto& [u, v] : edges) n = std::max({n, u + 1, v + 1});
  return n;
}

inline std::optional<double> number_or_auto(const Reader& r, const json& block,
                                            const std::vector<std::string>& path, const char* key) {
  if (!block.contains(key)) return std::nullopt;
  const json& v = block.at(key);
  if (v.is_string() && v.get<std::string>() == "auto") return std::nullopt;
  if (!v.is_number()) r.fail(child(path, key), "expected a number or \"auto\"");
  return v.get<double>();
}

inline PlayerConfig parse_player(const Reader& r, const json& block, const std::vector<std::string>& path) {
  r.object(block, path);
  r.known_keys(block, path, {"feedback", "eta", "gamma", "optimism", "eta_multiplier"});
  PlayerConfig p;
  const auto fpath = child(path, "feedback");
  try {
    p.feedback = parse_feedback(r.string(r.require(block, path, "feedback"), fpath));
  } catch (const std::invalid_argument& e) {
    r.fail(fpath, e.what());
  }
  p.eta = number_or_auto(r, block, path, "eta");
  p.gamma = number_or_auto(r, block, path, "gamma");
  if (p.eta && !(*p.eta > 0.0)) r.fail(child(path, "eta"), "must be > 0");
  if (p.gamma && !(*p.gamma >= 0.0 && *p.gamma <= 1.0)) r.fail(child(path, "gamma"), "must lie in [0, 1]");
  if (block.contains("optimism")) p.optimism = r.boolean(block.at("optimism"), child(path, "optimism"));
  if (p.optimism && p.feedback != Feedback::full) r.fail(child(path, "optimism"), "optimism requires full feedback");
  if (block.contains("eta_multiplier")) {
    p.eta_multiplier = r.number(block.at("eta_multiplier"), child(path, "eta_multiplier"));
    if (!(p.eta_multiplier > 0.0)) r.fail(child(path, "eta_multiplier"), "must be > 0");
  }
  return p;
}

}  // namespace io_detail

/// Builds the family oracle and hands the game to `fn`.
template <class Fn>
decltype(auto) with_game(const GameConfig& g, Fn&& fn) {
  if (g.kind == "blotto") return fn(make_blotto_game(g.blotto, g.players, g.rule));
  if (g.kind == "matroid_congestion") {
    return fn(make_congestion_game(MatroidOracle(WeightedGraph(g.nodes, g.edges)), g.players));
  }
  if (g.kind == "network_congestion") {
    return fn(make_congestion_game(DagOracle(DagSpec(g.nodes, g.edges, g.source, g.sink)), g.players));
  }
  if (g.kind == "mset_congestion") return fn(make_congestion_game(MSetOracle(g.mset), g.players));
  throw std::invalid_argument("unknown game kind '" + g.kind + "'");
}

/// Parses JSON config text. `base` anchors relative paths. A run summary is
/// accepted too: its echoed "config" block is used.
inline ExperimentConfig parse_config(const std::string& text, const std::string& source, const fs::path& base) {
  using io_detail::child;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const int line = io_detail::LineIndex(text).line_at(e.byte == 0 ? 0 : e.byte - 1);
    throw ConfigError(source + ":" + std::to_string(line) + ": malformed JSON (" + e.what() + ")");
  }
  const io_detail::Reader r(source, text);
  std::vector<std::string> top;
  if (root.is_object() && root.contains("per_player_cce_gap") && root.contains("config")) {
    top = {"config"};
    root = root.at("config");
  }
  r.object(root, top);
  r.known_keys(root, top, {"game", "learner", "adversary", "run"});
  ExperimentConfig c;

  const auto gpath = child(top, "game");
  const json& g = r.require(root, top, "game");
  r.object(g, gpath);
  c.game.kind = r.string(r.require(g, gpath, "kind"), child(gpath, "kind"));
  c.game.players = r.uint(r.require(g, gpath, "players"), child(gpath, "players"));
  if (c.game.players == 0) r.fail(child(gpath, "players"), "need at least one player");
  if (c.game.kind == "blotto") {
    r.known_keys(g, gpath, {"kind", "players", "n", "k", "rule"});
    c.game.blotto.n = static_cast<int>(r.uint(r.require(g, gpath, "n"), child(gpath, "n")));
    c.game.blotto.k = static_cast<int>(r.uint(r.require(g, gpath, "k"), child(gpath, "k")));
    if (g.contains("rule")) {
      try {
        c.game.rule = parse_blotto_rule(r.string(g.at("rule"), child(gpath, "rule")));
      } catch (const std::invalid_argument& e) {
        r.fail(child(gpath, "rule"), e.what());
      }
    }
  } else if (c.game.kind == "matroid_congestion") {
    r.known_keys(g, gpath, {"kind", "players", "graph", "edges", "vertices"});
    c.game.edges = io_detail::parse_edges(r, g, gpath, base, "graph");
    c.game.nodes = g.contains("vertices") ? static_cast<int>(r.uint(g.at("vertices"), child(gpath, "vertices")))
                                          : io_detail::infer_nodes(c.game.edges);
  } else if (c.game.kind == "network_congestion") {
    r.known_keys(g, gpath, {"kind", "players", "dag", "edges", "nodes", "source", "sink"});
    c.game.edges = io_detail::parse_edges(r, g, gpath, base, "dag");
    c.game.source = static_cast<int>(r.uint(r.require(g, gpath, "source"), child(gpath, "source")));
    c.game.sink = static_cast<int>(r.uint(r.require(g, gpath, "sink"), child(gpath, "sink")));
    c.game.nodes = g.contains("nodes") ? static_cast<int>(r.uint(g.at("nodes"), child(gpath, "nodes")))
                                       : std::max({io_detail::infer_nodes(c.game.edges), c.game.source + 1,
                                                   c.game.sink + 1});
  } else if (c.game.kind == "mset_congestion") {
    r.known_keys(g, gpath, {"kind", "players", "d", "m"});
    c.game.mset.d = static_cast<int>(r.uint(r.require(g, gpath, "d"), child(gpath, "d")));
    c.game.mset.m = static_cast<int>(r.uint(r.require(g, gpath, "m"), child(gpath, "m")));
  } else {
    r.fail(child(gpath, "kind"),
           "unknown kind '" + c.game.kind +
               "' (expected blotto, matroid_congestion, network_congestion or mset_congestion)");
  }
  std::size_t dim = 0;
  try {
    dim = with_game(c.game, [](const auto& game) { return game.dim(); });
  } catch (const std::invalid_argument& e) {
    r.fail(gpath, e.what());
  }

  const auto lpath = child(top, "learner");
  const json& l = r.require(root, top, "learner");
  if (l.is_array()) {
    if (l.size() != c.game.players) {
      r.fail(lpath, "expected one learner block per player (" + std::to_string(c.game.players) + ")");
    }
    for (std::size_t i = 0; i < l.size(); ++i) {
      c.learners.push_back(io_detail::parse_player(r, l[i], child(lpath, std::to_string(i))));
    }
  } else {
    c.learners.assign(c.game.players, io_detail::parse_player(r, l, lpath));
  }

  if (root.contains("adversary")) {
    const auto apath = child(top, "adversary");
    const json& a = root.at("adversary");
    r.object(a, apath);
    r.known_keys(a, apath, {"kind", "means"});
    if (c.game.players != 1) r.fail(apath, "an adversary requires exactly one player");
    AdversarySpec spec;
    const std::string kind = r.string(r.require(a, apath, "kind"), child(apath, "kind"));
    if (kind == "bernoulli") {
      spec.kind = AdversarySpec::Kind::bernoulli;
      const auto mpath = child(apath, "means");
      const json& means = r.require(a, apath, "means");
      if (means.is_number()) {
        spec.means = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dim), means.get<double>());
      } else if (means.is_array() && means.size() == dim) {
        spec.means.resize(static_cast<Eigen::Index>(dim));
        for (std::size_t j = 0; j < dim; ++j) spec.means[static_cast<Eigen::Index>(j)] = r.number(means[j], mpath);
      } else {
        r.fail(mpath, "expected a number or an array of " + std::to_string(dim) + " numbers");
      }
      if (spec.means.minCoeff() < 0.0 || spec.means.maxCoeff() > 1.0) r.fail(mpath, "means must lie in [0, 1]");
    } else if (kind == "worst_coordinate") {
      spec.kind = AdversarySpec::Kind::worst_coordinate;
    } else {
      r.fail(child(apath, "kind"), "unknown adversary '" + kind + "' (expected bernoulli or worst_coordinate)");
    }
    c.adversary = spec;
  }

  const auto rpath = child(top, "run");
  const json& run = r.require(root, top, "run");
  r.object(run, rpath);
  r.known_keys(run, rpath, {"T", "seed", "output", "checkpoint", "threads", "spanner_cache"});
  c.run.T = r.uint(r.require(run, rpath, "T"), child(rpath, "T"));
  if (c.run.T == 0) r.fail(child(rpath, "T"), "must be >= 1");
  c.run.seed = r.uint(r.require(run, rpath, "seed"), child(rpath, "seed"));
  if (run.contains("output")) c.run.output = r.string(run.at("output"), child(rpath, "output"));
  if (c.run.output.is_relative()) c.run.output = base / c.run.output;
  if (run.contains("checkpoint")) c.run.checkpoint = r.uint(run.at("checkpoint"), child(rpath, "checkpoint"));
  if (run.contains("threads")) {
    c.run.threads = std::max<std::size_t>(1, r.uint(run.at("threads"), child(rpath, "threads")));
  }
  if (run.contains("spanner_cache")) {
    fs::path p = r.string(run.at("spanner_cache"), child(rpath, "spanner_cache"));
    c.run.spanner_cache = p.is_relative() ? base / p : p;
  }
  return c;
}

inline ExperimentConfig load_config(const fs::path& path) {
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  return parse_config(io_detail::read_file(path), path.string(), base);
}

inline json game_json(const GameConfig& g) {
  json out{{"kind", g.kind}, {"players", g.players}};
  if (g.kind == "blotto") {
    out["n"] = g.blotto.n;
    out["k"] = g.blotto.k;
    out["rule"] = to_string(g.rule);
  } else if (g.kind == "mset_congestion") {
    out["d"] = g.mset.d;
    out["m"] = g.mset.m;
  } else {
    json edges = json::array();
    for (const auto& [u, v] : g.edges) edges.push_back({u, v});
    out["edges"] = edges;
    if (g.kind == "matroid_congestion") {
      out["vertices"] = g.nodes;
    } else {
      out["nodes"] = g.nodes;
      out["source"] = g.source;
      out["sink"] = g.sink;
    }
  }
  return out;
}

/// Parameters actually used by one player.
struct ResolvedPlayer {
  LearnerConfig config;
  bool eta_auto = false;
  bool gamma_auto = false;
  bool short_horizon = false;
  double eta_multiplier = 4.0;
};

inline std::vector<ResolvedPlayer> resolve_players(const ExperimentConfig& c, std::size_t d, std::size_t d_r,
                                                   std::size_t m) {
  std::vector<ResolvedPlayer> out;
  for (const auto& p : c.learners) {
    const std::size_t dim = p.feedback == Feedback::bandit ? d_r : d;
    const DefaultParams def = default_params(p.feedback, dim, m, c.run.T, p.optimism, p.eta_multiplier);
    ResolvedPlayer r;
    r.config.feedback = p.feedback;
    r.config.optimism = p.optimism;
    r.config.T = c.run.T;
    r.config.eta = p.eta.value_or(def.eta);
    r.config.gamma = p.feedback == Feedback::full ? 0.0 : p.gamma.value_or(def.gamma);
    r.eta_auto = !p.eta.has_value();
    r.gamma_auto = !p.gamma.has_value() && p.feedback != Feedback::full;
    r.short_horizon = p.feedback == Feedback::bandit && def.short_horizon;
    r.eta_multiplier = p.eta_multiplier;
    out.push_back(r);
  }
  return out;
}

/// The config with every auto parameter replaced by its value.
inline json resolved_config_json(const ExperimentConfig& c, const std::vector<ResolvedPlayer>& players) {
  json learners = json::array();
  for (const auto& p : players) {
    json l{{"feedback", to_string(p.config.feedback)}, {"eta", p.config.eta}, {"optimism", p.config.optimism},
           {"eta_multiplier", p.eta_multiplier}};
    if (p.config.feedback != Feedback::full) l["gamma"] = p.config.gamma;
    learners.push_back(l);
  }
  json run{{"T", c.run.T},
           {"seed", c.run.seed},
           {"output", fs::absolute(c.run.output).lexically_normal().string()},
           {"checkpoint", c.run.checkpoint},
           {"threads", c.run.threads}};
  if (c.run.spanner_cache) run["spanner_cache"] = fs::absolute(*c.run.spanner_cache).lexically_normal().string();
  json out{{"game", game_json(c.game)}, {"learner", learners}, {"run", run}};
  if (c.adversary) {
    json a{{"kind", c.adversary->kind == AdversarySpec::Kind::bernoulli ? "bernoulli" : "worst_coordinate"}};
    if (c.adversary->kind == AdversarySpec::Kind::bernoulli) {
      a["means"] = std::vector<double>(c.adversary->means.data(), c.adversary->means.data() + c.adversary->means.size());
    }
    out["adversary"] = a;
  }
  return out;
}

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline const char* kTrajectoryHeader = "round,player,action,realized_loss,cumulative_regret";

/// Appends rounds [from, to) of a trajectory as CSV rows; rounds are 1-based.
inline void write_trajectory_rows(std::ostream& out, const Trajectory& t, std::size_t from, std::size_t to) {
  std::string buf;
  for (std::size_t r = from; r < to; ++r) {
    for (std::size_t i = 0; i < t.players; ++i) {
      buf += std::to_string(r + 1);
      buf += ',';
      buf += std::to_string(i);
      buf += ',';
      const auto& act = t.actions[r][i].active();
      for (std::size_t q = 0; q < act.size(); ++q) {
        if (q > 0) buf += ';';
        buf += std::to_string(act[q]);
      }
      buf += ',';
      buf += format_double(t.realized[r][i]);
      buf += ',';
      buf += format_double(t.cumulative_regret[r][i]);
      buf += '\n';
    }
  }
  out << buf;
}

struct RunArtifacts {
  fs::path trajectory_csv;
  fs::path summary_json;
  json summary;
};

/// Spanner for bandit players, read from or written to the cache if one is configured.
template <class Oracle>
std::shared_ptr<const Spanner> experiment_spanner(const ExperimentConfig& c, const Oracle& oracle, json& info) {
  const std::string key = spec_hash(game_json(c.game).dump());
  if (c.run.spanner_cache) {
    if (auto cached = load_spanner_csv(c.run.spanner_cache->string(), key)) {
      info = {{"cached", true}, {"reduced_dim", cached->reduced_dim()}};
      return std::make_shared<const Spanner>(std::move(*cached));
    }
  }
  SpannerStats stats;
  auto s = std::make_shared<const Spanner>(build_spanner(oracle, 2.0, &stats));
  info = {{"cached", false}, {"reduced_dim", s->reduced_dim()}, {"oracle_calls", stats.oracle_calls},
          {"swaps", stats.swaps}};
  if (c.run.spanner_cache) {
    if (c.run.spanner_cache->has_parent_path()) fs::create_directories(c.run.spanner_cache->parent_path());
    save_spanner_csv(c.run.spanner_cache->string(), key, *s);
  }
  return s;
}

/// Runs an experiment and writes trajectory.csv and summary.json into the
/// output directory. `warn` receives non-fatal notices.
inline RunArtifacts run_experiment(const ExperimentConfig& c, std::ostream* warn = nullptr) {
  return with_game(c.game, [&](const auto& game) {
    const auto& oracle = game.oracle();
    const std::size_t d = oracle.dim();
    const std::size_t m = oracle.max_active();

    bool any_bandit = false;
    for (const auto& p : c.learners) any_bandit = any_bandit || p.feedback == Feedback::bandit;
    std::shared_ptr<const Spanner> spanner;
    json spanner_info;
    std::size_t d_r = 0;
    if (any_bandit) {
      spanner = experiment_spanner(c, oracle, spanner_info);
      d_r = spanner->reduced_dim();
    } else {
      SpannerStats stats;
      d_r = static_cast<std::size_t>(span_chart(oracle, stats).cols());
    }
    const std::vector<ResolvedPlayer> players = resolve_players(c, d, d_r, m);
    std::vector<LearnerConfig> configs;
    for (std::size_t i = 0; i < players.size(); ++i) {
      configs.push_back(players[i].config);
      if (warn && players[i].short_horizon) {
        *warn << "warning: player " << i << ": T=" << c.run.T
              << " is below 8 d_r^2 m; the bandit defaults are outside their guarantee\n";
      }
    }

    fs::create_directories(c.run.output);
    RunArtifacts art;
    art.trajectory_csv = c.run.output / "trajectory.csv";
    art.summary_json = c.run.output / "summary.json";
    std::ofstream csv(art.trajectory_csv, std::ios::binary | std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write " + art.trajectory_csv.string());
    csv << kTrajectoryHeader << '\n';
    std::size_t written = 0;
    RunOptions options;
    options.threads = c.run.threads;
    options.checkpoint_every = c.run.checkpoint;
    options.on_checkpoint = [&](const Trajectory& t) {
      write_trajectory_rows(csv, t, written, t.rounds());
      written = t.rounds();
      csv.flush();
    };
    const RunResult result = run_dynamics(game, configs, c.run.T, c.run.seed, spanner, c.adversary, options);
    const Trajectory& t = result.trajectory;
    write_trajectory_rows(csv, t, written, t.rounds());
    csv.close();
    if (!csv) throw std::runtime_error("failed writing " + art.trajectory_csv.string());

    const std::vector<double> gap = game_cce_gap(game, t.actions, c.run.seed, c.adversary);
    json learners = json::array();
    PhaseTimes total;
    for (std::size_t i = 0; i < players.size(); ++i) {
      const PhaseTimes& pt = result.learner_times[i];
      total += pt;
      learners.push_back({{"feedback", to_string(players[i].config.feedback)},
                          {"eta", players[i].config.eta},
                          {"gamma", players[i].config.gamma},
                          {"optimism", players[i].config.optimism},
                          {"eta_auto", players[i].eta_auto},
                          {"gamma_auto", players[i].gamma_auto},
                          {"short_horizon", players[i].short_horizon},
                          {"pinv_fallbacks", result.pinv_fallbacks[i]},
                          {"timings", {{"kernels", pt.kernels}, {"sampling", pt.sampling}, {"solves", pt.solves}}}});
    }
    art.summary = {{"T", c.run.T},
                   {"seed", c.run.seed},
                   {"per_player_final_regret", t.cumulative_regret.back()},
                   {"per_player_cce_gap", gap},
                   {"wall_time_seconds", result.wall_seconds},
                   {"d", d},
                   {"d_r", d_r},
                   {"m", m},
                   {"learners", learners},
                   {"timings",
                    {{"kernels", total.kernels},
                     {"sampling", total.sampling},
                     {"solves", total.solves},
                     {"losses", result.loss_seconds},
                     {"regret", result.regret_seconds}}},
                   {"config", resolved_config_json(c, players)}};
    if (spanner) art.summary["spanner"] = spanner_info;
    std::ofstream out(art.summary_json, std::ios::trunc);
    out << art.summary.dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing " + art.summary_json.string());
    return art;
  });
}

struct GapReport {
  std::size_t T = 0;
  std::vector<double> gap;
};

/// Reads trajectory.csv back and recomputes every player's CCE gap. Rounds
/// must be contiguous from 1; a prefix of a run is a valid trajectory.
inline GapReport gap_from_trajectory(const ExperimentConfig& c, const fs::path& path) {
  const std::string text = io_detail::read_file(path);
  std::istringstream in(text);
  std::string line;
  int lineno = 1;
  auto fail = [&](const std::string& msg) -> void {
    throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + msg);
  };
  if (!std::getline(in, line) || line != kTrajectoryHeader) fail("missing trajectory header");
  return with_game(c.game, [&](const auto& game) {
    const std::size_t players = game.players();
    const std::size_t d = game.dim();
    std::vector<std::vector<ActionVector>> joint;
    std::size_t expected_player = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::vector<std::string> f;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) f.push_back(cell);
      if (f.size() != 5) fail("expected 5 columns");
      std::size_t round = 0;
      std::size_t player = 0;
      try {
        round = std::stoul(f[0]);
        player = std::stoul(f[1]);
      } catch (const std::exception&) {
        fail("round and player must be integers");
      }
      if (player >= players) fail("player " + f[1] + " does not exist in a " + std::to_string(players) + "-player game");
      if (player != expected_player || round != joint.size() + (player == 0 ? 1 : 0)) {
        fail("rows must list rounds 1, 2, ... with players 0.." + std::to_string(players - 1) + " in order");
      }
      std::vector<int> active;
      std::stringstream as(f[2]);
      while (std::getline(as, cell, ';')) {
        long j = -1;
        try {
          j = std::stol(cell);
        } catch (const std::exception&) {
          fail("bad action index '" + cell + "'");
        }
        if (j < 0 || static_cast<std::size_t>(j) >= d) fail("action index " + cell + " out of range for d=" + std::to_string(d));
        active.push_back(static_cast<int>(j));
      }
      ActionVector v;
      try {
        v = ActionVector(d, active);
        validate_action(game.oracle(), v);
      } catch (const std::logic_error& e) {
        fail(std::string("invalid action: ") + e.what());
      }
      if (player == 0) joint.emplace_back();
      joint.back().push_back(std::move(v));
      expected_player = (player + 1) % players;
    }
    if (joint.empty()) fail("trajectory has no rounds");
    if (expected_player != 0) fail("last round is incomplete");
    GapReport report;
    report.T = joint.size();
    report.gap = game_cce_gap(game, joint, c.run.seed, c.adversary);
    return report;
  });
}

}  // namespace polylearn
