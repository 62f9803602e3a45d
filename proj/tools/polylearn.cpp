// polylearn: run experiments, verify oracles, benchmark kernels, recompute gaps.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "polylearn/bench.hpp"
#include "polylearn/io.hpp"
#include "polylearn/verify.hpp"

namespace {

using namespace polylearn;

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kRuntimeError = 2;

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string scale = "small";
  std::string fault;
  std::string trajectory;
  std::string family = "blotto";
  std::vector<int> sizes;
  int k = 8;
  double budget = 1.0;
  bool skip_second = false;
};

ExperimentConfig config_with_overrides(const Flags& f) {
  ExperimentConfig c = load_config(f.config);
  if (f.seed) c.run.seed = *f.seed;
  if (f.threads) c.run.threads = std::max<std::size_t>(1, *f.threads);
  if (!f.out.empty()) c.run.output = f.out;
  return c;
}

std::string list(const std::vector<double>& xs) {
  std::ostringstream s;
  s.precision(6);
  for (std::size_t i = 0; i < xs.size(); ++i) s << (i ? " " : "") << xs[i];
  return s.str();
}

int cmd_run(const Flags& f) {
  const ExperimentConfig c = config_with_overrides(f);
  const RunArtifacts art = run_experiment(c, &std::cerr);
  std::cout << "wrote " << art.trajectory_csv.string() << " and " << art.summary_json.string() << "\n"
            << "T=" << art.summary["T"] << " seed=" << art.summary["seed"] << " d=" << art.summary["d"]
            << " d_r=" << art.summary["d_r"] << " m=" << art.summary["m"] << "\n"
            << "final regret: " << list(art.summary["per_player_final_regret"].get<std::vector<double>>()) << "\n"
            << "cce gap:      " << list(art.summary["per_player_cce_gap"].get<std::vector<double>>()) << "\n";
  return kOk;
}

int cmd_verify(const Flags& f) {
  verify::Options opt;
  opt.scale = verify::parse_scale(f.scale);
  if (f.seed) opt.seed = *f.seed;
  if (f.fault == "pair_sign") {
    opt.pair_sign = -1.0;
  } else if (!f.fault.empty()) {
    throw std::invalid_argument("unknown fault '" + f.fault + "'");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<verify::CheckResult> results = verify::run_all(opt);
  std::size_t passed = 0;
  std::printf("%-34s %9s %12s %10s %-12s %8s  %s\n", "check", "instances", "worst", "limit", "metric", "seconds",
              "status");
  for (const auto& r : results) {
    passed += r.passed ? 1 : 0;
    std::printf("%-34s %9zu %12.3e %10.3e %-12s %8.2f  %s\n", r.name.c_str(), r.instances, r.max_error, r.tolerance,
                r.metric.c_str(), r.seconds, r.passed ? "PASS" : "FAIL");
  }
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("verify (%s): %zu/%zu checks passed in %.1f s\n", f.scale.c_str(), passed, results.size(), total);
  return passed == results.size() ? kOk : kCheckFailed;
}

int cmd_bench(const Flags& f) {
  bench::Options opt;
  opt.blotto_k = f.k;
  opt.budget = f.budget;
  opt.second_moments = !f.skip_second;
  if (f.seed) opt.seed = *f.seed;
  std::vector<int> sizes = f.sizes;
  if (sizes.empty()) {
    if (f.family == "matroid") {
      sizes = {8, 16, 32, 64};
    } else {
      sizes = {64, 128, 256, 512};
    }
  }
  const std::vector<bench::Row> rows = bench::run(f.family, sizes, opt);
  std::ofstream file;
  if (!f.out.empty()) {
    file.open(f.out);
    if (!file) throw std::runtime_error("cannot write " + f.out);
  }
  std::ostream& table = f.out.empty() ? std::cout : file;
  std::ostream& report = f.out.empty() ? std::cerr : std::cout;
  bench::write_csv(table, rows);
  auto line = [&](const char* name, double bench::Row::*field) {
    if (rows.size() < 2 || std::isnan(rows.front().*field)) return;
    report << name << ": exponent " << bench::growth_exponent(rows, field) << ", ratio per doubling "
           << list(bench::ratios(rows, field)) << "\n";
  };
  line("first_moment", &bench::Row::first_moment);
  line("second_moment", &bench::Row::second_moment);
  line("sample", &bench::Row::sample);
  line("naive_first_moment", &bench::Row::naive_first_moment);
  return kOk;
}

int cmd_gap(const Flags& f) {
  const ExperimentConfig c = config_with_overrides(f);
  const GapReport r = gap_from_trajectory(c, f.trajectory);
  const json out{{"T", r.T}, {"per_player_cce_gap", r.gap}};
  std::cout << out.dump() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernelized no-regret learning over polyhedral action sets"};
  app.require_subcommand(1);
  Flags f;

  CLI::App* run = app.add_subcommand("run", "Run an experiment from a config");
  run->add_option("--config", f.config, "Experiment config (JSON)")->required();
  run->add_option("--out", f.out, "Output directory (overrides the config)");
  run->add_option("--seed", f.seed, "Seed override");
  run->add_option("--threads", f.threads, "Worker threads for per-player steps");

  CLI::App* ver = app.add_subcommand("verify", "Check every oracle against brute-force enumeration");
  ver->add_option("--scale", f.scale, "small or medium")->check(CLI::IsMember({"small", "medium"}));
  ver->add_option("--seed", f.seed, "Instance seed");
  ver->add_option("--threads", f.threads, "Accepted for uniformity; checks run sequentially");
  ver->add_option("--inject-fault", f.fault)->group("");

  CLI::App* ben = app.add_subcommand("bench", "Time kernel batches and sampling over a doubling grid");
  ben->add_option("--family", f.family, "blotto, matroid, dag or mset")
      ->check(CLI::IsMember({"blotto", "matroid", "dag", "mset"}));
  ben->add_option("--sizes", f.sizes, "Grid of sizes (n, |V|, nodes or d)")->delimiter(',');
  ben->add_option("--k", f.k, "Blotto battlefields")->check(CLI::PositiveNumber);
  ben->add_option("--budget", f.budget, "Seconds per timed quantity and size")->check(CLI::PositiveNumber);
  ben->add_flag("--skip-second", f.skip_second, "Skip the second-moment batch");
  ben->add_option("--out", f.out, "CSV output file (default stdout)");
  ben->add_option("--seed", f.seed, "Instance seed");

  CLI::App* gap = app.add_subcommand("gap", "Recompute CCE gaps from a trajectory CSV");
  gap->add_option("trajectory", f.trajectory, "trajectory.csv written by run")->required();
  gap->add_option("--config", f.config, "Config the trajectory was produced with")->required();
  gap->add_option("--seed", f.seed, "Seed override (adversarial runs)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kCheckFailed;
  }

  try {
    if (*run) return cmd_run(f);
    if (*ver) return cmd_verify(f);
    if (*ben) return cmd_bench(f);
    if (*gap) return cmd_gap(f);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCheckFailed;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCheckFailed;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kRuntimeError;
}
