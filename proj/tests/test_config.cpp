#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "fedprox/cli.hpp"
#include "fedprox/report.hpp"
#include "fedprox/verify.hpp"

using namespace fedprox;

namespace {

const char* kValidConfig = R"({
  "instance": {
    "loss": "quadratic",
    "devices": 4, "dim": 3, "base_n": 10,
    "shift": 0.5, "noise_std": 0.1
  },
  "run": {
    "algorithm": "fedprox",
    "rounds": 5,
    "devices_per_round": 2,
    "schedule": "smooth_fedprox",
    "eps_policy": "theorem_budget",
    "seed": 7
  }
})";

std::string write_temp(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path);
  out << content;
  return path.string();
}

}  // namespace

TEST_CASE("valid config parses and runs") {
  const ConfigFile cfg = parse_config(kValidConfig);
  CHECK(cfg.run.algorithm == Algorithm::FedProx);
  CHECK(cfg.run.rounds == 5);
  CHECK(cfg.instance.het.devices == 4);
  const FederatedInstance inst = build_instance(cfg.instance, cfg.run.seed);
  const TraceLog trace = run(inst, cfg.run);
  CHECK(trace.records.size() == 5);
}

TEST_CASE("unknown keys are rejected everywhere") {
  std::string bad = kValidConfig;
  bad.replace(bad.find("\"shift\""), 7, "\"shifty\"");
  CHECK_THROWS_AS(parse_config(bad), ConfigError);

  CHECK_THROWS_AS(parse_config(R"({"instance": {}, "run": {}, "bogus": 1})"), ConfigError);
}

TEST_CASE("missing and conditional keys") {
  CHECK_THROWS_AS(parse_config(R"({"run": {}})"), ConfigError);
  // manual schedule requires eta; other schedules must not carry one.
  std::string manual = kValidConfig;
  manual.replace(manual.find("smooth_fedprox"), 14, "manual");
  CHECK_THROWS_AS(parse_config(manual), ConfigError);
  std::string stray = kValidConfig;
  stray.replace(stray.find("\"eps_policy\""), 12, "\"eta\": 0.5, \"eps_policy\"");
  CHECK_THROWS_AS(parse_config(stray), ConfigError);
  // batch_size / full_batch / fedavg are algorithm-specific.
  std::string batch = kValidConfig;
  batch.replace(batch.find("\"rounds\""), 8, "\"batch_size\": 4, \"rounds\"");
  CHECK_THROWS_AS(parse_config(batch), ConfigError);
  std::string fedavg = kValidConfig;
  fedavg.replace(fedavg.find("\"rounds\""), 8,
                 "\"fedavg\": {\"epochs\": 1, \"lr\": 0.1, \"minibatch\": 8}, \"rounds\"");
  CHECK_THROWS_AS(parse_config(fedavg), ConfigError);
}

TEST_CASE("config errors carry the offending field") {
  std::string bad = kValidConfig;
  bad.replace(bad.find("\"devices_per_round\": 2"), 22, "\"devices_per_round\": 9");
  const ConfigFile cfg = parse_config(bad);
  const FederatedInstance inst = build_instance(cfg.instance, cfg.run.seed);
  try {
    run(inst, cfg.run);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("devices_per_round") != std::string::npos);
  }
}

TEST_CASE("constants override feeds the instance") {
  std::string over = kValidConfig;
  over.replace(over.find("\"noise_std\": 0.1"), 16,
               "\"noise_std\": 0.1, \"constants_override\": {\"G\": 0.5}");
  const ConfigFile cfg = parse_config(over);
  const FederatedInstance inst = build_instance(cfg.instance, cfg.run.seed);
  CHECK(inst.constants.G == 0.5);
}

TEST_CASE("trace CSV has the documented schema and is replay-identical") {
  const ConfigFile cfg = parse_config(kValidConfig);
  const FederatedInstance inst = build_instance(cfg.instance, cfg.run.seed);
  const std::string csv_a = trace_to_csv(run(inst, cfg.run));
  const std::string csv_b = trace_to_csv(run(inst, cfg.run));
  CHECK(csv_a == csv_b);
  CHECK(csv_a.rfind("t,eta,eps_budget,eps_max,grad_sq,moreau_sq,step_norm,step_resid_max,"
                    "step_resid_bound,local_step_max,local_step_bound,concentration_sq,"
                    "concentration_bound_sq\n",
                    0) == 0);
  // Header plus one line per round.
  CHECK(std::count(csv_a.begin(), csv_a.end(), '\n') == 6);
}

TEST_CASE("cmd_run writes artifacts and honors the exit contract") {
  const std::string cfg_path = write_temp("fedprox_cfg.json", kValidConfig);
  const std::string out_dir =
      (std::filesystem::temp_directory_path() / "fedprox_out").string();
  CliOptions opts;
  opts.out_dir = out_dir;
  opts.svg = true;
  CHECK(cmd_run(cfg_path, opts) == kExitOk);
  CHECK(std::filesystem::exists(out_dir + "/trace.csv"));
  CHECK(std::filesystem::exists(out_dir + "/summary.json"));
  CHECK(std::filesystem::exists(out_dir + "/trace.svg"));

  // Same config twice: byte-identical trace.
  std::ifstream first(out_dir + "/trace.csv");
  std::string a((std::istreambuf_iterator<char>(first)), std::istreambuf_iterator<char>());
  CHECK(cmd_run(cfg_path, opts) == kExitOk);
  std::ifstream second(out_dir + "/trace.csv");
  std::string b((std::istreambuf_iterator<char>(second)), std::istreambuf_iterator<char>());
  CHECK(a == b);

  // Config error exit code: I > M.
  std::string bad = kValidConfig;
  bad.replace(bad.find("\"devices_per_round\": 2"), 22, "\"devices_per_round\": 9");
  const std::string bad_path = write_temp("fedprox_bad.json", bad);
  CHECK(cmd_run(bad_path, opts) == kExitConfigError);
  CHECK(cmd_run("/nonexistent/path.json", opts) == kExitConfigError);
}

TEST_CASE("cmd_sweep validates the axis and emits rows per value") {
  const std::string cfg_path = write_temp("fedprox_sweep_cfg.json", kValidConfig);
  const std::string out_dir =
      (std::filesystem::temp_directory_path() / "fedprox_sweep_out").string();
  CliOptions opts;
  opts.out_dir = out_dir;

  // b / bI axes require fedmspp.
  CHECK(cmd_sweep(cfg_path, "bI", {1, 4}, opts) == kExitConfigError);
  CHECK(cmd_sweep(cfg_path, "nope", {1, 2}, opts) == kExitConfigError);

  CHECK(cmd_sweep(cfg_path, "T", {4, 8, 16}, opts) == kExitOk);
  std::ifstream csv(out_dir + "/sweep.csv");
  std::string content((std::istreambuf_iterator<char>(csv)),
                      std::istreambuf_iterator<char>());
  CHECK(std::count(content.begin(), content.end(), '\n') == 4);  // header + 3 rows
  CHECK(std::filesystem::exists(out_dir + "/sweep_summary.json"));
}

TEST_CASE("seed override changes the run, replay restores it") {
  const std::string cfg_path = write_temp("fedprox_seed_cfg.json", kValidConfig);
  const std::string out_a =
      (std::filesystem::temp_directory_path() / "fedprox_seed_a").string();
  const std::string out_b =
      (std::filesystem::temp_directory_path() / "fedprox_seed_b").string();
  auto read_trace = [](const std::string& dir) {
    std::ifstream in(dir + "/trace.csv");
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
  };
  CliOptions a;
  a.out_dir = out_a;
  a.seed = 1001;
  CHECK(cmd_run(cfg_path, a) == kExitOk);
  CliOptions b;
  b.out_dir = out_b;
  b.seed = 1002;
  CHECK(cmd_run(cfg_path, b) == kExitOk);
  CHECK(read_trace(out_a) != read_trace(out_b));
  b.seed = 1001;
  b.threads = 2;
  CHECK(cmd_run(cfg_path, b) == kExitOk);
  CHECK(read_trace(out_a) == read_trace(out_b));
}

TEST_CASE("loglog slope recovers a power law") {
  std::vector<SweepRow> rows;
  for (double v : {16.0, 64.0, 256.0}) rows.push_back({v, 3.0 * std::pow(v, -2.0 / 3.0)});
  CHECK(loglog_slope(rows) == doctest::Approx(-2.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("lgd toggle emits a report for smooth runs") {
  std::string with_lgd = kValidConfig;
  with_lgd.replace(with_lgd.find("\"run\""), 5,
                   "\"diagnostics\": {\"lgd\": true, \"lgd_probes\": 5}, \"run\"");
  const std::string cfg_path = write_temp("fedprox_lgd_cfg.json", with_lgd);
  const std::string out_dir =
      (std::filesystem::temp_directory_path() / "fedprox_lgd_out").string();
  CliOptions opts;
  opts.out_dir = out_dir;
  CHECK(cmd_run(cfg_path, opts) == kExitOk);
  CHECK(std::filesystem::exists(out_dir + "/lgd.json"));
}

TEST_CASE("halving the certified G is caught by the certification check") {
  const ConfigFile cfg = parse_config(kValidConfig);
  FederatedInstance inst = build_instance(cfg.instance, cfg.run.seed);
  CHECK(check_constants_certified(inst, cfg.run.seed).pass);
  inst.constants.G *= 0.5;
  CHECK(!check_constants_certified(inst, cfg.run.seed).pass);
}

TEST_CASE("cmd_verify exits 1 when a single check fails") {
  // Deliberately inflated (halved) G makes the Lipschitz certification fail;
  // every other check still runs and the command must report failure.
  std::string faulty = kValidConfig;
  faulty.replace(faulty.find("\"noise_std\": 0.1"), 16,
                 "\"noise_std\": 0.1, \"constants_override\": {\"G\": 1.0}");
  const std::string cfg_path = write_temp("fedprox_faulty_cfg.json", faulty);
  CliOptions opts;
  opts.out_dir = (std::filesystem::temp_directory_path() / "fedprox_verify_out").string();
  CHECK(cmd_verify(cfg_path, opts) == kExitVerifyFailed);
}
