#include "fedprox/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>

#include "fedprox/report.hpp"
#include "fedprox/verify.hpp"
#include "json.hpp"

namespace fedprox {

namespace {

const char* algorithm_name(Algorithm alg) {
  switch (alg) {
    case Algorithm::FedProx: return "fedprox";
    case Algorithm::FedMSPP: return "fedmspp";
    case Algorithm::FedAvg: return "fedavg";
    case Algorithm::CentralPPA: return "central_ppa";
  }
  return "unknown";
}

int default_threads() {
  if (const char* env = std::getenv("FEDPROX_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

ConfigFile load_with_overrides(const std::string& config_path, const CliOptions& opts) {
  ConfigFile cfg = load_config(config_path);
  if (opts.seed) cfg.run.seed = *opts.seed;
  if (opts.threads) cfg.run.threads = *opts.threads;
  if (cfg.run.threads <= 0) cfg.run.threads = default_threads();
  return cfg;
}

int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return kExitSolverError;
  }
}

}  // namespace

namespace {

// LGD probes default to the run's iterates plus `extra` random ball points.
std::string lgd_to_json(const FederatedInstance& inst, const TraceLog& trace, int extra,
                        std::uint64_t seed) {
  std::vector<Vec> probes = trace.iterates;
  RngStream rng(seed, {stream_tag::kProbes, 64});
  const std::size_t p = static_cast<std::size_t>(inst.dim);
  for (int i = 0; i < extra; ++i) {
    Vec w(p);
    for (double& v : w) v = rng.next_normal();
    const double n = norm(w);
    if (n > 0.0) {
      scale(w, inst.loss.domain_radius *
                   std::pow(rng.next_unit(), 1.0 / static_cast<double>(p)) / n);
    }
    probes.push_back(std::move(w));
  }
  const LgdReport report = lgd_fit(inst, probes);
  nlohmann::json j;
  if (report.b_sq_min_h0) j["b_sq_min_h0"] = *report.b_sq_min_h0;
  j["h_sq_min_b1"] = report.h_sq_min_b1;
  j["probe_count"] = report.probe_count;
  return j.dump(2) + "\n";
}

}  // namespace

int cmd_run(const std::string& config_path, const CliOptions& opts) {
  return run_guarded([&]() {
    const ConfigFile cfg = load_with_overrides(config_path, opts);
    const FederatedInstance inst = build_instance(cfg.instance, cfg.run.seed);
    const TraceLog trace = run(inst, cfg.run);

    std::filesystem::create_directories(opts.out_dir);
    write_text_file(opts.out_dir + "/trace.csv", trace_to_csv(trace));
    write_text_file(opts.out_dir + "/summary.json",
                    summary_to_json(trace, algorithm_name(cfg.run.algorithm)));
    if (opts.svg) write_text_file(opts.out_dir + "/trace.svg", trace_to_svg(trace));
    if (cfg.diagnostics.lgd && is_smooth(inst.loss.kind)) {
      write_text_file(opts.out_dir + "/lgd.json",
                      lgd_to_json(inst, trace, cfg.diagnostics.lgd_probes, cfg.run.seed));
    }

    std::cout << "run complete: rounds=" << trace.records.size();
    if (!std::isnan(trace.summary.avg_grad_sq)) {
      std::cout << " avg_grad_sq=" << trace.summary.avg_grad_sq;
    }
    if (!std::isnan(trace.summary.avg_moreau_sq)) {
      std::cout << " avg_moreau_sq=" << trace.summary.avg_moreau_sq;
    }
    std::cout << " t_star=" << trace.summary.t_star << '\n';
    return kExitOk;
  });
}

int cmd_sweep(const std::string& config_path, const std::string& axis,
              const std::vector<double>& values, const CliOptions& opts) {
  return run_guarded([&]() {
    ConfigFile cfg = load_with_overrides(config_path, opts);
    if (values.size() < 2) throw ConfigError("sweep needs at least two axis values");
    if ((axis == "b" || axis == "bI") && cfg.run.algorithm != Algorithm::FedMSPP) {
      throw ConfigError("axis '" + axis + "' requires the fedmspp algorithm");
    }
    if (axis != "T" && axis != "I" && axis != "b" && axis != "bI") {
      throw ConfigError("unknown sweep axis '" + axis + "' (expected T, I, b or bI)");
    }

    const FederatedInstance inst = build_instance(cfg.instance, cfg.run.seed);
    const bool smooth = is_smooth(inst.loss.kind);
    if (!smooth && !cfg.run.record_moreau) {
      throw ConfigError("non-smooth sweeps need diagnostics.record_moreau = true");
    }

    std::vector<SweepRow> rows;
    for (double value : values) {
      if (value < 1.0 || value != std::floor(value)) {
        throw ConfigError("sweep values must be positive integers");
      }
      RunConfig rc = cfg.run;
      const int iv = static_cast<int>(value);
      if (axis == "T") {
        rc.rounds = iv;
      } else if (axis == "I") {
        rc.devices_per_round = iv;
      } else if (axis == "b") {
        rc.batch_size = iv;
      } else {
        const int side = static_cast<int>(std::llround(std::sqrt(value)));
        if (side * side != iv) {
          throw ConfigError("bI sweep values must be perfect squares (b = I = sqrt(value))");
        }
        rc.batch_size = side;
        rc.devices_per_round = side;
      }
      const TraceLog trace = run(inst, rc);
      const double metric = smooth ? trace.summary.avg_grad_sq : trace.summary.avg_moreau_sq;
      if (std::isnan(metric)) throw ConfigError("sweep metric unavailable for this run");
      rows.push_back(SweepRow{value, metric});
    }

    const std::string metric_name = smooth ? "avg_grad_sq" : "avg_moreau_sq";
    std::filesystem::create_directories(opts.out_dir);
    write_text_file(opts.out_dir + "/sweep.csv", sweep_to_csv(rows, metric_name));
    write_text_file(opts.out_dir + "/sweep_summary.json",
                    sweep_summary_to_json(rows, metric_name, axis));
    std::cout << "sweep complete: axis=" << axis << " points=" << rows.size()
              << " loglog_slope=" << loglog_slope(rows) << '\n';
    return kExitOk;
  });
}

int cmd_verify(const std::string& config_path, const CliOptions& opts) {
  return run_guarded([&]() {
    const ConfigFile cfg = load_with_overrides(config_path, opts);
    const std::vector<CheckResult> results = run_verify_suite(cfg);
    int failures = 0;
    for (const CheckResult& r : results) {
      std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
      if (!r.pass) ++failures;
    }
    std::cout << (failures == 0 ? "verify: all checks passed ("
                                : "verify: FAILURES detected (")
              << results.size() - failures << "/" << results.size() << " passed)\n";
    return failures == 0 ? kExitOk : kExitVerifyFailed;
  });
}

}  // namespace fedprox
