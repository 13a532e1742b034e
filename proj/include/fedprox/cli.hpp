#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fedprox/config.hpp"

namespace fedprox {

// Exit-code contract shared by every subcommand:
//   0 success, 1 verification failure, 2 configuration error, 3 solver failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitSolverError = 3;

struct CliOptions {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out_dir = ".";
  bool svg = false;
};

// Executes one run and writes trace.csv, summary.json and (optionally)
// trace.svg into out_dir.
int cmd_run(const std::string& config_path, const CliOptions& opts);

// One run per axis value with theorem schedules recomputed per value; writes
// sweep.csv and sweep_summary.json (with the log-log slope) into out_dir.
// axis is one of "T", "I", "b", "bI"; "b"/"bI" require the fedmspp algorithm.
int cmd_sweep(const std::string& config_path, const std::string& axis,
              const std::vector<double>& values, const CliOptions& opts);

// Runs the full property suite, printing one PASS/FAIL line per check.
int cmd_verify(const std::string& config_path, const CliOptions& opts);

}  // namespace fedprox
