#pragma once

#include <span>
#include <string>
#include <vector>

#include "fedprox/engine.hpp"

namespace fedprox {

// Fixed trace CSV schema (header and column order are stable):
//   t,eta,eps_budget,eps_max,grad_sq,moreau_sq,step_norm,
//   step_resid_max,step_resid_bound,local_step_max,local_step_bound,
//   concentration_sq,concentration_bound_sq
// Absent values (NaN) are emitted as empty cells. Doubles use %.17g so a
// replayed run produces a byte-identical file.
std::string trace_to_csv(const TraceLog& trace);

std::string summary_to_json(const TraceLog& trace, const std::string& algorithm_name);

// Minimal inline SVG line chart of one trace metric against the round index.
std::string trace_to_svg(const TraceLog& trace);

struct SweepRow {
  double value = 0.0;
  double metric = 0.0;
};

std::string sweep_to_csv(std::span<const SweepRow> rows, const std::string& metric_name);

// Least-squares slope of log(metric) against log(value).
double loglog_slope(std::span<const SweepRow> rows);

std::string sweep_summary_to_json(std::span<const SweepRow> rows,
                                  const std::string& metric_name, const std::string& axis);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace fedprox
