#include "fedprox/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <utility>

#include "json.hpp"

namespace fedprox {

namespace {

std::string fmt_double(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double residual_or_nan(const RoundRecord& rec, const char* key) {
  const auto it = rec.invariant_residuals.find(key);
  return it == rec.invariant_residuals.end() ? std::numeric_limits<double>::quiet_NaN()
                                             : it->second;
}

}  // namespace

std::string trace_to_csv(const TraceLog& trace) {
  std::ostringstream out;
  out << "t,eta,eps_budget,eps_max,grad_sq,moreau_sq,step_norm,step_resid_max,step_resid_bound,"
         "local_step_max,local_step_bound,concentration_sq,concentration_bound_sq\n";
  for (const RoundRecord& rec : trace.records) {
    out << rec.t << ',' << fmt_double(rec.eta) << ',' << fmt_double(rec.eps_budget) << ','
        << fmt_double(rec.eps_certified_max) << ',' << fmt_double(rec.grad_sq) << ','
        << fmt_double(rec.moreau_sq) << ',' << fmt_double(rec.step_norm) << ','
        << fmt_double(residual_or_nan(rec, "step_resid_max")) << ','
        << fmt_double(residual_or_nan(rec, "step_resid_bound")) << ','
        << fmt_double(residual_or_nan(rec, "local_step_max")) << ','
        << fmt_double(residual_or_nan(rec, "local_step_bound")) << ','
        << fmt_double(residual_or_nan(rec, "concentration_sq")) << ','
        << fmt_double(residual_or_nan(rec, "concentration_bound_sq")) << '\n';
  }
  return out.str();
}

std::string summary_to_json(const TraceLog& trace, const std::string& algorithm_name) {
  nlohmann::json j;
  j["algorithm"] = algorithm_name;
  j["rounds"] = trace.records.size();
  if (!std::isnan(trace.summary.avg_grad_sq)) j["avg_grad_sq"] = trace.summary.avg_grad_sq;
  if (!std::isnan(trace.summary.avg_moreau_sq)) {
    j["avg_moreau_sq"] = trace.summary.avg_moreau_sq;
  }
  j["t_star"] = trace.summary.t_star;
  j["wall_time_s"] = trace.summary.wall_time_s;
  if (!trace.records.empty()) {
    j["eta"] = trace.records.front().eta;
    j["eps_budget"] = trace.records.front().eps_budget;
  }
  return j.dump(2) + "\n";
}

std::string trace_to_svg(const TraceLog& trace) {
  // Plot grad_sq when available, otherwise moreau_sq, against the round index.
  std::vector<std::pair<double, double>> points;
  for (const RoundRecord& rec : trace.records) {
    const double v = !std::isnan(rec.grad_sq) ? rec.grad_sq : rec.moreau_sq;
    if (!std::isnan(v)) points.emplace_back(static_cast<double>(rec.t), v);
  }
  const int width = 640, height = 400, margin = 50;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\""
      << width - margin << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin
      << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
  if (points.size() >= 2) {
    double xmin = points.front().first, xmax = points.back().first;
    double ymin = points.front().second, ymax = ymin;
    for (const auto& [x, y] : points) {
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
    if (ymax <= ymin) ymax = ymin + 1.0;
    if (xmax <= xmin) xmax = xmin + 1.0;
    out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : points) {
      const double px = margin + (x - xmin) / (xmax - xmin) * (width - 2 * margin);
      const double py = height - margin - (y - ymin) / (ymax - ymin) * (height - 2 * margin);
      out << px << ',' << py << ' ';
    }
    out << "\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\" font-size=\"12\">round</text>\n";
    out << "<text x=\"14\" y=\"" << height / 2
        << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 "
        << height / 2 << ")\">stationarity</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string sweep_to_csv(std::span<const SweepRow> rows, const std::string& metric_name) {
  std::ostringstream out;
  out << "value," << metric_name << '\n';
  for (const SweepRow& row : rows) {
    out << fmt_double(row.value) << ',' << fmt_double(row.metric) << '\n';
  }
  return out.str();
}

double loglog_slope(std::span<const SweepRow> rows) {
  if (rows.size() < 2) throw ConfigError("log-log slope needs at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(rows.size());
  for (const SweepRow& row : rows) {
    if (row.value <= 0.0 || row.metric <= 0.0) {
      throw ConfigError("log-log slope requires positive values and metrics");
    }
    const double x = std::log(row.value), y = std::log(row.metric);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::string sweep_summary_to_json(std::span<const SweepRow> rows,
                                  const std::string& metric_name, const std::string& axis) {
  nlohmann::json j;
  j["axis"] = axis;
  j["metric"] = metric_name;
  j["values"] = nlohmann::json::array();
  for (const SweepRow& row : rows) {
    j["values"].push_back({{"value", row.value}, {metric_name, row.metric}});
  }
  j["loglog_slope"] = loglog_slope(rows);
  return j.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write file '" + path + "'");
  out << content;
}

}  // namespace fedprox
