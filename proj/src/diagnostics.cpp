#include "fedprox/diagnostics.hpp"

#include <cmath>

#include "fedprox/errors.hpp"

namespace fedprox {

Vec global_grad(const FederatedInstance& inst, const Vec& w) {
  if (!is_smooth(inst.loss.kind)) {
    throw ConfigError("global gradient undefined for non-smooth loss; use moreau_grad");
  }
  Vec g = zeros(w.size());
  const double inv_m = 1.0 / static_cast<double>(inst.num_devices());
  for (const auto& dev : inst.devices) {
    Vec gm = batch_grad(inst.loss, dev.examples, w);
    axpy(inv_m, gm, g);
  }
  return g;
}

double global_grad_sq(const FederatedInstance& inst, const Vec& w) {
  return sqnorm(global_grad(inst, w));
}

namespace {

OracleReport pooled_prox(const FederatedInstance& inst, const PooledData& pooled, const Vec& w,
                         const MoreauConfig& cfg) {
  ProxSubproblem sp{inst.loss, pooled.examples, pooled.weights, w, cfg.rho};
  if (inst.loss.kind == LossKind::Quadratic) {
    return prox_quadratic_exact(sp);
  }
  if (is_smooth(inst.loss.kind)) {
    if (!inst.constants.L) throw ConfigError("moreau_prox: missing smoothness constant");
    return prox_smooth_gd(sp, *inst.constants.L, cfg.inner_eps);
  }
  const double nu = inst.constants.nu.value_or(0.0);
  if (nu > 0.0 && cfg.rho >= 1.0 / (2.0 * nu)) {
    throw ConfigError("moreau rho must be < 1/(2*nu)");
  }
  return prox_nonsmooth_subgrad(sp, nu, cfg.inner_steps);
}

}  // namespace

Vec moreau_prox(const FederatedInstance& inst, const Vec& w, const MoreauConfig& cfg) {
  if (cfg.rho <= 0.0) throw ConfigError("moreau rho must be positive");
  const PooledData pooled = make_pooled(inst);
  return pooled_prox(inst, pooled, w, cfg).solution;
}

double moreau_grad(const FederatedInstance& inst, const Vec& w, const MoreauConfig& cfg) {
  return dist(w, moreau_prox(inst, w, cfg)) / cfg.rho;
}

double moreau_envelope_value(const FederatedInstance& inst, const Vec& w,
                             const MoreauConfig& cfg) {
  if (cfg.rho <= 0.0) throw ConfigError("moreau rho must be positive");
  const PooledData pooled = make_pooled(inst);
  const Vec wbar = pooled_prox(inst, pooled, w, cfg).solution;
  return weighted_risk(inst.loss, pooled.examples, pooled.weights, wbar) +
         sqdist(wbar, w) / (2.0 * cfg.rho);
}

LgdReport lgd_fit(const FederatedInstance& inst, std::span<const Vec> probes) {
  if (probes.size() < 2) throw ConfigError("lgd_fit needs at least 2 probes");
  LgdReport report;
  report.probe_count = static_cast<int>(probes.size());
  const double inv_m = 1.0 / static_cast<double>(inst.num_devices());
  for (const Vec& w : probes) {
    Vec gbar = zeros(w.size());
    double mean_local_sq = 0.0;
    for (const auto& dev : inst.devices) {
      Vec gm = batch_grad(inst.loss, dev.examples, w);
      mean_local_sq += inv_m * sqnorm(gm);
      axpy(inv_m, gm, gbar);
    }
    const double x = sqnorm(gbar);
    if (x > 1e-14) {
      const double ratio = mean_local_sq / x;
      if (!report.b_sq_min_h0 || ratio > *report.b_sq_min_h0) report.b_sq_min_h0 = ratio;
    }
    report.h_sq_min_b1 = std::max(report.h_sq_min_b1, std::max(0.0, mean_local_sq - x));
  }
  return report;
}

DirectionStats direction_stats(const FederatedInstance& inst, const Vec& w_prev, double eta,
                               std::span<const Vec> local_solutions,
                               std::span<const int> sampled) {
  if (local_solutions.size() != static_cast<std::size_t>(inst.num_devices())) {
    throw ConfigError("direction_stats: one local solution per device required");
  }
  DirectionStats stats;
  stats.d_per_device.reserve(local_solutions.size());
  for (std::size_t m = 0; m < local_solutions.size(); ++m) {
    stats.d_per_device.push_back(
        batch_grad(inst.loss, inst.devices[m].examples, local_solutions[m]));
  }

  stats.d_bar = zeros(w_prev.size());
  const double inv_m = 1.0 / static_cast<double>(inst.num_devices());
  for (const Vec& d : stats.d_per_device) axpy(inv_m, d, stats.d_bar);

  stats.d_sampled = zeros(w_prev.size());
  stats.delta_sampled = zeros(w_prev.size());
  if (sampled.empty()) throw ConfigError("direction_stats: empty sampled set");
  const double inv_i = 1.0 / static_cast<double>(sampled.size());
  for (int m : sampled) {
    const Vec& d = stats.d_per_device[static_cast<std::size_t>(m)];
    axpy(inv_i, d, stats.d_sampled);
    // delta^(m) = (sol - w_prev)/eta + d^(m)
    axpy(inv_i / eta, local_solutions[static_cast<std::size_t>(m)], stats.delta_sampled);
    axpy(-inv_i / eta, w_prev, stats.delta_sampled);
    axpy(inv_i, d, stats.delta_sampled);
  }
  return stats;
}

AllDeviceSolves solve_all_devices(const FederatedInstance& inst, const Vec& w_prev, double eta,
                                  double eps_target, long nonsmooth_steps) {
  AllDeviceSolves out;
  for (const auto& dev : inst.devices) {
    ProxSubproblem sp{inst.loss, dev.examples, {}, w_prev, eta};
    OracleReport report;
    if (inst.loss.kind == LossKind::Quadratic) {
      report = prox_quadratic_exact(sp);
    } else if (is_smooth(inst.loss.kind)) {
      report = prox_smooth_gd(sp, *inst.constants.L, eps_target);
    } else {
      report = prox_nonsmooth_subgrad(sp, inst.constants.nu.value_or(0.0), nonsmooth_steps);
    }
    out.max_certificate = std::max(out.max_certificate, report.epsilon_certified);
    out.directions.push_back(batch_grad(inst.loss, dev.examples, report.solution));
    out.solutions.push_back(std::move(report.solution));
  }
  return out;
}

}  // namespace fedprox
