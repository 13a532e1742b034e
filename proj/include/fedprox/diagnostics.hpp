#pragma once

#include <optional>
#include <span>
#include <vector>

#include "fedprox/datagen.hpp"
#include "fedprox/prox.hpp"

namespace fedprox {

// Inner-solve budget for Moreau-envelope evaluations: prox over the pooled
// global risk at parameter rho, solved with the subgradient routine (nonsmooth
// kinds, inner_steps iterations) or gradient descent (smooth kinds, to
// inner_eps). Requires rho < 1/(2*nu) for weakly convex instances.
struct MoreauConfig {
  double rho = 0.1;
  long inner_steps = 100000;
  double inner_eps = 1e-12;
};

// ||(1/M) sum_m grad R_erm^(m)(w)||^2. Smooth loss kinds only.
double global_grad_sq(const FederatedInstance& inst, const Vec& w);
Vec global_grad(const FederatedInstance& inst, const Vec& w);

// Proximal point of the pooled risk and the derived stationarity measure
// ||w - prox_{rho*Rbar}(w)|| / rho.
Vec moreau_prox(const FederatedInstance& inst, const Vec& w, const MoreauConfig& cfg);
double moreau_grad(const FederatedInstance& inst, const Vec& w, const MoreauConfig& cfg);
// Envelope value Rbar(wbar) + ||wbar - w||^2/(2*rho); used by the
// finite-difference cross-check of the identity above.
double moreau_envelope_value(const FederatedInstance& inst, const Vec& w,
                             const MoreauConfig& cfg);

// Extremal local-gradient-dissimilarity estimates over a probe set. With
// x_j = ||grad Rbar(w_j)||^2 and y_j = (1/M) sum_m ||grad R^(m)(w_j)||^2:
// b_sq_min_h0 = max_j y_j/x_j over x_j > 1e-14 (absent if no such probe),
// h_sq_min_b1 = max_j max(0, y_j - x_j).
struct LgdReport {
  std::optional<double> b_sq_min_h0;
  double h_sq_min_b1 = 0.0;
  int probe_count = 0;
};
LgdReport lgd_fit(const FederatedInstance& inst, std::span<const Vec> probes);

// Update-direction statistics at a frozen server state: d^(m) is the batch
// gradient at device m's local prox solution, d_t averages the sampled
// devices, dbar_t averages all M, and delta^(m) = (sol_m - w_prev)/eta + d^(m).
struct DirectionStats {
  std::vector<Vec> d_per_device;  // for every device in [M]
  Vec d_sampled;                  // mean over sampled devices
  Vec d_bar;                      // mean over all devices
  Vec delta_sampled;              // mean of delta over sampled devices
};
DirectionStats direction_stats(const FederatedInstance& inst, const Vec& w_prev, double eta,
                               std::span<const Vec> local_solutions,
                               std::span<const int> sampled);

// Solves every device's full-batch prox at (w_prev, eta) with the exact-policy
// solver and returns the per-device directions plus certificates. Used by the
// sampling-statistics and concentration checks.
struct AllDeviceSolves {
  std::vector<Vec> solutions;
  std::vector<Vec> directions;
  double max_certificate = 0.0;
};
AllDeviceSolves solve_all_devices(const FederatedInstance& inst, const Vec& w_prev, double eta,
                                  double eps_target, long nonsmooth_steps);

}  // namespace fedprox
