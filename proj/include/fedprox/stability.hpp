#pragma once

#include <cstdint>
#include <vector>

#include "fedprox/datagen.hpp"
#include "fedprox/prox.hpp"

namespace fedprox {

// Uniform argument stability of the inexact regularized ERM estimator:
// 4G/(lambda*N) + 2*sqrt(2*eps/lambda).
double stability_bound(double G, double lambda, int N, double eps);

struct StabilityReport {
  double bound = 0.0;
  double observed_max = 0.0;
  double lambda = 0.0;
  int trials = 0;
  int violations = 0;  // trials with observed > bound*(1 + 1e-9)
};

// Solve-and-compare harness for the stability of regularized ERM. For each
// trial, one point of `data` (index drawn from rng) is replaced by the trial's
// entry of `replacements`; both prox subproblems (regularizer
// ||w - center||^2/(2*eta)) are solved to certified eps <= solver_eps and the
// solution displacement is compared against stability_bound. Constants are
// certified over data + replacements, and eta is set to eta_times_l / L from
// the certified L (resp. 1/nu for non-smooth kinds), so lambda = 1/eta - L > 0
// is guaranteed. eta_times_l must lie in (0, 1).
StabilityReport measure_argument_stability(std::span<const Example> data,
                                           const LossModel& loss,
                                           std::span<const Example> replacements,
                                           const Vec& center, double eta_times_l,
                                           double solver_eps, RngStream& rng);

struct MonteCarloComparison {
  double lhs = 0.0;
  double bound = 0.0;
  double se = 0.0;  // standard error of lhs
  bool pass() const { return lhs <= bound + 3.0 * se; }
};

// Vector Efron-Stein check: h(S) = regularized ERM solution over a fresh size-N
// dataset drawn from the population (device 0). Estimates
// E||h(S) - E h(S)||^2 against beta^2*N with beta the stability bound; E h(S)
// is itself estimated from a 4x held-out batch of datasets.
MonteCarloComparison efron_stein_check(const PopulationSpec& population, const LossModel& loss,
                                       int N, double eta_times_l, int samples,
                                       double solver_eps, std::uint64_t seed);

struct GradGeneralizationReport {
  MonteCarloComparison bias;      // ||E[grad R(A(S)) - grad R_S(A(S))]|| vs L*gamma
  MonteCarloComparison variance;  // E||grad R(A(S)) - E grad R(A(S))||^2 vs L^2*gamma^2*N
};

// Quadratic-loss only: the population gradient has the closed form
// diag(cov)*(w - w*), so both sides of the stability-to-generalization bounds
// are directly measurable.
GradGeneralizationReport grad_generalization_check(const PopulationSpec& population,
                                                   const LossModel& loss, int N,
                                                   double eta_times_l, int samples,
                                                   double solver_eps, std::uint64_t seed);

}  // namespace fedprox
