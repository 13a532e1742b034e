#pragma once

#include <span>

#include "fedprox/loss.hpp"
#include "fedprox/rng.hpp"

namespace fedprox {

// Local proximal subproblem Q(w; center) = risk(w) + ||w - center||^2 / (2*eta)
// over a (possibly weighted) batch. Empty weights mean the uniform batch risk.
// Q is strongly convex with modulus 1/eta - L (smooth losses, eta < 1/L) or
// 1/eta - nu (weakly convex losses, eta < 1/nu).
struct ProxSubproblem {
  LossModel loss;
  std::span<const Example> batch;
  std::span<const double> weights{};
  Vec center;
  double eta = 0.0;
};

enum class ProxMethod { ClosedForm, GradientDescent, Subgradient };

// Inexact prox solution with a certified upper bound on Q(solution) - min Q.
struct OracleReport {
  Vec solution;
  double epsilon_certified = 0.0;
  long iterations = 0;
  ProxMethod method = ProxMethod::ClosedForm;
};

double prox_objective(const ProxSubproblem& sp, const Vec& w);
Vec prox_gradient(const ProxSubproblem& sp, const Vec& w);

// Sub-optimality certificate from the gradient norm of Q:
//   max( g^2/(2*lambda),  g/(2*L) ).
// The first term is the strong-convexity bound on the gap. Taking the max with
// g/(2*L) keeps the certificate large enough that the step residual
// ||w - center + eta*grad_risk(w)|| = eta*g never exceeds 2*L*eps*eta, which is
// the bound the engine checks on every smooth oracle call.
double gradient_certificate(double grad_norm, double lambda, double L);

// Direct solve of the quadratic-loss optimality system
// (sum_i w_i a_i a_i^T + I/eta) w = sum_i w_i y_i a_i + center/eta.
// The certificate is the residual-based bound at the solution (<= 1e-12 in
// practice; the I/eta term keeps the system well conditioned).
OracleReport prox_quadratic_exact(const ProxSubproblem& sp);

// Gradient descent on Q with step 1/(L + 1/eta) until the certificate falls
// below eps_target. Requires a smooth loss kind and eta < 1/L. Throws
// SolverError carrying the best certificate if iter_cap is exceeded.
OracleReport prox_smooth_gd(const ProxSubproblem& sp, double L, double eps_target,
                            long iter_cap = 1000000);

// `steps` subgradient iterations on Q with gamma_k = 2/(lambda*(k+1)) and
// k-weighted averaging; certificate 2*Ghat^2/(lambda*(steps+1)) where Ghat is
// the largest subgradient norm of Q observed along the trajectory. Requires
// eta < 1/nu.
OracleReport prox_nonsmooth_subgrad(const ProxSubproblem& sp, double nu, long steps);

// Same iteration, stopping as soon as the running certificate reaches
// eps_target. Throws SolverError if step_cap is exceeded first.
OracleReport prox_nonsmooth_to_eps(const ProxSubproblem& sp, double nu, double eps_target,
                                   long step_cap);

// Epoch-wise minibatch SGD from w0; the uncertified local solver used by the
// FedAvg baseline.
Vec local_sgd_epochs(std::span<const Example> batch, const LossModel& loss, const Vec& w0,
                     int epochs, double lr, int minibatch, RngStream& rng);

}  // namespace fedprox
