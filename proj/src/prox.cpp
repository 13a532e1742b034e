#include "fedprox/prox.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedprox/errors.hpp"

namespace fedprox {

namespace {

void validate_subproblem(const ProxSubproblem& sp) {
  if (sp.batch.empty()) throw ConfigError("empty batch");
  if (sp.eta <= 0.0) throw ConfigError("prox eta must be positive");
  if (!sp.weights.empty() && sp.weights.size() != sp.batch.size()) {
    throw ConfigError("weights/batch size mismatch");
  }
  for (const Example& z : sp.batch) {
    if (z.feature.size() != sp.center.size()) {
      throw ConfigError("prox subproblem: feature/center dimension mismatch");
    }
  }
}

double risk_at(const ProxSubproblem& sp, const Vec& w) {
  if (sp.weights.empty()) return batch_risk(sp.loss, sp.batch, w);
  return weighted_risk(sp.loss, sp.batch, sp.weights, w);
}

Vec risk_grad_at(const ProxSubproblem& sp, const Vec& w) {
  if (sp.weights.empty()) return batch_grad(sp.loss, sp.batch, w);
  return weighted_grad(sp.loss, sp.batch, sp.weights, w);
}

double example_weight(const ProxSubproblem& sp, std::size_t i) {
  if (sp.weights.empty()) return 1.0 / static_cast<double>(sp.batch.size());
  return sp.weights[i];
}

// Cholesky solve of the SPD system H x = b, in place on copies.
Vec solve_spd(std::vector<double> h, Vec b) {
  const std::size_t p = b.size();
  for (std::size_t j = 0; j < p; ++j) {
    double d = h[j * p + j];
    for (std::size_t k = 0; k < j; ++k) d -= h[j * p + k] * h[j * p + k];
    if (d <= 0.0) throw SolverError("prox closed form: system not positive definite", 0.0);
    d = std::sqrt(d);
    h[j * p + j] = d;
    for (std::size_t i = j + 1; i < p; ++i) {
      double s = h[i * p + j];
      for (std::size_t k = 0; k < j; ++k) s -= h[i * p + k] * h[j * p + k];
      h[i * p + j] = s / d;
    }
  }
  for (std::size_t i = 0; i < p; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= h[i * p + k] * b[k];
    b[i] = s / h[i * p + i];
  }
  for (std::size_t ii = p; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < p; ++k) s -= h[k * p + ii] * b[k];
    b[ii] = s / h[ii * p + ii];
  }
  return b;
}

}  // namespace

double prox_objective(const ProxSubproblem& sp, const Vec& w) {
  return risk_at(sp, w) + sqdist(w, sp.center) / (2.0 * sp.eta);
}

Vec prox_gradient(const ProxSubproblem& sp, const Vec& w) {
  Vec g = risk_grad_at(sp, w);
  axpy(1.0 / sp.eta, w, g);
  axpy(-1.0 / sp.eta, sp.center, g);
  return g;
}

double gradient_certificate(double grad_norm, double lambda, double L) {
  const double gap_bound = grad_norm * grad_norm / (2.0 * lambda);
  if (L <= 0.0) return gap_bound;
  return std::max(gap_bound, grad_norm / (2.0 * L));
}

OracleReport prox_quadratic_exact(const ProxSubproblem& sp) {
  validate_subproblem(sp);
  if (sp.loss.kind != LossKind::Quadratic) {
    throw ConfigError("prox_quadratic_exact requires quadratic loss");
  }
  const std::size_t p = sp.center.size();
  std::vector<double> h(p * p, 0.0);
  Vec rhs(p, 0.0);
  double amax_sq = 0.0;
  for (std::size_t i = 0; i < sp.batch.size(); ++i) {
    const Vec& a = sp.batch[i].feature;
    const double wi = example_weight(sp, i);
    amax_sq = std::max(amax_sq, sqnorm(a));
    for (std::size_t r = 0; r < p; ++r) {
      const double war = wi * a[r];
      for (std::size_t c = 0; c <= r; ++c) h[r * p + c] += war * a[c];
      rhs[r] += war * sp.batch[i].label;
    }
  }
  const double inv_eta = 1.0 / sp.eta;
  for (std::size_t r = 0; r < p; ++r) {
    h[r * p + r] += inv_eta;
    rhs[r] += inv_eta * sp.center[r];
    for (std::size_t c = r + 1; c < p; ++c) h[r * p + c] = h[c * p + r];
  }

  OracleReport report;
  report.solution = solve_spd(std::move(h), std::move(rhs));
  report.method = ProxMethod::ClosedForm;
  report.iterations = 0;
  // Residual-based certificate; lambda >= 1/eta since the quadratic loss is convex.
  const double g = norm(prox_gradient(sp, report.solution));
  report.epsilon_certified = gradient_certificate(g, inv_eta, amax_sq);
  return report;
}

OracleReport prox_smooth_gd(const ProxSubproblem& sp, double L, double eps_target,
                            long iter_cap) {
  validate_subproblem(sp);
  if (!is_smooth(sp.loss.kind)) throw ConfigError("prox_smooth_gd requires a smooth loss");
  if (L <= 0.0) throw ConfigError("prox_smooth_gd: L must be positive");
  if (sp.eta >= 1.0 / L) throw ConfigError("prox_smooth_gd: eta must be < 1/L");
  if (eps_target <= 0.0) throw ConfigError("prox_smooth_gd: eps_target must be positive");

  const double lambda = 1.0 / sp.eta - L;
  const double step = 1.0 / (L + 1.0 / sp.eta);

  OracleReport report;
  report.method = ProxMethod::GradientDescent;
  report.solution = sp.center;
  Vec g = prox_gradient(sp, report.solution);
  double cert = gradient_certificate(norm(g), lambda, L);
  while (cert > eps_target) {
    if (report.iterations >= iter_cap) {
      throw SolverError("prox_smooth_gd: iteration cap exceeded", cert);
    }
    axpy(-step, g, report.solution);
    g = prox_gradient(sp, report.solution);
    cert = gradient_certificate(norm(g), lambda, L);
    ++report.iterations;
  }
  report.epsilon_certified = cert;
  return report;
}

namespace {

// Shared body of the two subgradient entry points. Runs until `stop(k, cert)`
// returns true or step_cap is hit.
template <typename StopFn>
OracleReport subgrad_run(const ProxSubproblem& sp, double nu, long step_cap, StopFn stop,
                         bool cap_is_error) {
  validate_subproblem(sp);
  if (nu < 0.0) throw ConfigError("weak convexity modulus must be >= 0");
  if (nu > 0.0 && sp.eta >= 1.0 / nu) {
    throw ConfigError("prox subgradient: eta must be < 1/nu");
  }
  if (step_cap < 1) throw ConfigError("prox subgradient: need at least one step");

  const double lambda = 1.0 / sp.eta - nu;
  const std::size_t p = sp.center.size();

  Vec x = sp.center;
  Vec avg_acc = zeros(p);
  double weight_acc = 0.0;
  double ghat = 0.0;
  double cert = 0.0;
  long k = 0;
  while (true) {
    ++k;
    axpy(static_cast<double>(k), x, avg_acc);
    weight_acc += static_cast<double>(k);
    Vec g = prox_gradient(sp, x);
    ghat = std::max(ghat, norm(g));
    axpy(-2.0 / (lambda * static_cast<double>(k + 1)), g, x);
    cert = 2.0 * ghat * ghat / (lambda * static_cast<double>(k + 1));
    if (stop(k, cert)) break;
    if (k >= step_cap) {
      if (cap_is_error) throw SolverError("prox subgradient: step cap exceeded", cert);
      break;
    }
  }

  OracleReport report;
  report.method = ProxMethod::Subgradient;
  report.iterations = k;
  report.epsilon_certified = cert;
  report.solution = std::move(avg_acc);
  scale(report.solution, 1.0 / weight_acc);
  return report;
}

}  // namespace

OracleReport prox_nonsmooth_subgrad(const ProxSubproblem& sp, double nu, long steps) {
  return subgrad_run(
      sp, nu, steps, [steps](long k, double) { return k >= steps; }, false);
}

OracleReport prox_nonsmooth_to_eps(const ProxSubproblem& sp, double nu, double eps_target,
                                   long step_cap) {
  if (eps_target <= 0.0) throw ConfigError("prox_nonsmooth_to_eps: eps_target must be positive");
  return subgrad_run(
      sp, nu, step_cap, [eps_target](long, double cert) { return cert <= eps_target; }, true);
}

Vec local_sgd_epochs(std::span<const Example> batch, const LossModel& loss, const Vec& w0,
                     int epochs, double lr, int minibatch, RngStream& rng) {
  if (batch.empty()) throw ConfigError("empty batch");
  if (epochs < 1) throw ConfigError("local_sgd_epochs: epochs must be >= 1");
  if (minibatch < 1) throw ConfigError("local_sgd_epochs: minibatch must be >= 1");

  const std::size_t n = batch.size();
  const std::size_t chunk = std::min<std::size_t>(static_cast<std::size_t>(minibatch), n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  Vec w = w0;
  for (int e = 0; e < epochs; ++e) {
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[rng.next_below(i)]);
    }
    for (std::size_t start = 0; start < n; start += chunk) {
      const std::size_t stop = std::min(start + chunk, n);
      Vec g = zeros(w.size());
      const double coeff = 1.0 / static_cast<double>(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        loss_subgrad_accum(loss, w, batch[order[i]], coeff, g);
      }
      axpy(-lr, g, w);
    }
  }
  return w;
}

}  // namespace fedprox
