#include <cmath>

#include "doctest.h"
#include "fedprox/prox.hpp"

using namespace fedprox;

namespace {

std::vector<Example> random_batch(RngStream& rng, int n, int p, double label_scale = 1.0) {
  std::vector<Example> data;
  for (int i = 0; i < n; ++i) {
    Example z;
    z.feature.resize(p);
    for (double& v : z.feature) v = rng.next_normal();
    z.label = label_scale * rng.next_normal();
    data.push_back(std::move(z));
  }
  return data;
}

// Test-side reference: plain long-horizon gradient descent on Q with a
// conservative step, independent of the library's solver and certificates.
Vec reference_gd_minimizer(const ProxSubproblem& sp, double L, long iters) {
  Vec w = sp.center;
  const double step = 0.5 / (L + 1.0 / sp.eta);
  for (long k = 0; k < iters; ++k) {
    Vec g = prox_gradient(sp, w);
    axpy(-step, g, w);
  }
  return w;
}

}  // namespace

TEST_CASE("quadratic prox at pinned subproblems") {
  // min 0.5 w^2 + 0.5 (w - 2)^2 -> w = 1.
  std::vector<Example> b1{{{1.0}, 0.0}};
  ProxSubproblem sp1{{LossKind::Quadratic}, b1, {}, Vec{2.0}, 1.0};
  const auto r1 = prox_quadratic_exact(sp1);
  CHECK(r1.solution[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r1.epsilon_certified <= 1e-12);
  CHECK(r1.method == ProxMethod::ClosedForm);

  // Stationarity (w - 3) + 2 (w - 1) = 0 -> w = 5/3.
  std::vector<Example> b2{{{1.0}, 3.0}};
  ProxSubproblem sp2{{LossKind::Quadratic}, b2, {}, Vec{1.0}, 0.5};
  CHECK(prox_quadratic_exact(sp2).solution[0] == doctest::Approx(5.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("quadratic prox agrees with an independent iterative oracle") {
  RngStream rng(17, {1});
  for (int trial = 0; trial < 5; ++trial) {
    auto batch = random_batch(rng, 6, 3);
    const auto c = certify_constants({LossKind::Quadratic}, batch, 10.0);
    ProxSubproblem sp{{LossKind::Quadratic}, batch, {}, Vec{0.5, -0.25, 1.0}, 0.4 / *c.L};
    const Vec exact = prox_quadratic_exact(sp).solution;
    const Vec iterative = reference_gd_minimizer(sp, *c.L, 100000);
    CHECK(dist(exact, iterative) < 1e-10);
  }
}

TEST_CASE("smooth gd prox: lazy exit, distance bound, monotone certificate") {
  RngStream rng(23, {2});
  auto batch = random_batch(rng, 8, 3);
  for (auto& z : batch) z.label = z.label >= 0 ? 1.0 : -1.0;
  const LossModel model{LossKind::Logistic};
  const auto c = certify_constants(model, batch, 10.0);
  const double eta = 0.5 / *c.L;
  ProxSubproblem sp{model, batch, {}, Vec{0.2, -0.1, 0.3}, eta};

  // Huge target: returns the center untouched.
  const auto lazy = prox_smooth_gd(sp, *c.L, 1e9);
  CHECK(lazy.solution == sp.center);
  CHECK(lazy.iterations == 0);
  CHECK(lazy.epsilon_certified <= 1e9);

  // Tight solve: strong-convexity distance bound against the quadratic case.
  auto qbatch = random_batch(rng, 6, 3);
  const auto cq = certify_constants({LossKind::Quadratic}, qbatch, 10.0);
  ProxSubproblem spq{{LossKind::Quadratic}, qbatch, {}, Vec{0.1, 0.1, 0.1}, 0.4 / *cq.L};
  const Vec exact = prox_quadratic_exact(spq).solution;
  const double lambda = 1.0 / spq.eta - *cq.L;
  for (double eps : {1e-4, 1e-8, 1e-12}) {
    const auto gd = prox_smooth_gd(spq, *cq.L, eps);
    CHECK(dist(gd.solution, exact) <= std::sqrt(2.0 * gd.epsilon_certified / lambda) + 1e-12);
  }

  // Certificate decreases monotonically along the gradient descent path; the
  // final objective undercuts random probes.
  const auto tight = prox_smooth_gd(sp, *c.L, 1e-10);
  CHECK(tight.epsilon_certified <= 1e-10);
  double prev_cert = 1e100;
  Vec w = sp.center;
  const double step = 1.0 / (*c.L + 1.0 / eta);
  const double lam = 1.0 / eta - *c.L;
  for (long k = 0; k < tight.iterations; ++k) {
    const double g = norm(prox_gradient(sp, w));
    const double cert = gradient_certificate(g, lam, *c.L);
    CHECK(cert <= prev_cert * (1.0 + 1e-12));
    prev_cert = cert;
    Vec grad = prox_gradient(sp, w);
    axpy(-step, grad, w);
  }
  const double q_final = prox_objective(sp, tight.solution);
  for (int probe = 0; probe < 100; ++probe) {
    Vec u(3);
    for (double& v : u) v = rng.next_normal();
    CHECK(q_final <= prox_objective(sp, u) + 1e-12);
  }
}

TEST_CASE("certificates are sound against the exact quadratic minimum") {
  RngStream rng(37, {3});
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto batch = random_batch(rng, 5, 3);
    const auto c = certify_constants({LossKind::Quadratic}, batch, 10.0);
    Vec center(3);
    for (double& v : center) v = rng.next_normal();
    ProxSubproblem sp{{LossKind::Quadratic}, batch, {}, center, 0.5 / *c.L};
    const double q_star = prox_objective(sp, prox_quadratic_exact(sp).solution);

    const auto gd = prox_smooth_gd(sp, *c.L, 1e-6);
    CHECK(prox_objective(sp, gd.solution) - q_star <= gd.epsilon_certified + 1e-12);
    const auto sub = prox_nonsmooth_subgrad(sp, 0.0, 5000);
    CHECK(prox_objective(sp, sub.solution) - q_star <= sub.epsilon_certified + 1e-12);
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("subgradient prox on the absolute loss") {
  // Single |w| term, center 3, eta 1: soft-threshold solution 3 - 1 = 2.
  std::vector<Example> batch{{{1.0}, 0.0}};
  const LossModel model{LossKind::Absolute};
  ProxSubproblem sp{model, batch, {}, Vec{3.0}, 1.0};
  const auto r = prox_nonsmooth_subgrad(sp, 0.0, 100000);
  CHECK(std::abs(r.solution[0] - 2.0) < 1e-3);
  CHECK(r.method == ProxMethod::Subgradient);

  // Center at the kink stays put.
  ProxSubproblem fixed{model, batch, {}, Vec{0.0}, 1.0};
  CHECK(prox_nonsmooth_subgrad(fixed, 0.0, 1000).solution[0] == 0.0);

  // Certificate decays as Theta(1/K).
  const double c1 = prox_nonsmooth_subgrad(sp, 0.0, 20000).epsilon_certified;
  const double c4 = prox_nonsmooth_subgrad(sp, 0.0, 80000).epsilon_certified;
  CHECK(c1 / c4 >= 3.0);
  CHECK(c1 / c4 <= 5.0);
}

TEST_CASE("subgradient prox respects the step-length bound") {
  RngStream rng(41, {4});
  for (int trial = 0; trial < 5; ++trial) {
    auto batch = random_batch(rng, 8, 3);
    const auto c = certify_constants({LossKind::Absolute}, batch, 10.0);
    Vec center(3);
    for (double& v : center) v = rng.next_normal();
    const double eta = 0.05 + 0.2 * rng.next_unit();
    ProxSubproblem sp{{LossKind::Absolute}, batch, {}, center, eta};
    const auto r = prox_nonsmooth_subgrad(sp, 0.0, 100000);
    CHECK(dist(r.solution, center) <= c.G * eta * (1.0 + 1e-3));
  }
}

TEST_CASE("three-point inequality at the exact quadratic prox") {
  RngStream rng(43, {5});
  auto batch = random_batch(rng, 6, 3);
  const double eta = 0.2;
  Vec center{0.5, -0.5, 0.2};
  ProxSubproblem sp{{LossKind::Quadratic}, batch, {}, center, eta};
  const Vec w_plus = prox_quadratic_exact(sp).solution;
  const double lhs =
      batch_risk(sp.loss, batch, w_plus) + sqdist(w_plus, center) / (2.0 * eta);
  for (int trial = 0; trial < 100; ++trial) {
    Vec u(3);
    for (double& v : u) v = rng.next_normal();
    const double rhs = batch_risk(sp.loss, batch, u) + sqdist(u, center) / (2.0 * eta) -
                       (1.0 / eta / 2.0) * sqdist(w_plus, u);
    CHECK(lhs <= rhs + 1e-9);
  }
}

TEST_CASE("prox_nonsmooth_to_eps stops at the requested certificate") {
  std::vector<Example> batch{{{1.0}, 0.0}, {{0.5}, 1.0}};
  ProxSubproblem sp{{LossKind::Absolute}, batch, {}, Vec{2.0}, 0.5};
  const auto r = prox_nonsmooth_to_eps(sp, 0.0, 1e-4, 10000000);
  CHECK(r.epsilon_certified <= 1e-4);
  CHECK_THROWS_AS(prox_nonsmooth_to_eps(sp, 0.0, 1e-12, 10), SolverError);
}

TEST_CASE("local sgd epochs") {
  RngStream rng(51, {6});
  auto batch = random_batch(rng, 12, 2);
  const LossModel model{LossKind::Quadratic};
  const Vec w0{0.5, -0.5};

  RngStream r1(51, {7});
  CHECK(local_sgd_epochs(batch, model, w0, 3, 0.0, 4, r1) == w0);

  // One epoch with a full batch is one deterministic full-gradient step.
  RngStream r2(51, {8});
  const Vec one = local_sgd_epochs(batch, model, w0, 1, 0.1, 12, r2);
  Vec expect = w0;
  axpy(-0.1, batch_grad(model, batch, w0), expect);
  CHECK(dist(one, expect) < 1e-15);

  // Many epochs at a small rate approach the least-squares solution, computed
  // here through the assembled 2x2 normal equations.
  double h00 = 0, h01 = 0, h11 = 0, b0 = 0, b1 = 0;
  for (const Example& z : batch) {
    h00 += z.feature[0] * z.feature[0];
    h01 += z.feature[0] * z.feature[1];
    h11 += z.feature[1] * z.feature[1];
    b0 += z.feature[0] * z.label;
    b1 += z.feature[1] * z.label;
  }
  const double det = h00 * h11 - h01 * h01;
  const Vec ls{(h11 * b0 - h01 * b1) / det, (h00 * b1 - h01 * b0) / det};
  RngStream r3(51, {9});
  const Vec sgd = local_sgd_epochs(batch, model, w0, 4000, 0.01, 12, r3);
  CHECK(dist(sgd, ls) < 1e-3);
}

TEST_CASE("iteration cap raises a solver error carrying the best certificate") {
  RngStream rng(61, {7});
  auto batch = random_batch(rng, 8, 3);
  for (auto& z : batch) z.label = z.label >= 0 ? 1.0 : -1.0;
  const LossModel model{LossKind::Logistic};
  const auto c = certify_constants(model, batch, 10.0);
  ProxSubproblem sp{model, batch, {}, Vec{1.0, -1.0, 0.5}, 0.5 / *c.L};
  try {
    prox_smooth_gd(sp, *c.L, 1e-14, 2);
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(e.best_certificate() > 0.0);
  }
}

TEST_CASE("prox preconditions are enforced") {
  std::vector<Example> batch{{{1.0}, 0.0}};
  ProxSubproblem sp{{LossKind::Quadratic}, batch, {}, Vec{1.0}, 2.0};
  CHECK_THROWS_AS(prox_smooth_gd(sp, 1.0, 1e-6), ConfigError);  // eta >= 1/L
  ProxSubproblem bad_dim{{LossKind::Quadratic}, batch, {}, Vec{1.0, 2.0}, 0.1};
  CHECK_THROWS_AS(prox_quadratic_exact(bad_dim), ConfigError);
  ProxSubproblem absolute{{LossKind::Absolute}, batch, {}, Vec{1.0}, 0.5};
  CHECK_THROWS_AS(prox_quadratic_exact(absolute), ConfigError);
  CHECK_THROWS_AS(prox_nonsmooth_subgrad(absolute, 3.0, 100), ConfigError);  // eta >= 1/nu
}
