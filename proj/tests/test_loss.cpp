#include <cmath>

#include "doctest.h"
#include "fedprox/loss.hpp"
#include "fedprox/rng.hpp"

using namespace fedprox;

namespace {

Vec random_ball_point(RngStream& rng, std::size_t p, double radius) {
  Vec w(p);
  for (double& v : w) v = rng.next_normal();
  const double n = norm(w);
  if (n == 0.0) return w;
  scale(w, radius * std::pow(rng.next_unit(), 1.0 / double(p)) / n);
  return w;
}

std::vector<Example> make_data(LossKind kind, int n, int p, RngStream& rng) {
  std::vector<Example> data;
  for (int i = 0; i < n; ++i) {
    Example z;
    z.feature.resize(p);
    for (double& v : z.feature) v = rng.next_normal();
    const double raw = rng.next_normal();
    switch (kind) {
      case LossKind::Logistic: z.label = raw >= 0 ? 1.0 : -1.0; break;
      case LossKind::SigmoidSquared: z.label = 1.0 / (1.0 + std::exp(-raw)); break;
      default: z.label = raw;
    }
    data.push_back(std::move(z));
  }
  return data;
}

}  // namespace

TEST_CASE("loss values at pinned points") {
  CHECK(loss_value({LossKind::Quadratic}, Vec{2, 0}, {{1, 0}, 0.0}) == doctest::Approx(2.0));
  CHECK(loss_value({LossKind::Absolute}, Vec{3}, {{1}, 3.0}) == doctest::Approx(0.0));
  CHECK(loss_value({LossKind::Logistic}, Vec{0}, {{1}, 1.0}) ==
        doctest::Approx(std::log(2.0)));
}

TEST_CASE("subgradients at pinned points") {
  const Vec g1 = loss_subgrad({LossKind::Quadratic}, Vec{2, 0}, {{1, 0}, 0.0});
  CHECK(g1[0] == doctest::Approx(2.0));
  CHECK(g1[1] == doctest::Approx(0.0));

  const Vec g2 = loss_subgrad({LossKind::Absolute}, Vec{1}, {{2}, 0.0});
  CHECK(g2[0] == doctest::Approx(2.0));

  // Zero-residual kink returns the zero subgradient.
  const Vec g3 = loss_subgrad({LossKind::Absolute}, Vec{3}, {{1}, 3.0});
  CHECK(g3[0] == 0.0);

  // sigma(0) = 1/2, sigma'(0) = 1/4: derivative of (sigma(u) - 0)^2 is 0.25.
  const Vec g4 = loss_subgrad({LossKind::SigmoidSquared}, Vec{0}, {{1}, 0.0});
  CHECK(g4[0] == doctest::Approx(0.25));
  const double h = 1e-6;
  const double fd = (loss_value({LossKind::SigmoidSquared}, Vec{h}, {{1}, 0.0}) -
                     loss_value({LossKind::SigmoidSquared}, Vec{-h}, {{1}, 0.0})) /
                    (2 * h);
  CHECK(std::abs(fd - g4[0]) < 1e-7);
}

TEST_CASE("logistic loss is overflow-safe") {
  for (double u : {-1e4, -50.0, 0.0, 50.0, 1e4}) {
    const double v = loss_value({LossKind::Logistic}, Vec{u}, {{1}, 1.0});
    CHECK(std::isfinite(v));
    CHECK(v >= 0.0);
  }
}

TEST_CASE("batch risk and gradient") {
  const LossModel model{LossKind::Quadratic};
  // Residuals +1 and -1 at w=0: values average to 0.5, gradients cancel.
  std::vector<Example> sym{{{1}, 1.0}, {{1}, -1.0}};
  const auto [risk, grad] = batch_risk_and_grad(model, sym, Vec{0});
  CHECK(risk == doctest::Approx(0.5));
  CHECK(grad[0] == doctest::Approx(0.0));

  // Singleton batch reduces to the pointwise ops.
  std::vector<Example> single{{{1, 2}, 0.5}};
  const Vec w{0.3, -0.2};
  const auto [r1, g1] = batch_risk_and_grad(model, single, w);
  CHECK(r1 == doctest::Approx(loss_value(model, w, single[0])));
  CHECK(g1 == loss_subgrad(model, w, single[0]));

  CHECK_THROWS_WITH_AS(batch_risk_and_grad(model, {}, w), "empty batch", ConfigError);
}

TEST_CASE("quadratic batch matches assembled normal-equation evaluation") {
  RngStream rng(31, {1});
  const int n = 5, p = 3;
  auto data = make_data(LossKind::Quadratic, n, p, rng);
  const Vec w = random_ball_point(rng, p, 2.0);

  // Independent evaluation through the stacked system: risk = ||Aw - y||^2/(2n),
  // grad = A^T (Aw - y)/n.
  double risk_ref = 0.0;
  Vec grad_ref = zeros(p);
  for (const Example& z : data) {
    const double r = dot(z.feature, w) - z.label;
    risk_ref += r * r / (2.0 * n);
    axpy(r / n, z.feature, grad_ref);
  }
  const auto [risk, grad] = batch_risk_and_grad({LossKind::Quadratic}, data, w);
  CHECK(risk == doctest::Approx(risk_ref).epsilon(1e-12));
  for (int j = 0; j < p; ++j) CHECK(grad[j] == doctest::Approx(grad_ref[j]).epsilon(1e-12));
}

TEST_CASE("certified constants at pinned datasets") {
  // Logistic with unit-norm features.
  std::vector<Example> logistic{{{1, 0}, 1.0}, {{0, 1}, -1.0}};
  const auto cl = certify_constants({LossKind::Logistic}, logistic, 10.0);
  CHECK(cl.G == doctest::Approx(1.0));
  CHECK(*cl.L == doctest::Approx(0.25));
  CHECK(*cl.nu == 0.0);

  std::vector<Example> absolute{{{2}, 0.0}, {{1}, 1.0}};
  const auto ca = certify_constants({LossKind::Absolute}, absolute, 10.0);
  CHECK(ca.G == doctest::Approx(2.0));
  CHECK(*ca.nu == 0.0);
  CHECK(!ca.L.has_value());

  std::vector<Example> phase{{{1}, 1.0}};
  const auto cp = certify_constants({LossKind::PhaseRetrieval}, phase, 5.0);
  CHECK(cp.G == doctest::Approx(10.0));
  CHECK(*cp.nu == doctest::Approx(2.0));
}

TEST_CASE("sampled regularity never exceeds certified constants") {
  RngStream rng(77, {3});
  const int p = 4;
  for (LossKind kind : {LossKind::Quadratic, LossKind::Logistic, LossKind::SigmoidSquared,
                        LossKind::Absolute, LossKind::PhaseRetrieval}) {
    const LossModel model{kind, 8.0};
    auto data = make_data(kind, 20, p, rng);
    const auto c = certify_constants(model, data, model.domain_radius);

    for (int trial = 0; trial < 1000; ++trial) {
      const Vec w = random_ball_point(rng, p, model.domain_radius);
      const Vec w2 = random_ball_point(rng, p, model.domain_radius);
      const Example& z = data[rng.next_below(data.size())];
      const double d = dist(w, w2);

      // Value Lipschitzness and subgradient norm bound.
      CHECK(std::abs(loss_value(model, w, z) - loss_value(model, w2, z)) <=
            c.G * d * (1 + 1e-9) + 1e-12);
      const Vec g = loss_subgrad(model, w, z);
      CHECK(norm(g) <= c.G * (1 + 1e-9));

      // Smoothness of the gradient for smooth kinds.
      const Vec g2 = loss_subgrad(model, w2, z);
      if (c.L) CHECK(dist(g, g2) <= *c.L * d * (1 + 1e-9) + 1e-12);

      // Weak convexity: l(w) >= l(w2) + <g2, w-w2> - nu/2 ||w-w2||^2.
      const double nu = c.nu.value_or(*c.L);
      Vec diff = w;
      axpy(-1.0, w2, diff);
      CHECK(loss_value(model, w, z) >=
            loss_value(model, w2, z) + dot(g2, diff) - 0.5 * nu * d * d - 1e-9);
    }
  }
}

TEST_CASE("smooth gradients match central finite differences") {
  RngStream rng(13, {5});
  const int p = 3;
  for (LossKind kind : {LossKind::Quadratic, LossKind::Logistic, LossKind::SigmoidSquared}) {
    const LossModel model{kind, 10.0};
    auto data = make_data(kind, 10, p, rng);
    for (int trial = 0; trial < 30; ++trial) {
      const Vec w = random_ball_point(rng, p, 2.0);
      const Example& z = data[rng.next_below(data.size())];
      const Vec g = loss_subgrad(model, w, z);
      const double h = 1e-6;
      for (int j = 0; j < p; ++j) {
        Vec wp = w, wm = w;
        wp[j] += h;
        wm[j] -= h;
        const double fd = (loss_value(model, wp, z) - loss_value(model, wm, z)) / (2 * h);
        CHECK(std::abs(fd - g[j]) <= 1e-5 * std::max(1.0, norm(g)));
      }
    }
  }
}

TEST_CASE("phase retrieval weak convexity along random segments") {
  RngStream rng(21, {6});
  const LossModel model{LossKind::PhaseRetrieval, 5.0};
  std::vector<Example> data{{{1.0}, 1.0}, {{0.7}, 0.5}};
  const auto c = certify_constants(model, data, 5.0);
  // f + nu/2 ||.||^2 must be convex along segments inside the ball.
  for (int trial = 0; trial < 1000; ++trial) {
    const Vec a = random_ball_point(rng, 1, 4.0);
    const Vec b = random_ball_point(rng, 1, 4.0);
    const Example& z = data[rng.next_below(data.size())];
    auto reg = [&](const Vec& w) {
      return loss_value(model, w, z) + 0.5 * *c.nu * sqnorm(w);
    };
    Vec mid = a;
    axpy(1.0, b, mid);
    scale(mid, 0.5);
    CHECK(reg(mid) <= 0.5 * reg(a) + 0.5 * reg(b) + 1e-9);
  }
}
