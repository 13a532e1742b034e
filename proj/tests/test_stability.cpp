#include <cmath>

#include "doctest.h"
#include "fedprox/stability.hpp"

using namespace fedprox;

namespace {

PopulationSpec unit_population(int dim, double noise) {
  PopulationSpec pop;
  pop.ground_truth = {Vec(static_cast<std::size_t>(dim), 0.5)};
  pop.cov_diag = Vec(static_cast<std::size_t>(dim), 1.0);
  pop.noise_std = noise;
  return pop;
}

std::vector<Example> draw(const PopulationSpec& pop, LossKind kind, int n, RngStream& rng) {
  std::vector<Example> data;
  for (int i = 0; i < n; ++i) data.push_back(sample_population_example(pop, kind, 0, rng));
  return data;
}

}  // namespace

TEST_CASE("stability bound formula") {
  CHECK(stability_bound(1.0, 1.0, 10, 0.0) == doctest::Approx(0.4));
  CHECK(stability_bound(1.0, 1.0, 10, 0.02) == doctest::Approx(0.8));
  CHECK(stability_bound(2.0, 0.5, 8, 0.0) == doctest::Approx(2.0));
  CHECK_THROWS_AS(stability_bound(1.0, 0.0, 10, 0.0), ConfigError);
}

TEST_CASE("identical replacement gives zero displacement") {
  const Example z{{1.0, -0.5}, 0.3};
  std::vector<Example> data(6, z);
  std::vector<Example> replacements(10, z);
  RngStream rng(1, {1});
  const auto report = measure_argument_stability(data, {LossKind::Logistic}, replacements,
                                                 zeros(2), 0.5, 1e-10, rng);
  CHECK(report.observed_max == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(report.violations == 0);
}

TEST_CASE("logistic stability trials respect the bound and halve with N") {
  const auto pop = unit_population(4, 0.2);
  const LossModel loss{LossKind::Logistic, 10.0};
  RngStream data_rng(7, {2});
  const auto data = draw(pop, loss.kind, 20, data_rng);
  const auto data2 = draw(pop, loss.kind, 40, data_rng);
  const auto replacements = draw(pop, loss.kind, 200, data_rng);

  RngStream r1(7, {3});
  const auto one = measure_argument_stability(data, loss, replacements, zeros(4), 0.5,
                                              1e-10, r1);
  CHECK(one.trials == 200);
  CHECK(one.violations == 0);
  CHECK(one.observed_max > 0.0);
  CHECK(one.observed_max <= one.bound);

  RngStream r2(7, {4});
  const auto two = measure_argument_stability(data2, loss, replacements, zeros(4), 0.5,
                                              1e-10, r2);
  CHECK(two.violations == 0);
  const double ratio = two.observed_max / one.observed_max;
  CHECK(ratio >= 0.3);
  CHECK(ratio <= 0.8);
}

TEST_CASE("efron-stein inequality for the regularized ERM map") {
  const auto pop = unit_population(5, 0.1);
  const auto cmp = efron_stein_check(pop, {LossKind::Quadratic, 10.0}, 10, 0.5, 500,
                                     1e-10, 99);
  CHECK(cmp.lhs <= cmp.bound + 3.0 * cmp.se);
  CHECK(cmp.lhs > 0.0);
  CHECK(cmp.se > 0.0);

  // Point-mass population: every draw is the same example, h(S) is constant
  // and the variance collapses to zero.
  PopulationSpec flat = unit_population(2, 0.0);
  flat.cov_diag = Vec{0.0, 0.0};
  const auto flat_cmp =
      efron_stein_check(flat, {LossKind::Quadratic, 10.0}, 1, 0.5, 50, 1e-10, 5);
  CHECK(flat_cmp.lhs <= 1e-12);
}

TEST_CASE("efron-stein estimate is stable across seeds") {
  const auto pop = unit_population(4, 0.1);
  const auto a = efron_stein_check(pop, {LossKind::Quadratic, 10.0}, 8, 0.5, 400, 1e-10, 1);
  const auto b = efron_stein_check(pop, {LossKind::Quadratic, 10.0}, 8, 0.5, 400, 1e-10, 2);
  const double joint_se = std::sqrt(a.se * a.se + b.se * b.se);
  CHECK(std::abs(a.lhs - b.lhs) <= 3.0 * joint_se);
}

TEST_CASE("gradient generalization bounds hold") {
  const auto pop = unit_population(5, 0.1);
  const auto report = grad_generalization_check(pop, {LossKind::Quadratic, 10.0}, 10, 0.5,
                                                500, 1e-10, 17);
  CHECK(report.bias.pass());
  CHECK(report.variance.pass());
  CHECK(report.variance.lhs / report.variance.bound < 1.0);
  CHECK_THROWS_AS(grad_generalization_check(pop, {LossKind::Absolute, 10.0}, 10, 0.5, 50,
                                            1e-10, 17),
                  ConfigError);
}

TEST_CASE("zero-noise population gives a near-zero bias estimate") {
  const auto pop = unit_population(3, 0.0);
  const auto report = grad_generalization_check(pop, {LossKind::Quadratic, 10.0}, 60, 0.5,
                                                200, 1e-12, 23);
  // Consistency: with noiseless labels the empirical and population gradients
  // agree up to the covariance estimation error, which shrinks with N.
  CHECK(report.bias.lhs < 0.2 * report.bias.bound);
}
