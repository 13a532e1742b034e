#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "fedprox/rng.hpp"
#include "fedprox/vec.hpp"

using namespace fedprox;

TEST_CASE("dot product basics") {
  CHECK(dot(Vec{1, 2}, Vec{3, 4}) == doctest::Approx(11.0));
  CHECK_THROWS_AS(dot(Vec{1, 2}, Vec{1, 2, 3}), ConfigError);

  // Basis vectors: e_i . e_j = delta_ij.
  const std::size_t p = 5;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      Vec ei = zeros(p), ej = zeros(p);
      ei[i] = 1.0;
      ej[j] = 1.0;
      CHECK(dot(ei, ej) == (i == j ? 1.0 : 0.0));
    }
  }

  RngStream rng(7, {1});
  for (int trial = 0; trial < 100; ++trial) {
    Vec x(8);
    for (double& v : x) v = rng.next_normal();
    CHECK(dot(x, x) >= 0.0);
    CHECK(dot(x, x) == doctest::Approx(sqnorm(x)));
  }
}

TEST_CASE("stream replay is exact and siblings differ") {
  RngStream a(42, {0, 3, 7});
  RngStream b(42, {0, 3, 7});
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  // Replay holds over a long horizon.
  RngStream a2(42, {0, 3, 7});
  RngStream b2(42, {0, 3, 7});
  long mismatches = 0;
  for (int i = 0; i < 1000000; ++i) {
    if (a2.next_u64() != b2.next_u64()) ++mismatches;
  }
  CHECK(mismatches == 0);

  RngStream c(42, {0, 3, 7});
  RngStream d(42, {0, 3, 8});
  std::vector<std::uint64_t> cs(10000), ds(10000);
  for (auto& v : cs) v = c.next_u64();
  for (auto& v : ds) v = d.next_u64();
  // No aligned window of length 8 may coincide between sibling streams.
  for (std::size_t i = 0; i + 8 <= cs.size(); ++i) {
    CHECK(!std::equal(cs.begin() + i, cs.begin() + i + 8, ds.begin() + i));
  }
}

TEST_CASE("uniform draws pass a KS test") {
  const int n = 100000;
  RngStream rng(123, {9});
  std::vector<double> draws(n);
  for (double& v : draws) {
    v = rng.next_unit();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
  std::sort(draws.begin(), draws.end());
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    ks = std::max(ks, std::max(draws[i] - double(i) / n, double(i + 1) / n - draws[i]));
  }
  CHECK(ks < 0.01);
}

TEST_CASE("normal draws have the right first two moments") {
  const int n = 100000;
  RngStream rng(99, {2});
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.next_normal();
    sum += z;
    sum_sq += z * z;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(double(n)));
  CHECK(var == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("next_below stays in range and is roughly uniform") {
  RngStream rng(5, {4});
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto v = rng.next_below(7);
    REQUIRE(v < 7);
    ++counts[static_cast<std::size_t>(v)];
  }
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
}
