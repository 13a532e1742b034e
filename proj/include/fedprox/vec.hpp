#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "fedprox/errors.hpp"

namespace fedprox {

// Dense model parameter vector w in R^p. All arithmetic is double precision;
// entries are expected to stay finite for the lifetime of a run.
using Vec = std::vector<double>;

inline Vec zeros(std::size_t p) { return Vec(p, 0.0); }

inline void require_same_dim(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) {
    throw ConfigError("vector dimension mismatch: " + std::to_string(a.size()) +
                      " vs " + std::to_string(b.size()));
  }
}

inline double dot(const Vec& a, const Vec& b) {
  require_same_dim(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double sqnorm(const Vec& a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

inline double norm(const Vec& a) { return std::sqrt(sqnorm(a)); }

inline double sqdist(const Vec& a, const Vec& b) {
  require_same_dim(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double dist(const Vec& a, const Vec& b) { return std::sqrt(sqdist(a, b)); }

// y += alpha * x
inline void axpy(double alpha, const Vec& x, Vec& y) {
  require_same_dim(x, y);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(Vec& x, double alpha) {
  for (double& v : x) v *= alpha;
}

inline bool all_finite(const Vec& a) {
  for (double v : a) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

inline void require_finite(const Vec& a, const char* context) {
  if (!all_finite(a)) throw ConfigError(std::string("non-finite entries in ") + context);
}

}  // namespace fedprox
