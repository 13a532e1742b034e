#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>

#include "fedprox/vec.hpp"

namespace fedprox {

// Per-example data point z = (a, y).
struct Example {
  Vec feature;
  double label = 0.0;
};

enum class LossKind {
  Quadratic,       // 0.5*(<a,w> - y)^2            convex, smooth on a ball
  Logistic,        // log(1 + exp(-y<a,w>)),       y in {-1,+1}; convex, smooth
  SigmoidSquared,  // (sigmoid(<a,w>) - y)^2       smooth, non-convex
  Absolute,        // |<a,w> - y|                  convex, non-smooth
  PhaseRetrieval,  // |<a,w>^2 - y|                weakly convex, non-smooth
};

const char* loss_kind_name(LossKind kind);
LossKind loss_kind_from_name(const std::string& name);

bool is_smooth(LossKind kind);
bool is_convex(LossKind kind);

struct LossModel {
  LossKind kind = LossKind::Quadratic;
  // Ball (centered at the origin) over which Lipschitz/smoothness constants are
  // certified. Quadratic and PhaseRetrieval are not globally Lipschitz, so the
  // engine asserts that iterates stay inside this ball.
  double domain_radius = 10.0;
};

// Certified regularity constants for a loss model over a concrete dataset.
// G: Lipschitz constant of the loss in w; L: smoothness (smooth kinds only);
// nu: weak-convexity modulus (0 for convex kinds, L for smooth non-convex,
// the analytic modulus for PhaseRetrieval).
struct LossConstants {
  double G = 0.0;
  std::optional<double> L;
  std::optional<double> nu;
};

double loss_value(const LossModel& model, const Vec& w, const Example& z);

Vec loss_subgrad(const LossModel& model, const Vec& w, const Example& z);

// Accumulates coeff * subgrad(w; z) into out without allocating.
void loss_subgrad_accum(const LossModel& model, const Vec& w, const Example& z,
                        double coeff, Vec& out);

// Mean value and mean (sub)gradient over a non-empty batch (Eq. risk over a
// uniform empirical distribution).
std::pair<double, Vec> batch_risk_and_grad(const LossModel& model,
                                           std::span<const Example> batch,
                                           const Vec& w);

double batch_risk(const LossModel& model, std::span<const Example> batch, const Vec& w);
Vec batch_grad(const LossModel& model, std::span<const Example> batch, const Vec& w);

// Weighted variants; weights must sum to 1. Used for pooled risks over devices
// with unequal sample counts.
double weighted_risk(const LossModel& model, std::span<const Example> batch,
                     std::span<const double> weights, const Vec& w);
Vec weighted_grad(const LossModel& model, std::span<const Example> batch,
                  std::span<const double> weights, const Vec& w);

// Analytic upper bounds on (G, L, nu) over the data, valid on the ball of the
// given radius. Formulas (amax = max_i ||a_i||, ymax = max_i |y_i|,
// cy = max_i max(|y_i|, |1 - y_i|)):
//   Quadratic:      G = amax*(radius*amax + ymax),  L = amax^2,  nu = 0
//   Logistic:       G = amax,                        L = amax^2/4, nu = 0
//   SigmoidSquared: G = amax*cy/2,   L = 2*amax^2*(1/16 + cy/(6*sqrt(3))), nu = L
//   Absolute:       G = amax,        nu = 0
//   PhaseRetrieval: G = 2*amax^2*radius,             nu = 2*amax^2
LossConstants certify_constants(const LossModel& model, std::span<const Example> data,
                                double radius);

}  // namespace fedprox
