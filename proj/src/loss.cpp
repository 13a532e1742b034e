#include "fedprox/loss.hpp"

#include <algorithm>
#include <cmath>

namespace fedprox {

namespace {

double sigmoid(double u) {
  if (u >= 0.0) {
    return 1.0 / (1.0 + std::exp(-u));
  }
  const double e = std::exp(u);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Scalar derivative of the loss with respect to the margin u = <a, w>.
double margin_derivative(LossKind kind, double u, double y) {
  switch (kind) {
    case LossKind::Quadratic:
      return u - y;
    case LossKind::Logistic:
      return -y * sigmoid(-y * u);
    case LossKind::SigmoidSquared: {
      const double s = sigmoid(u);
      return 2.0 * (s - y) * s * (1.0 - s);
    }
    case LossKind::Absolute:
      return sign_of(u - y);
    case LossKind::PhaseRetrieval: {
      // At the kink u^2 == y the +1 branch is chosen so runs are deterministic.
      const double s = (u * u - y) >= 0.0 ? 1.0 : -1.0;
      return s * 2.0 * u;
    }
  }
  return 0.0;
}

}  // namespace

const char* loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::Quadratic: return "quadratic";
    case LossKind::Logistic: return "logistic";
    case LossKind::SigmoidSquared: return "sigmoid_squared";
    case LossKind::Absolute: return "absolute";
    case LossKind::PhaseRetrieval: return "phase_retrieval";
  }
  return "unknown";
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "quadratic") return LossKind::Quadratic;
  if (name == "logistic") return LossKind::Logistic;
  if (name == "sigmoid_squared") return LossKind::SigmoidSquared;
  if (name == "absolute") return LossKind::Absolute;
  if (name == "phase_retrieval") return LossKind::PhaseRetrieval;
  throw ConfigError("unknown loss kind '" + name + "'");
}

bool is_smooth(LossKind kind) {
  return kind == LossKind::Quadratic || kind == LossKind::Logistic ||
         kind == LossKind::SigmoidSquared;
}

bool is_convex(LossKind kind) {
  return kind == LossKind::Quadratic || kind == LossKind::Logistic ||
         kind == LossKind::Absolute;
}

double loss_value(const LossModel& model, const Vec& w, const Example& z) {
  const double u = dot(z.feature, w);
  switch (model.kind) {
    case LossKind::Quadratic: {
      const double r = u - z.label;
      return 0.5 * r * r;
    }
    case LossKind::Logistic:
      return softplus(-z.label * u);
    case LossKind::SigmoidSquared: {
      const double r = sigmoid(u) - z.label;
      return r * r;
    }
    case LossKind::Absolute:
      return std::abs(u - z.label);
    case LossKind::PhaseRetrieval:
      return std::abs(u * u - z.label);
  }
  return 0.0;
}

void loss_subgrad_accum(const LossModel& model, const Vec& w, const Example& z,
                        double coeff, Vec& out) {
  const double d = margin_derivative(model.kind, dot(z.feature, w), z.label);
  axpy(coeff * d, z.feature, out);
}

Vec loss_subgrad(const LossModel& model, const Vec& w, const Example& z) {
  Vec g = zeros(w.size());
  loss_subgrad_accum(model, w, z, 1.0, g);
  return g;
}

std::pair<double, Vec> batch_risk_and_grad(const LossModel& model,
                                           std::span<const Example> batch,
                                           const Vec& w) {
  if (batch.empty()) throw ConfigError("empty batch");
  double value = 0.0;
  Vec grad = zeros(w.size());
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const Example& z : batch) {
    value += loss_value(model, w, z);
    loss_subgrad_accum(model, w, z, inv_n, grad);
  }
  return {value * inv_n, std::move(grad)};
}

double batch_risk(const LossModel& model, std::span<const Example> batch, const Vec& w) {
  if (batch.empty()) throw ConfigError("empty batch");
  double value = 0.0;
  for (const Example& z : batch) value += loss_value(model, w, z);
  return value / static_cast<double>(batch.size());
}

Vec batch_grad(const LossModel& model, std::span<const Example> batch, const Vec& w) {
  if (batch.empty()) throw ConfigError("empty batch");
  Vec grad = zeros(w.size());
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const Example& z : batch) loss_subgrad_accum(model, w, z, inv_n, grad);
  return grad;
}

double weighted_risk(const LossModel& model, std::span<const Example> batch,
                     std::span<const double> weights, const Vec& w) {
  if (batch.empty()) throw ConfigError("empty batch");
  if (batch.size() != weights.size()) throw ConfigError("weights/batch size mismatch");
  double value = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    value += weights[i] * loss_value(model, w, batch[i]);
  }
  return value;
}

Vec weighted_grad(const LossModel& model, std::span<const Example> batch,
                  std::span<const double> weights, const Vec& w) {
  if (batch.empty()) throw ConfigError("empty batch");
  if (batch.size() != weights.size()) throw ConfigError("weights/batch size mismatch");
  Vec grad = zeros(w.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    loss_subgrad_accum(model, w, batch[i], weights[i], grad);
  }
  return grad;
}

LossConstants certify_constants(const LossModel& model, std::span<const Example> data,
                                double radius) {
  if (radius <= 0.0) throw ConfigError("certification radius must be positive");
  double amax = 0.0;
  double ymax = 0.0;
  double cy = 0.0;
  for (const Example& z : data) {
    amax = std::max(amax, norm(z.feature));
    ymax = std::max(ymax, std::abs(z.label));
    cy = std::max(cy, std::max(std::abs(z.label), std::abs(1.0 - z.label)));
  }
  LossConstants c;
  switch (model.kind) {
    case LossKind::Quadratic:
      c.G = amax * (radius * amax + ymax);
      c.L = amax * amax;
      c.nu = 0.0;
      break;
    case LossKind::Logistic:
      c.G = amax;
      c.L = amax * amax / 4.0;
      c.nu = 0.0;
      break;
    case LossKind::SigmoidSquared: {
      c.G = amax * cy / 2.0;
      const double l = 2.0 * amax * amax * (1.0 / 16.0 + cy / (6.0 * std::sqrt(3.0)));
      c.L = l;
      c.nu = l;
      break;
    }
    case LossKind::Absolute:
      c.G = amax;
      c.nu = 0.0;
      break;
    case LossKind::PhaseRetrieval:
      c.G = 2.0 * amax * amax * radius;
      c.nu = 2.0 * amax * amax;
      break;
  }
  return c;
}

}  // namespace fedprox
