#include "fedprox/datagen.hpp"

#include <cmath>
#include <utility>

#include "json.hpp"

namespace fedprox {

namespace {

double make_label(LossKind kind, double score, double noise) {
  switch (kind) {
    case LossKind::Quadratic:
    case LossKind::Absolute:
      return score + noise;
    case LossKind::Logistic:
      return (score + noise) >= 0.0 ? 1.0 : -1.0;
    case LossKind::SigmoidSquared:
      return 1.0 / (1.0 + std::exp(-(score + noise)));
    case LossKind::PhaseRetrieval:
      return score * score + noise;
  }
  return 0.0;
}

double draw_feature_coord(FeatureDist dist, double sd, RngStream& rng) {
  switch (dist) {
    case FeatureDist::Gaussian:
      return rng.next_normal() * sd;
    case FeatureDist::Rademacher:
      return rng.next_unit() < 0.5 ? -sd : sd;
    case FeatureDist::Uniform:
      return (2.0 * rng.next_unit() - 1.0) * std::sqrt(3.0) * sd;
  }
  return 0.0;
}

Example draw_example(const PopulationSpec& spec, LossKind kind, const Vec& w_star,
                     RngStream& feature_rng, RngStream& noise_rng) {
  const std::size_t p = spec.cov_diag.size();
  Example z;
  z.feature.resize(p);
  for (std::size_t j = 0; j < p; ++j) {
    z.feature[j] = draw_feature_coord(spec.feature_dist, std::sqrt(spec.cov_diag[j]),
                                      feature_rng);
  }
  const double noise = spec.noise_std > 0.0 ? spec.noise_std * noise_rng.next_normal() : 0.0;
  z.label = make_label(kind, dot(z.feature, w_star), noise);
  return z;
}

}  // namespace

void validate(const HeterogeneityConfig& cfg) {
  if (cfg.devices < 1) throw ConfigError("devices must be >= 1");
  if (cfg.dim < 1) throw ConfigError("dim must be >= 1");
  if (cfg.base_n < 1) throw ConfigError("base_n must be >= 1");
  if (cfg.imbalance_exponent < 0.0) throw ConfigError("imbalance_exponent must be >= 0");
  if (cfg.shift < 0.0) throw ConfigError("shift must be >= 0");
  if (cfg.noise_std < 0.0) throw ConfigError("noise_std must be >= 0");
  if (cfg.feature_scale <= 0.0) throw ConfigError("feature_scale must be > 0");
  if (cfg.feature_decay < 0.0) throw ConfigError("feature_decay must be >= 0");
  if (cfg.share_data && cfg.shift != 0.0) {
    throw ConfigError("share_data requires shift == 0");
  }
}

FederatedInstance generate_instance(const HeterogeneityConfig& cfg, const LossModel& loss,
                                    std::uint64_t seed) {
  validate(cfg);
  const int M = cfg.devices;
  const std::size_t p = static_cast<std::size_t>(cfg.dim);

  // Ground truths follow the same decay profile as the features (normalized so
  // E||w*||^2 is profile-independent), keeping the label signal aligned with
  // the high-variance coordinates.
  PopulationSpec pop;
  pop.feature_dist = cfg.feature_dist;
  pop.cov_diag = Vec(p);
  Vec profile(p);
  double profile_sq = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    profile[j] = 1.0 / std::pow(static_cast<double>(j + 1), cfg.feature_decay);
    profile_sq += profile[j] * profile[j];
    const double sd = cfg.feature_scale * profile[j];
    pop.cov_diag[j] = sd * sd;
  }
  const double profile_norm = std::sqrt(profile_sq);
  pop.noise_std = cfg.noise_std;

  RngStream base_rng(seed, {stream_tag::kGroundTruth, 0});
  Vec w_base(p);
  for (std::size_t j = 0; j < p; ++j) {
    w_base[j] = base_rng.next_normal() * profile[j] / profile_norm;
  }

  pop.ground_truth.reserve(M);
  for (int m = 0; m < M; ++m) {
    Vec w_star = w_base;
    if (cfg.shift > 0.0) {
      RngStream rng(seed, {stream_tag::kGroundTruth, static_cast<std::uint32_t>(m + 1)});
      for (std::size_t j = 0; j < p; ++j) {
        w_star[j] += cfg.shift * rng.next_normal() * profile[j] / profile_norm;
      }
    }
    pop.ground_truth.push_back(std::move(w_star));
  }

  FederatedInstance inst;
  inst.dim = cfg.dim;
  inst.loss = loss;
  inst.devices.resize(M);
  for (int m = 0; m < M; ++m) {
    inst.devices[m].device_id = m;
    if (cfg.share_data && m > 0) continue;
    const int source = m;
    int n = cfg.base_n;
    if (!cfg.share_data && cfg.imbalance_exponent > 0.0) {
      n = std::max(1, static_cast<int>(std::floor(
                      cfg.base_n / std::pow(static_cast<double>(m + 1), cfg.imbalance_exponent))));
    }
    RngStream feature_rng(seed, {stream_tag::kFeatures, static_cast<std::uint32_t>(source)});
    RngStream noise_rng(seed, {stream_tag::kNoise, static_cast<std::uint32_t>(source)});
    inst.devices[m].examples.reserve(n);
    for (int i = 0; i < n; ++i) {
      inst.devices[m].examples.push_back(
          draw_example(pop, loss.kind, pop.ground_truth[source], feature_rng, noise_rng));
    }
  }
  if (cfg.share_data) {
    for (int m = 1; m < M; ++m) inst.devices[m].examples = inst.devices[0].examples;
  }

  PooledData pooled = make_pooled(inst);
  inst.constants = certify_constants(loss, pooled.examples, loss.domain_radius);
  inst.population = std::move(pop);
  return inst;
}

FederatedInstance neighboring_instance(const FederatedInstance& inst, int device, int index,
                                       Example replacement) {
  if (device < 0 || device >= inst.num_devices()) {
    throw ConfigError("neighboring_instance: device out of range");
  }
  const auto& examples = inst.devices[device].examples;
  if (index < 0 || static_cast<std::size_t>(index) >= examples.size()) {
    throw ConfigError("neighboring_instance: example index out of range");
  }
  if (static_cast<int>(replacement.feature.size()) != inst.dim) {
    throw ConfigError("neighboring_instance: replacement dimension mismatch");
  }
  FederatedInstance copy = inst;
  copy.devices[device].examples[static_cast<std::size_t>(index)] = std::move(replacement);
  PooledData pooled = make_pooled(copy);
  copy.constants = certify_constants(copy.loss, pooled.examples, copy.loss.domain_radius);
  return copy;
}

Example sample_population_example(const PopulationSpec& spec, LossKind kind, int device,
                                  RngStream& rng) {
  if (device < 0 || static_cast<std::size_t>(device) >= spec.ground_truth.size()) {
    throw ConfigError("sample_population_example: device out of range");
  }
  // Single stream supplies both feature and noise draws.
  return draw_example(spec, kind, spec.ground_truth[device], rng, rng);
}

Vec population_gradient(const PopulationSpec& spec, const LossModel& loss, const Vec& w,
                        int device) {
  if (loss.kind != LossKind::Quadratic) {
    throw ConfigError("population gradient unavailable for non-quadratic loss");
  }
  if (device < 0 || static_cast<std::size_t>(device) >= spec.ground_truth.size()) {
    throw ConfigError("population_gradient: device out of range");
  }
  const Vec& w_star = spec.ground_truth[device];
  require_same_dim(w, w_star);
  Vec g(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) g[j] = spec.cov_diag[j] * (w[j] - w_star[j]);
  return g;
}

PooledData make_pooled(const FederatedInstance& inst) {
  PooledData pooled;
  pooled.examples.reserve(inst.total_examples());
  pooled.weights.reserve(inst.total_examples());
  const double inv_m = 1.0 / static_cast<double>(inst.num_devices());
  for (const auto& dev : inst.devices) {
    const double w = inv_m / static_cast<double>(dev.examples.size());
    for (const Example& z : dev.examples) {
      pooled.examples.push_back(z);
      pooled.weights.push_back(w);
    }
  }
  return pooled;
}

std::string instance_to_json(const FederatedInstance& inst) {
  nlohmann::json j;
  j["dim"] = inst.dim;
  j["loss"] = {{"kind", loss_kind_name(inst.loss.kind)},
               {"domain_radius", inst.loss.domain_radius}};
  nlohmann::json constants = {{"G", inst.constants.G}};
  if (inst.constants.L) constants["L"] = *inst.constants.L;
  if (inst.constants.nu) constants["nu"] = *inst.constants.nu;
  j["constants"] = constants;
  j["devices"] = nlohmann::json::array();
  for (const auto& dev : inst.devices) {
    nlohmann::json examples = nlohmann::json::array();
    for (const Example& z : dev.examples) {
      examples.push_back({{"a", z.feature}, {"y", z.label}});
    }
    j["devices"].push_back({{"id", dev.device_id}, {"examples", std::move(examples)}});
  }
  if (inst.population) {
    const char* dist_name = inst.population->feature_dist == FeatureDist::Gaussian
                                ? "gaussian"
                                : inst.population->feature_dist == FeatureDist::Rademacher
                                      ? "rademacher"
                                      : "uniform";
    j["population"] = {{"ground_truth", inst.population->ground_truth},
                       {"cov_diag", inst.population->cov_diag},
                       {"noise_std", inst.population->noise_std},
                       {"feature_dist", dist_name}};
  }
  return j.dump(2);
}

FederatedInstance instance_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  FederatedInstance inst;
  inst.dim = j.at("dim").get<int>();
  inst.loss.kind = loss_kind_from_name(j.at("loss").at("kind").get<std::string>());
  inst.loss.domain_radius = j.at("loss").at("domain_radius").get<double>();
  for (const auto& dj : j.at("devices")) {
    DeviceDataset dev;
    dev.device_id = dj.at("id").get<int>();
    for (const auto& ej : dj.at("examples")) {
      Example z;
      z.feature = ej.at("a").get<Vec>();
      z.label = ej.at("y").get<double>();
      if (static_cast<int>(z.feature.size()) != inst.dim) {
        throw ConfigError("instance JSON: feature dimension mismatch");
      }
      dev.examples.push_back(std::move(z));
    }
    if (dev.examples.empty()) throw ConfigError("instance JSON: empty device dataset");
    inst.devices.push_back(std::move(dev));
  }
  if (inst.devices.empty()) throw ConfigError("instance JSON: no devices");
  if (j.contains("population")) {
    PopulationSpec pop;
    pop.ground_truth = j["population"].at("ground_truth").get<std::vector<Vec>>();
    pop.cov_diag = j["population"].at("cov_diag").get<Vec>();
    pop.noise_std = j["population"].at("noise_std").get<double>();
    const std::string dist = j["population"].value("feature_dist", "gaussian");
    pop.feature_dist = dist == "rademacher"
                           ? FeatureDist::Rademacher
                           : dist == "uniform" ? FeatureDist::Uniform : FeatureDist::Gaussian;
    inst.population = std::move(pop);
  }
  PooledData pooled = make_pooled(inst);
  inst.constants = certify_constants(inst.loss, pooled.examples, inst.loss.domain_radius);
  return inst;
}

}  // namespace fedprox
