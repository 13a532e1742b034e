#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedprox/loss.hpp"
#include "fedprox/rng.hpp"

namespace fedprox {

// Per-coordinate feature law, always zero-mean with variance cov_diag[j].
// Bounded choices give tight certified constants; the closed-form population
// gradient only needs the second moment, so all three are valid.
enum class FeatureDist { Gaussian, Rademacher, Uniform };

struct DeviceDataset {
  int device_id = 0;
  std::vector<Example> examples;
};

// Analytic per-device data distribution: features ~ N(0, diag(cov_diag)),
// labels derived from the device ground truth plus Gaussian noise. Enables
// unlimited i.i.d. sampling and, for Quadratic loss, a closed-form population
// gradient.
struct PopulationSpec {
  std::vector<Vec> ground_truth;  // w*_m per device
  Vec cov_diag;                   // diagonal feature covariance, entries > 0
  double noise_std = 0.0;
  FeatureDist feature_dist = FeatureDist::Gaussian;
};

struct HeterogeneityConfig {
  int devices = 1;                  // M
  int dim = 1;                      // p
  int base_n = 1;                   // N_1; device m gets floor(base_n / m^imbalance_exponent)
  double imbalance_exponent = 0.0;  // 0 => equal sizes
  double shift = 0.0;               // scale of ||w*_m - mean(w*)||; 0 => common ground truth
  double noise_std = 0.1;
  // Diagonal feature covariance: cov_j = (feature_scale / j^feature_decay)^2,
  // j = 1..p. decay 0 gives isotropic features; decay 1 concentrates the
  // signal in the leading coordinates.
  double feature_scale = 1.0;
  double feature_decay = 0.0;
  FeatureDist feature_dist = FeatureDist::Gaussian;
  // All devices share device 1's examples verbatim (requires shift == 0).
  // Realizes the homogeneous setting where every local risk equals the global one.
  bool share_data = false;
};

struct FederatedInstance {
  int dim = 0;
  std::vector<DeviceDataset> devices;
  LossModel loss;
  LossConstants constants;  // certified over the union of all device data
  std::optional<PopulationSpec> population;

  int num_devices() const { return static_cast<int>(devices.size()); }
  std::size_t total_examples() const {
    std::size_t n = 0;
    for (const auto& d : devices) n += d.examples.size();
    return n;
  }
};

void validate(const HeterogeneityConfig& cfg);

// Deterministic in (cfg, loss, seed). Device m draws N_m examples with features
// from the population covariance and labels from w*_m plus noise.
FederatedInstance generate_instance(const HeterogeneityConfig& cfg, const LossModel& loss,
                                    std::uint64_t seed);

// Copy of inst with exactly one example of one device replaced; constants are
// re-certified over the modified union.
FederatedInstance neighboring_instance(const FederatedInstance& inst, int device, int index,
                                       Example replacement);

// Fresh i.i.d. example from the device's population distribution.
Example sample_population_example(const PopulationSpec& spec, LossKind kind, int device,
                                  RngStream& rng);

// Closed-form population gradient diag(cov)*(w - w*_m). Quadratic loss only.
Vec population_gradient(const PopulationSpec& spec, const LossModel& loss, const Vec& w,
                        int device);

// Uniform pooled view of the instance: every device contributes weight
// 1/(M*N_m) per example, so the weighted risk equals the global empirical risk.
struct PooledData {
  std::vector<Example> examples;
  std::vector<double> weights;
};
PooledData make_pooled(const FederatedInstance& inst);

std::string instance_to_json(const FederatedInstance& inst);
FederatedInstance instance_from_json(const std::string& text);

}  // namespace fedprox
