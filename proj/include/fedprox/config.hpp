#pragma once

#include <optional>
#include <string>

#include "fedprox/engine.hpp"

namespace fedprox {

struct InstanceSection {
  HeterogeneityConfig het;
  LossModel loss;
  std::optional<double> override_G;
  std::optional<double> override_L;
  std::optional<double> override_nu;
};

struct DiagnosticsSection {
  bool record_moreau = false;
  MoreauConfig moreau;
  int moreau_stride = 0;
  bool lgd = false;
  int lgd_probes = 10;
  bool check_concentration = false;
};

struct StabilitySection {
  int trials = 200;
  int n = 20;
  double eta_times_l = 0.5;
  double solver_eps = 1e-10;
  int samples = 500;
  int dim = 5;
  double noise_std = 0.1;
};

// Parsed and schema-validated configuration file. Unknown keys anywhere in the
// document are rejected.
struct ConfigFile {
  InstanceSection instance;
  RunConfig run;
  DiagnosticsSection diagnostics;
  StabilitySection stability;
};

ConfigFile parse_config(const std::string& json_text);
ConfigFile load_config(const std::string& path);

// Instance generation from the instance section, seeded by the run seed, with
// any constants overrides applied afterwards.
FederatedInstance build_instance(const InstanceSection& section, std::uint64_t seed);

}  // namespace fedprox
