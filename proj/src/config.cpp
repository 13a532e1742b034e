#include "fedprox/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace fedprox {

namespace {

using nlohmann::json;

void expect_keys(const json& j, const std::string& section,
                 const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError("section '" + section + "' must be a JSON object");
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) {
      throw ConfigError("unknown key '" + item.key() + "' in section '" + section + "'");
    }
  }
}

template <typename T>
T require(const json& j, const std::string& section, const char* key) {
  if (!j.contains(key)) {
    throw ConfigError("missing required key '" + std::string(key) + "' in section '" +
                      section + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("key '" + std::string(key) + "' in section '" + section +
                      "' has the wrong type");
  }
}

template <typename T>
T optional_of(const json& j, const std::string& section, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("key '" + std::string(key) + "' in section '" + section +
                      "' has the wrong type");
  }
}

Algorithm algorithm_from_name(const std::string& name) {
  if (name == "fedprox") return Algorithm::FedProx;
  if (name == "fedmspp") return Algorithm::FedMSPP;
  if (name == "fedavg") return Algorithm::FedAvg;
  if (name == "central_ppa") return Algorithm::CentralPPA;
  throw ConfigError("unknown algorithm '" + name + "'");
}

ScheduleKind schedule_from_name(const std::string& name) {
  if (name == "smooth_fedprox") return ScheduleKind::SmoothFedProx;
  if (name == "smooth_fedmspp") return ScheduleKind::SmoothFedMSPP;
  if (name == "nonsmooth_rho") return ScheduleKind::NonsmoothRho;
  if (name == "manual") return ScheduleKind::Manual;
  throw ConfigError("unknown schedule '" + name + "'");
}

EpsPolicy eps_policy_from_name(const std::string& name) {
  if (name == "theorem_budget") return EpsPolicy::TheoremBudget;
  if (name == "fixed") return EpsPolicy::Fixed;
  if (name == "exact") return EpsPolicy::Exact;
  throw ConfigError("unknown eps_policy '" + name + "'");
}

SamplingMode sampling_from_name(const std::string& name) {
  if (name == "empirical") return SamplingMode::Empirical;
  if (name == "population") return SamplingMode::Population;
  throw ConfigError("unknown sampling_mode '" + name + "'");
}

InstanceSection parse_instance(const json& j) {
  expect_keys(j, "instance",
              {"loss", "domain_radius", "devices", "dim", "base_n", "imbalance_exponent",
               "shift", "noise_std", "feature_scale", "feature_decay", "feature_dist",
               "share_data", "constants_override"});
  InstanceSection s;
  s.loss.kind = loss_kind_from_name(require<std::string>(j, "instance", "loss"));
  s.loss.domain_radius = optional_of<double>(j, "instance", "domain_radius", 10.0);
  s.het.devices = require<int>(j, "instance", "devices");
  s.het.dim = require<int>(j, "instance", "dim");
  s.het.base_n = require<int>(j, "instance", "base_n");
  s.het.imbalance_exponent = optional_of<double>(j, "instance", "imbalance_exponent", 0.0);
  s.het.shift = optional_of<double>(j, "instance", "shift", 0.0);
  s.het.noise_std = optional_of<double>(j, "instance", "noise_std", 0.1);
  s.het.feature_scale = optional_of<double>(j, "instance", "feature_scale", 1.0);
  s.het.feature_decay = optional_of<double>(j, "instance", "feature_decay", 0.0);
  const std::string dist =
      optional_of<std::string>(j, "instance", "feature_dist", "gaussian");
  if (dist == "gaussian") {
    s.het.feature_dist = FeatureDist::Gaussian;
  } else if (dist == "rademacher") {
    s.het.feature_dist = FeatureDist::Rademacher;
  } else if (dist == "uniform") {
    s.het.feature_dist = FeatureDist::Uniform;
  } else {
    throw ConfigError("unknown feature_dist '" + dist + "'");
  }
  s.het.share_data = optional_of<bool>(j, "instance", "share_data", false);
  if (j.contains("constants_override")) {
    const json& o = j.at("constants_override");
    expect_keys(o, "instance.constants_override", {"G", "L", "nu"});
    if (o.contains("G")) s.override_G = o.at("G").get<double>();
    if (o.contains("L")) s.override_L = o.at("L").get<double>();
    if (o.contains("nu")) s.override_nu = o.at("nu").get<double>();
  }
  validate(s.het);
  return s;
}

RunConfig parse_run(const json& j) {
  expect_keys(j, "run",
              {"algorithm", "rounds", "devices_per_round", "batch_size", "schedule", "eta",
               "rho", "eps_policy", "eps", "sampling_mode", "seed", "full_batch",
               "nonsmooth_steps", "exact_smooth_eps", "solver_iter_cap", "threads", "fedavg"});
  RunConfig cfg;
  cfg.algorithm = algorithm_from_name(require<std::string>(j, "run", "algorithm"));
  cfg.rounds = require<int>(j, "run", "rounds");
  cfg.devices_per_round = require<int>(j, "run", "devices_per_round");
  if (cfg.algorithm != Algorithm::FedMSPP) {
    if (j.contains("batch_size")) throw ConfigError("key 'batch_size' requires fedmspp");
    if (j.contains("full_batch")) throw ConfigError("key 'full_batch' requires fedmspp");
  }
  if (cfg.algorithm != Algorithm::FedAvg && j.contains("fedavg")) {
    throw ConfigError("section 'run.fedavg' requires the fedavg algorithm");
  }
  cfg.batch_size = optional_of<int>(j, "run", "batch_size", 1);
  cfg.schedule = schedule_from_name(require<std::string>(j, "run", "schedule"));
  if (cfg.schedule == ScheduleKind::Manual) {
    cfg.manual_eta = require<double>(j, "run", "eta");
  } else if (j.contains("eta")) {
    throw ConfigError("key 'eta' is only valid with the manual schedule");
  }
  if (cfg.schedule == ScheduleKind::NonsmoothRho) {
    cfg.rho = require<double>(j, "run", "rho");
  } else if (j.contains("rho")) {
    throw ConfigError("key 'rho' is only valid with the nonsmooth_rho schedule");
  }
  cfg.eps_policy = eps_policy_from_name(require<std::string>(j, "run", "eps_policy"));
  if (cfg.eps_policy == EpsPolicy::Fixed) {
    cfg.fixed_eps = require<double>(j, "run", "eps");
  } else if (j.contains("eps")) {
    throw ConfigError("key 'eps' is only valid with the fixed eps policy");
  }
  cfg.sampling_mode =
      sampling_from_name(optional_of<std::string>(j, "run", "sampling_mode", "empirical"));
  cfg.seed = require<std::uint64_t>(j, "run", "seed");
  cfg.full_batch = optional_of<bool>(j, "run", "full_batch", false);
  cfg.nonsmooth_steps = optional_of<long>(j, "run", "nonsmooth_steps", 100000L);
  cfg.exact_smooth_eps = optional_of<double>(j, "run", "exact_smooth_eps", 1e-12);
  cfg.solver_iter_cap = optional_of<long>(j, "run", "solver_iter_cap", 1000000L);
  cfg.threads = optional_of<int>(j, "run", "threads", 0);
  if (j.contains("fedavg")) {
    const json& f = j.at("fedavg");
    expect_keys(f, "run.fedavg", {"epochs", "lr", "minibatch"});
    cfg.fedavg.epochs = optional_of<int>(f, "run.fedavg", "epochs", 1);
    cfg.fedavg.lr = optional_of<double>(f, "run.fedavg", "lr", 0.05);
    cfg.fedavg.minibatch = optional_of<int>(f, "run.fedavg", "minibatch", 32);
  }
  return cfg;
}

DiagnosticsSection parse_diagnostics(const json& j) {
  expect_keys(j, "diagnostics",
              {"record_moreau", "moreau", "moreau_stride", "lgd", "lgd_probes",
               "check_concentration"});
  DiagnosticsSection s;
  s.record_moreau = optional_of<bool>(j, "diagnostics", "record_moreau", false);
  if (j.contains("moreau")) {
    const json& m = j.at("moreau");
    expect_keys(m, "diagnostics.moreau", {"rho", "inner_steps", "inner_eps"});
    s.moreau.rho = require<double>(m, "diagnostics.moreau", "rho");
    s.moreau.inner_steps = optional_of<long>(m, "diagnostics.moreau", "inner_steps", 100000L);
    s.moreau.inner_eps = optional_of<double>(m, "diagnostics.moreau", "inner_eps", 1e-12);
  }
  s.moreau_stride = optional_of<int>(j, "diagnostics", "moreau_stride", 0);
  s.lgd = optional_of<bool>(j, "diagnostics", "lgd", false);
  s.lgd_probes = optional_of<int>(j, "diagnostics", "lgd_probes", 10);
  s.check_concentration = optional_of<bool>(j, "diagnostics", "check_concentration", false);
  return s;
}

StabilitySection parse_stability(const json& j) {
  expect_keys(j, "stability",
              {"trials", "n", "eta_times_l", "solver_eps", "samples", "dim", "noise_std"});
  StabilitySection s;
  s.trials = optional_of<int>(j, "stability", "trials", 200);
  s.n = optional_of<int>(j, "stability", "n", 20);
  s.eta_times_l = optional_of<double>(j, "stability", "eta_times_l", 0.5);
  s.solver_eps = optional_of<double>(j, "stability", "solver_eps", 1e-10);
  s.samples = optional_of<int>(j, "stability", "samples", 500);
  s.dim = optional_of<int>(j, "stability", "dim", 5);
  s.noise_std = optional_of<double>(j, "stability", "noise_std", 0.1);
  return s;
}

}  // namespace

ConfigFile parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  expect_keys(j, "<root>", {"instance", "run", "diagnostics", "stability"});
  if (!j.contains("instance")) throw ConfigError("missing 'instance' section");
  if (!j.contains("run")) throw ConfigError("missing 'run' section");

  ConfigFile cfg;
  cfg.instance = parse_instance(j.at("instance"));
  cfg.run = parse_run(j.at("run"));
  if (j.contains("diagnostics")) cfg.diagnostics = parse_diagnostics(j.at("diagnostics"));
  if (j.contains("stability")) cfg.stability = parse_stability(j.at("stability"));

  cfg.run.record_moreau = cfg.diagnostics.record_moreau;
  cfg.run.moreau = cfg.diagnostics.moreau;
  cfg.run.moreau_stride = cfg.diagnostics.moreau_stride;
  cfg.run.check_concentration = cfg.diagnostics.check_concentration;
  return cfg;
}

ConfigFile load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

FederatedInstance build_instance(const InstanceSection& section, std::uint64_t seed) {
  FederatedInstance inst = generate_instance(section.het, section.loss, seed);
  if (section.override_G) inst.constants.G = *section.override_G;
  if (section.override_L) inst.constants.L = *section.override_L;
  if (section.override_nu) inst.constants.nu = *section.override_nu;
  return inst;
}

}  // namespace fedprox
