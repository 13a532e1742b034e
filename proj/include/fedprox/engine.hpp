#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fedprox/diagnostics.hpp"

namespace fedprox {

enum class Algorithm { FedProx, FedMSPP, FedAvg, CentralPPA };
enum class ScheduleKind { SmoothFedProx, SmoothFedMSPP, NonsmoothRho, Manual };
enum class EpsPolicy { TheoremBudget, Fixed, Exact };
enum class SamplingMode { Empirical, Population };

struct FedAvgParams {
  int epochs = 1;
  double lr = 0.05;
  int minibatch = 32;
};

struct RunConfig {
  Algorithm algorithm = Algorithm::FedProx;
  int rounds = 1;             // T
  int devices_per_round = 1;  // I
  int batch_size = 1;         // b, FedMSPP only
  ScheduleKind schedule = ScheduleKind::Manual;
  double manual_eta = 0.1;
  double rho = 0.0;  // NonsmoothRho schedule parameter
  EpsPolicy eps_policy = EpsPolicy::Exact;
  double fixed_eps = 1e-8;
  SamplingMode sampling_mode = SamplingMode::Empirical;
  std::uint64_t seed = 0;
  FedAvgParams fedavg;
  // FedMSPP with the full local dataset instead of sampled minibatches;
  // reproduces FedProx exactly under a matched schedule.
  bool full_batch = false;
  long nonsmooth_steps = 100000;  // K for exact-policy solves on non-smooth kinds
  double exact_smooth_eps = 1e-12;
  long solver_iter_cap = 1000000;
  int threads = 1;
  bool record_moreau = false;
  MoreauConfig moreau;
  int moreau_stride = 0;  // rounds between envelope evaluations; 0 = max(1, T/100)
  // Record the concentration residual ||grad Rbar(w_{t-1}) - dbar_t||^2; needs
  // per-round solves on every device, so it is only free under full
  // participation and is skipped otherwise unless forced here.
  bool check_concentration = false;
  Vec w0;  // empty = zero vector
};

struct RoundRecord {
  int t = 0;
  std::vector<int> sampled_devices;
  double eta = 0.0;
  double eps_budget = 0.0;
  double eps_certified_max = 0.0;
  double grad_sq = 0.0;    // ||grad Rbar(w_{t-1})||^2; NaN for non-smooth kinds
  double moreau_sq = 0.0;  // NaN when not evaluated this round
  double step_norm = 0.0;  // ||w_t - w_{t-1}||
  std::map<std::string, double> invariant_residuals;
};

struct RunSummary {
  double avg_grad_sq = 0.0;    // mean of grad_sq over rounds (NaN for non-smooth)
  double avg_moreau_sq = 0.0;  // mean over evaluated rounds (NaN when none)
  int t_star = 0;              // uniform in {0..T-1} from the run's RNG
  double wall_time_s = 0.0;
};

struct TraceLog {
  std::vector<RoundRecord> records;
  RunSummary summary;
  Vec final_model;
  std::vector<Vec> iterates;  // w_0 .. w_T
};

// Uniform without-replacement subset of [0, M) of size I, sorted ascending.
std::vector<int> sample_devices(RngStream& rng, int M, int I);

// b i.i.d. draws with replacement from the device's empirical distribution.
std::vector<Example> sample_minibatch_empirical(RngStream& rng, const DeviceDataset& device,
                                                int b);
// b fresh i.i.d. draws from the device's population distribution.
std::vector<Example> sample_minibatch_population(RngStream& rng, const PopulationSpec& spec,
                                                 LossKind kind, int device, int b);

// Constant per-round learning rate prescribed by the named schedule:
//   SmoothFedProx:  (1/3L) * min(1/T^{1/3}, sqrt(I/T))
//   SmoothFedMSPP:  (1/8L) * min(1/T^{1/3}, sqrt(bI/T))
//   NonsmoothRho:   rho/sqrt(T), rho < 1/(2*nu)
//   Manual:         manual_eta
double schedule_eta(ScheduleKind kind, double L, double nu, int T, int I, int b, double rho,
                    double manual_eta);

// Per-round inexactness ceiling:
//   FedProx:  min( G/(2L*sqrt(I)), G*eta/I )
//   FedMSPP:  min( G/(2L), G^2*eta/(8b^2), G*eta/(2bI) )
double epsilon_budget(Algorithm alg, double G, double L, double eta, int I, int b);

void validate_run(const FederatedInstance& inst, const RunConfig& cfg);

TraceLog run(const FederatedInstance& inst, const RunConfig& cfg);

}  // namespace fedprox
