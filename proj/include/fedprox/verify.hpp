#pragma once

#include <string>
#include <vector>

#include "fedprox/config.hpp"

namespace fedprox {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// One named entry per property suite: RNG statistics, loss regularity and
// constant certification, oracle certificate soundness and step identities,
// engine sampling statistics and reductions, Moreau/LGD diagnostics, and the
// stability probes. Sizes are fixed here; the instance-level checks use the
// configured instance so injected constant faults are caught.
std::vector<CheckResult> run_verify_suite(const ConfigFile& cfg);

// Individual checks reused by tests and the acceptance suite.
CheckResult check_constants_certified(const FederatedInstance& inst, std::uint64_t seed);
CheckResult check_direction_stats(const FederatedInstance& inst, int states, int resamples,
                                  std::uint64_t seed);
CheckResult check_moreau_identity_fd();
CheckResult check_lgd_homogeneous(std::uint64_t seed);
CheckResult check_lgd_monotone(std::uint64_t seed);
CheckResult check_homogeneous_reduction(int devices, int dim, int per_device, int rounds,
                                        double tol, std::uint64_t seed);

}  // namespace fedprox
