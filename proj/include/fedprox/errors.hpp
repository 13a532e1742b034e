#pragma once

#include <stdexcept>
#include <string>

namespace fedprox {

// Invalid configuration, bad dimensions, violated preconditions. CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Inner solver failure (iteration cap, iterate left the certified domain). CLI exit code 3.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double best_certificate)
      : std::runtime_error(what), best_certificate_(best_certificate) {}
  double best_certificate() const { return best_certificate_; }

 private:
  double best_certificate_;
};

}  // namespace fedprox
