#pragma once

#include <string>
#include <vector>

#include "cfp/kernels.hpp"

namespace cfp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitVerification = 2;

struct IdentityCheck {
  explicit IdentityCheck(std::string n = {}) : name(std::move(n)) {}

  std::string name;
  bool applicable = true;
  bool passed = true;
  std::size_t checks = 0;
  std::string detail;
};

struct VerificationReport {
  int n = 0;
  std::vector<IdentityCheck> identities;
  bool ok() const;
};

/// Exact identities of the solvable family at size N plus the numerical cross-checks
/// (factorization, marginals, stationary law, spectral gap) where N permits.
VerificationReport runVerification(const SolvableKernel& k, int n);

/// Times as "start:step:stop", "geom:lo:hi:count" or a comma list.
std::vector<double> parseTimes(const std::string& spec);

/// Full command-line entry point; returns the process exit code.
int dispatch(int argc, char** argv);

}  // namespace cfp::cli
