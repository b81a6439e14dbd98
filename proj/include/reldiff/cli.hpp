#pragma once

#include "reldiff/config.hpp"
#include "reldiff/serialization.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace reldiff {

/// Exit codes: 0 ran (whatever the scientific verdict), 1 verification failures, 2 invalid input.
enum ExitCode : int { kExitOk = 0, kExitVerifyFailed = 1, kExitInvalid = 2 };

struct VerificationEntry {
  std::string spacetime;  // "-" for identities on the fiber alone
  std::string identity;
  double max_residual = 0.0;
  double tolerance = 0.0;
  bool passed = true;
  int n_frames = 0;
  std::string note;

  bool operator==(const VerificationEntry&) const = default;
};

struct VerificationReport {
  std::vector<VerificationEntry> entries;
  std::size_t failures = 0;

  bool operator==(const VerificationReport&) const = default;
};

void to_json(json& j, const VerificationEntry& e);
void from_json(const json& j, VerificationEntry& e);
void to_json(json& j, const VerificationReport& r);
void from_json(const json& j, VerificationReport& r);

/// Residual maxima of the generator identities, the Poisson equation and the curvature oracle.
VerificationReport run_verification(const RunConfig& cfg);

/// Command-line entry point: simulate, estimate, check, verify, tube, moments.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace reldiff
