#pragma once

#include <string>
#include <vector>

namespace ecfm {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Fast invariant checks run by `ecfm verify`: gradient agreement with
/// central differences, quantiles, deterministic data, consistency of ECFM.
std::vector<CheckResult> run_invariant_checks();

}  // namespace ecfm
