#pragma once

#include "inimnet/core.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace inim {

struct CheckResult {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct SuiteReport {
  std::string suite;
  std::vector<CheckResult> checks;

  bool passed() const {
    for (const auto& c : checks) {
      if (!c.pass) return false;
    }
    return !checks.empty();
  }
};

std::vector<std::string> suite_names();

/// Runs one verification suite. tol overrides each check's default relative
/// tolerance where one applies; structural checks (convergence-order ladders,
/// strictness assertions) keep their built-in thresholds.
SuiteReport run_suite(const std::string& name, std::optional<double> tol,
                      std::uint64_t seed);

}  // namespace inim
