#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace tecrl {

/// Outcome of one randomized property. `worst_slack` is the smallest
/// (allowed - observed) over all trials; a trial fails when it is negative.
struct PropertyRecord {
  std::string name;
  std::size_t trials = 0;
  std::size_t failures = 0;
  double worst_slack = 0.0;
  double seconds = 0.0;

  bool passed() const { return trials > 0 && failures == 0; }
};

struct VerifyOptions {
  std::uint64_t seed = 0;
  std::size_t contraction_trials = 1000;  // per gamma
  std::size_t fixed_point_trials = 50;
  std::size_t oracle_trials = 100;
  std::size_t bound_mdps = 20;
  std::size_t bound_budgets = 5;
};

/// contraction, fixed-point, oracle-equivalence, bound, all.
const std::vector<std::string>& verify_suites();

/// Throws ContractError for an unknown suite name.
std::vector<PropertyRecord> run_verify(const std::string& suite, const VerifyOptions& opts = {});

/// {"records": [...], "summary": {"properties", "failed", "passed"}}.
nlohmann::json verify_report(const std::vector<PropertyRecord>& records);

}  // namespace tecrl
