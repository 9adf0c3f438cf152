#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tecrl/agent.hpp"
#include "tecrl/config.hpp"
#include "tecrl/env.hpp"
#include "tecrl/policy.hpp"

namespace tecrl {

struct EvalResult {
  double mean = 0.0;
  double std = 0.0;  // population (ddof = 0)
  std::vector<double> returns;
};

using ActionFn = std::function<std::vector<double>(std::span<const double>)>;

/// Undiscounted returns of `act` over n episodes. Episode k resets with the
/// k-th draw of the evaluation stream of `seed`, so repeated calls with the
/// same seed see the same start states.
EvalResult evaluate(const ActionFn& act, Env& env, std::size_t n_episodes, std::uint64_t seed);
/// Same with the policy's deterministic (mean) action.
EvalResult evaluate(const GaussianPolicy& policy, Env& env, std::size_t n_episodes, std::uint64_t seed);

/// One evaluation point. Loss and entropy columns are means over the updates
/// since the previous row (NaN when there were none).
struct MetricsRow {
  std::uint64_t iteration = 0;
  double eval_mean_return = 0.0;
  double eval_std_return = 0.0;
  double alpha = 0.0;
  double cumulative_entropy_estimate = 0.0;
  double step_entropy = 0.0;
  double loss_pev = 0.0;
  double loss_pis = 0.0;
  double loss_pim = 0.0;
  double loss_tup = 0.0;
};

/// What the header comment records about the run.
struct MetricsMeta {
  std::string algo;
  std::string env;
  std::uint64_t seed = 0;
  std::uint64_t total_iterations = 0;
  std::uint64_t eval_interval = 0;
};

inline constexpr int kMetricsVersion = 1;

void write_metrics_header(std::ostream& os, const MetricsMeta& meta);
void write_metrics_row(std::ostream& os, const MetricsRow& row);

struct MetricsFile {
  MetricsMeta meta;
  std::vector<MetricsRow> rows;
};

/// Throws ContractError on a missing or mismatched version header or a
/// malformed row.
MetricsFile read_metrics(std::istream& is);
MetricsFile read_metrics(const std::filesystem::path& path);

struct FinalScore {
  std::vector<double> per_seed;
  double mean = 0.0;
  double std = 0.0;  // population (ddof = 0)
};

/// Highest eval_mean_return among rows with iteration in [0.9 total, total].
/// Throws ContractError if no row falls inside.
double run_score(const std::vector<MetricsRow>& rows, std::uint64_t total_iterations);

FinalScore final_score(const std::vector<std::vector<MetricsRow>>& runs, std::uint64_t total_iterations);

nlohmann::json to_json(const FinalScore& s);

struct TrainingOutput {
  std::vector<MetricsRow> rows;
  std::string csv;  // exact bytes of metrics.csv
  std::unique_ptr<Agent> agent;
  double min_alpha = 0.0;  // smallest alpha seen after any iteration
};

/// Runs cfg.total_iterations of train_iteration with an evaluation every
/// cfg.eval_interval iterations. With a non-empty `out_dir`, writes
/// metrics.csv, config.txt, checkpoint.bin and (when the final window holds
/// an evaluation) score.json there.
TrainingOutput run_training(const AgentConfig& cfg, const std::filesystem::path& out_dir = {},
                            std::ostream* progress = nullptr);

struct SweepRow {
  double rho = 0.0;
  FinalScore score;
};

/// One training run per (rho, seed) with `base` otherwise unchanged; runs
/// are spread over OpenMP threads and merged afterwards. Writes
/// rho_<r>/seed_<s>/... plus sweep.json and sweep.csv under out_dir when
/// it is non-empty.
std::vector<SweepRow> sweep_rho(const AgentConfig& base, const std::vector<double>& rhos,
                                const std::vector<std::uint64_t>& seeds, const std::filesystem::path& out_dir = {},
                                std::ostream* progress = nullptr);

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

}  // namespace tecrl
