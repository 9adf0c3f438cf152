#pragma once

#include <span>
#include <vector>

#include "tecrl/agent.hpp"
#include "tecrl/critics.hpp"

namespace tecrl {

/// Trajectory entropy target rho * h0 / (1 - gamma), with h0 = -dim(A) by default.
struct EntropyBudget {
  double rho = 1.0;
  double h0 = -1.0;
  double gamma = 0.99;

  double budget() const { return rho * h0 / (1.0 - gamma); }
};

/// h0 = -action_dim. Throws ContractError for rho <= 0 or gamma outside (0, 1).
EntropyBudget budget_from_config(double rho, std::size_t action_dim, double gamma);

struct PimResult {
  double loss = 0.0;
  std::vector<double> log_prob;
  /// -log pi(a|s) + Q_e(s, a) for the same samples, detached.
  std::vector<double> cum_entropy;
};

/// loss = -mean[min_k Q_r,k(s, a) + alpha (-log pi(a|s) + Q_e(s, a))] with
/// a = squash(mean + std * noise). Gradients go to the policy only; alpha
/// and the critics are constants here.
PimResult pim_loss(GaussianPolicy& policy, CriticPair& critics, double alpha, const Matrix& states,
                   const Matrix& noise);

/// Temperature step from the batch-mean cumulative entropy. With the
/// stabilizing sign dL/d(log alpha) = alpha (mean - budget), so alpha falls
/// while the policy is above budget; kLiteral flips it. Returns the loss value.
double tup_step(Temperature& temperature, std::span<const double> cum_entropy, double budget, TupSign sign);

class TecrlAgent final : public Agent {
 public:
  TecrlAgent(const AgentConfig& cfg, const EnvSpec& env);

  CriticPair& critics() { return critics_; }
  const CriticPair& critics() const { return critics_; }
  const EntropyBudget& budget() const { return budget_; }

  void save(std::vector<Record>& out) const override;
  void load(const std::vector<Record>& in) override;

 protected:
  void update_critics(const Batch& batch) override;
  void update_actor(const Batch& batch) override;
  void update_targets() override;

 private:
  CriticPair critics_;
  EntropyBudget budget_;
  EntropyEstimator estimator_;
};

}  // namespace tecrl
