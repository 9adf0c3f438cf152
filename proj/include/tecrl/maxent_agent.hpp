#pragma once

#include <span>
#include <vector>

#include "tecrl/agent.hpp"
#include "tecrl/critics.hpp"

namespace tecrl {

using SoftCriticPair = TwinCritic;

/// y = scale * r + gamma (1 - done) (min_k Q_k^target(s', a') - alpha log pi(a'|s')).
/// Unlike the decoupled targets this moves whenever alpha moves.
std::vector<double> soft_pev_target(const Batch& batch, const ActionSample& next, const SoftCriticPair& critics,
                                    double alpha, double gamma, double reward_scale);

struct SoftPimResult {
  double loss = 0.0;
  std::vector<double> log_prob;
};

/// loss = -mean[min_k Q_k(s, a) - alpha log pi(a|s)]; gradients to the policy only.
SoftPimResult soft_pim_loss(GaussianPolicy& policy, SoftCriticPair& critics, double alpha, const Matrix& states,
                            const Matrix& noise);

/// Per-step temperature rule: dJ/d(alpha) = -mean(log pi) - h0, applied in
/// log space. Returns J.
double local_tup_step(Temperature& temperature, std::span<const double> log_prob, double h0);

class MaxEntAgent final : public Agent {
 public:
  MaxEntAgent(const AgentConfig& cfg, const EnvSpec& env);

  SoftCriticPair& critics() { return critics_; }
  double h0() const { return h0_; }

  void save(std::vector<Record>& out) const override;
  void load(const std::vector<Record>& in) override;

 protected:
  void update_critics(const Batch& batch) override;
  void update_actor(const Batch& batch) override;
  void update_targets() override;

 private:
  SoftCriticPair critics_;
  double h0_;
};

}  // namespace tecrl
