#pragma once

#include <span>
#include <vector>

#include "tecrl/autodiff.hpp"
#include "tecrl/batch.hpp"
#include "tecrl/env.hpp"
#include "tecrl/policy.hpp"

namespace tecrl {

struct CriticNetConfig {
  std::vector<std::size_t> hidden = {256, 256};
  Activation activation = Activation::kSilu;
};

/// Two independently initialized Q networks over (state, action) with
/// slow-moving target copies.
struct TwinCritic {
  Mlp a;
  Mlp b;
  Mlp target_a;
  Mlp target_b;

  static TwinCritic make(const EnvSpec& env, const CriticNetConfig& cfg, Rng& init);

  /// min(target_a, target_b) at (s, a).
  std::vector<double> min_target(const Matrix& states, const Matrix& actions) const;
  void zero_grad();
  void adam(const AdamConfig& cfg);
  void soft_update(double tau);
};

/// Reward critics (twin) and the entropy critic, each with targets.
struct CriticPair {
  TwinCritic reward;
  Mlp q_e;
  Mlp q_e_target;

  static CriticPair make(const EnvSpec& env, const CriticNetConfig& cfg, Rng& init);
  void soft_update(double tau);
};

/// Single-row Bellman targets.
inline double reward_target(double r, bool done, double next_q, double gamma) {
  return r + (done ? 0.0 : gamma * next_q);
}
inline double entropy_target(double next_entropy, bool done, double next_qe, double gamma) {
  return done ? 0.0 : gamma * (next_entropy + next_qe);
}
inline double soft_target(double r, bool done, double next_q, double alpha, double next_log_prob, double gamma) {
  return r + (done ? 0.0 : gamma * (next_q - alpha * next_log_prob));
}

/// y_r = scale * r + gamma (1 - done) min_k Q_r,k^target(s', a'), with a'
/// taken from `next` (sampled at s'). No entropy and no temperature.
std::vector<double> pev_target(const Batch& batch, const ActionSample& next, const CriticPair& critics, double gamma,
                               double reward_scale);

/// y_e = (1 - done) gamma (h(s') + Q_e^target(s', a')); h is -log pi(a'|s')
/// or the closed-form Gaussian entropy depending on `estimator`.
std::vector<double> pis_target(const Batch& batch, const ActionSample& next, const CriticPair& critics, double gamma,
                               EntropyEstimator estimator = EntropyEstimator::kSampled);

/// Sum over both twins of mean (Q(s,a) - y)^2; gradients are added into the
/// online twins only.
double twin_mse_loss(TwinCritic& twin, const Batch& batch, std::span<const double> y);

inline double pev_loss(CriticPair& critics, const Batch& batch, std::span<const double> y_r) {
  return twin_mse_loss(critics.reward, batch, y_r);
}

/// mean (Q_e(s,a) - y_e)^2; gradients into the online entropy critic.
double pis_loss(CriticPair& critics, const Batch& batch, std::span<const double> y_e);

/// -log pi(a|s) + Q_e(s, a) per row, for actions sampled at `states`.
std::vector<double> cumulative_entropy_estimate(const CriticPair& critics, const Matrix& states,
                                                const ActionSample& sample);

/// Online Q(s, a) per row and dQ/da written into `d_action` (rows x action
/// dim). Parameter gradients are not touched.
std::vector<double> q_with_action_grad(Mlp& q, const Matrix& states, const Matrix& actions, Matrix& d_action);

/// Same for min(Q_a, Q_b); the gradient follows the smaller twin (twin a on ties).
std::vector<double> twin_min_with_action_grad(TwinCritic& twin, const Matrix& states, const Matrix& actions,
                                              Matrix& d_action);

/// Throws NumericError if any target is not finite.
void check_targets(std::span<const double> y, const char* what);

}  // namespace tecrl
