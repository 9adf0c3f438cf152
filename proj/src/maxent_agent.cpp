#include "tecrl/maxent_agent.hpp"

#include <cmath>
#include <numeric>

namespace tecrl {

std::vector<double> soft_pev_target(const Batch& batch, const ActionSample& next, const SoftCriticPair& critics,
                                    double alpha, double gamma, double reward_scale) {
  const std::vector<double> q_next = critics.min_target(batch.next_states, next.action);
  std::vector<double> y(batch.size());
  for (std::size_t r = 0; r < y.size(); ++r)
    y[r] = soft_target(reward_scale * batch.rewards[r], batch.done[r] != 0, q_next[r], alpha, next.log_prob[r], gamma);
  check_targets(y, "soft_pev_target");
  return y;
}

SoftPimResult soft_pim_loss(GaussianPolicy& policy, SoftCriticPair& critics, double alpha, const Matrix& states,
                            const Matrix& noise) {
  const std::size_t B = states.rows();
  SampleTape tape;
  const ActionSample s = policy.sample_with_noise(states, noise, &tape);
  Matrix dq;
  const std::vector<double> q = twin_min_with_action_grad(critics, states, s.action, dq);
  const double inv = 1.0 / static_cast<double>(B);
  Matrix d_action(B, policy.action_dim());
  std::vector<double> d_log_prob(B, alpha * inv);
  double objective = 0.0;
  for (std::size_t r = 0; r < B; ++r) {
    objective += q[r] - alpha * s.log_prob[r];
    for (std::size_t j = 0; j < d_action.cols(); ++j) d_action(r, j) = -dq(r, j) * inv;
  }
  policy.backward(tape, d_action, d_log_prob);
  return SoftPimResult{-objective * inv, s.log_prob};
}

double local_tup_step(Temperature& temperature, std::span<const double> log_prob, double h0) {
  if (log_prob.empty()) throw ContractError("local_tup_step: empty batch");
  const double mean_lp =
      std::accumulate(log_prob.begin(), log_prob.end(), 0.0) / static_cast<double>(log_prob.size());
  const double alpha = temperature.alpha();
  const double dj_dalpha = -mean_lp - h0;
  temperature.step(alpha * dj_dalpha);
  return alpha * dj_dalpha;
}

namespace {

CriticNetConfig critic_config(const AgentConfig& cfg) {
  CriticNetConfig c;
  c.hidden.assign(cfg.layers, cfg.hidden);
  c.activation = parse_activation(cfg.activation);
  return c;
}

}  // namespace

MaxEntAgent::MaxEntAgent(const AgentConfig& cfg, const EnvSpec& env)
    : Agent(cfg, env),
      critics_(TwinCritic::make(env, critic_config(cfg), init_rng_)),
      h0_(std::isnan(cfg.h0) ? -static_cast<double>(env.action_dim) : cfg.h0) {}

void MaxEntAgent::update_critics(const Batch& batch) {
  const ActionSample next = policy_.sample(batch.next_states, noise_rng_);
  const std::vector<double> y = soft_pev_target(batch, next, critics_, alpha(), cfg_.gamma, cfg_.reward_scale);
  critics_.zero_grad();
  log_.pev += twin_mse_loss(critics_, batch, y);
  critics_.adam(critic_adam_);
}

void MaxEntAgent::update_actor(const Batch& batch) {
  const Matrix noise = standard_normal(batch.size(), policy_.action_dim(), noise_rng_);
  policy_.trunk().store().zero_grad();
  const SoftPimResult pim = soft_pim_loss(policy_, critics_, alpha(), batch.states, noise);
  adam_step(policy_.trunk().store(), actor_adam_);
  const double mean_lp =
      std::accumulate(pim.log_prob.begin(), pim.log_prob.end(), 0.0) / static_cast<double>(pim.log_prob.size());
  log_.pim += pim.loss;
  log_.step_entropy -= mean_lp;
  if (cfg_.temperature_update)
    log_.tup += local_tup_step(temperature_, pim.log_prob, h0_);
  else
    log_.tup += alpha() * (-mean_lp - h0_);
}

void MaxEntAgent::update_targets() { critics_.soft_update(cfg_.tau); }

void MaxEntAgent::save(std::vector<Record>& out) const {
  Agent::save(out);
  append_records(out, "q.a", critics_.a.store(), true);
  append_records(out, "q.b", critics_.b.store(), true);
  append_records(out, "q.a_target", critics_.target_a.store(), false);
  append_records(out, "q.b_target", critics_.target_b.store(), false);
}

void MaxEntAgent::load(const std::vector<Record>& in) {
  Agent::load(in);
  restore_records(in, "q.a", critics_.a.store());
  restore_records(in, "q.b", critics_.b.store());
  restore_records(in, "q.a_target", critics_.target_a.store());
  restore_records(in, "q.b_target", critics_.target_b.store());
}

}  // namespace tecrl
