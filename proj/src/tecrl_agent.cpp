#include "tecrl/tecrl_agent.hpp"

#include <cmath>
#include <numeric>

namespace tecrl {

EntropyBudget budget_from_config(double rho, std::size_t action_dim, double gamma) {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw ContractError("budget_from_config: rho must be > 0");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ContractError("budget_from_config: gamma must lie in (0, 1)");
  if (action_dim == 0) throw ContractError("budget_from_config: action_dim must be >= 1");
  return EntropyBudget{rho, -static_cast<double>(action_dim), gamma};
}

PimResult pim_loss(GaussianPolicy& policy, CriticPair& critics, double alpha, const Matrix& states,
                   const Matrix& noise) {
  const std::size_t B = states.rows();
  SampleTape tape;
  const ActionSample s = policy.sample_with_noise(states, noise, &tape);
  Matrix dq_r, dq_e;
  const std::vector<double> q_r = twin_min_with_action_grad(critics.reward, states, s.action, dq_r);
  const std::vector<double> q_e = q_with_action_grad(critics.q_e, states, s.action, dq_e);

  const double inv = 1.0 / static_cast<double>(B);
  PimResult res;
  res.log_prob = s.log_prob;
  res.cum_entropy.resize(B);
  Matrix d_action(B, policy.action_dim());
  std::vector<double> d_log_prob(B, alpha * inv);
  double objective = 0.0;
  for (std::size_t r = 0; r < B; ++r) {
    res.cum_entropy[r] = -s.log_prob[r] + q_e[r];
    objective += q_r[r] + alpha * res.cum_entropy[r];
    for (std::size_t j = 0; j < d_action.cols(); ++j) d_action(r, j) = -(dq_r(r, j) + alpha * dq_e(r, j)) * inv;
  }
  res.loss = -objective * inv;
  policy.backward(tape, d_action, d_log_prob);
  return res;
}

double tup_step(Temperature& temperature, std::span<const double> cum_entropy, double budget, TupSign sign) {
  if (cum_entropy.empty()) throw ContractError("tup_step: empty batch");
  const double mean =
      std::accumulate(cum_entropy.begin(), cum_entropy.end(), 0.0) / static_cast<double>(cum_entropy.size());
  const double alpha = temperature.alpha();
  const double s = sign == TupSign::kStabilizing ? 1.0 : -1.0;
  const double loss = s * alpha * (mean - budget);
  // d/d(log alpha) of alpha * c is alpha * c, so the loss doubles as its gradient.
  temperature.step(loss);
  return loss;
}

namespace {

CriticNetConfig critic_config(const AgentConfig& cfg) {
  CriticNetConfig c;
  c.hidden.assign(cfg.layers, cfg.hidden);
  c.activation = parse_activation(cfg.activation);
  return c;
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

TecrlAgent::TecrlAgent(const AgentConfig& cfg, const EnvSpec& env)
    : Agent(cfg, env),
      critics_(CriticPair::make(env, critic_config(cfg), init_rng_)),
      budget_(budget_from_config(cfg.rho, env.action_dim, cfg.gamma)),
      estimator_(parse_entropy_estimator(cfg.entropy_estimator)) {
  if (!std::isnan(cfg.h0)) budget_.h0 = cfg.h0;
}

void TecrlAgent::update_critics(const Batch& batch) {
  // a' is drawn once and shared by both targets.
  const ActionSample next = policy_.sample(batch.next_states, noise_rng_);
  const std::vector<double> y_r = pev_target(batch, next, critics_, cfg_.gamma, cfg_.reward_scale);
  const std::vector<double> y_e = pis_target(batch, next, critics_, cfg_.gamma, estimator_);

  critics_.reward.zero_grad();
  log_.pev += pev_loss(critics_, batch, y_r);
  critics_.reward.adam(critic_adam_);

  critics_.q_e.store().zero_grad();
  log_.pis += pis_loss(critics_, batch, y_e);
  adam_step(critics_.q_e.store(), critic_adam_);
}

void TecrlAgent::update_actor(const Batch& batch) {
  const Matrix noise = standard_normal(batch.size(), policy_.action_dim(), noise_rng_);
  policy_.trunk().store().zero_grad();
  const PimResult pim = pim_loss(policy_, critics_, alpha(), batch.states, noise);
  adam_step(policy_.trunk().store(), actor_adam_);
  log_.pim += pim.loss;
  log_.step_entropy -= mean_of(pim.log_prob);
  log_.cum_entropy += mean_of(pim.cum_entropy);

  if (cfg_.temperature_update) {
    log_.tup += tup_step(temperature_, pim.cum_entropy, budget_.budget(), cfg_.tup_sign);
  } else {
    log_.tup += alpha() * (mean_of(pim.cum_entropy) - budget_.budget());
  }
}

void TecrlAgent::update_targets() { critics_.soft_update(cfg_.tau); }

void TecrlAgent::save(std::vector<Record>& out) const {
  Agent::save(out);
  append_records(out, "q_r.a", critics_.reward.a.store(), true);
  append_records(out, "q_r.b", critics_.reward.b.store(), true);
  append_records(out, "q_r.a_target", critics_.reward.target_a.store(), false);
  append_records(out, "q_r.b_target", critics_.reward.target_b.store(), false);
  append_records(out, "q_e", critics_.q_e.store(), true);
  append_records(out, "q_e_target", critics_.q_e_target.store(), false);
}

void TecrlAgent::load(const std::vector<Record>& in) {
  Agent::load(in);
  restore_records(in, "q_r.a", critics_.reward.a.store());
  restore_records(in, "q_r.b", critics_.reward.b.store());
  restore_records(in, "q_r.a_target", critics_.reward.target_a.store());
  restore_records(in, "q_r.b_target", critics_.reward.target_b.store());
  restore_records(in, "q_e", critics_.q_e.store());
  restore_records(in, "q_e_target", critics_.q_e_target.store());
}

}  // namespace tecrl
