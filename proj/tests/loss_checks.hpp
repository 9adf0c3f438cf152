#pragma once

// Finite-difference checks of every agent loss on one random draw. Shared by
// the unit tests and the acceptance binary.

#include <string>

#include "tecrl/maxent_agent.hpp"
#include "tecrl/tecrl_agent.hpp"
#include "test_util.hpp"

namespace tecrl::testing {

struct LossDraw {
  EnvSpec env;
  GaussianPolicy policy;
  CriticPair critics;
  Batch batch;
  ActionSample next;
  Matrix noise;
  double alpha = 0.2;
};

inline LossDraw make_loss_draw(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x10557));
  LossDraw d;
  const std::size_t A = 1 + seed % 2, S = 3, B = 2 + seed % 3;
  d.env.state_dim = S;
  d.env.action_dim = A;
  d.env.action_low.assign(A, -2.0);
  d.env.action_high.assign(A, 2.0);
  d.env.max_episode_steps = 10;

  PolicyConfig pc;
  pc.hidden = {12, 12};
  pc.activation = seed % 3 == 0 ? Activation::kTanh : Activation::kSilu;
  d.policy = GaussianPolicy(d.env, pc, rng);
  d.critics = CriticPair::make(d.env, {.hidden = {12, 12}, .activation = pc.activation}, rng);
  // Separate the twins so the min is never tied.
  for (auto& v : d.critics.reward.b.store().params().back().value) v += 0.5;
  d.critics.reward.b.store().touch();

  d.batch.states = random_matrix(B, S, rng);
  d.batch.actions = random_matrix(B, A, rng, -2.0, 2.0);
  d.batch.next_states = random_matrix(B, S, rng);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t i = 0; i < B; ++i) {
    d.batch.rewards.push_back(u(rng));
    d.batch.done.push_back(i == 1);
  }
  d.next = d.policy.sample(d.batch.next_states, rng);
  d.noise = standard_normal(B, A, rng);
  d.alpha = std::exp(std::uniform_real_distribution<double>(std::log(0.01), std::log(2.0))(rng));
  return d;
}

/// Restores `store` (values, grads, version) after evaluating `f`.
template <class F>
double keep_store(ParamStore& store, F&& f) {
  const ParamStore saved = store;
  const double v = f();
  store = saved;
  return v;
}

inline double check_pev(LossDraw& d, std::string* where = nullptr) {
  const auto y = pev_target(d.batch, d.next, d.critics, 0.99, 0.1);
  auto& tw = d.critics.reward;
  tw.zero_grad();
  pev_loss(d.critics, d.batch, y);
  auto loss = [&] {
    return keep_store(tw.a.store(), [&] { return keep_store(tw.b.store(), [&] { return pev_loss(d.critics, d.batch, y); }); });
  };
  return std::max(worst_param_grad_error(tw.a.store(), loss, 1e-5, where),
                  worst_param_grad_error(tw.b.store(), loss, 1e-5, where));
}

inline double check_pis(LossDraw& d, std::string* where = nullptr) {
  const auto y = pis_target(d.batch, d.next, d.critics, 0.99);
  auto& st = d.critics.q_e.store();
  st.zero_grad();
  pis_loss(d.critics, d.batch, y);
  auto loss = [&] { return keep_store(st, [&] { return pis_loss(d.critics, d.batch, y); }); };
  return worst_param_grad_error(st, loss, 1e-5, where);
}

inline double check_pim(LossDraw& d, std::string* where = nullptr) {
  auto& st = d.policy.trunk().store();
  st.zero_grad();
  pim_loss(d.policy, d.critics, d.alpha, d.batch.states, d.noise);
  auto loss = [&] {
    return keep_store(st, [&] { return pim_loss(d.policy, d.critics, d.alpha, d.batch.states, d.noise).loss; });
  };
  return worst_param_grad_error(st, loss, 1e-5, where);
}

inline double check_soft_pev(LossDraw& d, std::string* where = nullptr) {
  auto& tw = d.critics.reward;
  const auto y = soft_pev_target(d.batch, d.next, tw, d.alpha, 0.99, 0.1);
  tw.zero_grad();
  twin_mse_loss(tw, d.batch, y);
  auto loss = [&] {
    return keep_store(tw.a.store(),
                      [&] { return keep_store(tw.b.store(), [&] { return twin_mse_loss(tw, d.batch, y); }); });
  };
  return std::max(worst_param_grad_error(tw.a.store(), loss, 1e-5, where),
                  worst_param_grad_error(tw.b.store(), loss, 1e-5, where));
}

inline double check_soft_pim(LossDraw& d, std::string* where = nullptr) {
  auto& st = d.policy.trunk().store();
  st.zero_grad();
  soft_pim_loss(d.policy, d.critics.reward, d.alpha, d.batch.states, d.noise);
  auto loss = [&] {
    return keep_store(st, [&] { return soft_pim_loss(d.policy, d.critics.reward, d.alpha, d.batch.states, d.noise).loss; });
  };
  return worst_param_grad_error(st, loss, 1e-5, where);
}

}  // namespace tecrl::testing
