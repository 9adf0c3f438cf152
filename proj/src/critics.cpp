#include "tecrl/critics.hpp"

#include <algorithm>
#include <cmath>

namespace tecrl {

namespace {

Mlp make_q(const EnvSpec& env, const CriticNetConfig& cfg, Rng& init) {
  std::vector<std::size_t> widths{env.state_dim + env.action_dim};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(1);
  return Mlp(widths, cfg.activation, init);
}

std::vector<double> column(const Matrix& m) { return m.values(); }

}  // namespace

void check_targets(std::span<const double> y, const char* what) {
  if (!all_finite(y)) throw NumericError(std::string(what) + ": non-finite target");
}

TwinCritic TwinCritic::make(const EnvSpec& env, const CriticNetConfig& cfg, Rng& init) {
  TwinCritic t;
  t.a = make_q(env, cfg, init);
  t.b = make_q(env, cfg, init);
  t.target_a = t.a;
  t.target_b = t.b;
  return t;
}

std::vector<double> TwinCritic::min_target(const Matrix& states, const Matrix& actions) const {
  const Matrix sa = hconcat(states, actions);
  const Matrix qa = target_a.predict(sa);
  const Matrix qb = target_b.predict(sa);
  std::vector<double> out(sa.rows());
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = std::min(qa(r, 0), qb(r, 0));
  return out;
}

void TwinCritic::zero_grad() {
  a.store().zero_grad();
  b.store().zero_grad();
}

void TwinCritic::adam(const AdamConfig& cfg) {
  adam_step(a.store(), cfg);
  adam_step(b.store(), cfg);
}

void TwinCritic::soft_update(double tau) {
  polyak_update(target_a.store(), a.store(), tau);
  polyak_update(target_b.store(), b.store(), tau);
}

CriticPair CriticPair::make(const EnvSpec& env, const CriticNetConfig& cfg, Rng& init) {
  CriticPair c;
  c.reward = TwinCritic::make(env, cfg, init);
  c.q_e = make_q(env, cfg, init);
  c.q_e_target = c.q_e;
  return c;
}

void CriticPair::soft_update(double tau) {
  reward.soft_update(tau);
  polyak_update(q_e_target.store(), q_e.store(), tau);
}

std::vector<double> pev_target(const Batch& batch, const ActionSample& next, const CriticPair& critics, double gamma,
                               double reward_scale) {
  const std::vector<double> q_next = critics.reward.min_target(batch.next_states, next.action);
  std::vector<double> y(batch.size());
  for (std::size_t r = 0; r < y.size(); ++r)
    y[r] = reward_target(reward_scale * batch.rewards[r], batch.done[r] != 0, q_next[r], gamma);
  check_targets(y, "pev_target");
  return y;
}

std::vector<double> pis_target(const Batch& batch, const ActionSample& next, const CriticPair& critics, double gamma,
                               EntropyEstimator estimator) {
  const std::vector<double> qe_next = column(critics.q_e_target.predict(hconcat(batch.next_states, next.action)));
  std::vector<double> y(batch.size());
  for (std::size_t r = 0; r < y.size(); ++r) {
    const double h = estimator == EntropyEstimator::kSampled ? -next.log_prob[r] : next.pre_squash_entropy[r];
    y[r] = entropy_target(h, batch.done[r] != 0, qe_next[r], gamma);
  }
  check_targets(y, "pis_target");
  return y;
}

namespace {

/// mean (Q - y)^2 for one network; accumulates gradients.
double mse_into(Mlp& q, const Matrix& sa, std::span<const double> y) {
  Tape tape;
  const Matrix out = q.forward(sa, tape);
  const double inv = 1.0 / static_cast<double>(sa.rows());
  Matrix dout(sa.rows(), 1);
  double loss = 0.0;
  for (std::size_t r = 0; r < sa.rows(); ++r) {
    const double e = out(r, 0) - y[r];
    loss += e * e;
    dout(r, 0) = 2.0 * e * inv;
  }
  q.backward(tape, dout, true);
  return loss * inv;
}

}  // namespace

double twin_mse_loss(TwinCritic& twin, const Batch& batch, std::span<const double> y) {
  if (y.size() != batch.size()) throw ContractError("twin_mse_loss: target size mismatch");
  const Matrix sa = hconcat(batch.states, batch.actions);
  return mse_into(twin.a, sa, y) + mse_into(twin.b, sa, y);
}

double pis_loss(CriticPair& critics, const Batch& batch, std::span<const double> y_e) {
  if (y_e.size() != batch.size()) throw ContractError("pis_loss: target size mismatch");
  return mse_into(critics.q_e, hconcat(batch.states, batch.actions), y_e);
}

std::vector<double> cumulative_entropy_estimate(const CriticPair& critics, const Matrix& states,
                                                const ActionSample& sample) {
  const Matrix qe = critics.q_e.predict(hconcat(states, sample.action));
  std::vector<double> h(states.rows());
  for (std::size_t r = 0; r < h.size(); ++r) h[r] = -sample.log_prob[r] + qe(r, 0);
  return h;
}

namespace {

/// Forward (s, a) through q and backpropagate `weights` (per-row dL/dQ) to
/// the action columns.
std::vector<double> eval_and_grad(Mlp& q, const Matrix& sa, std::size_t state_dim, std::span<const double> weights,
                                  Matrix& d_action, bool add) {
  Tape tape;
  const Matrix out = q.forward(sa, tape);
  Matrix dout(sa.rows(), 1);
  for (std::size_t r = 0; r < sa.rows(); ++r) dout(r, 0) = weights[r];
  const Matrix din = q.backward(tape, dout, false);
  for (std::size_t r = 0; r < sa.rows(); ++r)
    for (std::size_t j = 0; j < d_action.cols(); ++j) {
      const double g = din(r, state_dim + j);
      d_action(r, j) = add ? d_action(r, j) + g : g;
    }
  return out.values();
}

}  // namespace

std::vector<double> q_with_action_grad(Mlp& q, const Matrix& states, const Matrix& actions, Matrix& d_action) {
  d_action = Matrix(actions.rows(), actions.cols());
  const std::vector<double> ones(actions.rows(), 1.0);
  return eval_and_grad(q, hconcat(states, actions), states.cols(), ones, d_action, false);
}

std::vector<double> twin_min_with_action_grad(TwinCritic& twin, const Matrix& states, const Matrix& actions,
                                              Matrix& d_action) {
  const Matrix sa = hconcat(states, actions);
  const std::size_t B = sa.rows();
  Tape ta, tb;
  const Matrix qa = twin.a.forward(sa, ta);
  const Matrix qb = twin.b.forward(sa, tb);
  std::vector<double> q(B);
  Matrix wa(B, 1), wb(B, 1);
  for (std::size_t r = 0; r < B; ++r) {
    const bool pick_a = qa(r, 0) <= qb(r, 0);
    q[r] = pick_a ? qa(r, 0) : qb(r, 0);
    wa(r, 0) = pick_a ? 1.0 : 0.0;
    wb(r, 0) = pick_a ? 0.0 : 1.0;
  }
  const Matrix da = twin.a.backward(ta, wa, false);
  const Matrix db = twin.b.backward(tb, wb, false);
  d_action = Matrix(B, actions.cols());
  for (std::size_t r = 0; r < B; ++r)
    for (std::size_t j = 0; j < actions.cols(); ++j)
      d_action(r, j) = da(r, states.cols() + j) + db(r, states.cols() + j);
  return q;
}

}  // namespace tecrl
