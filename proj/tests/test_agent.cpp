#include <gtest/gtest.h>

#include <cmath>

#include "loss_checks.hpp"
#include "tecrl/agent.hpp"
#include "tecrl/maxent_agent.hpp"
#include "tecrl/tecrl_agent.hpp"

using namespace tecrl;
using namespace tecrl::testing;

namespace {

AgentConfig small_config(Algo algo) {
  AgentConfig c;
  c.algo = algo;
  c.env = "point-mass";
  c.hidden = 16;
  c.batch = 8;
  c.warm = 20;
  c.buffer = 1000;
  c.total_iterations = 100;
  c.eval_interval = 50;
  c.seed = 3;
  return c;
}

std::vector<double> flat(const ParamStore& s) {
  std::vector<double> out;
  for (const auto& p : s.params()) out.insert(out.end(), p.value.begin(), p.value.end());
  return out;
}

}  // namespace

TEST(Budget, Arithmetic) {
  EXPECT_NEAR(budget_from_config(1.0, 1, 0.99).budget(), -100.0, 1e-9);
  EXPECT_NEAR(budget_from_config(20.0, 17, 0.99).budget(), -34000.0, 1e-6);
  EXPECT_THROW(budget_from_config(0.0, 1, 0.99), ContractError);
  EXPECT_THROW(budget_from_config(-1.0, 1, 0.99), ContractError);
  EXPECT_THROW(budget_from_config(1.0, 1, 1.0), ContractError);
  EXPECT_THROW(budget_from_config(1.0, 1, 1.5), ContractError);
}

TEST(Budget, LargerRhoIsMoreNegative) {
  double prev = 0.0;
  for (double rho : {1.0, 10.0, 20.0, 30.0}) {
    const double b = budget_from_config(rho, 2, 0.99).budget();
    EXPECT_LT(b, prev);
    prev = b;
  }
}

TEST(Pim, ObjectiveArithmetic) {
  // Q_r = 5, alpha = 0.2, -log pi = 1, Q_e = 50.
  const double objective = 5.0 + 0.2 * (1.0 + 50.0);
  EXPECT_NEAR(objective, 15.2, 1e-12);

  LossDraw d = make_loss_draw(0);
  auto set_const = [](Mlp& net, double c) {
    auto& ps = net.store().params();
    std::fill(ps[ps.size() - 2].value.begin(), ps[ps.size() - 2].value.end(), 0.0);
    std::fill(ps.back().value.begin(), ps.back().value.end(), c);
    net.store().touch();
  };
  set_const(d.critics.reward.a, 5.0);
  set_const(d.critics.reward.b, 5.0);
  set_const(d.critics.q_e, 50.0);
  const PimResult r = pim_loss(d.policy, d.critics, 0.2, d.batch.states, d.noise);
  double ent = 0.0;
  for (double lp : r.log_prob) ent -= lp;
  ent /= static_cast<double>(r.log_prob.size());
  EXPECT_NEAR(r.loss, -(5.0 + 0.2 * (ent + 50.0)), 1e-12);
  for (std::size_t i = 0; i < r.cum_entropy.size(); ++i) EXPECT_DOUBLE_EQ(r.cum_entropy[i], -r.log_prob[i] + 50.0);

  // alpha = 0 leaves only the reward critic.
  const PimResult g = pim_loss(d.policy, d.critics, 0.0, d.batch.states, d.noise);
  EXPECT_DOUBLE_EQ(g.loss, -5.0);
}

TEST(Pim, AlphaZeroIgnoresEntropyCritic) {
  LossDraw a = make_loss_draw(1), b = make_loss_draw(1);
  for (auto& p : b.critics.q_e.store().params())
    for (auto& v : p.value) v *= 3.0;
  b.critics.q_e.store().touch();
  a.policy.trunk().store().zero_grad();
  b.policy.trunk().store().zero_grad();
  pim_loss(a.policy, a.critics, 0.0, a.batch.states, a.noise);
  pim_loss(b.policy, b.critics, 0.0, b.batch.states, b.noise);
  for (std::size_t k = 0; k < a.policy.trunk().store().params().size(); ++k)
    EXPECT_EQ(a.policy.trunk().store().params()[k].grad, b.policy.trunk().store().params()[k].grad);
}

TEST(LossGradients, MatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::string where;
    LossDraw d = make_loss_draw(seed);
    EXPECT_LE(check_pev(d, &where), 1e-4) << "pev seed " << seed << " " << where;
    EXPECT_LE(check_pis(d, &where), 1e-4) << "pis seed " << seed << " " << where;
    EXPECT_LE(check_pim(d, &where), 1e-4) << "pim seed " << seed << " " << where;
    EXPECT_LE(check_soft_pev(d, &where), 1e-4) << "soft pev seed " << seed << " " << where;
    EXPECT_LE(check_soft_pim(d, &where), 1e-4) << "soft pim seed " << seed << " " << where;
  }
}

TEST(Tup, SignConventions) {
  Temperature t(0.2, {.lr = 3e-4});
  const std::vector<double> at_budget{-100.0, -100.0};
  EXPECT_EQ(tup_step(t, at_budget, -100.0, TupSign::kStabilizing), 0.0);
  EXPECT_EQ(t.alpha(), 0.2);

  // Mean -90 against budget -100: entropy above budget, alpha must fall.
  const std::vector<double> above{-85.0, -95.0};
  const double loss = tup_step(t, above, -100.0, TupSign::kStabilizing);
  EXPECT_NEAR(loss, 0.2 * 10.0, 1e-12);
  EXPECT_LT(t.alpha(), 0.2);

  Temperature lit(0.2, {.lr = 3e-4});
  tup_step(lit, above, -100.0, TupSign::kLiteral);
  EXPECT_GT(lit.alpha(), 0.2);
}

TEST(Tup, ClosedLoopSettlesWhereSignalCrossesBudget) {
  // Stationary synthetic signal increasing in alpha; crosses the budget at alpha = 0.05.
  const double budget = -100.0, target = 0.05;
  auto signal = [&](double alpha) { return budget + 40.0 * std::log(alpha / target); };
  Temperature t(0.2, {.lr = 1e-2});
  for (int k = 0; k < 20000; ++k) {
    const std::vector<double> h{signal(t.alpha())};
    tup_step(t, h, budget, TupSign::kStabilizing);
    ASSERT_GT(t.alpha(), 0.0);
  }
  EXPECT_NEAR(t.alpha(), target, 0.01 * target);
}

TEST(Tup, AlphaStaysPositiveUnderAnyGradients) {
  Temperature t(0.2, {.lr = 1.0});
  for (int k = 0; k < 1000; ++k) {
    t.step(1e6);
    ASSERT_GT(t.alpha(), 0.0);
  }
}

TEST(LocalTup, SignConventions) {
  Temperature t(0.2, {.lr = 3e-4});
  const std::vector<double> at_target{1.0, 1.0};  // entropy -1 = h0
  EXPECT_EQ(local_tup_step(t, at_target, -1.0), 0.0);
  EXPECT_EQ(t.alpha(), 0.2);
  // Entropy h0 + 1: dJ/dalpha = +1, alpha falls.
  const std::vector<double> above{0.0, 0.0};
  EXPECT_NEAR(local_tup_step(t, above, -1.0), 0.2, 1e-12);
  EXPECT_LT(t.alpha(), 0.2);
}

TEST(SoftTarget, Arithmetic) {
  EXPECT_NEAR(soft_target(1.0, false, 10.0, 0.2, -1.0, 0.99), 11.098, 1e-12);
  EXPECT_EQ(soft_target(1.0, false, 10.0, 0.0, -1.0, 0.99), reward_target(1.0, false, 10.0, 0.99));
  EXPECT_EQ(soft_target(1.0, true, 10.0, 0.2, -1.0, 0.99), 1.0);
}

TEST(SoftTarget, AlphaZeroReducesToPevTarget) {
  LossDraw d = make_loss_draw(4);
  EXPECT_EQ(soft_pev_target(d.batch, d.next, d.critics.reward, 0.0, 0.99, 0.1),
            pev_target(d.batch, d.next, d.critics, 0.99, 0.1));
}

TEST(SoftTarget, MovesWithAlphaWhileDecoupledTargetsDoNot) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    LossDraw d = make_loss_draw(seed);
    const auto y1 = soft_pev_target(d.batch, d.next, d.critics.reward, d.alpha, 0.99, 0.1);
    const auto y2 = soft_pev_target(d.batch, d.next, d.critics.reward, 2.0 * d.alpha, 0.99, 0.1);
    for (std::size_t i = 0; i < y1.size(); ++i)
      if (!d.batch.done[i] && d.next.log_prob[i] != 0.0) EXPECT_NE(y1[i], y2[i]);
  }
}

TEST(Schedule, WarmupPerformsNoUpdates) {
  const AgentConfig cfg = small_config(Algo::kTecrl);
  auto env = make_env(cfg.env);
  auto agent = make_agent(cfg, env->spec());
  ReplayBuffer buf(cfg.buffer, env->spec().state_dim, env->spec().action_dim);
  TrainState st(cfg.seed);
  const auto before = flat(agent->policy().trunk().store());
  for (std::size_t k = 0; k + 1 < cfg.warm; ++k) {
    const IterationReport r = train_iteration(*agent, *env, buf, st);
    EXPECT_FALSE(r.critics_updated);
    EXPECT_EQ(r.steps_collected, 1u);
  }
  EXPECT_EQ(buf.size(), cfg.warm - 1);
  EXPECT_EQ(agent->log().critic_updates, 0u);
  EXPECT_EQ(flat(agent->policy().trunk().store()), before);
  EXPECT_TRUE(train_iteration(*agent, *env, buf, st).critics_updated);
}

TEST(Schedule, PolicyOnEvenIterationsOnly) {
  AgentConfig cfg = small_config(Algo::kTecrl);
  cfg.warm = 8;
  auto env = make_env(cfg.env);
  auto agent = make_agent(cfg, env->spec());
  ReplayBuffer buf(cfg.buffer, env->spec().state_dim, env->spec().action_dim);
  TrainState st(cfg.seed);
  for (int k = 0; k < 7; ++k) train_iteration(*agent, *env, buf, st);
  for (int k = 0; k < 6; ++k) {
    const std::uint64_t it = st.iteration;
    const IterationReport r = train_iteration(*agent, *env, buf, st);
    EXPECT_TRUE(r.critics_updated) << it;
    EXPECT_EQ(r.actor_updated, it % 2 == 0) << it;
  }
}

TEST(Decoupling, CriticsIdenticalWithAndWithoutTemperatureUpdates) {
  auto run = [](bool tup) {
    AgentConfig cfg = small_config(Algo::kTecrl);
    cfg.warm = 8;
    cfg.temperature_update = tup;
    cfg.alpha_lr = 0.5;  // make any leak visible
    auto env = make_env(cfg.env);
    auto agent = make_agent(cfg, env->spec());
    ReplayBuffer buf(cfg.buffer, env->spec().state_dim, env->spec().action_dim);
    TrainState st(cfg.seed);
    while (st.gradient_phases < cfg.policy_update_interval) train_iteration(*agent, *env, buf, st);
    auto& t = dynamic_cast<TecrlAgent&>(*agent);
    std::vector<double> out = flat(t.critics().reward.a.store());
    for (const auto* s : {&t.critics().reward.b.store(), &t.critics().q_e.store(),
                          &t.critics().q_e_target.store(), &t.critics().reward.target_a.store()}) {
      const auto f = flat(*s);
      out.insert(out.end(), f.begin(), f.end());
    }
    return std::pair{out, agent->alpha()};
  };
  const auto [with, alpha_with] = run(true);
  const auto [without, alpha_without] = run(false);
  EXPECT_NE(alpha_with, alpha_without);
  EXPECT_EQ(with, without);
}

TEST(Decoupling, AlphaScalingOnlyMovesSoftCritics) {
  auto critic_after = [](Algo algo, double alpha) {
    AgentConfig cfg = small_config(algo);
    auto env = make_env(cfg.env);
    auto agent = make_agent(cfg, env->spec());
    agent->temperature().set_alpha(alpha);
    Rng rng(5);
    ReplayBuffer buf(100, env->spec().state_dim, env->spec().action_dim);
    env->reset(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    while (buf.size() < 50) {
      if (env->episode_over()) env->reset(rng());
      buf.push(env->step(std::vector<double>{u(rng), u(rng)}));
    }
    agent->update(buf.sample(cfg.batch, rng), 1);  // odd iteration: critics only
    if (auto* t = dynamic_cast<TecrlAgent*>(agent.get())) {
      auto v = flat(t->critics().reward.a.store());
      const auto e = flat(t->critics().q_e.store());
      v.insert(v.end(), e.begin(), e.end());
      return v;
    }
    return flat(dynamic_cast<MaxEntAgent&>(*agent).critics().a.store());
  };
  EXPECT_EQ(critic_after(Algo::kTecrl, 0.2), critic_after(Algo::kTecrl, 2.0));
  EXPECT_NE(critic_after(Algo::kMaxEnt, 0.2), critic_after(Algo::kMaxEnt, 2.0));
}

TEST(Agent, MaxEntDefaultsH0ToMinusActionDim) {
  const AgentConfig cfg = small_config(Algo::kMaxEnt);
  auto env = make_env(cfg.env);
  MaxEntAgent a(cfg, env->spec());
  EXPECT_EQ(a.h0(), -2.0);
  TecrlAgent t(small_config(Algo::kTecrl), env->spec());
  EXPECT_NEAR(t.budget().budget(), -200.0, 1e-9);
}

TEST(Agent, CheckpointRoundTrip) {
  for (Algo algo : {Algo::kTecrl, Algo::kMaxEnt}) {
    AgentConfig cfg = small_config(algo);
    cfg.warm = 8;
    auto env = make_env(cfg.env);
    auto agent = make_agent(cfg, env->spec());
    ReplayBuffer buf(cfg.buffer, env->spec().state_dim, env->spec().action_dim);
    TrainState st(cfg.seed);
    for (int k = 0; k < 20; ++k) train_iteration(*agent, *env, buf, st);
    std::vector<Record> recs;
    agent->save(recs);
    AgentConfig other = cfg;
    other.seed = 99;
    auto copy = make_agent(other, env->spec());
    copy->load(recs);
    std::vector<Record> again;
    copy->save(again);
    ASSERT_EQ(recs.size(), again.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
      EXPECT_EQ(recs[i].name, again[i].name);
      EXPECT_EQ(recs[i].values, again[i].values) << recs[i].name;
    }
    EXPECT_EQ(copy->alpha(), agent->alpha());
  }
}
