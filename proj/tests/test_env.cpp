#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "tecrl/common.hpp"
#include "tecrl/env.hpp"
#include "tecrl/tabular.hpp"

using namespace tecrl;

TEST(Env, ChainResetsToStateZero) {
  auto env = make_env("chain");
  auto& chain = dynamic_cast<TabularEnv&>(*env);
  for (std::uint64_t seed : {0u, 1u, 99u}) {
    env->reset(seed);
    EXPECT_EQ(chain.state_index(), 0u);
  }
}

TEST(Env, PendulumResetIsDeterministic) {
  auto a = make_env("pendulum");
  const auto s1 = a->reset(7);
  const auto s2 = a->reset(7);
  ASSERT_EQ(s1.size(), 3u);
  EXPECT_EQ(s1, s2);
}

TEST(Env, PointMassSeedsDiffer) {
  auto env = make_env("point-mass");
  EXPECT_NE(env->reset(7), env->reset(8));
}

TEST(Env, PointMassOriginIsFixedPoint) {
  PointMass env;
  env.reset(0);
  const double zero[2] = {0.0, 0.0};
  env.set_state(zero, zero);
  const Transition t = env.step(std::vector<double>{0.0, 0.0});
  EXPECT_EQ(t.next_state, (std::vector<double>{0.0, 0.0, 0.0, 0.0}));
  EXPECT_EQ(t.reward, 0.0);
}

TEST(Env, PointMassRewardIsPostStepDistanceAndEffort) {
  PointMass env;
  env.reset(0);
  const double pos[2] = {0.3, -0.4}, vel[2] = {0.0, 0.0};
  env.set_state(pos, vel);
  const Transition t = env.step(std::vector<double>{1.0, 0.0});
  // v = 0.1, p = 0.3 + 0.01
  EXPECT_DOUBLE_EQ(t.next_state[0], 0.31);
  EXPECT_DOUBLE_EQ(t.reward, -std::hypot(0.31, -0.4) - 0.01);
}

TEST(Env, ChainRightMovesRight) {
  auto env = make_env("chain");
  auto& chain = dynamic_cast<TabularEnv&>(*env);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    env->reset(seed);
    const Transition t = env->step(std::vector<double>{chain.action_value(1)});
    EXPECT_EQ(chain.state_index(), 1u);
    EXPECT_EQ(t.next_state[1], 1.0);
    EXPECT_FALSE(t.done);
  }
}

TEST(Env, ChainDistractorAndGoal) {
  auto env = make_env("chain", {{"n_states", 4}});
  auto& chain = dynamic_cast<TabularEnv&>(*env);
  env->reset(0);
  const Transition left = env->step(std::vector<double>{chain.action_value(0)});
  EXPECT_DOUBLE_EQ(left.reward, 0.001);
  EXPECT_EQ(chain.state_index(), 0u);
  Transition t;
  for (int k = 0; k < 3; ++k) t = env->step(std::vector<double>{chain.action_value(1)});
  EXPECT_DOUBLE_EQ(t.reward, 1.0);
  EXPECT_TRUE(t.done);
  EXPECT_FALSE(t.truncated);
  EXPECT_THROW(env->step(std::vector<double>{0.0}), ContractError);
}

// Camping on the distractor forever must be worth less than walking to the
// goal, otherwise the chain has nothing to explore for.
TEST(Env, ChainGoalBeatsDistractor) {
  for (const std::size_t n : {4u, 10u, 50u}) {
    const MdpSpec m = chain_mdp(n, 0.99);
    const auto right = policy_return(m, TabularPolicy::deterministic(std::vector<std::size_t>(n, 1), 2));
    const auto left = policy_return(m, TabularPolicy::deterministic(std::vector<std::size_t>(n, 0), 2));
    EXPECT_NEAR(left[0], 0.001 / 0.01, 1e-9) << n;
    EXPECT_NEAR(right[0], std::pow(0.99, static_cast<double>(n - 2)), 1e-9) << n;
    EXPECT_GT(right[0], left[0]) << n;
  }
}

namespace {

/// Times between successive upward zero crossings of x(t), linearly interpolated.
double mean_period(const std::vector<double>& x, double dt) {
  std::vector<double> crossings;
  for (std::size_t i = 1; i < x.size(); ++i)
    if (x[i - 1] < 0.0 && x[i] >= 0.0) crossings.push_back((i - 1 + x[i - 1] / (x[i - 1] - x[i])) * dt);
  EXPECT_GE(crossings.size(), 3u);
  return (crossings.back() - crossings.front()) / static_cast<double>(crossings.size() - 1);
}

}  // namespace

TEST(Env, PendulumSmallOscillationPeriodMatchesReferenceOde) {
  const double amp = 0.1;
  // Reference: RK4 on theta'' = (3 g / 2 l) sin(theta) with dt = 1e-4.
  const double k = 3.0 * Pendulum::kGravity / (2.0 * Pendulum::kLength);
  const double h = 1e-4;
  double th = std::numbers::pi + amp, om = 0.0;
  std::vector<double> ref;
  for (int i = 0; i < 100000; ++i) {  // 10 s
    auto f = [&](double t, double w) { return std::pair{w, k * std::sin(t)}; };
    auto [a1, b1] = f(th, om);
    auto [a2, b2] = f(th + 0.5 * h * a1, om + 0.5 * h * b1);
    auto [a3, b3] = f(th + 0.5 * h * a2, om + 0.5 * h * b2);
    auto [a4, b4] = f(th + h * a3, om + h * b3);
    th += h / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4);
    om += h / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4);
    ref.push_back(th - std::numbers::pi);
  }
  const double t_ref = mean_period(ref, h);
  EXPECT_NEAR(t_ref, 2.0 * std::numbers::pi / std::sqrt(15.0), 0.05 * t_ref);

  Pendulum env(1000);
  env.reset(0);
  env.set_state(std::numbers::pi + amp, 0.0);
  std::vector<double> sim;
  for (int i = 0; i < 200; ++i) {
    env.step(std::vector<double>{0.0});
    sim.push_back(env.theta() - std::numbers::pi);
  }
  EXPECT_NEAR(mean_period(sim, Pendulum::kDt), t_ref, 0.05 * t_ref);
}

TEST(Env, PendulumRewardUsesPreStepState) {
  Pendulum env;
  env.reset(0);
  env.set_state(0.5, -1.0);
  const Transition t = env.step(std::vector<double>{1.5});
  EXPECT_DOUBLE_EQ(t.reward, -(0.25 + 0.1 * 1.0 + 0.001 * 2.25));
  EXPECT_DOUBLE_EQ(t.state[0], std::cos(0.5));
}

TEST(Env, MakeEnvSpecs) {
  const auto chain = make_env("chain");
  EXPECT_TRUE(chain->spec().discrete);
  EXPECT_EQ(chain->spec().action_dim, 1u);

  const auto pend = make_env("pendulum");
  EXPECT_EQ(pend->spec().state_dim, 3u);
  EXPECT_EQ(pend->spec().action_dim, 1u);
  EXPECT_EQ(pend->spec().action_low[0], -2.0);
  EXPECT_EQ(pend->spec().action_high[0], 2.0);
  EXPECT_EQ(pend->spec().max_episode_steps, 200u);
  EXPECT_FALSE(pend->spec().discrete);
}

TEST(Env, RandomTabularRowsSumToOne) {
  const auto env = make_env("random-tabular", {{"n_states", 5}, {"n_actions", 3}, {"seed", 1}});
  const MdpSpec* m = env->mdp();
  ASSERT_NE(m, nullptr);
  EXPECT_EQ(m->n_states, 5u);
  EXPECT_EQ(m->n_actions, 3u);
  for (std::size_t s = 0; s < 5; ++s)
    for (std::size_t a = 0; a < 3; ++a) {
      double sum = 0.0;
      for (std::size_t s2 = 0; s2 < 5; ++s2) sum += m->p(s, a, s2);
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(Env, RandomMdpRowStochasticAcrossSeeds) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Rng rng(seed);
    const MdpSpec m = random_mdp(1 + seed % 9, 1 + seed % 4, 0.9, rng);
    EXPECT_NO_THROW(m.validate()) << "seed " << seed;
  }
}

TEST(Env, UnknownNameListsValidNames) {
  try {
    make_env("cartpole");
    FAIL();
  } catch (const ContractError& e) {
    const std::string msg = e.what();
    for (const auto& n : env_names()) EXPECT_NE(msg.find(n), std::string::npos) << msg;
  }
}

TEST(Env, UnknownOverrideRejected) {
  EXPECT_THROW(make_env("pendulum", {{"n_states", 3}}), ContractError);
}

TEST(Env, TransitionsReproducibleForFixedActions) {
  for (const auto& name : env_names()) {
    auto a = make_env(name);
    auto b = make_env(name);
    a->reset(123);
    b->reset(123);
    Rng rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 40 && !a->episode_over(); ++i) {
      std::vector<double> act(a->spec().action_dim);
      for (auto& x : act) x = u(rng);
      const Transition ta = a->step(act), tb = b->step(act);
      EXPECT_EQ(ta.next_state, tb.next_state) << name;
      EXPECT_EQ(ta.reward, tb.reward) << name;
      EXPECT_EQ(ta.done, tb.done) << name;
    }
  }
}

TEST(Env, TruncationIsNotDone) {
  PointMass env(5);
  env.reset(0);
  Transition t;
  for (int i = 0; i < 5; ++i) {
    t = env.step(std::vector<double>{0.0, 0.0});
    EXPECT_FALSE(t.done && t.truncated);
  }
  EXPECT_TRUE(t.truncated);
  EXPECT_FALSE(t.done);
  EXPECT_TRUE(env.episode_over());
  EXPECT_THROW(env.step(std::vector<double>{0.0, 0.0}), ContractError);
}

TEST(Env, OutOfBoundsActionsClampedAndCounted) {
  Pendulum a, b;
  a.reset(3);
  b.reset(3);
  const Transition ta = a.step(std::vector<double>{5.0});
  const Transition tb = b.step(std::vector<double>{2.0});
  EXPECT_EQ(ta.next_state, tb.next_state);
  EXPECT_EQ(ta.reward, tb.reward);
  EXPECT_EQ(ta.action[0], 2.0);
  EXPECT_EQ(a.clamp_count(), 1u);
  EXPECT_EQ(b.clamp_count(), 0u);
}

TEST(Env, MdpValidateRejectsNonStochasticRows) {
  MdpSpec m = chain_mdp(3, 0.9);
  m.p(0, 0, 0) += 1e-9;
  EXPECT_THROW(m.validate(), ContractError);
  MdpSpec g = chain_mdp(3, 0.9);
  g.gamma = 1.0;
  EXPECT_THROW(g.validate(), ContractError);
}
