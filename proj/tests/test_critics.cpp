#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "tecrl/critics.hpp"
#include "tecrl/tabular.hpp"
#include "test_util.hpp"

using namespace tecrl;
using tecrl::testing::random_matrix;

namespace {

EnvSpec small_env() {
  EnvSpec e;
  e.state_dim = 2;
  e.action_dim = 1;
  e.action_low = {-1.0};
  e.action_high = {1.0};
  e.max_episode_steps = 10;
  return e;
}

CriticPair make_pair(std::uint64_t seed) {
  Rng rng(seed);
  return CriticPair::make(small_env(), {.hidden = {8, 8}}, rng);
}

/// Makes the network output `c` everywhere.
void make_constant(Mlp& net, double c) {
  auto& ps = net.store().params();
  auto& w = ps[ps.size() - 2].value;
  auto& b = ps.back().value;
  std::fill(w.begin(), w.end(), 0.0);
  std::fill(b.begin(), b.end(), c);
  net.store().touch();
}

Batch random_batch(std::size_t n, Rng& rng) {
  Batch b;
  b.states = random_matrix(n, 2, rng);
  b.actions = random_matrix(n, 1, rng);
  b.next_states = random_matrix(n, 2, rng);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    b.rewards.push_back(u(rng));
    b.done.push_back(i % 5 == 0);
  }
  return b;
}

ActionSample next_sample(std::size_t n, Rng& rng) {
  ActionSample s;
  s.action = random_matrix(n, 1, rng);
  std::uniform_real_distribution<double> u(-2.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    s.log_prob.push_back(u(rng));
    s.pre_squash_entropy.push_back(kHalfLog2PiE);
  }
  return s;
}

}  // namespace

TEST(Critics, RowTargetsArithmetic) {
  EXPECT_NEAR(reward_target(1.0, false, 10.0, 0.99), 10.9, 1e-12);
  EXPECT_EQ(reward_target(1.0, true, 10.0, 0.99), 1.0);
  EXPECT_NEAR(entropy_target(1.4189, false, 0.0, 0.99), 1.4047, 1e-4);
  EXPECT_EQ(entropy_target(1.4189, true, 7.0, 0.99), 0.0);
}

TEST(Critics, BatchTargetsMatchRowFormulas) {
  CriticPair c = make_pair(1);
  Rng rng(2);
  const Batch b = random_batch(16, rng);
  const ActionSample next = next_sample(16, rng);
  const auto y_r = pev_target(b, next, c, 0.99, 0.1);
  const auto y_e = pis_target(b, next, c, 0.99);
  const auto qmin = c.reward.min_target(b.next_states, next.action);
  Matrix in(16, 3);
  for (std::size_t i = 0; i < 16; ++i) {
    in(i, 0) = b.next_states(i, 0);
    in(i, 1) = b.next_states(i, 1);
    in(i, 2) = next.action(i, 0);
  }
  const Matrix qe = c.q_e_target.predict(in);
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_DOUBLE_EQ(y_r[i], reward_target(0.1 * b.rewards[i], b.done[i], qmin[i], 0.99));
    EXPECT_DOUBLE_EQ(y_e[i], entropy_target(-next.log_prob[i], b.done[i], qe(i, 0), 0.99));
  }
  const auto y_closed = pis_target(b, next, c, 0.99, EntropyEstimator::kGaussianClosedForm);
  for (std::size_t i = 0; i < 16; ++i)
    EXPECT_DOUBLE_EQ(y_closed[i], entropy_target(kHalfLog2PiE, b.done[i], qe(i, 0), 0.99));
}

TEST(Critics, TwinMinNeverExceedsEitherTwin) {
  CriticPair c = make_pair(3);
  Rng rng(4);
  const Batch b = random_batch(64, rng);
  const ActionSample next = next_sample(64, rng);
  const auto y = pev_target(b, next, c, 0.9, 1.0);
  auto single = [&](const Mlp& net) {
    Matrix in(64, 3);
    for (std::size_t i = 0; i < 64; ++i) {
      in(i, 0) = b.next_states(i, 0);
      in(i, 1) = b.next_states(i, 1);
      in(i, 2) = next.action(i, 0);
    }
    const Matrix q = net.predict(in);
    std::vector<double> out(64);
    for (std::size_t i = 0; i < 64; ++i) out[i] = reward_target(b.rewards[i], b.done[i], q(i, 0), 0.9);
    return out;
  };
  const auto ya = single(c.reward.target_a), yb = single(c.reward.target_b);
  for (std::size_t i = 0; i < 64; ++i) {
    EXPECT_LE(y[i], ya[i]);
    EXPECT_LE(y[i], yb[i]);
  }
}

TEST(Critics, TargetsCopyOnlineAtConstruction) {
  CriticPair c = make_pair(5);
  EXPECT_EQ(c.reward.a.store().at("l0.w").value, c.reward.target_a.store().at("l0.w").value);
  EXPECT_EQ(c.q_e.store().at("l2.b").value, c.q_e_target.store().at("l2.b").value);
  EXPECT_NE(c.reward.a.store().at("l0.w").value, c.reward.b.store().at("l0.w").value);
}

TEST(Critics, PevLossQuadraticExample) {
  CriticPair c = make_pair(6);
  make_constant(c.reward.a, 0.0);
  make_constant(c.reward.b, 0.0);
  Rng rng(7);
  Batch b = random_batch(1, rng);
  c.reward.zero_grad();
  const std::vector<double> y{2.0};
  // Each twin contributes (0 - 2)^2 = 4.
  EXPECT_DOUBLE_EQ(pev_loss(c, b, y), 8.0);
  EXPECT_DOUBLE_EQ(c.reward.a.store().at("l2.b").grad[0], -4.0);
  EXPECT_DOUBLE_EQ(c.reward.b.store().at("l2.b").grad[0], -4.0);
  for (double g : c.reward.target_a.store().at("l2.b").grad) EXPECT_EQ(g, 0.0);

  make_constant(c.reward.a, 2.0);
  make_constant(c.reward.b, 2.0);
  EXPECT_DOUBLE_EQ(pev_loss(c, b, y), 0.0);
}

TEST(Critics, PisLossQuadraticExample) {
  CriticPair c = make_pair(8);
  make_constant(c.q_e, 1.0);
  Rng rng(9);
  const Batch b = random_batch(1, rng);
  c.q_e.store().zero_grad();
  const std::vector<double> y{0.0};
  EXPECT_DOUBLE_EQ(pis_loss(c, b, y), 1.0);
  EXPECT_DOUBLE_EQ(c.q_e.store().at("l2.b").grad[0], 2.0);
  const std::vector<double> same{1.0};
  EXPECT_DOUBLE_EQ(pis_loss(c, b, same), 0.0);
}

TEST(Critics, LossesMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CriticPair c = make_pair(10 + seed);
    Rng rng(seed);
    const Batch b = random_batch(6, rng);
    std::vector<double> y(6);
    for (auto& v : y) v = std::uniform_real_distribution<double>(-2, 2)(rng);

    c.reward.zero_grad();
    pev_loss(c, b, y);
    auto pev = [&] {
      ParamStore keep_a = c.reward.a.store(), keep_b = c.reward.b.store();
      const double l = pev_loss(c, b, y);
      c.reward.a.store() = keep_a;
      c.reward.b.store() = keep_b;
      return l;
    };
    EXPECT_LE(tecrl::testing::worst_param_grad_error(c.reward.a.store(), pev), 1e-4);
    EXPECT_LE(tecrl::testing::worst_param_grad_error(c.reward.b.store(), pev), 1e-4);

    c.q_e.store().zero_grad();
    pis_loss(c, b, y);
    auto pis = [&] {
      ParamStore keep = c.q_e.store();
      const double l = pis_loss(c, b, y);
      c.q_e.store() = keep;
      return l;
    };
    EXPECT_LE(tecrl::testing::worst_param_grad_error(c.q_e.store(), pis), 1e-4);
  }
}

TEST(Critics, PevLossDecreasesUnderAdamOnFrozenBatch) {
  CriticPair c = make_pair(11);
  Rng rng(12);
  const Batch b = random_batch(32, rng);
  std::vector<double> y(32);
  for (auto& v : y) v = std::uniform_real_distribution<double>(-1, 1)(rng);
  double prev = INFINITY;
  for (int k = 0; k < 100; ++k) {
    c.reward.zero_grad();
    const double l = pev_loss(c, b, y);
    EXPECT_LE(l, prev) << "step " << k;
    prev = l;
    c.reward.adam({.lr = 1e-3});
  }
}

TEST(Critics, PisLossDecreasesUnderAdamOnFrozenBatch) {
  CriticPair c = make_pair(13);
  Rng rng(14);
  const Batch b = random_batch(32, rng);
  std::vector<double> y(32);
  for (auto& v : y) v = std::uniform_real_distribution<double>(-1, 1)(rng);
  double prev = INFINITY;
  for (int k = 0; k < 100; ++k) {
    c.q_e.store().zero_grad();
    const double l = pis_loss(c, b, y);
    EXPECT_LE(l, prev) << "step " << k;
    prev = l;
    adam_step(c.q_e.store(), {.lr = 1e-3});
  }
}

TEST(Critics, CumulativeEntropyAdditivity) {
  CriticPair c = make_pair(15);
  make_constant(c.q_e, 3.25);
  Rng rng(16);
  const Matrix states = random_matrix(10, 2, rng);
  const ActionSample s = next_sample(10, rng);
  const auto h = cumulative_entropy_estimate(c, states, s);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(h[i], -s.log_prob[i] + 3.25);
}

TEST(Critics, CumulativeEntropyOfUnitGaussian) {
  CriticPair c = make_pair(17);
  make_constant(c.q_e, 0.0);
  EnvSpec env = small_env();
  PolicyConfig pc;
  pc.hidden = {4};
  pc.squash = false;
  Rng rng(18);
  GaussianPolicy pi(env, pc, rng);
  auto& ps = pi.trunk().store();
  std::fill(ps.at("l1.w").value.begin(), ps.at("l1.w").value.end(), 0.0);
  std::fill(ps.at("l1.b").value.begin(), ps.at("l1.b").value.end(), 0.0);
  ps.touch();
  const std::size_t n = 200000;
  const Matrix states(n, 2);
  const ActionSample s = pi.sample(states, rng);
  const auto h = cumulative_entropy_estimate(c, states, s);
  double m = 0.0, sq = 0.0;
  for (double v : h) {
    m += v;
    sq += v * v;
  }
  m /= n;
  const double se = std::sqrt((sq / n - m * m) / n);
  EXPECT_NEAR(m, 1.4189, 3 * se + 1e-4);
}

TEST(Critics, NonfiniteTargetsRejected) {
  CriticPair c = make_pair(19);
  Rng rng(20);
  Batch b = random_batch(4, rng);
  b.rewards[2] = std::nan("");
  b.done[2] = 0;
  const ActionSample next = next_sample(4, rng);
  EXPECT_THROW(pev_target(b, next, c, 0.99, 1.0), NumericError);
  ActionSample bad = next_sample(4, rng);
  bad.log_prob[1] = INFINITY;
  b.done[1] = 0;
  EXPECT_THROW(pis_target(b, bad, c, 0.99), NumericError);
}

TEST(Critics, SoftUpdateMovesTargetsTowardOnline) {
  CriticPair c = make_pair(21);
  make_constant(c.q_e, 1.0);
  make_constant(c.q_e_target, 0.0);
  c.soft_update(0.005);
  EXPECT_DOUBLE_EQ(c.q_e_target.store().at("l2.b").value[0], 0.005);
}

namespace {

/// Expected-value iteration of the row targets on a tabular problem, with
/// Q' averaged over pi at s' (twin critics identical, so min = the table).
Eigen::MatrixXd iterate_tabular(const MdpSpec& m, const TabularPolicy& pi, bool entropy, int iters) {
  const auto S = m.n_states, A = m.n_actions;
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(S, A);
  const auto H = pi.entropies();
  for (int k = 0; k < iters; ++k) {
    Eigen::MatrixXd next(S, A);
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t a = 0; a < A; ++a) {
        double y = 0.0;
        for (std::size_t s2 = 0; s2 < S; ++s2) {
          double v = 0.0;
          for (std::size_t a2 = 0; a2 < A; ++a2) v += pi(s2, a2) * q(s2, a2);
          y += m.p(s, a, s2) * (entropy ? entropy_target(H[s2], false, v, m.gamma)
                                        : reward_target(m.r(s, a), false, v, m.gamma));
        }
        next(s, a) = y;
      }
    q = next;
  }
  return q;
}

}  // namespace

TEST(Critics, TabularPevFixedPointIsDiscountedReturn) {
  Rng rng(22);
  const MdpSpec m = random_mdp(3, 2, 0.9, rng);
  const TabularPolicy pi = TabularPolicy::random(3, 2, rng);
  const Eigen::MatrixXd q = iterate_tabular(m, pi, false, 400);
  // Oracle: (I - gamma P Pi) q = r over state-action pairs.
  const int n = 6;
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd r(n);
  for (int sa = 0; sa < n; ++sa) {
    r(sa) = m.R[sa];
    for (int s2 = 0; s2 < 3; ++s2)
      for (int a2 = 0; a2 < 2; ++a2) M(sa, s2 * 2 + a2) -= m.gamma * m.P[sa * 3 + s2] * pi(s2, a2);
  }
  const Eigen::VectorXd exact = M.partialPivLu().solve(r);
  for (int sa = 0; sa < n; ++sa) EXPECT_NEAR(q(sa / 2, sa % 2), exact(sa), 1e-6);
}

TEST(Critics, TabularPisFixedPoints) {
  // One state, uniform over two actions: h = log 2 per step, so the fixed
  // point is gamma h / (1 - gamma); per unit of entropy that is 9.
  MdpSpec one;
  one.n_states = 1;
  one.n_actions = 2;
  one.P = {1.0, 1.0};
  one.R = {0.0, 0.0};
  one.gamma = 0.9;
  const auto uni = TabularPolicy::uniform(1, 2);
  const Eigen::MatrixXd q1 = iterate_tabular(one, uni, true, 500);
  EXPECT_NEAR(q1(0, 0), 0.9 * std::log(2.0) / 0.1, 1e-9);

  EXPECT_NEAR(q1(0, 0) / std::log(2.0), 9.0, 1e-9);

  Rng rng(23);
  const MdpSpec m = random_mdp(3, 3, 0.9, rng);
  const TabularPolicy pi = TabularPolicy::random(3, 3, rng);
  const Eigen::MatrixXd q = iterate_tabular(m, pi, true, 400);
  const QTable exact = exact_qe(m, pi);
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t a = 0; a < 3; ++a) EXPECT_NEAR(q(s, a), exact(s, a), 1e-4);

  // Deterministic policy: every target is zero.
  const auto det = TabularPolicy::deterministic({0, 2, 1}, 3);
  EXPECT_EQ(iterate_tabular(m, det, true, 5).cwiseAbs().maxCoeff(), 0.0);
}
