#include "tecrl/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "tecrl/common.hpp"

namespace tecrl {

void EnvSpec::validate() const {
  if (state_dim == 0 || action_dim == 0) throw ContractError("EnvSpec: dimensions must be positive");
  if (action_low.size() != action_dim || action_high.size() != action_dim)
    throw ContractError("EnvSpec: action bounds do not match action_dim");
  for (std::size_t i = 0; i < action_dim; ++i)
    if (!(action_low[i] < action_high[i])) throw ContractError("EnvSpec: action_low must be < action_high");
  if (max_episode_steps < 1) throw ContractError("EnvSpec: max_episode_steps must be >= 1");
}

std::vector<double> MdpSpec::start_distribution() const {
  if (!start.empty()) return start;
  std::vector<double> d(n_states, 0.0);
  std::size_t live = 0;
  for (std::size_t s = 0; s < n_states; ++s) live += terminal(s) ? 0 : 1;
  if (live == 0) throw ContractError("MdpSpec: every state is terminal");
  for (std::size_t s = 0; s < n_states; ++s)
    if (!terminal(s)) d[s] = 1.0 / static_cast<double>(live);
  return d;
}

void MdpSpec::validate() const {
  if (n_states == 0 || n_actions == 0) throw ContractError("MdpSpec: empty state or action set");
  if (P.size() != n_states * n_actions * n_states) throw ContractError("MdpSpec: P has wrong size");
  if (R.size() != n_states * n_actions) throw ContractError("MdpSpec: R has wrong size");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ContractError("MdpSpec: gamma must lie in [0, 1)");
  if (!terminal_mask.empty() && terminal_mask.size() != n_states)
    throw ContractError("MdpSpec: terminal_mask has wrong size");
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      double sum = 0.0;
      for (std::size_t s2 = 0; s2 < n_states; ++s2) {
        const double q = p(s, a, s2);
        if (!(q >= 0.0)) throw ContractError("MdpSpec: negative transition probability");
        sum += q;
      }
      if (std::abs(sum - 1.0) > 1e-12) {
        std::ostringstream os;
        os << "MdpSpec: P[" << s << "][" << a << "] sums to " << sum;
        throw ContractError(os.str());
      }
      if (!std::isfinite(r(s, a))) throw ContractError("MdpSpec: non-finite reward");
    }
  }
}

MdpSpec random_mdp(std::size_t n_states, std::size_t n_actions, double gamma, Rng& rng) {
  MdpSpec m;
  m.n_states = n_states;
  m.n_actions = n_actions;
  m.gamma = gamma;
  m.P.assign(n_states * n_actions * n_states, 0.0);
  m.R.assign(n_states * n_actions, 0.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      double sum = 0.0;
      for (std::size_t s2 = 0; s2 < n_states; ++s2) {
        // Cubing sparsifies rows a little so transitions are not all near-uniform.
        const double x = u(rng);
        m.p(s, a, s2) = x * x * x;
        sum += m.p(s, a, s2);
      }
      for (std::size_t s2 = 0; s2 < n_states; ++s2) m.p(s, a, s2) /= sum;
      m.r(s, a) = u(rng);
    }
  }
  return m;
}

MdpSpec chain_mdp(std::size_t n_states, double gamma) {
  if (n_states < 2) throw ContractError("chain: n_states must be >= 2");
  MdpSpec m;
  m.n_states = n_states;
  m.n_actions = 2;
  m.gamma = gamma;
  m.P.assign(n_states * 2 * n_states, 0.0);
  m.R.assign(n_states * 2, 0.0);
  m.terminal_mask.assign(n_states, false);
  const std::size_t goal = n_states - 1;
  m.terminal_mask[goal] = true;
  for (std::size_t s = 0; s < n_states; ++s) {
    if (s == goal) {
      m.p(s, 0, s) = 1.0;
      m.p(s, 1, s) = 1.0;
      continue;
    }
    m.p(s, 0, s == 0 ? 0 : s - 1) = 1.0;
    m.p(s, 1, s + 1) = 1.0;
    if (s == 0) m.r(s, 0) = 0.001;
    if (s + 1 == goal) m.r(s, 1) = 1.0;
  }
  m.start.assign(n_states, 0.0);
  m.start[0] = 1.0;
  return m;
}

std::vector<double> Env::reset(std::uint64_t seed) {
  rng_.seed(seed);
  state_ = do_reset(rng_);
  steps_ = 0;
  over_ = false;
  return state_;
}

Transition Env::step(std::span<const double> action) {
  if (over_) throw ContractError("Env::step called on a finished episode; call reset first");
  if (action.size() != spec_.action_dim) throw ContractError("Env::step: action has wrong dimension");
  std::vector<double> a(action.begin(), action.end());
  bool clamped = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i])) throw ContractError("Env::step: non-finite action");
    const double c = std::clamp(a[i], spec_.action_low[i], spec_.action_high[i]);
    clamped |= (c != a[i]);
    a[i] = c;
  }
  if (clamped) ++clamp_count_;

  StepResult res = do_step(a);
  if (!std::isfinite(res.reward)) throw NumericError("Env::step: non-finite reward");
  ++steps_;

  Transition t;
  t.state = state_;
  t.action = std::move(a);
  t.reward = res.reward;
  t.next_state = res.next_state;
  t.done = res.terminal;
  t.truncated = !res.terminal && steps_ >= spec_.max_episode_steps;
  over_ = t.done || t.truncated;
  state_ = std::move(res.next_state);
  return t;
}

namespace {

EnvSpec box_spec(std::size_t state_dim, std::size_t action_dim, double bound, std::size_t steps, bool discrete) {
  EnvSpec s;
  s.state_dim = state_dim;
  s.action_dim = action_dim;
  s.action_low.assign(action_dim, -bound);
  s.action_high.assign(action_dim, bound);
  s.max_episode_steps = steps;
  s.discrete = discrete;
  return s;
}

double angle_normalize(double x) {
  constexpr double pi = std::numbers::pi;
  return std::fmod(std::fmod(x + pi, 2 * pi) + 2 * pi, 2 * pi) - pi;
}

}  // namespace

Pendulum::Pendulum(std::size_t max_steps) : Env(box_spec(3, 1, kMaxTorque, max_steps, false)) {}

std::vector<double> Pendulum::observe() const { return {std::cos(theta_), std::sin(theta_), theta_dot_}; }

void Pendulum::set_state(double theta, double theta_dot) {
  theta_ = theta;
  theta_dot_ = theta_dot;
  force_state(observe());
}

std::vector<double> Pendulum::do_reset(Rng& rng) {
  std::uniform_real_distribution<double> th(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> thd(-1.0, 1.0);
  theta_ = th(rng);
  theta_dot_ = thd(rng);
  return observe();
}

Env::StepResult Pendulum::do_step(std::span<const double> action) {
  const double u = action[0];
  const double th = angle_normalize(theta_);
  const double cost = th * th + 0.1 * theta_dot_ * theta_dot_ + 0.001 * u * u;
  // Semi-implicit Euler: velocity first, then position with the new velocity.
  double thd = theta_dot_ +
               (3.0 * kGravity / (2.0 * kLength) * std::sin(theta_) + 3.0 / (kMass * kLength * kLength) * u) * kDt;
  thd = std::clamp(thd, -kMaxSpeed, kMaxSpeed);
  theta_ += thd * kDt;
  theta_dot_ = thd;
  return {observe(), -cost, false};
}

PointMass::PointMass(std::size_t max_steps) : Env(box_spec(4, 2, 1.0, max_steps, false)) {}

void PointMass::set_state(std::span<const double> pos, std::span<const double> vel) {
  if (pos.size() != 2 || vel.size() != 2) throw ContractError("PointMass::set_state expects 2-D vectors");
  force_state({pos[0], pos[1], vel[0], vel[1]});
}

std::vector<double> PointMass::do_reset(Rng& rng) {
  std::uniform_real_distribution<double> p(-kInitRange, kInitRange);
  const double x = p(rng);
  const double y = p(rng);
  return {x, y, 0.0, 0.0};
}

Env::StepResult PointMass::do_step(std::span<const double> action) {
  std::vector<double> s = state();
  s[2] += action[0] * kDt;
  s[3] += action[1] * kDt;
  s[0] += s[2] * kDt;
  s[1] += s[3] * kDt;
  const double dist = std::hypot(s[0], s[1]);
  const double effort = action[0] * action[0] + action[1] * action[1];
  return {std::move(s), -dist - 0.01 * effort, false};
}

TabularEnv::TabularEnv(MdpSpec mdp, std::size_t max_steps, bool fixed_start)
    : Env(box_spec(mdp.n_states, 1, 1.0, max_steps, true)), mdp_(std::move(mdp)), fixed_start_(fixed_start) {
  mdp_.validate();
}

std::vector<double> TabularEnv::one_hot(std::size_t s) const {
  std::vector<double> v(mdp_.n_states, 0.0);
  v[s] = 1.0;
  return v;
}

std::size_t TabularEnv::action_index(std::span<const double> action) const {
  const double x = (action[0] + 1.0) / 2.0 * static_cast<double>(mdp_.n_actions);
  const auto idx = static_cast<long>(std::floor(x));
  return static_cast<std::size_t>(std::clamp<long>(idx, 0, static_cast<long>(mdp_.n_actions) - 1));
}

double TabularEnv::action_value(std::size_t a) const {
  return -1.0 + (2.0 * static_cast<double>(a) + 1.0) / static_cast<double>(mdp_.n_actions);
}

std::vector<double> TabularEnv::do_reset(Rng& rng) {
  if (fixed_start_) {
    index_ = 0;
  } else {
    const std::vector<double> d = mdp_.start_distribution();
    std::discrete_distribution<std::size_t> pick(d.begin(), d.end());
    index_ = pick(rng);
  }
  return one_hot(index_);
}

Env::StepResult TabularEnv::do_step(std::span<const double> action) {
  const std::size_t a = action_index(action);
  const double reward = mdp_.r(index_, a);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng_);
  double acc = 0.0;
  std::size_t next = mdp_.n_states - 1;
  for (std::size_t s2 = 0; s2 < mdp_.n_states; ++s2) {
    acc += mdp_.p(index_, a, s2);
    if (x < acc) {
      next = s2;
      break;
    }
  }
  index_ = next;
  return {one_hot(next), reward, mdp_.terminal(next)};
}

const std::vector<std::string>& env_names() {
  static const std::vector<std::string> names = {"pendulum", "point-mass", "chain", "random-tabular"};
  return names;
}

namespace {

void check_keys(const std::string& env, const EnvOverrides& o, const std::vector<std::string>& allowed) {
  for (const auto& [k, v] : o) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      std::ostringstream os;
      os << "unknown override '" << k << "' for env " << env << "; valid:";
      for (const auto& a : allowed) os << ' ' << a;
      throw ContractError(os.str());
    }
  }
}

double get(const EnvOverrides& o, const std::string& k, double def) {
  auto it = o.find(k);
  return it == o.end() ? def : it->second;
}

std::size_t get_count(const EnvOverrides& o, const std::string& k, std::size_t def) {
  const double v = get(o, k, static_cast<double>(def));
  if (!(v >= 1.0) || v != std::floor(v)) throw ContractError("override '" + k + "' must be a positive integer");
  return static_cast<std::size_t>(v);
}

}  // namespace

std::unique_ptr<Env> make_env(const std::string& name, const EnvOverrides& overrides) {
  if (name == "pendulum") {
    check_keys(name, overrides, {"max_episode_steps"});
    return std::make_unique<Pendulum>(get_count(overrides, "max_episode_steps", 200));
  }
  if (name == "point-mass") {
    check_keys(name, overrides, {"max_episode_steps"});
    return std::make_unique<PointMass>(get_count(overrides, "max_episode_steps", 100));
  }
  if (name == "chain") {
    check_keys(name, overrides, {"n_states", "max_episode_steps", "gamma"});
    const std::size_t n = get_count(overrides, "n_states", 10);
    return std::make_unique<TabularEnv>(chain_mdp(n, get(overrides, "gamma", 0.99)),
                                        get_count(overrides, "max_episode_steps", 3 * n), true);
  }
  if (name == "random-tabular") {
    check_keys(name, overrides, {"n_states", "n_actions", "seed", "max_episode_steps", "gamma"});
    Rng rng(derive_seed(static_cast<std::uint64_t>(get(overrides, "seed", 0)), 0x7ab));
    MdpSpec m = random_mdp(get_count(overrides, "n_states", 5), get_count(overrides, "n_actions", 3),
                           get(overrides, "gamma", 0.99), rng);
    return std::make_unique<TabularEnv>(std::move(m), get_count(overrides, "max_episode_steps", 50), false);
  }
  std::ostringstream os;
  os << "unknown environment '" << name << "'; valid:";
  for (const auto& n : env_names()) os << ' ' << n;
  throw ContractError(os.str());
}

}  // namespace tecrl
