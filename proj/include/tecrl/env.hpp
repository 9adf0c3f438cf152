#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tecrl/rng.hpp"

namespace tecrl {

struct EnvSpec {
  std::size_t state_dim = 1;
  std::size_t action_dim = 1;
  std::vector<double> action_low;
  std::vector<double> action_high;
  std::size_t max_episode_steps = 1;
  bool discrete = false;

  void validate() const;
};

/// One environment step. `done` marks a genuine terminal state only;
/// hitting the step limit sets `truncated` instead, and the two are never
/// both true.
struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_state;
  bool done = false;
  bool truncated = false;
};

/// Finite MDP for exact verification. P is stored flat as [s][a][s'],
/// R as [s][a].
struct MdpSpec {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> P;
  std::vector<double> R;
  double gamma = 0.99;
  std::vector<bool> terminal_mask;
  /// Optional start distribution; empty means uniform over non-terminal states.
  std::vector<double> start;

  double p(std::size_t s, std::size_t a, std::size_t s2) const {
    return P[(s * n_actions + a) * n_states + s2];
  }
  double& p(std::size_t s, std::size_t a, std::size_t s2) {
    return P[(s * n_actions + a) * n_states + s2];
  }
  double r(std::size_t s, std::size_t a) const { return R[s * n_actions + a]; }
  double& r(std::size_t s, std::size_t a) { return R[s * n_actions + a]; }
  bool terminal(std::size_t s) const { return !terminal_mask.empty() && terminal_mask[s]; }

  /// Start distribution actually used for aggregation.
  std::vector<double> start_distribution() const;

  /// Throws ContractError unless rows are stochastic within 1e-12 and gamma in [0,1).
  void validate() const;
};

/// Random dense MDP: transition rows drawn uniformly then normalized,
/// rewards uniform in [0, 1). No terminal states.
MdpSpec random_mdp(std::size_t n_states, std::size_t n_actions, double gamma, Rng& rng);

/// N-state deterministic chain. Action 0 moves left (staying put at 0 and
/// paying a small distractor reward there), action 1 moves right; entering
/// the last state pays 1 and terminates.
MdpSpec chain_mdp(std::size_t n_states, double gamma);

class Env {
 public:
  explicit Env(EnvSpec spec) : spec_(std::move(spec)) { spec_.validate(); }
  virtual ~Env() = default;
  Env(const Env&) = delete;
  Env& operator=(const Env&) = delete;
  Env(Env&&) = default;
  Env& operator=(Env&&) = default;

  const EnvSpec& spec() const { return spec_; }

  std::vector<double> reset(std::uint64_t seed);

  /// Out-of-range actions are clamped and counted. Stepping after the
  /// episode ended (terminal or truncated) throws ContractError.
  Transition step(std::span<const double> action);

  std::size_t steps() const { return steps_; }
  std::size_t clamp_count() const { return clamp_count_; }
  bool episode_over() const { return over_; }
  const std::vector<double>& state() const { return state_; }

  /// Underlying tabular model, for discrete environments.
  virtual const MdpSpec* mdp() const { return nullptr; }

 protected:
  struct StepResult {
    std::vector<double> next_state;
    double reward;
    bool terminal;
  };
  virtual std::vector<double> do_reset(Rng& rng) = 0;
  virtual StepResult do_step(std::span<const double> action) = 0;

  /// Lets subclasses expose a test hook that overrides the current state.
  void force_state(std::vector<double> s) {
    state_ = std::move(s);
    over_ = false;
  }

  Rng rng_;

 private:
  EnvSpec spec_;
  std::vector<double> state_;
  std::size_t steps_ = 0;
  std::size_t clamp_count_ = 0;
  bool over_ = true;
};

/// Torque-driven pendulum, angle 0 upright. Observation (cos t, sin t, t_dot).
class Pendulum final : public Env {
 public:
  static constexpr double kMaxTorque = 2.0;
  static constexpr double kMaxSpeed = 8.0;
  static constexpr double kDt = 0.05;
  static constexpr double kGravity = 10.0;
  static constexpr double kMass = 1.0;
  static constexpr double kLength = 1.0;

  explicit Pendulum(std::size_t max_steps = 200);

  void set_state(double theta, double theta_dot);
  double theta() const { return theta_; }
  double theta_dot() const { return theta_dot_; }

 private:
  std::vector<double> do_reset(Rng& rng) override;
  StepResult do_step(std::span<const double> action) override;
  std::vector<double> observe() const;

  double theta_ = 0.0;
  double theta_dot_ = 0.0;
};

/// Planar double integrator. Observation (px, py, vx, vy), action is the
/// acceleration in [-1, 1]^2.
class PointMass final : public Env {
 public:
  static constexpr double kDt = 0.1;
  static constexpr double kInitRange = 0.5;

  explicit PointMass(std::size_t max_steps = 100);

  void set_state(std::span<const double> pos, std::span<const double> vel);

 private:
  std::vector<double> do_reset(Rng& rng) override;
  StepResult do_step(std::span<const double> action) override;
};

/// Discrete MDP exposed through the continuous interface: one-hot states and
/// a single action coordinate in [-1, 1] split into n_actions equal bins.
class TabularEnv final : public Env {
 public:
  TabularEnv(MdpSpec mdp, std::size_t max_steps, bool fixed_start);

  const MdpSpec* mdp() const override { return &mdp_; }
  std::size_t state_index() const { return index_; }
  std::size_t action_index(std::span<const double> action) const;

  /// Action value that selects discrete action `a`.
  double action_value(std::size_t a) const;

 private:
  std::vector<double> do_reset(Rng& rng) override;
  StepResult do_step(std::span<const double> action) override;
  std::vector<double> one_hot(std::size_t s) const;

  MdpSpec mdp_;
  bool fixed_start_;
  std::size_t index_ = 0;
};

using EnvOverrides = std::map<std::string, double>;

/// Valid names: pendulum, point-mass, chain, random-tabular.
std::unique_ptr<Env> make_env(const std::string& name, const EnvOverrides& overrides = {});

const std::vector<std::string>& env_names();

}  // namespace tecrl
