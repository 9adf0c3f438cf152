#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "tecrl/autodiff.hpp"
#include "tecrl/batch.hpp"
#include "tecrl/config.hpp"
#include "tecrl/env.hpp"
#include "tecrl/policy.hpp"
#include "tecrl/replay.hpp"

namespace tecrl {

/// Temperature parameterized as log(alpha) so alpha stays positive under
/// any gradient sequence. Optimized with Adam.
class Temperature {
 public:
  Temperature(double alpha_init, const AdamConfig& adam);

  double alpha() const;
  double log_alpha() const;
  void set_alpha(double alpha);
  /// One Adam step given dL/d(log alpha); log alpha is then kept within
  /// +-kLogAlphaBound so alpha can neither underflow to 0 nor overflow.
  void step(double grad_log_alpha);

  static constexpr double kLogAlphaBound = 100.0;

  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }

 private:
  ParamStore store_;
  AdamConfig adam_;
};

/// Running means of the quantities written to the metrics file.
struct UpdateLog {
  double pev = 0, pis = 0, pim = 0, tup = 0, cum_entropy = 0, step_entropy = 0;
  std::uint64_t critic_updates = 0, policy_updates = 0;

  void clear() { *this = UpdateLog{}; }
};

/// Shared actor-critic driver: policy, temperature, and the update schedule.
/// Subclasses supply the critic and policy/temperature updates.
class Agent {
 public:
  Agent(const AgentConfig& cfg, const EnvSpec& env);
  virtual ~Agent() = default;

  const AgentConfig& config() const { return cfg_; }
  GaussianPolicy& policy() { return policy_; }
  const GaussianPolicy& policy() const { return policy_; }
  Temperature& temperature() { return temperature_; }
  const Temperature& temperature() const { return temperature_; }
  double alpha() const { return temperature_.alpha(); }

  /// One gradient phase on a minibatch: critics every call, policy and
  /// temperature when iteration % policy_update_interval == 0, then target
  /// smoothing.
  void update(const Batch& batch, std::uint64_t iteration);

  UpdateLog& log() { return log_; }

  virtual void save(std::vector<Record>& out) const;
  virtual void load(const std::vector<Record>& in);

 protected:
  virtual void update_critics(const Batch& batch) = 0;
  virtual void update_actor(const Batch& batch) = 0;
  virtual void update_targets() = 0;

  AgentConfig cfg_;
  EnvSpec env_;
  Rng init_rng_;
  Rng noise_rng_;
  GaussianPolicy policy_;
  Temperature temperature_;
  AdamConfig actor_adam_;
  AdamConfig critic_adam_;
  UpdateLog log_;
};

std::unique_ptr<Agent> make_agent(const AgentConfig& cfg, const EnvSpec& env);

PolicyConfig policy_config(const AgentConfig& cfg);

/// Mutable state of a training run between iterations.
struct TrainState {
  std::uint64_t iteration = 0;
  std::vector<double> obs;
  bool need_reset = true;
  Rng env_rng;
  Rng explore_rng;
  Rng buffer_rng;
  std::uint64_t episodes = 0;
  std::uint64_t gradient_phases = 0;

  explicit TrainState(std::uint64_t seed);
};

struct IterationReport {
  std::size_t steps_collected = 0;
  bool critics_updated = false;
  bool actor_updated = false;
};

/// Collects sample_batch_size environment steps with the stochastic policy
/// into the buffer, then runs one gradient phase if the buffer has reached
/// the warm size (and holds a full minibatch). Increments the iteration.
IterationReport train_iteration(Agent& agent, Env& env, ReplayBuffer& buffer, TrainState& state);

}  // namespace tecrl
