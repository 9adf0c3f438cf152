#include "tecrl/agent.hpp"

#include <algorithm>
#include <cmath>

#include "tecrl/maxent_agent.hpp"
#include "tecrl/tecrl_agent.hpp"

namespace tecrl {

Temperature::Temperature(double alpha_init, const AdamConfig& adam) : adam_(adam) {
  if (!(alpha_init > 0.0) || !std::isfinite(alpha_init)) throw ContractError("Temperature: alpha_init must be > 0");
  store_.add("log_alpha", {1}).value[0] = std::log(alpha_init);
}

double Temperature::alpha() const { return std::exp(log_alpha()); }
double Temperature::log_alpha() const { return store_.params()[0].value[0]; }

void Temperature::set_alpha(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ContractError("Temperature: alpha must be > 0");
  store_.params()[0].value[0] = std::log(alpha);
  store_.touch();
}

void Temperature::step(double grad_log_alpha) {
  store_.zero_grad();
  store_.params()[0].grad[0] = grad_log_alpha;
  adam_step(store_, adam_);
  // exp() of anything below about -745 is exactly 0.
  double& la = store_.params()[0].value[0];
  la = std::clamp(la, -kLogAlphaBound, kLogAlphaBound);
}

PolicyConfig policy_config(const AgentConfig& cfg) {
  PolicyConfig p;
  p.hidden.assign(cfg.layers, cfg.hidden);
  p.activation = parse_activation(cfg.activation);
  return p;
}

namespace {

AdamConfig adam_for(const AgentConfig& cfg, double lr) {
  return AdamConfig{lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};
}

}  // namespace

Agent::Agent(const AgentConfig& cfg, const EnvSpec& env)
    : cfg_((cfg.validate(), cfg)),
      env_(env),
      init_rng_(make_rng(cfg.seed, Stream::kInit)),
      noise_rng_(make_rng(cfg.seed, Stream::kNoise)),
      policy_(env, policy_config(cfg), init_rng_),
      temperature_(cfg.alpha_init, adam_for(cfg, cfg.alpha_lr)),
      actor_adam_(adam_for(cfg, cfg.actor_lr)),
      critic_adam_(adam_for(cfg, cfg.critic_lr)) {}

void Agent::update(const Batch& batch, std::uint64_t iteration) {
  update_critics(batch);
  ++log_.critic_updates;
  if (iteration % cfg_.policy_update_interval == 0) {
    update_actor(batch);
    ++log_.policy_updates;
  }
  update_targets();
}

void Agent::save(std::vector<Record>& out) const {
  append_records(out, "policy", policy_.trunk().store(), true);
  append_records(out, "temperature", temperature_.store(), true);
}

void Agent::load(const std::vector<Record>& in) {
  restore_records(in, "policy", policy_.trunk().store());
  restore_records(in, "temperature", temperature_.store());
}

std::unique_ptr<Agent> make_agent(const AgentConfig& cfg, const EnvSpec& env) {
  switch (cfg.algo) {
    case Algo::kTecrl:
      return std::make_unique<TecrlAgent>(cfg, env);
    case Algo::kMaxEnt:
      return std::make_unique<MaxEntAgent>(cfg, env);
  }
  throw ContractError("make_agent: unknown algo");
}

TrainState::TrainState(std::uint64_t seed)
    : env_rng(make_rng(seed, Stream::kEnv)),
      explore_rng(make_rng(seed, Stream::kExplore)),
      buffer_rng(make_rng(seed, Stream::kBuffer)) {}

IterationReport train_iteration(Agent& agent, Env& env, ReplayBuffer& buffer, TrainState& state) {
  const AgentConfig& cfg = agent.config();
  IterationReport report;
  const std::size_t sdim = env.spec().state_dim;
  for (std::size_t k = 0; k < cfg.sample_batch_size; ++k) {
    if (state.need_reset) {
      state.obs = env.reset(state.env_rng());
      state.need_reset = false;
      ++state.episodes;
    }
    Matrix s(1, sdim);
    std::copy(state.obs.begin(), state.obs.end(), s.row(0).begin());
    const ActionSample a = agent.policy().sample(s, state.explore_rng);
    const Transition t = env.step(a.action.row(0));
    buffer.push(t);
    state.obs = t.next_state;
    if (t.done || t.truncated) state.need_reset = true;
    ++report.steps_collected;
  }
  if (buffer.size() >= std::max(cfg.warm, cfg.batch)) {
    const Batch batch = buffer.sample(cfg.batch, state.buffer_rng);
    const std::uint64_t before = agent.log().policy_updates;
    agent.update(batch, state.iteration);
    report.critics_updated = true;
    report.actor_updated = agent.log().policy_updates != before;
    ++state.gradient_phases;
  }
  ++state.iteration;
  return report;
}

}  // namespace tecrl
