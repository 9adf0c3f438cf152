#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tecrl/env.hpp"

namespace tecrl {

enum class Algo { kTecrl, kMaxEnt };
enum class TupSign { kStabilizing, kLiteral };

/// Every knob of a training run. Defaults are the desk-scale preset; the
/// optimizer and schedule values follow the usual SAC-family table
/// (Adam 0.9/0.999, lr 1e-4, gamma 0.99, tau 0.005, batch 256, ...).
struct AgentConfig {
  Algo algo = Algo::kTecrl;
  std::string env = "pendulum";
  EnvOverrides env_overrides;
  std::uint64_t seed = 0;

  std::uint64_t total_iterations = 200000;
  std::uint64_t eval_interval = 2000;
  std::size_t eval_episodes = 10;

  double gamma = 0.99;
  double tau = 0.005;
  double actor_lr = 1e-4;
  double critic_lr = 1e-4;
  double alpha_lr = 3e-4;
  double alpha_init = 0.2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  std::size_t batch = 256;
  std::size_t buffer = 1000000;
  std::size_t warm = 10000;
  std::uint64_t policy_update_interval = 2;
  std::size_t sample_batch_size = 1;
  double reward_scale = 0.1;

  double rho = 1.0;
  /// Per-step base entropy target; NaN means -dim(A).
  double h0 = std::numeric_limits<double>::quiet_NaN();
  bool temperature_update = true;
  TupSign tup_sign = TupSign::kStabilizing;

  std::size_t hidden = 256;
  std::size_t layers = 2;
  std::string activation = "silu";
  std::string entropy_estimator = "sampled";

  // Reserved for distributional critics; parsed and recorded, unused.
  double zeta = 3.0;
  double dsac_epsilon = 0.1;

  void validate() const;
};

/// Key names accepted by parse_config / set_config_key.
const std::vector<std::string>& config_keys();

/// Sets one key from its textual value. Unknown keys throw ContractError
/// listing the valid set; malformed values throw ContractError naming the key.
void set_config_key(AgentConfig& cfg, const std::string& key, const std::string& value);

/// Flat `key = value` text; '#' starts a comment.
AgentConfig parse_config(std::istream& is);
AgentConfig load_config(const std::string& path);

/// Canonical text form (round-trips through parse_config).
std::string to_text(const AgentConfig& cfg);

std::string to_string(Algo a);

}  // namespace tecrl
