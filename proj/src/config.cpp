#include "tecrl/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "tecrl/common.hpp"
#include "tecrl/policy.hpp"

namespace tecrl {

namespace {

const std::vector<std::string> kEnvKeys = {"env.n_states", "env.n_actions", "env.seed", "env.max_episode_steps",
                                           "env.gamma"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ContractError("config key '" + key + "': expected a number, got '" + v + "'");
  }
  if (used != v.size()) throw ContractError("config key '" + key + "': expected a number, got '" + v + "'");
  return x;
}

std::uint64_t to_count(const std::string& key, const std::string& v) {
  const double x = to_double(key, v);
  if (x < 0 || x != std::floor(x) || x > 9.0e18)
    throw ContractError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  return static_cast<std::uint64_t>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ContractError("config key '" + key + "': expected true/false, got '" + v + "'");
}

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

}  // namespace

std::string to_string(Algo a) { return a == Algo::kTecrl ? "tecrl" : "maxent"; }

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k = {
        "algo",       "env",        "seed",          "total_iterations", "eval_interval", "eval_episodes",
        "gamma",      "tau",        "actor_lr",      "critic_lr",        "alpha_lr",      "alpha_init",
        "adam_beta1", "adam_beta2", "adam_eps",      "batch",            "buffer",        "warm",
        "policy_update_interval",   "sample_batch_size",                 "reward_scale",  "rho",
        "h0",         "temperature_update",          "tup_sign",         "hidden",        "layers",
        "activation", "entropy_estimator",           "zeta",             "dsac_epsilon"};
    k.insert(k.end(), kEnvKeys.begin(), kEnvKeys.end());
    return k;
  }();
  return keys;
}

void set_config_key(AgentConfig& c, const std::string& key, const std::string& v) {
  if (key == "algo") {
    if (v == "tecrl") c.algo = Algo::kTecrl;
    else if (v == "maxent") c.algo = Algo::kMaxEnt;
    else throw ContractError("config key 'algo': expected tecrl or maxent, got '" + v + "'");
  } else if (key == "env") {
    c.env = v;
  } else if (key == "seed") {
    c.seed = to_count(key, v);
  } else if (key == "total_iterations") {
    c.total_iterations = to_count(key, v);
  } else if (key == "eval_interval") {
    c.eval_interval = to_count(key, v);
  } else if (key == "eval_episodes") {
    c.eval_episodes = to_count(key, v);
  } else if (key == "gamma") {
    c.gamma = to_double(key, v);
  } else if (key == "tau") {
    c.tau = to_double(key, v);
  } else if (key == "actor_lr") {
    c.actor_lr = to_double(key, v);
  } else if (key == "critic_lr") {
    c.critic_lr = to_double(key, v);
  } else if (key == "alpha_lr") {
    c.alpha_lr = to_double(key, v);
  } else if (key == "alpha_init") {
    c.alpha_init = to_double(key, v);
  } else if (key == "adam_beta1") {
    c.adam_beta1 = to_double(key, v);
  } else if (key == "adam_beta2") {
    c.adam_beta2 = to_double(key, v);
  } else if (key == "adam_eps") {
    c.adam_eps = to_double(key, v);
  } else if (key == "batch") {
    c.batch = to_count(key, v);
  } else if (key == "buffer") {
    c.buffer = to_count(key, v);
  } else if (key == "warm") {
    c.warm = to_count(key, v);
  } else if (key == "policy_update_interval") {
    c.policy_update_interval = to_count(key, v);
  } else if (key == "sample_batch_size") {
    c.sample_batch_size = to_count(key, v);
  } else if (key == "reward_scale") {
    c.reward_scale = to_double(key, v);
  } else if (key == "rho") {
    c.rho = to_double(key, v);
  } else if (key == "h0") {
    c.h0 = (v == "auto") ? std::numeric_limits<double>::quiet_NaN() : to_double(key, v);
  } else if (key == "temperature_update") {
    c.temperature_update = to_bool(key, v);
  } else if (key == "tup_sign") {
    if (v == "stabilizing") c.tup_sign = TupSign::kStabilizing;
    else if (v == "literal") c.tup_sign = TupSign::kLiteral;
    else throw ContractError("config key 'tup_sign': expected stabilizing or literal, got '" + v + "'");
  } else if (key == "hidden") {
    c.hidden = to_count(key, v);
  } else if (key == "layers") {
    c.layers = to_count(key, v);
  } else if (key == "activation") {
    parse_activation(v);
    c.activation = v;
  } else if (key == "entropy_estimator") {
    parse_entropy_estimator(v);
    c.entropy_estimator = v;
  } else if (key == "zeta") {
    c.zeta = to_double(key, v);
  } else if (key == "dsac_epsilon") {
    c.dsac_epsilon = to_double(key, v);
  } else if (std::find(kEnvKeys.begin(), kEnvKeys.end(), key) != kEnvKeys.end()) {
    c.env_overrides[key.substr(4)] = to_double(key, v);
  } else {
    std::ostringstream os;
    os << "unknown config key '" << key << "'; valid keys:";
    for (const auto& k : config_keys()) os << ' ' << k;
    throw ContractError(os.str());
  }
}

void AgentConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw ContractError(std::string("invalid config: ") + what);
  };
  need(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
  need(tau > 0.0 && tau <= 1.0, "tau must lie in (0, 1]");
  need(actor_lr > 0 && critic_lr > 0 && alpha_lr > 0, "learning rates must be positive");
  need(alpha_init > 0, "alpha_init must be positive");
  need(batch > 0 && buffer > 0, "batch and buffer must be positive");
  need(buffer >= batch, "buffer must hold at least one batch");
  need(policy_update_interval > 0, "policy_update_interval must be positive");
  need(sample_batch_size > 0, "sample_batch_size must be positive");
  need(reward_scale > 0, "reward_scale must be positive");
  need(rho > 0, "rho must be positive");
  need(hidden > 0 && layers > 0, "network must have at least one hidden layer");
  need(eval_episodes > 0, "eval_episodes must be positive");
  need(total_iterations == 0 || eval_interval > 0, "eval_interval must be positive");
  need(std::find(env_names().begin(), env_names().end(), env) != env_names().end(), "unknown env");
}

AgentConfig parse_config(std::istream& is) {
  AgentConfig c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ContractError("config line " + std::to_string(lineno) + ": expected key = value");
    set_config_key(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return c;
}

AgentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open config file " + path);
  return parse_config(in);
}

std::string to_text(const AgentConfig& c) {
  std::ostringstream os;
  os << "algo = " << to_string(c.algo) << '\n'
     << "env = " << c.env << '\n';
  for (const auto& [k, v] : c.env_overrides) os << "env." << k << " = " << fmt(v) << '\n';
  os << "seed = " << c.seed << '\n'
     << "total_iterations = " << c.total_iterations << '\n'
     << "eval_interval = " << c.eval_interval << '\n'
     << "eval_episodes = " << c.eval_episodes << '\n'
     << "gamma = " << fmt(c.gamma) << '\n'
     << "tau = " << fmt(c.tau) << '\n'
     << "actor_lr = " << fmt(c.actor_lr) << '\n'
     << "critic_lr = " << fmt(c.critic_lr) << '\n'
     << "alpha_lr = " << fmt(c.alpha_lr) << '\n'
     << "alpha_init = " << fmt(c.alpha_init) << '\n'
     << "adam_beta1 = " << fmt(c.adam_beta1) << '\n'
     << "adam_beta2 = " << fmt(c.adam_beta2) << '\n'
     << "adam_eps = " << fmt(c.adam_eps) << '\n'
     << "batch = " << c.batch << '\n'
     << "buffer = " << c.buffer << '\n'
     << "warm = " << c.warm << '\n'
     << "policy_update_interval = " << c.policy_update_interval << '\n'
     << "sample_batch_size = " << c.sample_batch_size << '\n'
     << "reward_scale = " << fmt(c.reward_scale) << '\n'
     << "rho = " << fmt(c.rho) << '\n'
     << "h0 = " << (std::isnan(c.h0) ? std::string("auto") : fmt(c.h0)) << '\n'
     << "temperature_update = " << (c.temperature_update ? "true" : "false") << '\n'
     << "tup_sign = " << (c.tup_sign == TupSign::kStabilizing ? "stabilizing" : "literal") << '\n'
     << "hidden = " << c.hidden << '\n'
     << "layers = " << c.layers << '\n'
     << "activation = " << c.activation << '\n'
     << "entropy_estimator = " << c.entropy_estimator << '\n'
     << "zeta = " << fmt(c.zeta) << '\n'
     << "dsac_epsilon = " << fmt(c.dsac_epsilon) << '\n';
  return os.str();
}

}  // namespace tecrl
