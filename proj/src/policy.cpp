#include "tecrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tecrl {

EntropyEstimator parse_entropy_estimator(const std::string& name) {
  if (name == "sampled") return EntropyEstimator::kSampled;
  if (name == "gaussian") return EntropyEstimator::kGaussianClosedForm;
  throw ContractError("unknown entropy estimator '" + name + "'; valid: sampled gaussian");
}

double log1m_tanh_sq(double u) {
  // 1 - tanh(u)^2 = 4 e^{-2|u|} / (1 + e^{-2|u|})^2
  const double a = std::abs(u);
  return 2.0 * (std::numbers::ln2 - a - std::log1p(std::exp(-2.0 * a)));
}

GaussianPolicy::GaussianPolicy(const EnvSpec& env, const PolicyConfig& cfg, Rng& init)
    : cfg_(cfg), low_(env.action_low), high_(env.action_high) {
  std::vector<std::size_t> widths{env.state_dim};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(2 * env.action_dim);
  trunk_ = Mlp(widths, cfg.activation, init);
}

void GaussianPolicy::head(const Matrix& states, Matrix& mean, Matrix& log_std) const {
  const Matrix out = trunk_.predict(states);
  const std::size_t A = action_dim();
  mean = Matrix(states.rows(), A);
  log_std = Matrix(states.rows(), A);
  for (std::size_t r = 0; r < states.rows(); ++r)
    for (std::size_t j = 0; j < A; ++j) {
      mean(r, j) = out(r, j);
      log_std(r, j) = std::clamp(out(r, A + j), cfg_.log_std_min, cfg_.log_std_max);
    }
}

Matrix standard_normal(std::size_t rows, std::size_t cols, Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Matrix noise(rows, cols);
  for (auto& x : noise.values()) x = n01(rng);
  return noise;
}

ActionSample GaussianPolicy::sample(const Matrix& states, Rng& rng, SampleTape* tape) const {
  return sample_with_noise(states, standard_normal(states.rows(), action_dim(), rng), tape);
}

ActionSample GaussianPolicy::sample_with_noise(const Matrix& states, const Matrix& noise, SampleTape* tape) const {
  if (noise.rows() != states.rows() || noise.cols() != action_dim())
    throw ContractError("GaussianPolicy: noise shape mismatch");
  Tape local;
  Tape& t = tape ? tape->trunk : local;
  const Matrix out = trunk_.forward(states, t);
  if (!all_finite(out.values())) throw NumericError("GaussianPolicy: non-finite trunk output");
  const std::size_t A = action_dim();
  Matrix mean(states.rows(), A);
  Matrix raw(states.rows(), A);
  for (std::size_t r = 0; r < states.rows(); ++r)
    for (std::size_t j = 0; j < A; ++j) {
      mean(r, j) = out(r, j);
      raw(r, j) = out(r, A + j);
    }
  return from_head(mean, raw, noise, tape);
}

ActionSample GaussianPolicy::from_head(const Matrix& mean, const Matrix& raw_log_std, const Matrix& noise,
                                       SampleTape* tape) const {
  const std::size_t B = mean.rows();
  const std::size_t A = action_dim();
  ActionSample s;
  s.action = Matrix(B, A);
  s.log_prob.assign(B, 0.0);
  s.pre_squash_entropy.assign(B, 0.0);
  Matrix u(B, A);
  Matrix ls(B, A);
  std::vector<bool> clamped(B * A, false);
  for (std::size_t r = 0; r < B; ++r) {
    double lp = 0.0;
    double ent = 0.0;
    for (std::size_t j = 0; j < A; ++j) {
      const double raw = raw_log_std(r, j);
      const double l = std::clamp(raw, cfg_.log_std_min, cfg_.log_std_max);
      clamped[r * A + j] = (l != raw);
      const double eps = noise(r, j);
      const double uj = mean(r, j) + std::exp(l) * eps;
      u(r, j) = uj;
      ls(r, j) = l;
      lp += -0.5 * eps * eps - l - kHalfLog2Pi;
      ent += l + kHalfLog2PiE;
      if (cfg_.squash) {
        const double half = 0.5 * (high_[j] - low_[j]);
        const double mid = 0.5 * (high_[j] + low_[j]);
        s.action(r, j) = mid + half * std::tanh(uj);
        lp -= log1m_tanh_sq(uj) + std::log(half);
      } else {
        s.action(r, j) = uj;
      }
    }
    if (!std::isfinite(lp)) throw NumericError("GaussianPolicy: non-finite log-probability");
    s.log_prob[r] = lp;
    s.pre_squash_entropy[r] = ent;
  }
  if (tape) {
    tape->noise = noise;
    tape->pre_squash = std::move(u);
    tape->log_std = std::move(ls);
    tape->clamped = std::move(clamped);
  }
  return s;
}

void GaussianPolicy::backward(SampleTape& tape, const Matrix& d_action, std::span<const double> d_log_prob) {
  const std::size_t B = tape.pre_squash.rows();
  const std::size_t A = action_dim();
  if (d_action.rows() != B || d_action.cols() != A || d_log_prob.size() != B)
    throw ContractError("GaussianPolicy::backward: gradient shape mismatch");
  Matrix dout(B, 2 * A);
  for (std::size_t r = 0; r < B; ++r) {
    for (std::size_t j = 0; j < A; ++j) {
      const double u = tape.pre_squash(r, j);
      const double sigma = std::exp(tape.log_std(r, j));
      double du = 0.0;
      if (cfg_.squash) {
        const double half = 0.5 * (high_[j] - low_[j]);
        const double t = std::tanh(u);
        du = d_action(r, j) * half * std::exp(log1m_tanh_sq(u)) + d_log_prob[r] * 2.0 * t;
      } else {
        du = d_action(r, j);
      }
      dout(r, j) = du;
      const double dls = du * sigma * tape.noise(r, j) - d_log_prob[r];
      dout(r, A + j) = tape.clamped[r * A + j] ? 0.0 : dls;
    }
  }
  trunk_.backward(tape.trunk, dout, true);
}

Matrix GaussianPolicy::deterministic_action(const Matrix& states) const {
  Matrix mean, ls;
  head(states, mean, ls);
  if (!cfg_.squash) return mean;
  for (std::size_t r = 0; r < mean.rows(); ++r)
    for (std::size_t j = 0; j < mean.cols(); ++j)
      mean(r, j) = 0.5 * (high_[j] + low_[j]) + 0.5 * (high_[j] - low_[j]) * std::tanh(mean(r, j));
  return mean;
}

std::vector<double> GaussianPolicy::deterministic_action(std::span<const double> state) const {
  Matrix s(1, state.size());
  std::copy(state.begin(), state.end(), s.data());
  const Matrix a = deterministic_action(s);
  return a.values();
}

std::vector<double> GaussianPolicy::step_entropy_estimate(const Matrix& states, std::size_t n_samples,
                                                          Rng& rng) const {
  if (n_samples < 1) throw ContractError("step_entropy_estimate: n_samples must be >= 1");
  Matrix mean, raw;
  {
    const Matrix out = trunk_.predict(states);
    const std::size_t A = action_dim();
    mean = Matrix(states.rows(), A);
    raw = Matrix(states.rows(), A);
    for (std::size_t r = 0; r < states.rows(); ++r)
      for (std::size_t j = 0; j < A; ++j) {
        mean(r, j) = out(r, j);
        raw(r, j) = out(r, A + j);
      }
  }
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<double> acc(states.rows(), 0.0);
  Matrix noise(states.rows(), action_dim());
  for (std::size_t k = 0; k < n_samples; ++k) {
    for (auto& x : noise.values()) x = n01(rng);
    const ActionSample s = from_head(mean, raw, noise, nullptr);
    for (std::size_t r = 0; r < acc.size(); ++r) acc[r] -= s.log_prob[r];
  }
  for (auto& a : acc) a /= static_cast<double>(n_samples);
  return acc;
}

}  // namespace tecrl
