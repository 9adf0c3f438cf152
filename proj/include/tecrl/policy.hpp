#pragma once

#include <span>
#include <vector>

#include "tecrl/autodiff.hpp"
#include "tecrl/env.hpp"

namespace tecrl {

/// Which single-step entropy the entropy critic bootstraps on: the sampled
/// -log pi of the emitted (squashed) action, or the closed-form entropy of
/// the Gaussian before squashing.
enum class EntropyEstimator { kSampled, kGaussianClosedForm };

EntropyEstimator parse_entropy_estimator(const std::string& name);

struct PolicyConfig {
  std::vector<std::size_t> hidden = {256, 256};
  Activation activation = Activation::kSilu;
  double log_std_min = -20.0;
  double log_std_max = 2.0;
  bool squash = true;
};

/// Batch of reparameterized samples.
struct ActionSample {
  Matrix action;
  std::vector<double> log_prob;            // log density of the emitted action
  std::vector<double> pre_squash_entropy;  // closed-form Gaussian entropy of the head
};

/// What backward needs from one sample() call.
struct SampleTape {
  Tape trunk;
  Matrix noise;
  Matrix pre_squash;  // u = mean + std * noise
  Matrix log_std;     // after clamping
  std::vector<bool> clamped;
};

/// 0.5 * log(2 pi e)
inline constexpr double kHalfLog2PiE = 1.4189385332046727;
/// 0.5 * log(2 pi)
inline constexpr double kHalfLog2Pi = 0.9189385332046727;

/// rows x cols of independent N(0, 1) draws.
Matrix standard_normal(std::size_t rows, std::size_t cols, Rng& rng);

/// log(1 - tanh(u)^2), stable for large |u|.
double log1m_tanh_sq(double u);

/// Diagonal Gaussian head on an MLP trunk, squashed by tanh and scaled to
/// the action box. Trunk outputs [mean | raw log-std].
class GaussianPolicy {
 public:
  GaussianPolicy() = default;
  GaussianPolicy(const EnvSpec& env, const PolicyConfig& cfg, Rng& init);

  std::size_t state_dim() const { return trunk_.in_dim(); }
  std::size_t action_dim() const { return low_.size(); }
  const PolicyConfig& config() const { return cfg_; }
  Mlp& trunk() { return trunk_; }
  const Mlp& trunk() const { return trunk_; }

  /// Draws standard normal noise from `rng` and calls sample_with_noise.
  ActionSample sample(const Matrix& states, Rng& rng, SampleTape* tape = nullptr) const;
  ActionSample sample_with_noise(const Matrix& states, const Matrix& noise, SampleTape* tape = nullptr) const;

  /// Accumulates trunk gradients of a loss given dL/d(action) and
  /// dL/d(log_prob) per row.
  void backward(SampleTape& tape, const Matrix& d_action, std::span<const double> d_log_prob);

  /// Squashed mean scaled to the bounds.
  Matrix deterministic_action(const Matrix& states) const;
  std::vector<double> deterministic_action(std::span<const double> state) const;

  /// Per-state average of -log_prob over n_samples fresh samples.
  std::vector<double> step_entropy_estimate(const Matrix& states, std::size_t n_samples, Rng& rng) const;

  /// Mean and clamped log-std of the head.
  void head(const Matrix& states, Matrix& mean, Matrix& log_std) const;

 private:
  ActionSample from_head(const Matrix& mean, const Matrix& raw_log_std, const Matrix& noise, SampleTape* tape) const;

  PolicyConfig cfg_;
  Mlp trunk_;
  std::vector<double> low_;
  std::vector<double> high_;
};

}  // namespace tecrl
