#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tecrl/common.hpp"
#include "tecrl/rng.hpp"

namespace tecrl {

/// A named tensor with its gradient buffer and Adam moments.
struct Param {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;
  std::vector<double> m;
  std::vector<double> v;
};

class ParamStore {
 public:
  Param& add(std::string name, std::vector<std::size_t> shape);

  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;

  void zero_grad();
  std::size_t num_values() const;

  /// Incremented whenever parameter values change; tapes recorded under an
  /// older version are rejected by backward.
  std::uint64_t version() const { return version_; }
  void touch() { ++version_; }

  std::uint64_t adam_steps() const { return adam_steps_; }
  void set_adam_steps(std::uint64_t n) { adam_steps_ = n; }

 private:
  std::vector<Param> params_;
  std::uint64_t version_ = 0;
  std::uint64_t adam_steps_ = 0;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam on every parameter in the store. Throws NumericError
/// naming the first tensor whose gradient is not finite (nothing is updated).
void adam_step(ParamStore& store, const AdamConfig& cfg);

/// target <- (1 - tau) target + tau online, elementwise.
void polyak_update(ParamStore& target, const ParamStore& online, double tau);

enum class Activation { kTanh, kSilu };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

enum class KernelPath { kReference, kParallel };

class Mlp;

/// Everything backward needs from one forward call. Single use.
struct Tape {
  std::uint64_t owner = 0;
  std::uint64_t version = 0;
  bool consumed = false;
  std::vector<Matrix> inputs;  // input of each layer (post-activation of the previous)
  std::vector<Matrix> pre;     // pre-activation of each hidden layer
};

/// Fully connected network with smooth hidden activations and a linear
/// output layer. Weights are stored input-major ("l{k}.w" is in x out).
class Mlp {
 public:
  Mlp() = default;
  /// widths = {in, hidden..., out}; at least one hidden layer.
  Mlp(std::vector<std::size_t> widths, Activation act, Rng& init, double output_scale = 1.0);
  Mlp(const Mlp& other);
  Mlp& operator=(const Mlp& other);
  Mlp(Mlp&&) noexcept = default;
  Mlp& operator=(Mlp&&) noexcept = default;

  std::size_t in_dim() const { return widths_.front(); }
  std::size_t out_dim() const { return widths_.back(); }
  std::size_t num_layers() const { return widths_.size() - 1; }
  const std::vector<std::size_t>& widths() const { return widths_; }
  Activation activation() const { return act_; }

  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }

  void set_kernel_path(KernelPath p) { path_ = p; }
  KernelPath kernel_path() const { return path_; }

  Matrix forward(const Matrix& x, Tape& tape) const;
  /// Forward without recording.
  Matrix predict(const Matrix& x) const;

  /// Backpropagates `dout` (batch x out). Parameter gradients are added into
  /// the store when `accumulate_params`; the input gradient is returned.
  Matrix backward(Tape& tape, const Matrix& dout, bool accumulate_params = true);

 private:
  std::uint64_t id_ = 0;
  std::vector<std::size_t> widths_;
  Activation act_ = Activation::kSilu;
  KernelPath path_ = KernelPath::kParallel;
  ParamStore store_;
};

/// Flat checkpoint: a magic tag, then (name, shape, row-major float64) records.
struct Record {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

void append_records(std::vector<Record>& out, const std::string& prefix, const ParamStore& store,
                    bool with_optimizer);
/// Restores values (and optimizer state when present) into `store`.
void restore_records(const std::vector<Record>& in, const std::string& prefix, ParamStore& store);

void write_checkpoint(std::ostream& os, const std::vector<Record>& records);
std::vector<Record> read_checkpoint(std::istream& is);

}  // namespace tecrl
