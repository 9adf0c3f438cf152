#include "tecrl/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "tecrl/kernels.hpp"

namespace tecrl {

Matrix hconcat(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ContractError("hconcat: row counts differ");
  Matrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    std::copy(a.row(r).begin(), a.row(r).end(), out.row(r).begin());
    std::copy(b.row(r).begin(), b.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(a.cols()));
  }
  return out;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

Param& ParamStore::add(std::string name, std::vector<std::size_t> shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  Param p;
  p.name = std::move(name);
  p.shape = std::move(shape);
  p.value.assign(n, 0.0);
  p.grad.assign(n, 0.0);
  p.m.assign(n, 0.0);
  p.v.assign(n, 0.0);
  params_.push_back(std::move(p));
  return params_.back();
}

Param& ParamStore::at(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  throw ContractError("ParamStore: no parameter named " + name);
}

const Param& ParamStore::at(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return p;
  throw ContractError("ParamStore: no parameter named " + name);
}

void ParamStore::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

std::size_t ParamStore::num_values() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void adam_step(ParamStore& store, const AdamConfig& cfg) {
  for (const auto& p : store.params())
    if (!all_finite(p.grad)) throw NumericError("adam_step: non-finite gradient in " + p.name);

  const std::uint64_t t = store.adam_steps() + 1;
  store.set_adam_steps(t);
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (auto& p : store.params()) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      p.m[i] = cfg.beta1 * p.m[i] + (1.0 - cfg.beta1) * g;
      p.v[i] = cfg.beta2 * p.v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = p.m[i] / bc1;
      const double vhat = p.v[i] / bc2;
      p.value[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
  store.touch();
}

void polyak_update(ParamStore& target, const ParamStore& online, double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw ContractError("polyak_update: tau must lie in (0, 1]");
  auto& tp = target.params();
  const auto& op = online.params();
  if (tp.size() != op.size()) throw ContractError("polyak_update: parameter count mismatch");
  for (std::size_t k = 0; k < tp.size(); ++k)
    if (tp[k].shape != op[k].shape) throw ContractError("polyak_update: shape mismatch in " + tp[k].name);
  for (std::size_t k = 0; k < tp.size(); ++k) {
    auto& t = tp[k].value;
    const auto& o = op[k].value;
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = (1.0 - tau) * t[i] + tau * o[i];
  }
  target.touch();
}

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "silu") return Activation::kSilu;
  throw ContractError("unknown activation '" + name + "'; valid: tanh silu");
}

std::string to_string(Activation a) { return a == Activation::kTanh ? "tanh" : "silu"; }

namespace {

std::uint64_t next_mlp_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1);
}

std::string layer_name(std::size_t l, const char* what) {
  return "l" + std::to_string(l) + "." + what;
}

void activate(Activation act, const Matrix& z, Matrix& h) {
  const double* zp = z.data();
  double* hp = h.data();
  const std::size_t n = z.size();
  if (act == Activation::kTanh) {
    for (std::size_t i = 0; i < n; ++i) hp[i] = std::tanh(zp[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) hp[i] = zp[i] / (1.0 + std::exp(-zp[i]));
  }
}

/// g <- g * act'(z)
void activate_grad(Activation act, const Matrix& z, Matrix& g) {
  const double* zp = z.data();
  double* gp = g.data();
  const std::size_t n = z.size();
  if (act == Activation::kTanh) {
    for (std::size_t i = 0; i < n; ++i) {
      const double t = std::tanh(zp[i]);
      gp[i] *= 1.0 - t * t;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const double s = 1.0 / (1.0 + std::exp(-zp[i]));
      gp[i] *= s * (1.0 + zp[i] * (1.0 - s));
    }
  }
}

}  // namespace

Mlp::Mlp(std::vector<std::size_t> widths, Activation act, Rng& init, double output_scale)
    : id_(next_mlp_id()), widths_(std::move(widths)), act_(act) {
  if (widths_.size() < 3) throw ContractError("Mlp: need at least one hidden layer");
  for (auto w : widths_)
    if (w == 0) throw ContractError("Mlp: zero-width layer");
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const std::size_t in = widths_[l];
    const std::size_t out = widths_[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    const double scale = (l + 2 == widths_.size()) ? output_scale : 1.0;
    std::uniform_real_distribution<double> u(-bound, bound);
    Param& w = store_.add(layer_name(l, "w"), {in, out});
    for (auto& x : w.value) x = scale * u(init);
    Param& b = store_.add(layer_name(l, "b"), {out});
    for (auto& x : b.value) x = scale * u(init);
  }
}

Mlp::Mlp(const Mlp& other)
    : id_(next_mlp_id()), widths_(other.widths_), act_(other.act_), path_(other.path_), store_(other.store_) {}

Mlp& Mlp::operator=(const Mlp& other) {
  if (this != &other) {
    widths_ = other.widths_;
    act_ = other.act_;
    path_ = other.path_;
    store_ = other.store_;
    store_.touch();
    if (id_ == 0) id_ = next_mlp_id();
  }
  return *this;
}

Matrix Mlp::forward(const Matrix& x, Tape& tape) const {
  if (x.cols() != in_dim()) {
    std::ostringstream os;
    os << "Mlp::forward: layer 0 expects width " << in_dim() << ", got " << x.cols();
    throw ContractError(os.str());
  }
  tape = Tape{};
  tape.owner = id_;
  tape.version = store_.version();
  const std::size_t batch = x.rows();
  const std::size_t layers = num_layers();
  Matrix h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    const kernels::Dims d{batch, widths_[l], widths_[l + 1]};
    const auto& w = store_.params()[2 * l].value;
    const auto& b = store_.params()[2 * l + 1].value;
    Matrix z(batch, d.out);
    if (path_ == KernelPath::kParallel)
      kernels::parallel::linear_forward(d, h.values(), w, b, z.values());
    else
      kernels::reference::linear_forward(d, h.values(), w, b, z.values());
    tape.inputs.push_back(std::move(h));
    if (l + 1 == layers) return z;
    h = Matrix(batch, d.out);
    activate(act_, z, h);
    tape.pre.push_back(std::move(z));
  }
  return h;  // unreachable: layers >= 2
}

Matrix Mlp::predict(const Matrix& x) const {
  Tape t;
  return forward(x, t);
}

Matrix Mlp::backward(Tape& tape, const Matrix& dout, bool accumulate_params) {
  if (tape.owner != id_) throw ContractError("Mlp::backward: tape was recorded by a different network");
  if (tape.consumed) throw ContractError("Mlp::backward: tape already used");
  if (tape.version != store_.version()) throw ContractError("Mlp::backward: stale tape (parameters changed)");
  const std::size_t batch = tape.inputs.front().rows();
  if (dout.rows() != batch || dout.cols() != out_dim()) throw ContractError("Mlp::backward: output gradient shape mismatch");
  tape.consumed = true;

  Matrix g = dout;
  for (std::size_t l = num_layers(); l-- > 0;) {
    const kernels::Dims d{batch, widths_[l], widths_[l + 1]};
    auto& w = store_.params()[2 * l];
    auto& b = store_.params()[2 * l + 1];
    if (accumulate_params) {
      if (path_ == KernelPath::kParallel)
        kernels::parallel::linear_backward_params(d, tape.inputs[l].values(), g.values(), w.grad, b.grad);
      else
        kernels::reference::linear_backward_params(d, tape.inputs[l].values(), g.values(), w.grad, b.grad);
    }
    Matrix dx(batch, d.in);
    if (path_ == KernelPath::kParallel)
      kernels::parallel::linear_backward_input(d, g.values(), w.value, dx.values());
    else
      kernels::reference::linear_backward_input(d, g.values(), w.value, dx.values());
    if (l > 0) activate_grad(act_, tape.pre[l - 1], dx);
    g = std::move(dx);
  }
  return g;
}

void append_records(std::vector<Record>& out, const std::string& prefix, const ParamStore& store,
                    bool with_optimizer) {
  for (const auto& p : store.params()) {
    out.push_back({prefix + p.name, p.shape, p.value});
    if (with_optimizer) {
      out.push_back({prefix + p.name + "#m", p.shape, p.m});
      out.push_back({prefix + p.name + "#v", p.shape, p.v});
    }
  }
  if (with_optimizer)
    out.push_back({prefix + "#adam_steps", {1}, {static_cast<double>(store.adam_steps())}});
}

void restore_records(const std::vector<Record>& in, const std::string& prefix, ParamStore& store) {
  auto find = [&](const std::string& name) -> const Record* {
    for (const auto& r : in)
      if (r.name == name) return &r;
    return nullptr;
  };
  for (auto& p : store.params()) {
    const Record* r = find(prefix + p.name);
    if (!r) throw ContractError("checkpoint: missing record " + prefix + p.name);
    if (r->shape != p.shape) throw ContractError("checkpoint: shape mismatch for " + prefix + p.name);
    p.value = r->values;
    if (const Record* m = find(prefix + p.name + "#m")) p.m = m->values;
    if (const Record* v = find(prefix + p.name + "#v")) p.v = v->values;
  }
  if (const Record* s = find(prefix + "#adam_steps")) store.set_adam_steps(static_cast<std::uint64_t>(s->values[0]));
  store.touch();
}

namespace {

constexpr char kMagic[8] = {'T', 'E', 'C', 'R', 'L', 'C', 'K', '1'};

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T take(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw ContractError("checkpoint: truncated stream");
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& os, const std::vector<Record>& records) {
  os.write(kMagic, sizeof(kMagic));
  put<std::uint64_t>(os, records.size());
  for (const auto& r : records) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(r.name.size()));
    os.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(r.shape.size()));
    for (auto d : r.shape) put<std::uint64_t>(os, d);
    put<std::uint64_t>(os, r.values.size());
    os.write(reinterpret_cast<const char*>(r.values.data()), static_cast<std::streamsize>(r.values.size() * sizeof(double)));
  }
}

std::vector<Record> read_checkpoint(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw ContractError("checkpoint: bad magic");
  const auto n = take<std::uint64_t>(is);
  std::vector<Record> out;
  out.reserve(n);
  for (std::uint64_t k = 0; k < n; ++k) {
    Record r;
    r.name.resize(take<std::uint32_t>(is));
    is.read(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    const auto nd = take<std::uint32_t>(is);
    for (std::uint32_t i = 0; i < nd; ++i) r.shape.push_back(take<std::uint64_t>(is));
    r.values.resize(take<std::uint64_t>(is));
    is.read(reinterpret_cast<char*>(r.values.data()), static_cast<std::streamsize>(r.values.size() * sizeof(double)));
    if (!is) throw ContractError("checkpoint: truncated stream");
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace tecrl
