#include "tecrl/kernels.hpp"

#include <algorithm>

#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Core>

namespace tecrl::kernels {

namespace reference {

void linear_forward(Dims d, std::span<const double> x, std::span<const double> w, std::span<const double> b,
                    std::span<double> y) {
  for (std::size_t r = 0; r < d.batch; ++r) {
    for (std::size_t o = 0; o < d.out; ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < d.in; ++i) acc += x[r * d.in + i] * w[i * d.out + o];
      y[r * d.out + o] = acc;
    }
  }
}

void linear_backward_input(Dims d, std::span<const double> dy, std::span<const double> w, std::span<double> dx) {
  for (std::size_t r = 0; r < d.batch; ++r) {
    for (std::size_t i = 0; i < d.in; ++i) {
      double acc = 0.0;
      for (std::size_t o = 0; o < d.out; ++o) acc += dy[r * d.out + o] * w[i * d.out + o];
      dx[r * d.in + i] = acc;
    }
  }
}

void linear_backward_params(Dims d, std::span<const double> x, std::span<const double> dy, std::span<double> dw,
                            std::span<double> db) {
  for (std::size_t i = 0; i < d.in; ++i) {
    for (std::size_t o = 0; o < d.out; ++o) {
      double acc = 0.0;
      for (std::size_t r = 0; r < d.batch; ++r) acc += x[r * d.in + i] * dy[r * d.out + o];
      dw[i * d.out + o] += acc;
    }
  }
  for (std::size_t o = 0; o < d.out; ++o) {
    double acc = 0.0;
    for (std::size_t r = 0; r < d.batch; ++r) acc += dy[r * d.out + o];
    db[o] += acc;
  }
}

}  // namespace reference

namespace parallel {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;
using ConstStrided = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;
using Strided = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;

// Fixed tile size, so the partition (and hence every rounding) is the same
// whatever the thread count.
constexpr std::size_t kTile = 32;

std::size_t tiles(std::size_t n) { return (n + kTile - 1) / kTile; }

}  // namespace

void linear_forward(Dims d, std::span<const double> x, std::span<const double> w, std::span<const double> b,
                    std::span<double> y) {
  const auto in = static_cast<Eigen::Index>(d.in);
  const auto out = static_cast<Eigen::Index>(d.out);
  const ConstMap W(w.data(), in, out);
  const Eigen::Map<const Eigen::RowVectorXd> B(b.data(), out);
  const std::size_t n = tiles(d.batch);
#pragma omp parallel for schedule(static)
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t r0 = t * kTile;
    const auto rows = static_cast<Eigen::Index>(std::min(kTile, d.batch - r0));
    const ConstMap X(x.data() + r0 * d.in, rows, in);
    Map Y(y.data() + r0 * d.out, rows, out);
    Y.noalias() = X * W;
    Y.rowwise() += B;
  }
}

void linear_backward_input(Dims d, std::span<const double> dy, std::span<const double> w, std::span<double> dx) {
  const auto in = static_cast<Eigen::Index>(d.in);
  const auto out = static_cast<Eigen::Index>(d.out);
  const ConstMap W(w.data(), in, out);
  const std::size_t n = tiles(d.batch);
#pragma omp parallel for schedule(static)
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t r0 = t * kTile;
    const auto rows = static_cast<Eigen::Index>(std::min(kTile, d.batch - r0));
    const ConstMap G(dy.data() + r0 * d.out, rows, out);
    Map DX(dx.data() + r0 * d.in, rows, in);
    DX.noalias() = G * W.transpose();
  }
}

void linear_backward_params(Dims d, std::span<const double> x, std::span<const double> dy, std::span<double> dw,
                            std::span<double> db) {
  const auto batch = static_cast<Eigen::Index>(d.batch);
  const auto out = static_cast<Eigen::Index>(d.out);
  const ConstMap G(dy.data(), batch, out);
  const std::size_t n = tiles(d.in);
  // Each tile owns a band of input rows of dW.
#pragma omp parallel for schedule(static)
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t i0 = t * kTile;
    const auto cols = static_cast<Eigen::Index>(std::min(kTile, d.in - i0));
    const ConstStrided X(x.data() + i0, batch, cols, Eigen::OuterStride<>(static_cast<Eigen::Index>(d.in)));
    Map DW(dw.data() + i0 * d.out, cols, out);
    DW.noalias() += X.transpose() * G;
  }
  // Plain row-order loop: Eigen's vectorized column sums peel unaligned
  // leading elements, which ties the rounding to the buffer address.
  for (std::size_t r = 0; r < d.batch; ++r) {
    const double* g = dy.data() + r * d.out;
    for (std::size_t o = 0; o < d.out; ++o) db[o] += g[o];
  }
}

}  // namespace parallel

}  // namespace tecrl::kernels
