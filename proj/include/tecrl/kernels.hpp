#pragma once

#include <cstddef>
#include <span>

// Dense layer kernels. Weights are stored input-major, W[i * out + o], so the
// forward pass and the weight gradient are row-wise axpys over contiguous
// output columns.
//
// `reference` is the plain serial version kept as the test oracle;
// `parallel` is what the networks run: fixed 32-row tiles spread over OpenMP
// threads, each tile a small Eigen GEMM. Tiles write disjoint output rows,
// so results do not depend on the thread count.

namespace tecrl::kernels {

struct Dims {
  std::size_t batch;
  std::size_t in;
  std::size_t out;
};

namespace reference {

/// y = x W + b
void linear_forward(Dims d, std::span<const double> x, std::span<const double> w, std::span<const double> b,
                    std::span<double> y);
/// dx = dy W^T (overwrites dx)
void linear_backward_input(Dims d, std::span<const double> dy, std::span<const double> w, std::span<double> dx);
/// dw += x^T dy, db += colsum(dy)
void linear_backward_params(Dims d, std::span<const double> x, std::span<const double> dy, std::span<double> dw,
                            std::span<double> db);

}  // namespace reference

namespace parallel {

void linear_forward(Dims d, std::span<const double> x, std::span<const double> w, std::span<const double> b,
                    std::span<double> y);
void linear_backward_input(Dims d, std::span<const double> dy, std::span<const double> w, std::span<double> dx);
void linear_backward_params(Dims d, std::span<const double> x, std::span<const double> dy, std::span<double> dw,
                            std::span<double> db);

}  // namespace parallel

}  // namespace tecrl::kernels
