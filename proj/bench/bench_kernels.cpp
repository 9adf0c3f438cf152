// Serial reference kernels vs the tiled OpenMP/Eigen ones, on the layer
// shapes the agents actually run (batch x in x out).

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "tecrl/kernels.hpp"

using namespace tecrl::kernels;

namespace {

struct Buffers {
  Dims d;
  std::vector<double> x, w, b, y, dy, dx, dw, db;

  explicit Buffers(Dims dims)
      : d(dims),
        x(d.batch * d.in),
        w(d.in * d.out),
        b(d.out),
        y(d.batch * d.out),
        dy(d.batch * d.out),
        dx(d.batch * d.in),
        dw(d.in * d.out),
        db(d.out) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto* v : {&x, &w, &b, &dy})
      for (auto& e : *v) e = u(rng);
  }
};

Dims dims_of(const benchmark::State& s) {
  return {static_cast<std::size_t>(s.range(0)), static_cast<std::size_t>(s.range(1)),
          static_cast<std::size_t>(s.range(2))};
}

template <bool Parallel>
void BM_Forward(benchmark::State& state) {
  Buffers buf(dims_of(state));
  for (auto _ : state) {
    if constexpr (Parallel) parallel::linear_forward(buf.d, buf.x, buf.w, buf.b, buf.y);
    else reference::linear_forward(buf.d, buf.x, buf.w, buf.b, buf.y);
    benchmark::DoNotOptimize(buf.y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(buf.d.batch * buf.d.in * buf.d.out));
}

template <bool Parallel>
void BM_Backward(benchmark::State& state) {
  Buffers buf(dims_of(state));
  for (auto _ : state) {
    if constexpr (Parallel) {
      parallel::linear_backward_input(buf.d, buf.dy, buf.w, buf.dx);
      parallel::linear_backward_params(buf.d, buf.x, buf.dy, buf.dw, buf.db);
    } else {
      reference::linear_backward_input(buf.d, buf.dy, buf.w, buf.dx);
      reference::linear_backward_params(buf.d, buf.x, buf.dy, buf.dw, buf.db);
    }
    benchmark::DoNotOptimize(buf.dw.data());
    benchmark::DoNotOptimize(buf.dx.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(2 * buf.d.batch * buf.d.in * buf.d.out));
}

void shapes(benchmark::internal::Benchmark* b) {
  b->Args({256, 4, 64});     // pendulum critic input layer
  b->Args({256, 64, 64});    // hidden layer, acceptance width
  b->Args({256, 64, 1});     // critic head
  b->Args({256, 256, 256});  // hidden layer, default width
  b->Args({1, 3, 64});       // single-state action sampling
}

}  // namespace

BENCHMARK(BM_Forward<false>)->Name("forward/reference")->Apply(shapes);
BENCHMARK(BM_Forward<true>)->Name("forward/parallel")->Apply(shapes);
BENCHMARK(BM_Backward<false>)->Name("backward/reference")->Apply(shapes);
BENCHMARK(BM_Backward<true>)->Name("backward/parallel")->Apply(shapes);

BENCHMARK_MAIN();
