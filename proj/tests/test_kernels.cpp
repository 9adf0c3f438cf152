#include <gtest/gtest.h>

#include <cmath>
#include <omp.h>

#include "tecrl/kernels.hpp"
#include "test_util.hpp"

using namespace tecrl;
using namespace tecrl::kernels;
using tecrl::testing::random_matrix;

namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

struct Case {
  Dims d;
  Matrix x, w, b, dy;
};

Case make_case(Dims d, std::uint64_t seed) {
  Rng rng(seed);
  return {d, random_matrix(d.batch, d.in, rng), random_matrix(d.in, d.out, rng), random_matrix(1, d.out, rng),
          random_matrix(d.batch, d.out, rng)};
}

}  // namespace

class KernelShapes : public ::testing::TestWithParam<Dims> {};

TEST_P(KernelShapes, ParallelMatchesReference) {
  const Case c = make_case(GetParam(), 17);
  const Dims d = c.d;

  std::vector<double> y_ref(d.batch * d.out), y_par(d.batch * d.out);
  reference::linear_forward(d, c.x.values(), c.w.values(), c.b.values(), y_ref);
  parallel::linear_forward(d, c.x.values(), c.w.values(), c.b.values(), y_par);
  EXPECT_LE(max_abs_diff(y_ref, y_par), 1e-12);

  std::vector<double> dx_ref(d.batch * d.in, 5.0), dx_par(d.batch * d.in, -5.0);
  reference::linear_backward_input(d, c.dy.values(), c.w.values(), dx_ref);
  parallel::linear_backward_input(d, c.dy.values(), c.w.values(), dx_par);
  EXPECT_LE(max_abs_diff(dx_ref, dx_par), 1e-12);

  // Parameter gradients accumulate; start both from the same nonzero state.
  std::vector<double> dw_ref(d.in * d.out, 0.25), dw_par(d.in * d.out, 0.25);
  std::vector<double> db_ref(d.out, -1.0), db_par(d.out, -1.0);
  reference::linear_backward_params(d, c.x.values(), c.dy.values(), dw_ref, db_ref);
  parallel::linear_backward_params(d, c.x.values(), c.dy.values(), dw_par, db_par);
  EXPECT_LE(max_abs_diff(dw_ref, dw_par), 1e-11);
  EXPECT_LE(max_abs_diff(db_ref, db_par), 1e-11);
}

INSTANTIATE_TEST_SUITE_P(Shapes, KernelShapes,
                         ::testing::Values(Dims{1, 1, 1}, Dims{3, 2, 5}, Dims{31, 7, 4}, Dims{32, 8, 8},
                                           Dims{33, 9, 3}, Dims{256, 65, 64}, Dims{100, 256, 1}));

TEST(Kernels, ParallelIsThreadCountInvariant) {
  const Case c = make_case({257, 40, 33}, 3);
  const Dims d = c.d;
  auto run = [&](int threads) {
    omp_set_num_threads(threads);
    std::vector<double> y(d.batch * d.out), dw(d.in * d.out, 0.0), db(d.out, 0.0);
    parallel::linear_forward(d, c.x.values(), c.w.values(), c.b.values(), y);
    parallel::linear_backward_params(d, c.x.values(), c.dy.values(), dw, db);
    y.insert(y.end(), dw.begin(), dw.end());
    y.insert(y.end(), db.begin(), db.end());
    return y;
  };
  const int saved = omp_get_max_threads();
  const auto one = run(1);
  const auto four = run(4);
  omp_set_num_threads(saved);
  EXPECT_EQ(one, four);
}

TEST(Kernels, ScalarLinearLayer) {
  const Dims d{1, 1, 1};
  std::vector<double> y(1);
  const std::vector<double> x{3.0}, w{2.0}, b{1.0};
  reference::linear_forward(d, x, w, b, y);
  EXPECT_EQ(y[0], 7.0);
  parallel::linear_forward(d, x, w, b, y);
  EXPECT_EQ(y[0], 7.0);
}

TEST(Kernels, ParallelIsAlignmentInvariant) {
  // Same values at shifted addresses must round identically.
  for (Dims d : {Dims{256, 64, 64}, Dims{256, 3, 64}, Dims{1, 64, 64}, Dims{256, 64, 1}, Dims{45, 7, 9}}) {
    const Case c = make_case(d, 21);
    std::vector<double> first;
    for (std::size_t off = 0; off < 8; ++off) {
      auto shifted = [&](const std::vector<double>& v) {
        std::vector<double> s(v.size() + 8, 0.0);
        std::copy(v.begin(), v.end(), s.begin() + static_cast<long>(off));
        return s;
      };
      const auto x = shifted(c.x.values()), w = shifted(c.w.values()), b = shifted(c.b.values());
      const auto dy = shifted(c.dy.values());
      std::vector<double> y(d.batch * d.out + 8), dx(d.batch * d.in + 8), dw(d.in * d.out + 8, 0.0), db(d.out + 8, 0.0);
      auto at = [&](auto& v, std::size_t n) { return std::span(v.data() + off, n); };
      parallel::linear_forward(d, at(x, d.batch * d.in), at(w, d.in * d.out), at(b, d.out), at(y, d.batch * d.out));
      parallel::linear_backward_input(d, at(dy, d.batch * d.out), at(w, d.in * d.out), at(dx, d.batch * d.in));
      parallel::linear_backward_params(d, at(x, d.batch * d.in), at(dy, d.batch * d.out), at(dw, d.in * d.out),
                                       at(db, d.out));
      std::vector<double> all;
      for (auto s : {at(y, d.batch * d.out), at(dx, d.batch * d.in), at(dw, d.in * d.out), at(db, d.out)})
        all.insert(all.end(), s.begin(), s.end());
      if (off == 0) first = all;
      else EXPECT_EQ(all, first) << d.batch << "x" << d.in << "x" << d.out << " offset " << off;
    }
  }
}
