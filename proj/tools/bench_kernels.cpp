// Microbenchmark comparing the OpenMP kernels against the serial reference.
// Prints per-kernel timings, GFLOP/s and the parallel speedup.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "tcdc/kernels.hpp"
#include "tcdc/parallel.hpp"
#include "tcdc/tensor.hpp"

using namespace tcdc;
using kernels::ConvDims;
using i64 = std::int64_t;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) fn();
  auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const std::string& name, double flops, double ms_par,
            double ms_ref) {
  std::printf("%-28s %8.2f ms  %7.2f GF/s   ref %8.2f ms  speedup %.2fx\n",
              name.c_str(), ms_par, flops / ms_par / 1e6, ms_ref,
              ms_ref / ms_par);
}

}  // namespace

int main(int argc, char** argv) {
  int reps = argc > 1 ? std::atoi(argv[1]) : 3;
  std::printf("threads: %d\n", num_threads());

  Rng rng(7);
  {
    const int m = 192, k = 1600, n = 4096;
    std::vector<real> a(static_cast<i64>(m) * k), b(static_cast<i64>(k) * n),
        c(static_cast<i64>(m) * n);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    const double flops = 2.0 * m * k * n;
    double par = time_ms([&] { kernels::gemm(m, k, n, a.data(), b.data(), c.data()); }, reps);
    double ref = time_ms([&] { kernels::ref::gemm(m, k, n, a.data(), b.data(), c.data()); }, 1);
    report("gemm 192x1600x4096", flops, par, ref);
  }

  // Conv geometry similar to the first analysis-transform layer.
  auto d = ConvDims::conv(8, 32, 32, 32, 64, 5, 2, 2);
  std::vector<real> x(d.in_numel()), w(static_cast<i64>(d.out_c) * d.in_c * 25),
      bias(d.out_c), y(d.out_numel()), dx(d.in_numel()), dw(w.size()),
      db(d.out_c);
  for (auto& v : x) v = rng.normal();
  for (auto& v : w) v = rng.normal(0.0, 0.1);
  const double conv_flops =
      2.0 * d.batch * d.out_c * d.out_h * d.out_w * d.in_c * d.kh * d.kw;

  double par = time_ms(
      [&] { kernels::conv2d_forward(x.data(), w.data(), bias.data(), y.data(), d); },
      reps);
  double ref = time_ms(
      [&] { kernels::ref::conv2d_forward(x.data(), w.data(), bias.data(), y.data(), d); },
      1);
  report("conv fwd 8x32x32x32 k5s2", conv_flops, par, ref);

  par = time_ms(
      [&] { kernels::conv2d_backward_input(y.data(), w.data(), dx.data(), d); },
      reps);
  ref = time_ms(
      [&] { kernels::ref::conv2d_backward_input(y.data(), w.data(), dx.data(), d); },
      1);
  report("conv bwd input", conv_flops, par, ref);

  par = time_ms(
      [&] {
        std::fill(dw.begin(), dw.end(), 0.0);
        std::fill(db.begin(), db.end(), 0.0);
        kernels::conv2d_backward_params(y.data(), x.data(), dw.data(), db.data(), d);
      },
      reps);
  ref = time_ms(
      [&] {
        std::fill(dw.begin(), dw.end(), 0.0);
        std::fill(db.begin(), db.end(), 0.0);
        kernels::ref::conv2d_backward_params(y.data(), x.data(), dw.data(), db.data(), d);
      },
      1);
  report("conv bwd params", conv_flops, par, ref);

  return 0;
}
