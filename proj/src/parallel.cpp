#include "tcdc/parallel.hpp"

#include <omp.h>

#include <array>
#include <cstdlib>

namespace tcdc {

namespace {
constexpr int kChunks = 64;

int init_threads() {
  if (const char* env = std::getenv("TCDC_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) omp_set_num_threads(n);
  }
  return omp_get_max_threads();
}

int default_threads() {
  static int n = init_threads();
  return n;
}
}  // namespace

void set_num_threads(int n) {
  omp_set_num_threads(n > 0 ? n : default_threads());
}

int num_threads() {
  (void)default_threads();
  return omp_get_max_threads();
}

real deterministic_sum(std::int64_t n, const std::function<real(std::int64_t)>& term) {
  num_threads();
  std::array<real, kChunks> partial{};
  const std::int64_t step = (n + kChunks - 1) / kChunks;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < kChunks; ++c) {
    const std::int64_t lo = static_cast<std::int64_t>(c) * step;
    const std::int64_t hi = std::min(n, lo + step);
    real s = 0.0;
    for (std::int64_t i = lo; i < hi; ++i) s += term(i);
    partial[static_cast<size_t>(c)] = s;
  }
  real total = 0.0;
  for (int c = 0; c < kChunks; ++c) total += partial[static_cast<size_t>(c)];
  return total;
}

real deterministic_sum(const real* values, std::int64_t n) {
  num_threads();
  std::array<real, kChunks> partial{};
  const std::int64_t step = (n + kChunks - 1) / kChunks;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < kChunks; ++c) {
    const std::int64_t lo = static_cast<std::int64_t>(c) * step;
    const std::int64_t hi = std::min(n, lo + step);
    real s = 0.0;
    for (std::int64_t i = lo; i < hi; ++i) s += values[i];
    partial[static_cast<size_t>(c)] = s;
  }
  real total = 0.0;
  for (int c = 0; c < kChunks; ++c) total += partial[static_cast<size_t>(c)];
  return total;
}

}  // namespace tcdc
