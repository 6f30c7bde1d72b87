#pragma once

#include <cstdint>
#include <functional>

#include "tcdc/tensor.hpp"

namespace tcdc {

// Thread-count control for the OpenMP kernels. Honors the TCDC_THREADS
// environment variable on first use; defaults to the OpenMP runtime value.
void set_num_threads(int n);
int num_threads();

// Deterministic parallel reduction: the range is split into a fixed number
// of chunks, chunk partials are computed in parallel (serial within each
// chunk) and combined in chunk order. The result is bitwise identical for
// any thread count.
real deterministic_sum(std::int64_t n, const std::function<real(std::int64_t)>& term);

// Same contract, specialized for summing an array (avoids the call overhead
// of the functional form on hot paths).
real deterministic_sum(const real* values, std::int64_t n);

}  // namespace tcdc
