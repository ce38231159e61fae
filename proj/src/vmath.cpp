// Built with -ffast-math -fopenmp-simd (see CMakeLists.txt); keep this unit to
// plain element-wise loops over finite inputs.
#include "pwnn/detail/vmath.hpp"

#include <cmath>

namespace pwnn::detail {

void vsin(const double* __restrict x, double* __restrict out, std::ptrdiff_t n) {
#pragma omp simd
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = std::sin(x[i]);
}

void vcos(const double* __restrict x, double* __restrict out, std::ptrdiff_t n) {
#pragma omp simd
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = std::cos(x[i]);
}

void vtanh(const double* __restrict x, double* __restrict out, std::ptrdiff_t n) {
#pragma omp simd
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = std::tanh(x[i]);
}

}  // namespace pwnn::detail
