#ifndef PWNN_DETAIL_VMATH_HPP
#define PWNN_DETAIL_VMATH_HPP

#include <cstddef>

// Array versions of libm functions. The implementation unit is compiled so the
// loops bind to glibc's vector math routines; results stay within a few ulp of
// the scalar functions.

namespace pwnn::detail {

void vsin(const double* x, double* out, std::ptrdiff_t n);
void vcos(const double* x, double* out, std::ptrdiff_t n);
void vtanh(const double* x, double* out, std::ptrdiff_t n);

}  // namespace pwnn::detail

#endif  // PWNN_DETAIL_VMATH_HPP
