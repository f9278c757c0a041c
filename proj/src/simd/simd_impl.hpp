#pragma once

#include <cstddef>

namespace can::simd::detail {

double dot_scalar(const double* a, const double* b, std::size_t n);
double squared_distance_scalar(const double* a, const double* b, std::size_t n);
void axpy_scalar(double alpha, const double* x, double* y, std::size_t n);

#ifdef CAN_HAVE_AVX2
double dot_avx2(const double* a, const double* b, std::size_t n);
double squared_distance_avx2(const double* a, const double* b, std::size_t n);
void axpy_avx2(double alpha, const double* x, double* y, std::size_t n);
#endif

}  // namespace can::simd::detail
