#pragma once

#include <span>
#include <string_view>

// Row-level arithmetic kernels shared by the kernel matrices, the dense layers
// and clustering. Each kernel has a portable scalar reference and, on x86-64,
// an AVX2 variant; the active backend is chosen once at startup from CPUID and
// can be overridden with CAN_SIMD=scalar|avx2 or set_backend().
//
// Both backends are deterministic. They differ only in summation order of the
// reductions (four interleaved partial sums on AVX2), so results agree to a
// few ulps, not bitwise.

namespace can::simd {

enum class Backend { Scalar, Avx2 };

std::string_view backend_name(Backend b);
bool backend_available(Backend b);
Backend active_backend();
// Throws can::Error if the backend is not available on this CPU or build.
void set_backend(Backend b);

double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);
// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

// Function table for one backend; exposed so equivalence tests can call both
// implementations side by side.
struct Ops {
  double (*dot)(const double*, const double*, std::size_t);
  double (*squared_distance)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
};

const Ops& scalar_ops();
// Only valid when backend_available(Backend::Avx2).
const Ops& avx2_ops();

}  // namespace can::simd
