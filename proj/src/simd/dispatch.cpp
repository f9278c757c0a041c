#include "can/simd.hpp"

#include "can/error.hpp"
#include "simd_impl.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace can::simd {

namespace {

const Ops kScalar{detail::dot_scalar, detail::squared_distance_scalar, detail::axpy_scalar};

#ifdef CAN_HAVE_AVX2
const Ops kAvx2{detail::dot_avx2, detail::squared_distance_avx2, detail::axpy_avx2};
#endif

bool cpu_has_avx2() {
#ifdef CAN_HAVE_AVX2
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const Ops* ops_for(Backend b) {
#ifdef CAN_HAVE_AVX2
  if (b == Backend::Avx2) return &kAvx2;
#endif
  (void)b;
  return &kScalar;
}

Backend initial_backend() {
  if (const char* env = std::getenv("CAN_SIMD")) {
    const std::string v(env);
    if (v == "scalar") return Backend::Scalar;
    if (v == "avx2" && cpu_has_avx2()) return Backend::Avx2;
  }
  return cpu_has_avx2() ? Backend::Avx2 : Backend::Scalar;
}

struct Active {
  std::atomic<Backend> backend;
  std::atomic<const Ops*> ops;
  Active() : backend(initial_backend()), ops(ops_for(backend.load())) {}
};

Active& active() {
  static Active a;
  return a;
}

}  // namespace

std::string_view backend_name(Backend b) {
  return b == Backend::Avx2 ? "avx2" : "scalar";
}

bool backend_available(Backend b) {
  return b == Backend::Scalar || cpu_has_avx2();
}

Backend active_backend() { return active().backend.load(); }

void set_backend(Backend b) {
  if (!backend_available(b)) {
    throw Error("simd backend not available: " + std::string(backend_name(b)));
  }
  active().backend.store(b);
  active().ops.store(ops_for(b));
}

const Ops& scalar_ops() { return kScalar; }

const Ops& avx2_ops() {
  if (!backend_available(Backend::Avx2)) throw Error("simd backend not available: avx2");
  return *ops_for(Backend::Avx2);
}

double dot(std::span<const double> a, std::span<const double> b) {
  return active().ops.load(std::memory_order_relaxed)->dot(a.data(), b.data(), a.size());
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().ops.load(std::memory_order_relaxed)->squared_distance(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().ops.load(std::memory_order_relaxed)->axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace can::simd
