#include "can/rng.hpp"
#include "can/simd.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace can;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

}  // namespace

TEST_SUITE("simd") {
  TEST_CASE("scalar reference values") {
    const simd::Ops& s = simd::scalar_ops();
    const double a[] = {1, 2, 3};
    const double b[] = {4, -5, 6};
    CHECK(s.dot(a, b, 3) == 12.0);
    CHECK(s.squared_distance(a, b, 3) == 9.0 + 49.0 + 9.0);
    double y[] = {1, 1, 1};
    s.axpy(2.0, a, y, 3);
    CHECK(y[0] == 3.0);
    CHECK(y[2] == 7.0);
    CHECK(s.dot(a, b, 0) == 0.0);
  }

  TEST_CASE("avx2 matches scalar on every length up to 67") {
    if (!simd::backend_available(simd::Backend::Avx2)) {
      MESSAGE("AVX2 not available; equivalence test skipped");
      return;
    }
    const simd::Ops& s = simd::scalar_ops();
    const simd::Ops& v = simd::avx2_ops();
    Rng rng(5);
    for (std::size_t n = 0; n <= 67; ++n) {
      const auto a = random_vector(rng, n), b = random_vector(rng, n);
      const double scale = s.dot(a.data(), a.data(), n) + s.dot(b.data(), b.data(), n) + 1.0;
      CHECK(std::abs(s.dot(a.data(), b.data(), n) - v.dot(a.data(), b.data(), n)) <= 1e-14 * scale);
      CHECK(std::abs(s.squared_distance(a.data(), b.data(), n) - v.squared_distance(a.data(), b.data(), n)) <=
            1e-14 * scale);
      auto y1 = random_vector(rng, n);
      auto y2 = y1;
      s.axpy(0.37, a.data(), y1.data(), n);
      v.axpy(0.37, a.data(), y2.data(), n);
      CHECK(y1 == y2);
    }
  }

  TEST_CASE("backend switch is observable and reversible") {
    const simd::Backend before = simd::active_backend();
    simd::set_backend(simd::Backend::Scalar);
    CHECK(simd::active_backend() == simd::Backend::Scalar);
    const std::vector<double> a{1, 2}, b{3, 4};
    CHECK(simd::dot(a, b) == 11.0);
    simd::set_backend(before);
    CHECK(simd::active_backend() == before);
    CHECK(simd::backend_name(simd::Backend::Scalar) == "scalar");
  }
}
