#include "can/kernels.hpp"

#include "can/error.hpp"
#include "can/simd.hpp"

#include <algorithm>
#include <cmath>

namespace can {

KernelSpec KernelSpec::single(double bandwidth) {
  KernelSpec s{{bandwidth}, {1.0}};
  s.validate();
  return s;
}

KernelSpec KernelSpec::multi_scale(double base) {
  KernelSpec s;
  for (double f : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    s.bandwidths.push_back(base * f);
    s.weights.push_back(0.2);
  }
  s.validate();
  return s;
}

void KernelSpec::validate() const {
  if (bandwidths.empty() || bandwidths.size() != weights.size()) {
    throw Error("kernel spec: bandwidth and weight lists must have equal nonzero length");
  }
  double total = 0.0;
  for (std::size_t m = 0; m < bandwidths.size(); ++m) {
    if (!(bandwidths[m] > 0.0) || !std::isfinite(bandwidths[m])) {
      throw Error("kernel spec: bandwidths must be positive");
    }
    if (!(weights[m] > 0.0)) throw Error("kernel spec: weights must be positive");
    total += weights[m];
  }
  if (std::abs(total - 1.0) > 1e-12) throw Error("kernel spec: weights must sum to 1");
}

double median_heuristic(const Matrix& a, const Matrix& b) {
  const std::size_t n = a.rows() + b.rows();
  if (n == 0) throw Error("no samples for bandwidth");
  if (n < 2) throw Error("median heuristic needs at least two samples");
  if (a.rows() > 0 && b.rows() > 0 && a.cols() != b.cols()) {
    throw Error("median heuristic: dimension mismatch");
  }
  auto pooled_row = [&](std::size_t i) { return i < a.rows() ? a.row(i) : b.row(i - a.rows()); };
  std::vector<double> d;
  d.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) d.push_back(simd::squared_distance(pooled_row(i), pooled_row(j)));

  // Lower-upper average for even counts.
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  double median = d[mid];
  if (d.size() % 2 == 0) {
    const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (lower + median);
  }
  return median > 0.0 ? median : 1.0;
}

namespace {

void check_spec_and_dims(const KernelSpec& spec, const Matrix& a, const Matrix& b) {
  spec.validate();
  if (a.cols() != b.cols()) throw Error("kernel matrix: dimension mismatch");
}

}  // namespace

Matrix kernel_matrix(const KernelSpec& spec, const Matrix& a, const Matrix& b) {
  check_spec_and_dims(spec, a, b);
  Matrix k(a.rows(), b.rows());
  const std::size_t nb = spec.bandwidths.size();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double d2 = simd::squared_distance(a.row(i), b.row(j));
      double v = 0.0;
      for (std::size_t m = 0; m < nb; ++m) v += spec.weights[m] * std::exp(-d2 / (2.0 * spec.bandwidths[m]));
      k(i, j) = v;
    }
  }
  return k;
}

KernelGrad kernel_matrix_grad(const KernelSpec& spec, const Matrix& a, const Matrix& b,
                              const Matrix& upstream) {
  check_spec_and_dims(spec, a, b);
  if (upstream.rows() != a.rows() || upstream.cols() != b.rows()) {
    throw Error("kernel matrix grad: upstream shape mismatch");
  }
  KernelGrad g{Matrix(a.rows(), a.cols()), Matrix(b.rows(), b.cols())};
  const std::size_t nb = spec.bandwidths.size();
  std::vector<double> diff(a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double u = upstream(i, j);
      if (u == 0.0) continue;
      const double d2 = simd::squared_distance(a.row(i), b.row(j));
      // dK/d(a_i) = sum_m w_m exp(-d2 / 2s_m) (b_j - a_i) / s_m
      double coef = 0.0;
      for (std::size_t m = 0; m < nb; ++m) {
        coef += spec.weights[m] * std::exp(-d2 / (2.0 * spec.bandwidths[m])) / spec.bandwidths[m];
      }
      coef *= u;
      const auto ai = a.row(i);
      const auto bj = b.row(j);
      for (std::size_t c = 0; c < diff.size(); ++c) diff[c] = bj[c] - ai[c];
      simd::axpy(coef, diff, g.grad_a.row(i));
      simd::axpy(-coef, diff, g.grad_b.row(j));
    }
  }
  return g;
}

}  // namespace can
