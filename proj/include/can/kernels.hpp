#pragma once

#include "can/matrix.hpp"

#include <vector>

namespace can {

// Mixture of Gaussian RBF kernels: k(x, y) = sum_m w_m exp(-|x - y|^2 / (2 s_m)),
// where s_m is a squared bandwidth.
struct KernelSpec {
  std::vector<double> bandwidths;
  std::vector<double> weights;

  static KernelSpec single(double bandwidth);
  // Five bandwidths base * {1/4, 1/2, 1, 2, 4} with uniform weights.
  static KernelSpec multi_scale(double base);

  // Throws can::Error if the invariants (positive entries, equal nonzero
  // lengths, weights summing to one within 1e-12) do not hold.
  void validate() const;
};

// Median of pairwise squared distances over the pooled rows of a and b,
// self-pairs excluded; 1.0 when that median is zero.
double median_heuristic(const Matrix& a, const Matrix& b);

Matrix kernel_matrix(const KernelSpec& spec, const Matrix& a, const Matrix& b);

struct KernelGrad {
  Matrix grad_a;
  Matrix grad_b;
};

// Gradient of sum_ij upstream(i, j) * K(i, j) with respect to the rows of a and b.
KernelGrad kernel_matrix_grad(const KernelSpec& spec, const Matrix& a, const Matrix& b,
                              const Matrix& upstream);

}  // namespace can
