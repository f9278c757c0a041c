#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace can {

// Dense row-major matrix of doubles. Rows are contiguous so per-row kernels
// (dot products, distances, axpy) run on unit-stride spans.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  void fill(double v);
  Matrix transposed() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Gathers the listed rows (duplicates allowed) into a new matrix.
Matrix select_rows(const Matrix& m, std::span<const std::size_t> indices);

// Stacks b under a; column counts must match.
Matrix vstack(const Matrix& a, const Matrix& b);

// Appends zero columns up to `cols` total.
Matrix pad_columns(const Matrix& m, std::size_t cols);

// out = a * w^T + bias, with w stored out_features x in_features.
Matrix affine(const Matrix& a, const Matrix& w, std::span<const double> bias);

// Accumulates grad_w += upstream^T * a and grad_b += column sums of upstream.
void accumulate_affine_param_grad(const Matrix& upstream, const Matrix& a, Matrix& grad_w,
                                  std::span<double> grad_b);

// Returns upstream * w (gradient with respect to the affine input).
Matrix affine_input_grad(const Matrix& upstream, const Matrix& w);

// Subtracts the column means.
Matrix center_columns(const Matrix& m);

bool all_finite(std::span<const double> v);
double max_abs(std::span<const double> v);

}  // namespace can
