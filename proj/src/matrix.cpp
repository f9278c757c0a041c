#include "can/matrix.hpp"

#include "can/error.hpp"
#include "can/simd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace can {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw Error("ragged matrix initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix select_rows(const Matrix& m, std::span<const std::size_t> indices) {
  Matrix out(indices.size(), m.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= m.rows()) throw Error("row index out of range");
    std::ranges::copy(m.row(indices[i]), out.row(i).begin());
  }
  return out;
}

Matrix vstack(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw Error("vstack: column mismatch");
  Matrix out(a.rows() + b.rows(), a.cols());
  std::ranges::copy(a.values(), out.values().begin());
  std::ranges::copy(b.values(), out.values().begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

Matrix pad_columns(const Matrix& m, std::size_t cols) {
  if (cols < m.cols()) throw Error("pad_columns: cannot shrink");
  Matrix out(m.rows(), cols);
  for (std::size_t r = 0; r < m.rows(); ++r) std::ranges::copy(m.row(r), out.row(r).begin());
  return out;
}

Matrix affine(const Matrix& a, const Matrix& w, std::span<const double> bias) {
  if (a.cols() != w.cols() || bias.size() != w.rows()) {
    throw Error("affine: shape mismatch (input width " + std::to_string(a.cols()) +
                ", weight " + std::to_string(w.rows()) + "x" + std::to_string(w.cols()) + ")");
  }
  Matrix out(a.rows(), w.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto x = a.row(i);
    auto y = out.row(i);
    for (std::size_t o = 0; o < w.rows(); ++o) y[o] = simd::dot(x, w.row(o)) + bias[o];
  }
  return out;
}

void accumulate_affine_param_grad(const Matrix& upstream, const Matrix& a, Matrix& grad_w,
                                  std::span<double> grad_b) {
  if (upstream.rows() != a.rows() || upstream.cols() != grad_w.rows() ||
      a.cols() != grad_w.cols() || grad_b.size() != grad_w.rows()) {
    throw Error("affine grad: shape mismatch");
  }
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto x = a.row(i);
    const auto g = upstream.row(i);
    for (std::size_t o = 0; o < grad_w.rows(); ++o) {
      if (g[o] == 0.0) continue;
      simd::axpy(g[o], x, grad_w.row(o));
      grad_b[o] += g[o];
    }
  }
}

Matrix affine_input_grad(const Matrix& upstream, const Matrix& w) {
  if (upstream.cols() != w.rows()) throw Error("affine input grad: shape mismatch");
  Matrix out(upstream.rows(), w.cols());
  for (std::size_t i = 0; i < upstream.rows(); ++i) {
    const auto g = upstream.row(i);
    auto dx = out.row(i);
    for (std::size_t o = 0; o < w.rows(); ++o) {
      if (g[o] == 0.0) continue;
      simd::axpy(g[o], w.row(o), dx);
    }
  }
  return out;
}

Matrix center_columns(const Matrix& m) {
  Matrix out = m;
  if (m.rows() == 0) return out;
  std::vector<double> mean(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) mean[j] += m(i, j);
  for (double& v : mean) v /= static_cast<double>(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) -= mean[j];
  return out;
}

bool all_finite(std::span<const double> v) {
  return std::ranges::all_of(v, [](double x) { return std::isfinite(x); });
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace can
