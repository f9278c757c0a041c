#include "can/clustering.hpp"

#include "can/error.hpp"
#include "can/simd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace can {

namespace {

constexpr double kNormEps = 1e-12;

double norm(std::span<const double> v) { return std::sqrt(simd::dot(v, v)); }

// Dissimilarity against a unit-norm center given the sample norm.
double dissimilarity_to_unit(std::span<const double> x, double x_norm, std::span<const double> center) {
  if (x_norm < kNormEps) return 0.5;
  const double cos = std::clamp(simd::dot(x, center) / x_norm, -1.0, 1.0);
  return 0.5 * (1.0 - cos);
}

void normalize_rows(Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const double n = norm(row);
    if (n < kNormEps) continue;
    for (double& v : row) v /= n;
  }
}

struct Assignment {
  std::vector<int> labels;
  std::vector<double> dist;
  double objective = 0.0;
};

Assignment assign(const Matrix& x, const std::vector<double>& norms, const Matrix& centers) {
  Assignment a{std::vector<int>(x.rows()), std::vector<double>(x.rows()), 0.0};
  for (std::size_t i = 0; i < x.rows(); ++i) {
    int best = 0;
    double best_d = dissimilarity_to_unit(x.row(i), norms[i], centers.row(0));
    for (std::size_t c = 1; c < centers.rows(); ++c) {
      const double d = dissimilarity_to_unit(x.row(i), norms[i], centers.row(c));
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    a.labels[i] = best;
    a.dist[i] = best_d;
    a.objective += best_d;
  }
  return a;
}

}  // namespace

double cosine_dissimilarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("cosine dissimilarity: dimension mismatch");
  const double na = norm(a);
  const double nb = norm(b);
  if (na < kNormEps || nb < kNormEps) return 0.5;
  const double cos = std::clamp(simd::dot(a, b) / (na * nb), -1.0, 1.0);
  return 0.5 * (1.0 - cos);
}

Matrix source_class_centers(const Matrix& features, std::span<const int> labels, int num_classes) {
  if (labels.size() != features.rows()) throw Error("source centers: label count mismatch");
  if (num_classes < 1) throw Error("source centers: need at least one class");
  Matrix centers(static_cast<std::size_t>(num_classes), features.cols());
  std::vector<std::size_t> counts(centers.rows(), 0);
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const int c = labels[i];
    if (c < 0 || c >= num_classes) throw Error("source centers: label " + std::to_string(c) + " out of range");
    ++counts[static_cast<std::size_t>(c)];
    const double n = norm(features.row(i));
    if (n < kNormEps) continue;
    simd::axpy(1.0 / n, features.row(i), centers.row(static_cast<std::size_t>(c)));
  }
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) throw Error("uncovered class " + std::to_string(c));
  }
  normalize_rows(centers);
  return centers;
}

double kmeans_objective(const Matrix& features, const Matrix& centers, std::span<const int> assignments) {
  double j = 0.0;
  for (std::size_t i = 0; i < features.rows(); ++i) {
    j += cosine_dissimilarity(features.row(i), centers.row(static_cast<std::size_t>(assignments[i])));
  }
  return j;
}

ClusterState spherical_kmeans(const Matrix& features, const Matrix& init_centers, const KMeansOptions& options) {
  if (features.rows() == 0) throw Error("spherical k-means: no samples");
  if (init_centers.rows() == 0) throw Error("spherical k-means: no centers");
  if (features.cols() != init_centers.cols()) throw Error("spherical k-means: dimension mismatch");

  ClusterState st;
  st.centers = init_centers;
  normalize_rows(st.centers);

  std::vector<double> norms(features.rows());
  for (std::size_t i = 0; i < features.rows(); ++i) {
    norms[i] = norm(features.row(i));
    if (norms[i] < kNormEps) ++st.zero_norm_samples;
  }

  std::vector<int> previous;
  for (int it = 1; it <= options.max_iters; ++it) {
    Assignment a = assign(features, norms, st.centers);
    st.objective_trace.push_back(a.objective);
    if (!previous.empty() && a.labels == previous) {
      st.converged = true;
      break;
    }
    st.iterations_run = it;

    Matrix updated(st.centers.rows(), st.centers.cols());
    std::vector<bool> populated(st.centers.rows(), false);
    for (std::size_t i = 0; i < features.rows(); ++i) {
      if (norms[i] < kNormEps) continue;
      const auto c = static_cast<std::size_t>(a.labels[i]);
      populated[c] = true;
      simd::axpy(1.0 / norms[i], features.row(i), updated.row(c));
    }
    double movement = 0.0;
    for (std::size_t c = 0; c < updated.rows(); ++c) {
      if (!populated[c] || norm(updated.row(c)) < kNormEps) {
        std::ranges::copy(st.centers.row(c), updated.row(c).begin());
        continue;
      }
      auto row = updated.row(c);
      const double n = norm(row);
      for (double& v : row) v /= n;
      movement = std::max(movement, cosine_dissimilarity(st.centers.row(c), row));
    }
    st.centers = std::move(updated);
    previous = std::move(a.labels);
    if (movement < options.tol) {
      st.converged = true;
      break;
    }
  }

  // Final labels are always the argmin against the final centers.
  Assignment final_assign = assign(features, norms, st.centers);
  st.assignments = std::move(final_assign.labels);
  st.dissimilarities = std::move(final_assign.dist);
  return st;
}

FilterResult filter(const ClusterState& state, double d0, std::size_t n0) {
  if (state.assignments.size() != state.dissimilarities.size()) throw Error("filter: inconsistent cluster state");
  std::vector<std::size_t> near;
  std::map<int, std::size_t> counts;
  for (std::size_t i = 0; i < state.assignments.size(); ++i) {
    if (state.dissimilarities[i] < d0) {
      near.push_back(i);
      ++counts[state.assignments[i]];
    }
  }
  FilterResult r;
  r.per_class_counts = counts;
  for (const auto& [c, n] : counts) {
    if (n > n0) r.kept_classes.push_back(c);
  }
  for (std::size_t i : near) {
    if (std::ranges::binary_search(r.kept_classes, state.assignments[i])) r.kept_indices.push_back(i);
  }
  return r;
}

}  // namespace can
