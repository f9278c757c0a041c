#pragma once

#include "can/matrix.hpp"

#include <cstddef>
#include <map>
#include <span>
#include <vector>

namespace can {

// Half of one minus cosine similarity, in [0, 1]. A vector with norm below
// 1e-12 is treated as 0.5 away from everything.
double cosine_dissimilarity(std::span<const double> a, std::span<const double> b);

// Per-class sums of unit-normalized source features, normalized to unit length.
// Row c is the center of class c; every class in [0, num_classes) needs a sample.
Matrix source_class_centers(const Matrix& features, std::span<const int> labels, int num_classes);

struct ClusterState {
  Matrix centers;                     // unit rows, one per class
  std::vector<int> assignments;       // argmin over centers, lowest id on ties
  std::vector<double> dissimilarities;  // to the assigned center
  int iterations_run = 0;
  bool converged = false;
  // Clustering objective after each assignment pass.
  std::vector<double> objective_trace;
  std::size_t zero_norm_samples = 0;
};

struct KMeansOptions {
  int max_iters = 100;
  double tol = 1e-6;
};

// Spherical K-means seeded with init_centers (one row per class). A cluster that
// empties keeps its previous center.
ClusterState spherical_kmeans(const Matrix& features, const Matrix& init_centers, const KMeansOptions& options = {});

// Sum of dissimilarities of each sample to its assigned center.
double kmeans_objective(const Matrix& features, const Matrix& centers, std::span<const int> assignments);

struct FilterResult {
  std::vector<std::size_t> kept_indices;
  std::vector<int> kept_classes;
  // Samples per class passing the distance threshold, before class filtering.
  std::map<int, std::size_t> per_class_counts;
};

// Keeps samples closer than d0 to their center, then classes with strictly more
// than n0 kept samples; kept_indices is restricted to the kept classes.
FilterResult filter(const ClusterState& state, double d0, std::size_t n0);

}  // namespace can
