#pragma once

#include "can/kernels.hpp"
#include "can/matrix.hpp"

#include <map>
#include <tuple>
#include <vector>

namespace can {

// Per-layer source and target features with their class labels. Target labels
// are pseudo-labels during training and ground truth only for diagnostics.
struct LabeledBatch {
  std::vector<Matrix> source_features;
  std::vector<Matrix> target_features;
  std::vector<int> source_labels;
  std::vector<int> target_labels;
  // Sorted class ids taking part in this batch.
  std::vector<int> class_set;

  std::size_t layers() const { return source_features.size(); }
};

// Squared empirical MMD between two sample sets (biased estimator; the i = j
// terms are kept).
double mmd_squared(const KernelSpec& spec, const Matrix& source, const Matrix& target);

// 1 iff y == c and y_prime == c_prime.
inline int class_mask(int y, int y_prime, int c, int c_prime) {
  return (y == c && y_prime == c_prime) ? 1 : 0;
}

struct PairTerms {
  double value = 0.0;
  double e1 = 0.0;  // source-source, class c1
  double e2 = 0.0;  // target-target, class c2
  double e3 = 0.0;  // source-target, classes (c1, c2)
};

// Class-conditional squared MMD between source class c1 and target class c2 on one layer.
PairTerms class_pair_discrepancy(const KernelSpec& spec, const LabeledBatch& batch, std::size_t layer,
                                 int c1, int c2);

struct LayerCdd {
  double intra = 0.0;
  double inter = 0.0;
  double total = 0.0;
};

struct CddValue {
  double total = 0.0;
  double intra = 0.0;
  double inter = 0.0;
  // Keyed by (layer, c1, c2).
  std::map<std::tuple<std::size_t, int, int>, double> per_pair;
  std::vector<LayerCdd> per_layer;
};

struct CddOptions {
  // false drops the inter-class term (total = intra).
  bool include_inter = true;
  // Strict mode (false) requires every class in class_set to appear in both
  // domains and every label to lie in class_set. When true, class_set is
  // derived from the labels and intra/inter averages run only over the pairs
  // with samples on both sides.
  bool skip_missing_pairs = false;
};

// Contrastive domain discrepancy summed over layers; one kernel per layer.
CddValue cdd(const std::vector<KernelSpec>& specs, const LabeledBatch& batch, const CddOptions& options = {});

struct FeatureGrad {
  Matrix source;
  Matrix target;
};

// Gradient of cdd(...).total with respect to every source and target feature entry, per layer.
std::vector<FeatureGrad> cdd_grad(const std::vector<KernelSpec>& specs, const LabeledBatch& batch,
                                  const CddOptions& options = {});

// Per-layer median-heuristic kernels for a batch (pooled source and target rows).
std::vector<KernelSpec> kernels_for_batch(const LabeledBatch& batch);

}  // namespace can
