#pragma once

#include "can/rng.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace can {

struct BatchPlan {
  std::size_t classes_per_batch = 3;
  std::size_t per_class_source = 8;
  std::size_t per_class_target = 8;
  std::size_t ce_batch_size = 32;
};

// Target samples that survived filtering, with their pseudo-labels.
struct PseudoLabeledSet {
  std::vector<std::size_t> indices;  // rows of the target dataset
  std::vector<int> labels;
  std::vector<int> classes;  // sorted; eligible classes for sampling
};

// Row indices and labels for one discrepancy mini-batch. Samples are grouped
// by class in the order of `classes`.
struct ClassAwareBatch {
  std::vector<int> classes;
  std::vector<std::size_t> source_indices;
  std::vector<int> source_labels;
  std::vector<std::size_t> target_indices;
  std::vector<int> target_labels;
};

// Picks up to plan.classes_per_batch classes from target.classes, then draws the
// per-class quotas from each domain, without replacement while the pool allows
// and with replacement otherwise.
ClassAwareBatch class_aware_batch(const BatchPlan& plan, Rng& rng, std::span<const int> source_labels,
                                  const PseudoLabeledSet& target);

// Class-agnostic draw of `count` indices from [0, pool_size). Without
// replacement when count <= pool_size (a prefix of a random permutation).
std::vector<std::size_t> uniform_batch(std::size_t count, std::size_t pool_size, Rng& rng);

// Cross-entropy mini-batch over the source set.
std::vector<std::size_t> uniform_source_batch(const BatchPlan& plan, std::size_t source_size, Rng& rng);

}  // namespace can
