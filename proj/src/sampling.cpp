#include "can/sampling.hpp"

#include "can/error.hpp"

#include <algorithm>
#include <map>
#include <string>

namespace can {

namespace {

std::vector<std::size_t> draw(const std::vector<std::size_t>& pool, std::size_t count, Rng& rng) {
  std::vector<std::size_t> out;
  out.reserve(count);
  if (pool.size() >= count) {
    for (std::size_t k : rng.sample_without_replacement(pool.size(), count)) out.push_back(pool[k]);
  } else {
    for (std::size_t k = 0; k < count; ++k) out.push_back(pool[rng.index(pool.size())]);
  }
  return out;
}

}  // namespace

ClassAwareBatch class_aware_batch(const BatchPlan& plan, Rng& rng, std::span<const int> source_labels,
                                  const PseudoLabeledSet& target) {
  if (plan.per_class_source == 0 || plan.per_class_target == 0 || plan.classes_per_batch == 0) {
    throw Error("batch plan: per-class counts must be positive");
  }
  if (target.indices.size() != target.labels.size()) throw Error("pseudo-labeled set: size mismatch");
  if (target.classes.empty()) throw Error("CAS precondition violated: no eligible classes");

  std::map<int, std::vector<std::size_t>> source_pool;
  for (std::size_t i = 0; i < source_labels.size(); ++i) source_pool[source_labels[i]].push_back(i);
  std::map<int, std::vector<std::size_t>> target_pool;
  for (std::size_t k = 0; k < target.indices.size(); ++k) target_pool[target.labels[k]].push_back(target.indices[k]);

  ClassAwareBatch b;
  const std::size_t take = std::min(plan.classes_per_batch, target.classes.size());
  for (std::size_t k : rng.sample_without_replacement(target.classes.size(), take)) b.classes.push_back(target.classes[k]);
  std::ranges::sort(b.classes);

  for (int c : b.classes) {
    const auto& sp = source_pool[c];
    const auto& tp = target_pool[c];
    if (sp.empty() || tp.empty()) {
      throw Error("CAS precondition violated: class " + std::to_string(c) + " has an empty pool");
    }
    for (std::size_t i : draw(sp, plan.per_class_source, rng)) {
      b.source_indices.push_back(i);
      b.source_labels.push_back(c);
    }
    for (std::size_t i : draw(tp, plan.per_class_target, rng)) {
      b.target_indices.push_back(i);
      b.target_labels.push_back(c);
    }
  }
  return b;
}

std::vector<std::size_t> uniform_batch(std::size_t count, std::size_t pool_size, Rng& rng) {
  if (pool_size == 0) throw Error("uniform batch: empty pool");
  if (count <= pool_size) return rng.sample_without_replacement(pool_size, count);
  std::vector<std::size_t> out(count);
  for (auto& i : out) i = rng.index(pool_size);
  return out;
}

std::vector<std::size_t> uniform_source_batch(const BatchPlan& plan, std::size_t source_size, Rng& rng) {
  if (source_size == 0) throw Error("uniform source batch: empty source set");
  return uniform_batch(plan.ce_batch_size, source_size, rng);
}

}  // namespace can
