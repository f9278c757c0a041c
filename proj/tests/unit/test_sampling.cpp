#include "can/error.hpp"
#include "can/sampling.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace can;

namespace {

std::vector<int> balanced_labels(std::size_t classes, std::size_t per_class) {
  std::vector<int> y;
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t i = 0; i < per_class; ++i) y.push_back(static_cast<int>(c));
  return y;
}

PseudoLabeledSet target_set(std::size_t classes, std::size_t per_class) {
  PseudoLabeledSet t;
  const std::vector<int> y = balanced_labels(classes, per_class);
  for (std::size_t i = 0; i < y.size(); ++i) {
    t.indices.push_back(1000 + i);
    t.labels.push_back(y[i]);
  }
  for (std::size_t c = 0; c < classes; ++c) t.classes.push_back(static_cast<int>(c));
  return t;
}

}  // namespace

TEST_SUITE("sampling") {
  TEST_CASE("class-aware batch with large pools") {
    const std::vector<int> source = balanced_labels(5, 100);
    const PseudoLabeledSet target = target_set(5, 100);
    Rng rng(3);
    const ClassAwareBatch b = class_aware_batch(BatchPlan{}, rng, source, target);
    CHECK(b.classes.size() == 3);
    CHECK(std::is_sorted(b.classes.begin(), b.classes.end()));
    CHECK(b.source_indices.size() == 24);
    CHECK(b.target_indices.size() == 24);
    for (std::size_t k = 0; k < 24; ++k) {
      CHECK(source[b.source_indices[k]] == b.source_labels[k]);
      CHECK(b.target_labels[k] == target.labels[b.target_indices[k] - 1000]);
      CHECK(b.source_labels[k] == b.classes[k / 8]);
      CHECK(b.target_labels[k] == b.classes[k / 8]);
    }
    CHECK(std::set(b.source_indices.begin(), b.source_indices.end()).size() == 24);
    CHECK(std::set(b.target_indices.begin(), b.target_indices.end()).size() == 24);
  }

  TEST_CASE("fewer eligible classes than requested uses all of them") {
    PseudoLabeledSet target = target_set(4, 10);
    target.classes = {1, 3};
    Rng rng(4);
    const ClassAwareBatch b = class_aware_batch(BatchPlan{}, rng, balanced_labels(4, 10), target);
    CHECK(b.classes == std::vector<int>{1, 3});
  }

  TEST_CASE("replacement fallback for a tiny pool") {
    const PseudoLabeledSet target = target_set(1, 2);
    Rng rng(5);
    BatchPlan plan;
    plan.classes_per_batch = 1;
    const ClassAwareBatch b = class_aware_batch(plan, rng, balanced_labels(1, 50), target);
    CHECK(b.target_indices.size() == 8);
    for (std::size_t i : b.target_indices) CHECK((i == 1000 || i == 1001));
  }

  TEST_CASE("determinism") {
    const std::vector<int> source = balanced_labels(6, 30);
    const PseudoLabeledSet target = target_set(6, 20);
    Rng a(77), b(77);
    for (int rep = 0; rep < 5; ++rep) {
      const ClassAwareBatch x = class_aware_batch(BatchPlan{}, a, source, target);
      const ClassAwareBatch y = class_aware_batch(BatchPlan{}, b, source, target);
      CHECK(x.source_indices == y.source_indices);
      CHECK(x.target_indices == y.target_indices);
    }
    Rng c(9), d(9);
    CHECK(uniform_source_batch(BatchPlan{}, 100, c) == uniform_source_batch(BatchPlan{}, 100, d));
  }

  TEST_CASE("empty pools are rejected") {
    PseudoLabeledSet target = target_set(2, 5);
    Rng rng(1);
    BatchPlan plan;
    plan.classes_per_batch = 2;
    CHECK_THROWS_AS(class_aware_batch(plan, rng, balanced_labels(1, 5), target), Error);
    target.classes.clear();
    CHECK_THROWS_AS(class_aware_batch(plan, rng, balanced_labels(2, 5), target), Error);
    CHECK_THROWS_AS(uniform_source_batch(plan, 0, rng), Error);
  }

  TEST_CASE("full-size source batch is a permutation") {
    BatchPlan plan;
    plan.ce_batch_size = 40;
    Rng rng(8);
    std::vector<std::size_t> b = uniform_source_batch(plan, 40, rng);
    std::ranges::sort(b);
    for (std::size_t i = 0; i < 40; ++i) CHECK(b[i] == i);
  }

  TEST_CASE("source draws are class-balanced within three sigma") {
    const std::vector<int> labels = balanced_labels(2, 50);
    BatchPlan plan;
    plan.ce_batch_size = 1;
    Rng rng(11);
    const int n = 10000;
    int ones = 0;
    for (int k = 0; k < n; ++k) ones += labels[uniform_source_batch(plan, labels.size(), rng)[0]];
    const double sigma = std::sqrt(n * 0.25);
    CHECK(std::abs(ones - n / 2.0) < 3.0 * sigma);
  }

  TEST_CASE("separate streams do not interfere") {
    const std::vector<int> source = balanced_labels(4, 30);
    const PseudoLabeledSet target = target_set(4, 30);
    Rng cas_a(derive_seed(5, 12)), ce_a(derive_seed(5, 11));
    Rng cas_b(derive_seed(5, 12)), ce_b(derive_seed(5, 11));
    const auto ce_only = uniform_source_batch(BatchPlan{}, 120, ce_a);
    for (int k = 0; k < 10; ++k) class_aware_batch(BatchPlan{}, cas_b, source, target);
    CHECK(uniform_source_batch(BatchPlan{}, 120, ce_b) == ce_only);
    const auto cas_only = class_aware_batch(BatchPlan{}, cas_a, source, target);
    Rng cas_c(derive_seed(5, 12));
    for (int k = 0; k < 10; ++k) uniform_source_batch(BatchPlan{}, 120, ce_b);
    CHECK(class_aware_batch(BatchPlan{}, cas_c, source, target).target_indices == cas_only.target_indices);
  }
}
