#include "can/discrepancy.hpp"
#include "can/error.hpp"
#include "can/gradcheck.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace can;

namespace {

LabeledBatch single_layer(Matrix s, Matrix t, std::vector<int> ys, std::vector<int> yt, std::vector<int> classes) {
  LabeledBatch b;
  b.source_features.push_back(std::move(s));
  b.target_features.push_back(std::move(t));
  b.source_labels = std::move(ys);
  b.target_labels = std::move(yt);
  b.class_set = std::move(classes);
  return b;
}

// Applies a row permutation to one domain of a batch.
void permute(LabeledBatch& b, bool source, const std::vector<std::size_t>& perm) {
  auto& feats = source ? b.source_features : b.target_features;
  auto& labels = source ? b.source_labels : b.target_labels;
  for (auto& f : feats) f = select_rows(f, perm);
  std::vector<int> l;
  for (std::size_t i : perm) l.push_back(labels[i]);
  labels = l;
}

}  // namespace

TEST_SUITE("discrepancy") {
  TEST_CASE("mmd examples") {
    const KernelSpec one = KernelSpec::single(1.0);
    CHECK(mmd_squared(one, Matrix{{0.0}}, Matrix{{1.0}}) == doctest::Approx(2.0 - 2.0 * std::exp(-0.5)).epsilon(1e-14));
    CHECK(mmd_squared(one, Matrix{{0.0}}, Matrix{{1.0}}) == doctest::Approx(0.786939).epsilon(1e-6));
    const Matrix x{{1, 2}, {0, -1}, {3, 3}};
    CHECK(std::abs(mmd_squared(one, x, select_rows(x, std::vector<std::size_t>{2, 0, 1}))) <= 1e-12);
    CHECK_THROWS_WITH_AS(mmd_squared(one, Matrix(0, 1), Matrix{{1.0}}), "empty domain in MMD", Error);
  }

  TEST_CASE("mmd equals the triple-loop reference and is domain symmetric") {
    Rng rng(21);
    for (int trial = 0; trial < 30; ++trial) {
      const Matrix s = oracle::random_matrix(rng, 4, 3), t = oracle::random_matrix(rng, 5, 3);
      const KernelSpec spec = KernelSpec::multi_scale(median_heuristic(s, t));
      CHECK(std::abs(mmd_squared(spec, s, t) - oracle::mmd(spec, s, t)) <= 1e-12);
      CHECK(std::abs(mmd_squared(spec, s, t) - mmd_squared(spec, t, s)) <= 1e-12);
    }
  }

  TEST_CASE("class mask") {
    CHECK(class_mask(1, 2, 1, 2) == 1);
    CHECK(class_mask(1, 1, 1, 2) == 0);
    CHECK(class_mask(0, 0, 0, 0) == 1);
  }

  TEST_CASE("class pair examples") {
    const KernelSpec one = KernelSpec::single(1.0);
    const LabeledBatch b = single_layer(Matrix{{0.0}}, Matrix{{1.0}}, {0}, {1}, {0, 1});
    const PairTerms p = class_pair_discrepancy(one, b, 0, 0, 1);
    CHECK(p.e1 == 1.0);
    CHECK(p.e2 == 1.0);
    CHECK(p.e3 == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
    CHECK(p.value == doctest::Approx(0.786939).epsilon(1e-6));
    CHECK_THROWS_WITH_AS(class_pair_discrepancy(one, b, 0, 1, 1), "empty class pair", Error);

    const Matrix x{{0, 1}, {2, 2}, {5, 5}};
    const LabeledBatch same = single_layer(x, x, {0, 0, 1}, {0, 0, 1}, {0, 1});
    CHECK(std::abs(class_pair_discrepancy(one, same, 0, 0, 0).value) <= 1e-12);
  }

  TEST_CASE("cdd examples") {
    const KernelSpec one = KernelSpec::single(1.0);
    const Matrix x{{0, 0}, {0.1, 0}, {10, 10}, {10, 10.1}};
    const LabeledBatch b = single_layer(x, x, {0, 0, 1, 1}, {0, 0, 1, 1}, {0, 1});
    const CddValue v = cdd({one}, b);
    CHECK(std::abs(v.intra) <= 1e-12);
    CHECK(v.inter > 0.0);
    CHECK(v.total < 0.0);
    CHECK(std::abs(v.total - oracle::cdd({one}, b)) <= 1e-12);

    const LabeledBatch m1 = single_layer(Matrix{{0.0}, {1.0}}, Matrix{{0.5}}, {2, 2}, {2}, {2});
    const CddValue w = cdd({one}, m1);
    CHECK(w.inter == 0.0);
    CHECK(w.total == w.intra);
  }

  TEST_CASE("intra-only option drops the inter term") {
    Rng rng(8);
    const LabeledBatch b = oracle::random_batch(rng, 8, 3, 3, 2);
    const auto specs = kernels_for_batch(b);
    const CddValue full = cdd(specs, b);
    const CddValue intra = cdd(specs, b, CddOptions{false, false});
    CHECK(std::abs(intra.total - full.intra) <= 1e-12);
    CHECK(intra.inter == 0.0);
  }

  TEST_CASE("strict mode rejects missing classes") {
    const KernelSpec one = KernelSpec::single(1.0);
    const LabeledBatch b = single_layer(Matrix{{0.0}, {1.0}}, Matrix{{0.5}}, {0, 1}, {0}, {0, 1});
    CHECK_THROWS_WITH_AS(cdd({one}, b), "empty class pair", Error);
    const CddValue v = cdd({one}, b, CddOptions{true, true});
    // Only (0, 0) and the inter pair (1, 0) have samples on both sides.
    CHECK(std::abs(v.intra - class_pair_discrepancy(one, b, 0, 0, 0).value) <= 1e-12);
    CHECK(std::abs(v.inter - class_pair_discrepancy(one, b, 0, 1, 0).value) <= 1e-12);
  }

  TEST_CASE("oracle equivalence, decomposition, bounds and nonnegativity") {
    Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
      const LabeledBatch b = oracle::random_batch(rng, 8, 3, 4, 2);
      const auto specs = kernels_for_batch(b);
      const CddValue v = cdd(specs, b);
      CHECK(std::abs(v.total - oracle::cdd(specs, b)) <= 1e-12);
      CHECK(std::abs(v.total - (v.intra - v.inter)) <= 1e-12);
      double sum = 0.0;
      for (const LayerCdd& l : v.per_layer) {
        CHECK(std::abs(l.total - (l.intra - l.inter)) <= 1e-12);
        sum += l.total;
      }
      CHECK(std::abs(sum - v.total) <= 1e-12);
      for (const auto& [key, value] : v.per_pair) {
        const auto [layer, c1, c2] = key;
        CHECK(value >= -2.0);
        CHECK(value <= 2.0);
        CHECK(std::abs(value - oracle::pair(specs[layer], b, layer, c1, c2)) <= 1e-12);
        if (c1 == c2) CHECK(value >= -1e-10);
      }
    }
  }

  TEST_CASE("permutation invariance") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
      LabeledBatch b = oracle::random_batch(rng, 8, 3, 3, 2);
      const auto specs = kernels_for_batch(b);
      const CddValue before = cdd(specs, b);
      permute(b, true, rng.sample_without_replacement(b.source_labels.size(), b.source_labels.size()));
      permute(b, false, rng.sample_without_replacement(b.target_labels.size(), b.target_labels.size()));
      const CddValue after = cdd(specs, b);
      CHECK(std::abs(before.total - after.total) <= 1e-12);
      CHECK(std::abs(before.intra - after.intra) <= 1e-12);
      CHECK(std::abs(before.inter - after.inter) <= 1e-12);
      for (const auto& [key, value] : before.per_pair) CHECK(std::abs(value - after.per_pair.at(key)) <= 1e-12);
    }
  }

  TEST_CASE("gradient matches finite differences on 25 instances") {
    Rng rng(4);
    for (int trial = 0; trial < 25; ++trial) {
      LabeledBatch b = oracle::random_batch(rng, 6, 3, 3, 2);
      const auto specs = kernels_for_batch(b);
      const auto g = cdd_grad(specs, b);
      auto f = [&] { return cdd(specs, b).total; };
      for (std::size_t l = 0; l < b.layers(); ++l) {
        CHECK(scaled_max_error(g[l].source.values(), numeric_gradient(f, b.source_features[l].values(), 1e-5)) <= 1e-4);
        CHECK(scaled_max_error(g[l].target.values(), numeric_gradient(f, b.target_features[l].values(), 1e-5)) <= 1e-4);
      }
    }
  }

  TEST_CASE("gradient vanishes when all features coincide") {
    const Matrix x{{1, 2}, {1, 2}, {1, 2}};
    const LabeledBatch b = single_layer(x, x, {0, 1, 1}, {0, 0, 1}, {0, 1});
    const auto g = cdd_grad({KernelSpec::multi_scale(1.0)}, b);
    CHECK(max_abs(g[0].source.values()) == 0.0);
    CHECK(max_abs(g[0].target.values()) == 0.0);
  }

  TEST_CASE("zero padding leaves values and gradients unchanged") {
    Rng rng(12);
    for (int trial = 0; trial < 10; ++trial) {
      const LabeledBatch b = oracle::random_batch(rng, 6, 3, 3, 1);
      LabeledBatch padded = b;
      const std::size_t d = b.source_features[0].cols();
      padded.source_features[0] = pad_columns(b.source_features[0], 2 * d);
      padded.target_features[0] = pad_columns(b.target_features[0], 2 * d);
      const std::vector<KernelSpec> specs{KernelSpec::multi_scale(1.3)};
      CHECK(std::abs(cdd(specs, b).total - cdd(specs, padded).total) <= 1e-12);
      const auto g = cdd_grad(specs, b), gp = cdd_grad(specs, padded);
      for (std::size_t i = 0; i < b.source_features[0].rows(); ++i)
        for (std::size_t k = 0; k < d; ++k) {
          CHECK(std::abs(g[0].source(i, k) - gp[0].source(i, k)) <= 1e-12);
          CHECK(gp[0].source(i, d + k) == 0.0);
        }
    }
  }
}
