#include "can/clustering.hpp"
#include "can/error.hpp"
#include "can/simd.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>

using namespace can;

namespace {

// Minimum clustering objective over every assignment of n points to 2 clusters,
// with each center the normalized sum of its unit members.
double brute_force_two_clusters(const Matrix& x) {
  const std::size_t n = x.rows();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    Matrix centers(2, x.cols());
    std::vector<int> assign(n);
    for (std::size_t i = 0; i < n; ++i) {
      assign[i] = static_cast<int>((mask >> i) & 1U);
      const double norm = std::sqrt(simd::dot(x.row(i), x.row(i)));
      for (std::size_t k = 0; k < x.cols(); ++k) centers(static_cast<std::size_t>(assign[i]), k) += x(i, k) / norm;
    }
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) obj += oracle::cosine(x.row(i), centers.row(static_cast<std::size_t>(assign[i])));
    if (std::isfinite(obj)) best = std::min(best, obj);
  }
  return best;
}

Matrix antipodal_groups(Rng& rng, std::size_t per_group, std::size_t d, double jitter) {
  Matrix dir = oracle::random_matrix(rng, 1, d);
  Matrix x(2 * per_group, d);
  for (std::size_t i = 0; i < 2 * per_group; ++i) {
    const double sign = i < per_group ? 1.0 : -1.0;
    for (std::size_t k = 0; k < d; ++k) x(i, k) = sign * dir(0, k) + jitter * rng.normal();
  }
  return x;
}

}  // namespace

TEST_SUITE("clustering") {
  TEST_CASE("cosine dissimilarity examples") {
    const std::vector<double> a{1, 0}, b{-1, 0}, c{0, 1}, z{0, 0}, s{3, 4};
    CHECK(cosine_dissimilarity(s, s) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(cosine_dissimilarity(a, b) == 1.0);
    CHECK(cosine_dissimilarity(a, c) == 0.5);
    CHECK(cosine_dissimilarity(z, a) == 0.5);
    CHECK(cosine_dissimilarity(a, z) == 0.5);
  }

  TEST_CASE("source class centers") {
    const Matrix one = source_class_centers(Matrix{{3, 4}, {0, -2}}, std::vector<int>{0, 1}, 2);
    CHECK(one(0, 0) == doctest::Approx(0.6));
    CHECK(one(0, 1) == doctest::Approx(0.8));
    CHECK(one(1, 1) == doctest::Approx(-1.0));
    const Matrix two = source_class_centers(Matrix{{1, 0}, {0, 1}}, std::vector<int>{0, 0}, 1);
    CHECK(two(0, 0) == doctest::Approx(std::sqrt(0.5)));
    CHECK(two(0, 1) == doctest::Approx(std::sqrt(0.5)));
    const Matrix col = source_class_centers(Matrix{{1, 2}, {3, 6}}, std::vector<int>{0, 0}, 1);
    CHECK(cosine_dissimilarity(col.row(0), std::vector<double>{1, 2}) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK_THROWS_WITH_AS(source_class_centers(Matrix{{1, 0}}, std::vector<int>{0}, 2), "uncovered class 1", Error);
  }

  TEST_CASE("k-means examples") {
    Rng rng(1);
    const Matrix x = antipodal_groups(rng, 4, 3, 0.01);
    Matrix init(2, 3);
    for (std::size_t k = 0; k < 3; ++k) {
      init(0, k) = x(0, k);
      init(1, k) = x(4, k);
    }
    const ClusterState s = spherical_kmeans(x, init);
    for (std::size_t i = 0; i < 8; ++i) CHECK(s.assignments[i] == (i < 4 ? 0 : 1));
    CHECK(s.converged);
    CHECK(kmeans_objective(x, s.centers, s.assignments) == doctest::Approx(brute_force_two_clusters(x)).epsilon(1e-12));

    const ClusterState single = spherical_kmeans(Matrix{{3, 4}}, Matrix{{1, 0}});
    CHECK(single.assignments == std::vector<int>{0});
    CHECK(single.centers(0, 0) == doctest::Approx(0.6));
    CHECK(single.centers(0, 1) == doctest::Approx(0.8));

    const ClusterState fixed = spherical_kmeans(x, s.centers);
    CHECK(fixed.iterations_run == 1);
    CHECK(fixed.assignments == s.assignments);
  }

  TEST_CASE("k-means reaches the brute-force optimum on separated groups") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t per = 1 + rng.index(4);
      const Matrix x = antipodal_groups(rng, per, 2 + rng.index(3), 0.05);
      const Matrix init = source_class_centers(x, [&] {
        std::vector<int> y(2 * per);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = i < per ? 0 : 1;
        return y;
      }(), 2);
      const ClusterState s = spherical_kmeans(x, init);
      CHECK(kmeans_objective(x, s.centers, s.assignments) ==
            doctest::Approx(brute_force_two_clusters(x)).epsilon(1e-9));
    }
  }

  TEST_CASE("ties go to the lowest class id") {
    const ClusterState s = spherical_kmeans(Matrix{{1, 1}}, Matrix{{1, 0}, {0, 1}}, KMeansOptions{1, 1e-6});
    CHECK(s.assignments[0] == 0);
  }

  TEST_CASE("empty cluster keeps its center") {
    const Matrix init{{1, 0}, {0, 1}, {-1, -1}};
    const ClusterState s = spherical_kmeans(Matrix{{1, 0.1}, {0.1, 1}}, init);
    CHECK(s.centers(2, 0) == doctest::Approx(-std::sqrt(0.5)));
    CHECK(s.centers(2, 1) == doctest::Approx(-std::sqrt(0.5)));
  }

  TEST_CASE("objective never increases and state is deterministic") {
    Rng rng(50);
    for (int run = 0; run < 50; ++run) {
      const Matrix x = oracle::random_matrix(rng, 30, 4);
      const Matrix init = oracle::random_matrix(rng, 3, 4);
      const ClusterState s = spherical_kmeans(x, init);
      for (std::size_t i = 1; i < s.objective_trace.size(); ++i)
        CHECK(s.objective_trace[i] <= s.objective_trace[i - 1] + 1e-12);
      const ClusterState again = spherical_kmeans(x, init);
      CHECK(again.assignments == s.assignments);
      CHECK(again.centers == s.centers);
      CHECK(again.dissimilarities == s.dissimilarities);
    }
  }

  TEST_CASE("center scale invariance") {
    Rng rng(2);
    const Matrix x = oracle::random_matrix(rng, 20, 3);
    Matrix init = oracle::random_matrix(rng, 3, 3);
    const ClusterState a = spherical_kmeans(x, init, KMeansOptions{1, 1e-6});
    for (std::size_t k = 0; k < 3; ++k) init(1, k) *= 7.5;
    const ClusterState b = spherical_kmeans(x, init, KMeansOptions{1, 1e-6});
    CHECK(a.assignments == b.assignments);
  }

  TEST_CASE("zero-norm samples are counted") {
    const ClusterState s = spherical_kmeans(Matrix{{0, 0}, {1, 0}}, Matrix{{1, 0}, {0, 1}});
    CHECK(s.zero_norm_samples == 1);
    CHECK(s.dissimilarities[0] == 0.5);
  }

  TEST_CASE("filter examples") {
    ClusterState s;
    s.assignments = {0, 0, 0, 1, 1, 1, 1, 2};
    s.dissimilarities = {0.01, 0.02, 0.03, 0.01, 0.01, 0.04, 0.049, 0.2};
    const FilterResult f = filter(s, 0.05, 3);
    CHECK(f.kept_classes == std::vector<int>{1});
    CHECK(f.kept_indices == std::vector<std::size_t>{3, 4, 5, 6});
    CHECK(f.per_class_counts.at(0) == 3);
    CHECK(f.per_class_counts.at(1) == 4);

    const FilterResult all = filter(s, 1.0, 0);
    CHECK(all.kept_indices.size() == 8);
    CHECK(all.kept_classes == std::vector<int>{0, 1, 2});
    CHECK(filter(s, 0.0, 0).kept_indices.empty());
  }

  TEST_CASE("filter invariants on random states") {
    Rng rng(6);
    for (int trial = 0; trial < 200; ++trial) {
      ClusterState s;
      const std::size_t n = rng.index(40);
      for (std::size_t i = 0; i < n; ++i) {
        s.assignments.push_back(static_cast<int>(rng.index(4)));
        s.dissimilarities.push_back(rng.uniform());
      }
      const double d0 = rng.uniform();
      const std::size_t n0 = rng.index(5);
      const FilterResult f = filter(s, d0, n0);
      const std::set<int> kept(f.kept_classes.begin(), f.kept_classes.end());
      for (std::size_t i : f.kept_indices) {
        CHECK(s.dissimilarities[i] < d0);
        CHECK(kept.count(s.assignments[i]) == 1);
      }
      for (int c : f.kept_classes) CHECK(f.per_class_counts.at(c) > n0);
      for (std::size_t i = 0; i < n; ++i) {
        const bool expect = s.dissimilarities[i] < d0 && kept.count(s.assignments[i]) == 1;
        CHECK(expect == (std::find(f.kept_indices.begin(), f.kept_indices.end(), i) != f.kept_indices.end()));
      }
    }
  }

  TEST_CASE("well separated groups are clustered perfectly") {
    Rng rng(23);
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t m = 2 + rng.index(3);
      // Orthogonal group directions with small jitter: inter-group cosine
      // dissimilarity near 0.5, intra-group near 0.
      Matrix x(m * 10, m);
      std::vector<int> truth;
      for (std::size_t i = 0; i < m * 10; ++i) {
        const std::size_t g = i % m;
        truth.push_back(static_cast<int>(g));
        for (std::size_t k = 0; k < m; ++k) x(i, k) = (k == g ? 1.0 : 0.0) + 0.02 * rng.normal();
      }
      Matrix init(m, m);
      for (std::size_t c = 0; c < m; ++c)
        for (std::size_t k = 0; k < m; ++k) init(c, k) = (k == c ? 1.0 : 0.3) + 0.1 * rng.normal();
      CHECK(spherical_kmeans(x, init).assignments == truth);
    }
  }
}
