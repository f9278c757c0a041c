#include "can/config.hpp"
#include "can/error.hpp"
#include "can/trainer.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace can;

namespace {

TrainConfig small_config(Method m) {
  TrainConfig c;
  c.method = m;
  c.hidden = {16};
  c.bottleneck = 8;
  c.k_steps = 10;
  c.loops = 3;
  c.warmup_steps = 30;
  c.eta0 = 0.01;
  c.d0 = 0.3;
  c.seed = 4;
  return c;
}

DomainPair small_blobs(double translation = 1.0) {
  BlobShift s;
  s.translation = translation;
  s.noise = 0.4;
  return gen_blobs(3, 3, 30, 4, s, 3.0, 4.0);
}

Dataset unlabeled(Dataset d) {
  std::ranges::fill(d.labels, kUnlabeled);
  return d;
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("method names round trip") {
    for (Method m : all_methods()) CHECK(parse_method(to_string(m)) == m);
    CHECK(all_methods().size() == 7);
    CHECK_THROWS_AS(parse_method("dann"), Error);
  }

  TEST_CASE("config validation") {
    TrainConfig c;
    c.beta = -1;
    CHECK_THROWS_AS(c.validate(), Error);
    c = TrainConfig{};
    c.d0 = 1.5;
    CHECK_THROWS_AS(c.validate(), Error);
    c = TrainConfig{};
    c.k_steps = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    CHECK_NOTHROW(TrainConfig{}.validate());
  }

  TEST_CASE("zero beta follows the source-only trajectory exactly") {
    const DomainPair d = small_blobs();
    TrainConfig can_cfg = small_config(Method::Can);
    can_cfg.beta = 0.0;
    const TrainResult a = train(can_cfg, d.source, d.target);
    const TrainResult b = train(small_config(Method::SourceOnly), d.source, d.target);
    CHECK(a.params == b.params);
    CHECK(a.summary.target->accuracy == b.summary.target->accuracy);
  }

  TEST_CASE("zero loops return the initial parameters") {
    const DomainPair d = small_blobs();
    TrainConfig c = small_config(Method::Can);
    c.loops = 0;
    const TrainResult r = train(c, d.source, d.target);
    CHECK(r.metrics.empty());
    CHECK(r.summary.steps == 0);
    const Architecture arch{4, c.hidden, c.bottleneck, 3};
    CHECK(r.params == init_params(arch, derive_seed(c.seed, 10)));
  }

  TEST_CASE("one loop with one step makes one update") {
    const DomainPair d = small_blobs();
    TrainConfig c = small_config(Method::Can);
    c.loops = 1;
    c.k_steps = 1;
    c.warmup_steps = 0;
    const TrainResult r = train(c, d.source, d.target);
    CHECK(r.summary.steps == 1);
    CHECK(r.metrics.at(0).step == 1);
  }

  TEST_CASE("pseudo-labels stay fixed within a loop") {
    const DomainPair d = small_blobs();
    for (Method m : {Method::Can, Method::IntraOnly, Method::NoCas, Method::Pseudo1}) {
      Trainer t(small_config(m), d.source, d.target.features);
      PseudoLabeledSet snapshot;
      std::size_t changes = 0, calls = 0;
      t.set_step_observer([&](const Trainer& tr, std::size_t k) {
        ++calls;
        if (k == 0) snapshot = tr.pseudo_labels();
        else if (tr.pseudo_labels().indices != snapshot.indices || tr.pseudo_labels().labels != snapshot.labels) ++changes;
      });
      for (int l = 0; l < 3; ++l) t.run_loop();
      CHECK(changes == 0);
      CHECK(calls == 30);
    }
  }

  TEST_CASE("ground truth never reaches the parameters") {
    const DomainPair d = small_blobs();
    for (Method m : all_methods()) {
      const TrainConfig c = small_config(m);
      const TrainResult with = train(c, d.source, d.target);
      const TrainResult without = train(c, d.source, unlabeled(d.target));
      std::ostringstream a, b;
      save_checkpoint(with.params, a);
      save_checkpoint(without.params, b);
      CAPTURE(to_string(m));
      CHECK(a.str() == b.str());
      CHECK(with.metrics.back().cdd_g.has_value());
      CHECK_FALSE(without.metrics.back().cdd_g.has_value());
      CHECK_FALSE(without.summary.target.has_value());
    }
  }

  TEST_CASE("training is deterministic") {
    const DomainPair d = small_blobs();
    const TrainConfig c = small_config(Method::Can);
    const TrainResult a = train(c, d.source, d.target);
    const TrainResult b = train(c, d.source, d.target);
    CHECK(a.params == b.params);
    for (std::size_t l = 0; l < a.metrics.size(); ++l)
      CHECK(metrics_to_json(a.metrics[l]).dump() == metrics_to_json(b.metrics[l]).dump());
  }

  TEST_CASE("unshifted data clusters correctly after warmup") {
    const DomainPair d = small_blobs(0.0);
    TrainConfig c = small_config(Method::Can);
    c.loops = 1;
    c.warmup_steps = 300;
    const TrainResult r = train(c, d.source, d.target);
    REQUIRE(r.metrics.at(0).cluster_accuracy.has_value());
    CHECK(*r.metrics.at(0).cluster_accuracy >= 0.95);
  }

  TEST_CASE("empty filter falls back to cross-entropy steps") {
    const DomainPair d = small_blobs();
    TrainConfig c = small_config(Method::Can);
    c.d0 = 0.0;
    c.loops = 1;
    const TrainResult r = train(c, d.source, d.target);
    CHECK(r.metrics[0].kept_samples == 0);
    CHECK_FALSE(r.metrics[0].cdd.has_value());
    CHECK_FALSE(r.metrics[0].warnings.empty());
  }

  TEST_CASE("evaluation conventions") {
    Architecture a{2, {4}, 2, 2};
    const ModelParams zero = init_params(a, 1).zeros_like();
    const Matrix x{{1, 2}, {3, 4}, {5, 6}, {7, 8}};
    const std::vector<int> y{0, 1, 0, 1};
    CHECK(predict(zero, x) == std::vector<int>{0, 0, 0, 0});
    const Evaluation e = evaluate(zero, x, y);
    CHECK(e.accuracy == 0.5);
    CHECK(e.per_class[0] == 1.0);
    CHECK(e.per_class[1] == 0.0);
    CHECK(e.mean_class_accuracy == e.accuracy);

    // Bias on the logits layer makes class 1 win everywhere.
    ModelParams one = zero;
    one.layers.back().bias = {0.0, 1.0};
    CHECK(evaluate(one, x, std::vector<int>{1, 1, 1, 1}).accuracy == 1.0);
    CHECK(std::isnan(evaluate(one, x, std::vector<int>{1, 1, 1, 1}).per_class[0]));
    CHECK_THROWS_AS(evaluate(zero, x, std::vector<int>{0, -1, 0, 1}), Error);
  }
}
