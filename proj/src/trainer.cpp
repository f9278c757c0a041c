#include "can/trainer.hpp"

#include "can/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>

namespace can {

namespace {

constexpr std::uint64_t kLaneInit = 10;
constexpr std::uint64_t kLaneCe = 11;
constexpr std::uint64_t kLaneCas = 12;
constexpr std::uint64_t kLanePseudo = 13;
constexpr std::uint64_t kLaneProbe = 14;

const std::vector<std::pair<Method, std::string>>& method_names() {
  static const std::vector<std::pair<Method, std::string>> names{
      {Method::SourceOnly, "source-only"}, {Method::Can, "can"},         {Method::IntraOnly, "intra-only"},
      {Method::NoAo, "no-ao"},             {Method::NoCas, "no-cas"},    {Method::Pseudo0, "pseudo0"},
      {Method::Pseudo1, "pseudo1"}};
  return names;
}

bool uses_discrepancy(Method m) {
  return m == Method::Can || m == Method::IntraOnly || m == Method::NoAo || m == Method::NoCas;
}

}  // namespace

std::string to_string(Method m) {
  for (const auto& [k, v] : method_names())
    if (k == m) return v;
  throw Error("unknown method");
}

Method parse_method(const std::string& s) {
  for (const auto& [k, v] : method_names())
    if (v == s) return k;
  throw Error("unknown method '" + s + "'");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> all = [] {
    std::vector<Method> v;
    for (const auto& [k, name] : method_names()) v.push_back(k);
    return v;
  }();
  return all;
}

LrSchedule TrainConfig::schedule() const {
  return LrSchedule{eta0, lr_a, lr_b, momentum, weight_decay, std::max<std::size_t>(total_steps(), 1)};
}

void TrainConfig::validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw Error("config: beta must be >= 0");
  if (!(d0 >= 0.0 && d0 <= 1.0)) throw Error("config: d0 must lie in [0, 1]");
  if (k_steps < 1) throw Error("config: k_steps must be >= 1");
  if (!(eta0 > 0.0) || !(lr_a > 0.0) || !(lr_b > 0.0)) throw Error("config: eta0, lr_a and lr_b must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw Error("config: momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw Error("config: weight_decay must be nonnegative");
  if (!(logits_lr_multiplier > 0.0)) throw Error("config: logits_lr_multiplier must be positive");
  if (plan.classes_per_batch == 0 || plan.per_class_source == 0 || plan.per_class_target == 0 ||
      plan.ce_batch_size == 0) {
    throw Error("config: batch sizes must be positive");
  }
  if (bottleneck == 0) throw Error("config: bottleneck width must be positive");
  for (std::size_t h : hidden)
    if (h == 0) throw Error("config: hidden widths must be positive");
  if (kmeans.max_iters < 1) throw Error("config: kmeans max_iters must be >= 1");
}

std::vector<int> predict(const ModelParams& params, const Matrix& features) {
  const FeatureStack st = forward(params, features);
  std::vector<int> out(features.rows());
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const auto z = st.logits().row(i);
    std::size_t best = 0;
    for (std::size_t c = 1; c < z.size(); ++c)
      if (z[c] > z[best]) best = c;
    out[i] = static_cast<int>(best);
  }
  return out;
}

Evaluation evaluate(const ModelParams& params, const Matrix& features, std::span<const int> labels) {
  if (labels.size() != features.rows() || labels.empty()) throw Error("evaluate: label count mismatch");
  for (int y : labels)
    if (y < 0) throw Error("evaluate: dataset is unlabeled");
  const std::vector<int> pred = predict(params, features);
  const std::size_t m = params.classes();
  std::vector<std::size_t> hit(m, 0), total(m, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    if (y >= m) throw Error("evaluate: label out of range");
    ++total[y];
    if (pred[i] == labels[i]) {
      ++hit[y];
      ++correct;
    }
  }
  Evaluation e;
  e.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < m; ++c) {
    if (total[c] == 0) {
      e.per_class.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    e.per_class.push_back(static_cast<double>(hit[c]) / static_cast<double>(total[c]));
    sum += e.per_class.back();
    ++present;
  }
  e.mean_class_accuracy = sum / static_cast<double>(present);
  return e;
}

Evaluation evaluate(const ModelParams& params, const Dataset& data) {
  if (!data.fully_labeled()) throw Error("evaluate: dataset is unlabeled");
  return evaluate(params, data.features, data.labels);
}

Trainer::Trainer(TrainConfig config, Dataset source, Matrix target_features, std::optional<TargetTruth> truth)
    : config_(std::move(config)),
      source_(std::move(source)),
      target_(std::move(target_features)),
      truth_(std::move(truth)),
      ce_rng_(derive_seed(config_.seed, kLaneCe)),
      cas_rng_(derive_seed(config_.seed, kLaneCas)),
      pseudo_rng_(derive_seed(config_.seed, kLanePseudo)) {
  config_.validate();
  source_.validate();
  if (!source_.fully_labeled()) throw Error("trainer: source data must be labeled");
  if (target_.rows() == 0) throw Error("trainer: no target samples");
  if (target_.cols() != source_.dims()) throw Error("trainer: source and target feature widths differ");
  if (truth_ && truth_->labels.size() != target_.rows()) throw Error("trainer: target truth size mismatch");
  classes_ = source_.num_classes();
  if (classes_ < 2) throw Error("trainer: need at least two source classes");

  const Architecture arch{source_.dims(), config_.hidden, config_.bottleneck, static_cast<std::size_t>(classes_)};
  params_ = init_params(arch, derive_seed(config_.seed, kLaneInit));
  optimizer_ = SgdMomentum(params_);
  lr_multipliers_.assign(params_.layers.size(), 1.0);
  lr_multipliers_.back() = config_.logits_lr_multiplier;

  if (truth_) {
    Rng probe_rng(derive_seed(config_.seed, kLaneProbe));
    for (int c = 0; c < classes_; ++c) {
      std::vector<std::size_t> sp, tp;
      for (std::size_t i = 0; i < source_.size(); ++i)
        if (source_.labels[i] == c) sp.push_back(i);
      for (std::size_t i = 0; i < truth_->labels.size(); ++i)
        if (truth_->labels[i] == c) tp.push_back(i);
      if (sp.empty() || tp.empty()) continue;
      for (std::size_t k : probe_rng.sample_without_replacement(sp.size(), std::min(config_.probe_per_class, sp.size())))
        probe_source_.push_back(sp[k]);
      for (std::size_t k : probe_rng.sample_without_replacement(tp.size(), std::min(config_.probe_per_class, tp.size())))
        probe_target_.push_back(tp[k]);
    }
  }
}

bool Trainer::clusters_this_loop() const {
  switch (config_.method) {
    case Method::Can:
    case Method::IntraOnly:
    case Method::NoCas:
    case Method::Pseudo1:
      return true;
    case Method::Pseudo0:
      return loop_ == 0;
    case Method::SourceOnly:
    case Method::NoAo:
      return false;
  }
  return false;
}

void Trainer::cluster(LoopMetrics& m) {
  const FeatureStack fs = forward(params_, source_.features);
  const FeatureStack ft = forward(params_, target_);
  const Matrix source_repr = config_.center_features ? center_columns(fs.backbone()) : fs.backbone();
  const Matrix target_repr = config_.center_features ? center_columns(ft.backbone()) : ft.backbone();
  const Matrix centers = source_class_centers(source_repr, source_.labels, classes_);
  ClusterState state = spherical_kmeans(target_repr, centers, config_.kmeans);
  const FilterResult kept = filter(state, config_.d0, config_.n0);

  pseudo_ = PseudoLabeledSet{};
  pseudo_.indices = kept.kept_indices;
  for (std::size_t i : kept.kept_indices) pseudo_.labels.push_back(state.assignments[i]);
  pseudo_.classes = kept.kept_classes;

  m.zero_norm_samples = state.zero_norm_samples;
  if (state.zero_norm_samples > 0) {
    m.warnings.push_back(std::to_string(state.zero_norm_samples) + " target samples have zero-norm features");
  }
  if (truth_) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < state.assignments.size(); ++i) hit += state.assignments[i] == truth_->labels[i];
    m.cluster_accuracy = static_cast<double>(hit) / static_cast<double>(state.assignments.size());
  }
  clusters_ = std::move(state);
}

void Trainer::predict_pseudo_labels() {
  pseudo_ = PseudoLabeledSet{};
  const std::vector<int> pred = predict(params_, target_);
  std::set<int> classes;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    pseudo_.indices.push_back(i);
    pseudo_.labels.push_back(pred[i]);
    classes.insert(pred[i]);
  }
  pseudo_.classes.assign(classes.begin(), classes.end());
}

void Trainer::apply(const ModelParams& grads) {
  optimizer_.step(params_, grads, config_.schedule(), step_, lr_multipliers_);
  ++step_;
}

std::optional<double> Trainer::discrepancy_step(ModelParams& grads) {
  const bool agnostic = config_.method == Method::NoCas;
  if (pseudo_.indices.empty() || pseudo_.classes.empty()) return std::nullopt;

  std::vector<std::size_t> src, tgt;
  std::vector<int> src_labels, tgt_labels, classes;
  if (agnostic) {
    const BatchPlan& p = config_.plan;
    src = uniform_batch(p.classes_per_batch * p.per_class_source, source_.size(), cas_rng_);
    for (std::size_t i : src) src_labels.push_back(source_.labels[i]);
    for (std::size_t k : uniform_batch(p.classes_per_batch * p.per_class_target, pseudo_.indices.size(), cas_rng_)) {
      tgt.push_back(pseudo_.indices[k]);
      tgt_labels.push_back(pseudo_.labels[k]);
    }
  } else {
    ClassAwareBatch b = class_aware_batch(config_.plan, cas_rng_, source_.labels, pseudo_);
    src = std::move(b.source_indices);
    src_labels = std::move(b.source_labels);
    tgt = std::move(b.target_indices);
    tgt_labels = std::move(b.target_labels);
    classes = std::move(b.classes);
  }

  const FeatureStack fs = forward(params_, select_rows(source_.features, src));
  const FeatureStack ft = forward(params_, select_rows(target_, tgt));
  const LabeledBatch batch{fs.taps(config_.output_tap),
                           ft.taps(config_.output_tap),
                           std::move(src_labels),
                           std::move(tgt_labels),
                           std::move(classes)};
  const CddOptions options{config_.method != Method::IntraOnly, agnostic};
  // Bandwidths come from the loop's first batch and stay fixed for its remaining steps.
  if (loop_kernels_.empty()) loop_kernels_ = kernels_for_batch(batch);

  const double value = cdd(loop_kernels_, batch, options).total;
  if (config_.beta != 0.0) {
    std::vector<FeatureGrad> g = cdd_grad(loop_kernels_, batch, options);
    backward(params_, fs, nullptr, TapGrads{g[0].source, g[1].source, config_.output_tap}, config_.beta, grads);
    backward(params_, ft, nullptr, TapGrads{g[0].target, g[1].target, config_.output_tap}, config_.beta, grads);
  }
  return value;
}

void Trainer::pseudo_label_ce_step(ModelParams& grads) {
  if (pseudo_.indices.empty()) return;
  std::vector<std::size_t> rows;
  std::vector<int> labels;
  for (std::size_t k : uniform_batch(config_.plan.ce_batch_size, pseudo_.indices.size(), pseudo_rng_)) {
    rows.push_back(pseudo_.indices[k]);
    labels.push_back(pseudo_.labels[k]);
  }
  const FeatureStack st = forward(params_, select_rows(target_, rows));
  const Matrix g = cross_entropy_grad(st.probabilities, labels);
  backward(params_, st, &g, {}, 0.0, grads);
}

Trainer::StepStats Trainer::train_step(std::size_t /*k*/) {
  StepStats stats;
  ModelParams grads = params_.zeros_like();

  const std::vector<std::size_t> idx = uniform_source_batch(config_.plan, source_.size(), ce_rng_);
  std::vector<int> labels;
  labels.reserve(idx.size());
  for (std::size_t i : idx) labels.push_back(source_.labels[i]);
  const FeatureStack st = forward(params_, select_rows(source_.features, idx));
  stats.ce = cross_entropy(st.probabilities, labels);
  const Matrix g = cross_entropy_grad(st.probabilities, labels);
  backward(params_, st, &g, {}, 0.0, grads);

  switch (config_.method) {
    case Method::NoAo:
      predict_pseudo_labels();
      stats.cdd = discrepancy_step(grads);
      break;
    case Method::Can:
    case Method::IntraOnly:
    case Method::NoCas:
      stats.cdd = discrepancy_step(grads);
      break;
    case Method::Pseudo0:
    case Method::Pseudo1:
      pseudo_label_ce_step(grads);
      break;
    case Method::SourceOnly:
      break;
  }
  apply(grads);
  return stats;
}

std::optional<double> Trainer::probe_cdd() const {
  if (probe_source_.empty() || probe_target_.empty()) return std::nullopt;
  const FeatureStack fs = forward(params_, select_rows(source_.features, probe_source_));
  const FeatureStack ft = forward(params_, select_rows(target_, probe_target_));
  LabeledBatch b{fs.taps(config_.output_tap), ft.taps(config_.output_tap), {}, {}, {}};
  std::set<int> classes;
  for (std::size_t i : probe_source_) b.source_labels.push_back(source_.labels[i]);
  for (std::size_t i : probe_target_) {
    b.target_labels.push_back(truth_->labels[i]);
    classes.insert(truth_->labels[i]);
  }
  b.class_set.assign(classes.begin(), classes.end());
  return cdd(kernels_for_batch(b), b).total;
}

LoopMetrics Trainer::run_loop() {
  const auto start = std::chrono::steady_clock::now();
  LoopMetrics m;
  m.loop = loop_;

  if (loop_ == 0) {
    for (std::size_t w = 0; w < config_.warmup_steps; ++w) {
      ModelParams grads = params_.zeros_like();
      const std::vector<std::size_t> idx = uniform_source_batch(config_.plan, source_.size(), ce_rng_);
      std::vector<int> labels;
      for (std::size_t i : idx) labels.push_back(source_.labels[i]);
      const FeatureStack st = forward(params_, select_rows(source_.features, idx));
      const Matrix g = cross_entropy_grad(st.probabilities, labels);
      backward(params_, st, &g, {}, 0.0, grads);
      apply(grads);
    }
  }

  if (clusters_this_loop()) cluster(m);
  loop_kernels_.clear();
  if (uses_discrepancy(config_.method) && config_.method != Method::NoAo && pseudo_.classes.empty()) {
    m.warnings.push_back("no target class passed filtering; discrepancy skipped this loop");
  }

  double ce_sum = 0.0;
  double cdd_sum = 0.0;
  std::size_t cdd_steps = 0;
  for (std::size_t k = 0; k < config_.k_steps; ++k) {
    const StepStats s = train_step(k);
    ce_sum += s.ce;
    if (s.cdd) {
      cdd_sum += *s.cdd;
      ++cdd_steps;
    }
    if (observer_) observer_(*this, k);
  }

  m.step = step_;
  m.ce_loss = ce_sum / static_cast<double>(config_.k_steps);
  if (cdd_steps > 0) m.cdd = cdd_sum / static_cast<double>(cdd_steps);
  m.kept_samples = pseudo_.indices.size();
  m.kept_classes = pseudo_.classes;
  m.learning_rate = config_.schedule().rate(step_ - 1);
  if (truth_) {
    const Evaluation e = evaluate(params_, target_, truth_->labels);
    m.target_accuracy = e.accuracy;
    m.target_mean_class_accuracy = e.mean_class_accuracy;
  }
  m.cdd_g = probe_cdd();
  m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ++loop_;
  return m;
}

TrainResult train(const TrainConfig& config, const Dataset& source, const Dataset& target,
                  const std::function<void(const LoopMetrics&)>& on_loop) {
  std::optional<TargetTruth> truth;
  if (target.fully_labeled()) truth = TargetTruth{target.labels};
  Trainer trainer(config, source, target.features, truth);

  TrainResult r;
  for (std::size_t l = 0; l < config.loops; ++l) {
    r.metrics.push_back(trainer.run_loop());
    if (on_loop) on_loop(r.metrics.back());
  }
  r.params = trainer.params();
  r.summary.method = config.method;
  r.summary.loops = trainer.loops_done();
  r.summary.steps = trainer.step();
  r.summary.source = evaluate(r.params, source);
  if (truth) r.summary.target = evaluate(r.params, target.features, truth->labels);
  if (!r.metrics.empty()) {
    r.summary.first_cdd_g = r.metrics.front().cdd_g;
    r.summary.final_cdd_g = r.metrics.back().cdd_g;
  }
  return r;
}

}  // namespace can
