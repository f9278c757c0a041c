#pragma once

#include "can/clustering.hpp"
#include "can/data.hpp"
#include "can/discrepancy.hpp"
#include "can/model.hpp"
#include "can/rng.hpp"
#include "can/sampling.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace can {

enum class Method {
  SourceOnly,  // cross-entropy on source only
  Can,         // clustering + filtering + class-aware sampling + contrastive discrepancy
  IntraOnly,   // as Can, intra-class term only
  NoAo,        // pseudo-labels from the network's current predictions at every step
  NoCas,       // class-agnostic discrepancy batches
  Pseudo0,     // cluster once, then cross-entropy on the fixed pseudo-labels
  Pseudo1,     // re-cluster every loop, cross-entropy on pseudo-labels, no discrepancy
};

std::string to_string(Method m);
Method parse_method(const std::string& s);
const std::vector<Method>& all_methods();

struct TrainConfig {
  Method method = Method::Can;
  double beta = 0.3;
  double d0 = 0.05;
  std::size_t n0 = 3;
  std::size_t k_steps = 50;
  std::size_t loops = 20;
  // Source cross-entropy steps run at the start of loop 0, before its clustering.
  std::size_t warmup_steps = 0;

  BatchPlan plan;

  double eta0 = 0.001;
  double lr_a = 10.0;
  double lr_b = 0.75;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double logits_lr_multiplier = 10.0;

  std::vector<std::size_t> hidden{64, 64};
  std::size_t bottleneck = 16;

  KMeansOptions kmeans;
  OutputTap output_tap = OutputTap::Probabilities;
  bool center_features = true;  // subtract each domain's mean before clustering
  // Samples per class per domain in the ground-truth discrepancy probe.
  std::size_t probe_per_class = 8;
  std::uint64_t seed = 0;

  std::size_t total_steps() const { return warmup_steps + loops * k_steps; }
  LrSchedule schedule() const;
  // Throws can::Error on out-of-range fields.
  void validate() const;
};

struct LoopMetrics {
  std::size_t loop = 0;
  std::size_t step = 0;  // parameter updates so far
  double ce_loss = 0.0;  // mean source cross-entropy over the loop's steps
  std::optional<double> cdd;  // mean pseudo-label discrepancy over steps that computed one
  std::optional<double> cdd_g;  // discrepancy on the ground-truth probe after the loop
  std::optional<double> target_accuracy;
  std::optional<double> target_mean_class_accuracy;
  std::optional<double> cluster_accuracy;
  std::size_t kept_samples = 0;
  std::vector<int> kept_classes;
  std::size_t zero_norm_samples = 0;
  double learning_rate = 0.0;
  double wall_seconds = 0.0;
  std::vector<std::string> warnings;
};

struct Evaluation {
  double accuracy = 0.0;
  std::vector<double> per_class;  // NaN for classes absent from the data
  double mean_class_accuracy = 0.0;
};

// Argmax of the logits, lowest class id on ties.
std::vector<int> predict(const ModelParams& params, const Matrix& features);
Evaluation evaluate(const ModelParams& params, const Matrix& features, std::span<const int> labels);
// Throws can::Error if the dataset carries unlabeled rows.
Evaluation evaluate(const ModelParams& params, const Dataset& data);

// Labels for diagnostics only. The optimization path never reads them; they
// feed target accuracy, clustering accuracy and the ground-truth discrepancy.
struct TargetTruth {
  std::vector<int> labels;
};

class Trainer {
 public:
  // source must be fully labeled. target_features are the unlabeled target inputs.
  Trainer(TrainConfig config, Dataset source, Matrix target_features, std::optional<TargetTruth> truth = std::nullopt);

  LoopMetrics run_loop();

  const ModelParams& params() const { return params_; }
  const TrainConfig& config() const { return config_; }
  std::size_t step() const { return step_; }
  std::size_t loops_done() const { return loop_; }
  int num_classes() const { return classes_; }
  // Pseudo-labels currently used by the discrepancy or pseudo-label loss
  // (kept target rows and their labels); empty before clustering.
  const PseudoLabeledSet& pseudo_labels() const { return pseudo_; }
  const std::optional<ClusterState>& clusters() const { return clusters_; }

  // Called after every parameter update with the index of the step within the loop.
  void set_step_observer(std::function<void(const Trainer&, std::size_t)> fn) { observer_ = std::move(fn); }

 private:
  struct StepStats {
    double ce = 0.0;
    std::optional<double> cdd;
  };

  bool clusters_this_loop() const;
  void cluster(LoopMetrics& m);
  void predict_pseudo_labels();
  StepStats train_step(std::size_t k);
  std::optional<double> discrepancy_step(ModelParams& grads);
  void pseudo_label_ce_step(ModelParams& grads);
  void apply(const ModelParams& grads);
  std::optional<double> probe_cdd() const;

  TrainConfig config_;
  Dataset source_;
  Matrix target_;
  std::optional<TargetTruth> truth_;
  int classes_ = 0;

  ModelParams params_;
  SgdMomentum optimizer_;
  std::vector<double> lr_multipliers_;
  std::size_t step_ = 0;
  std::size_t loop_ = 0;

  Rng ce_rng_;
  Rng cas_rng_;
  Rng pseudo_rng_;

  std::optional<ClusterState> clusters_;
  PseudoLabeledSet pseudo_;
  std::vector<KernelSpec> loop_kernels_;

  // Ground-truth probe rows (source, target) and labels.
  std::vector<std::size_t> probe_source_;
  std::vector<std::size_t> probe_target_;

  std::function<void(const Trainer&, std::size_t)> observer_;
};

struct TrainSummary {
  Method method = Method::Can;
  std::size_t loops = 0;
  std::size_t steps = 0;
  std::optional<Evaluation> target;
  Evaluation source;
  std::optional<double> final_cdd_g;
  std::optional<double> first_cdd_g;
};

struct TrainResult {
  ModelParams params;
  std::vector<LoopMetrics> metrics;
  TrainSummary summary;
};

// Runs config.loops loops. Target ground truth, when present in `target`, is
// handed to the diagnostics only.
TrainResult train(const TrainConfig& config, const Dataset& source, const Dataset& target,
                  const std::function<void(const LoopMetrics&)>& on_loop = {});

}  // namespace can
