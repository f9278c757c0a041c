#pragma once

#include "can/matrix.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace can {

struct Architecture {
  std::size_t input_dim = 2;
  std::vector<std::size_t> hidden{64, 64};  // ReLU layers
  std::size_t bottleneck = 16;              // linear; clustering features
  std::size_t classes = 2;                  // linear logits
};

struct DenseLayer {
  std::string name;
  Matrix weight;  // out x in
  std::vector<double> bias;
};

// Layers in order: hidden..., bottleneck, logits.
struct ModelParams {
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const { return layers.front().weight.cols(); }
  std::size_t classes() const { return layers.back().weight.rows(); }
  std::size_t hidden_layers() const { return layers.size() - 2; }
  std::size_t bottleneck_index() const { return layers.size() - 2; }
  std::size_t logits_index() const { return layers.size() - 1; }
  std::size_t parameter_count() const;

  // Same shapes and names, all zeros.
  ModelParams zeros_like() const;
  bool operator==(const ModelParams& other) const;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
ModelParams init_params(const Architecture& arch, std::uint64_t seed);

// Which output-side activation the second discrepancy tap reads.
enum class OutputTap { Logits, Probabilities };
std::string to_string(OutputTap t);
OutputTap parse_output_tap(const std::string& s);

// Cached activations of one forward pass.
struct FeatureStack {
  Matrix input;
  std::vector<Matrix> outputs;  // per layer, after the activation (ReLU for hidden layers)
  Matrix probabilities;         // row-wise softmax of the logits

  const Matrix& bottleneck() const { return outputs[outputs.size() - 2]; }
  // Input of the bottleneck layer: the last hidden activation, or the raw input
  // when there are no hidden layers. This is the representation used for clustering.
  const Matrix& backbone() const { return outputs.size() > 2 ? outputs[outputs.size() - 3] : input; }
  const Matrix& logits() const { return outputs.back(); }
  const Matrix& output(OutputTap t) const { return t == OutputTap::Logits ? logits() : probabilities; }
  // Tapped layers in discrepancy order: bottleneck, then the output tap.
  std::vector<Matrix> taps(OutputTap t) const { return {bottleneck(), output(t)}; }
};

FeatureStack forward(const ModelParams& params, const Matrix& inputs);

// Mean negative log-likelihood; log arguments clamped at 1e-12.
double cross_entropy(const Matrix& probabilities, std::span<const int> labels);
// Gradient of cross_entropy with respect to the logits: (p - onehot) / n.
Matrix cross_entropy_grad(const Matrix& probabilities, std::span<const int> labels);

// Gradients of a scalar loss injected at the two tapped layers.
struct TapGrads {
  std::optional<Matrix> bottleneck;
  std::optional<Matrix> output;  // gradient at the logits or at the softmax output
  OutputTap output_kind = OutputTap::Logits;
};

// Reverse pass of  ce + beta * (tap losses)  for one forward pass. ce_grad
// (gradient at the logits, may be null) and the tap gradients are combined at
// their layers and propagated through the shared layers. Accumulates into grads.
void backward(const ModelParams& params, const FeatureStack& stack, const Matrix* ce_grad, const TapGrads& taps,
              double beta, ModelParams& grads);

// eta_p = eta0 / (1 + a p)^b with p = step / total_steps.
struct LrSchedule {
  double eta0 = 0.001;
  double a = 10.0;
  double b = 0.75;
  double momentum = 0.9;
  double weight_decay = 0.0;  // L2 coefficient on weights, biases excluded
  std::size_t total_steps = 1;

  double rate(std::size_t step) const;
};

// SGD with momentum: v <- m v + g + wd theta; theta <- theta - eta_p * lr_multiplier[layer] * v.
class SgdMomentum {
 public:
  SgdMomentum() = default;
  explicit SgdMomentum(const ModelParams& params) : velocity_(params.zeros_like()) {}

  // layer_lr_multipliers is empty (all 1) or one entry per layer.
  void step(ModelParams& params, const ModelParams& grads, const LrSchedule& schedule, std::size_t step,
            std::span<const double> layer_lr_multipliers = {});

  const ModelParams& velocity() const { return velocity_; }

 private:
  ModelParams velocity_;
};

// Text checkpoint: "can-checkpoint 1", a layer count, then per tensor a
// "<name> <rows> <cols>" header followed by rows of %.17g values.
void save_checkpoint(const ModelParams& params, std::ostream& out);
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(std::istream& in);
ModelParams load_checkpoint(const std::string& path);

}  // namespace can
