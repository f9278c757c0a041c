#include "can/model.hpp"

#include "can/error.hpp"
#include "can/rng.hpp"
#include "can/simd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace can {

std::string to_string(OutputTap t) { return t == OutputTap::Logits ? "logits" : "probabilities"; }

OutputTap parse_output_tap(const std::string& s) {
  if (s == "logits") return OutputTap::Logits;
  if (s == "probabilities") return OutputTap::Probabilities;
  throw Error("unknown output tap '" + s + "'");
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z;
  for (const auto& l : layers) {
    z.layers.push_back({l.name, Matrix(l.weight.rows(), l.weight.cols()), std::vector<double>(l.bias.size(), 0.0)});
  }
  return z;
}

bool ModelParams::operator==(const ModelParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].name != other.layers[i].name || !(layers[i].weight == other.layers[i].weight) ||
        layers[i].bias != other.layers[i].bias) {
      return false;
    }
  }
  return true;
}

ModelParams init_params(const Architecture& arch, std::uint64_t seed) {
  if (arch.input_dim == 0 || arch.bottleneck == 0 || arch.classes == 0) throw Error("architecture: zero width");
  std::vector<std::size_t> widths{arch.input_dim};
  widths.insert(widths.end(), arch.hidden.begin(), arch.hidden.end());
  widths.push_back(arch.bottleneck);
  widths.push_back(arch.classes);

  Rng rng(seed);
  ModelParams p;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t in = widths[l];
    const std::size_t out = widths[l + 1];
    if (out == 0) throw Error("architecture: zero width");
    std::string name = l + 2 == widths.size()   ? "logits"
                       : l + 3 == widths.size() ? "bottleneck"
                                                : "hidden" + std::to_string(l);
    DenseLayer layer{std::move(name), Matrix(out, in), std::vector<double>(out, 0.0)};
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& w : layer.weight.values()) w = rng.uniform(-bound, bound);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

FeatureStack forward(const ModelParams& params, const Matrix& inputs) {
  if (params.layers.size() < 2) throw Error("model needs at least bottleneck and logits layers");
  if (inputs.cols() != params.input_dim()) {
    throw Error("forward: input width " + std::to_string(inputs.cols()) + " does not match model input " +
                std::to_string(params.input_dim()));
  }
  FeatureStack st;
  st.input = inputs;
  const Matrix* x = &st.input;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    Matrix y = affine(*x, params.layers[l].weight, params.layers[l].bias);
    if (l < params.hidden_layers()) {
      for (double& v : y.values()) v = std::max(v, 0.0);
    }
    st.outputs.push_back(std::move(y));
    x = &st.outputs.back();
  }

  const Matrix& logits = st.logits();
  st.probabilities = Matrix(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto z = logits.row(i);
    auto p = st.probabilities.row(i);
    const double mx = *std::ranges::max_element(z);
    double sum = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) {
      p[c] = std::exp(z[c] - mx);
      sum += p[c];
    }
    for (double& v : p) v /= sum;
  }
  return st;
}

namespace {

void check_labels(const Matrix& probs, std::span<const int> labels) {
  if (labels.size() != probs.rows()) throw Error("cross entropy: label count mismatch");
  if (labels.empty()) throw Error("cross entropy: empty batch");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= probs.cols()) {
      throw Error("cross entropy: label " + std::to_string(y) + " out of range");
    }
  }
}

}  // namespace

double cross_entropy(const Matrix& probabilities, std::span<const int> labels) {
  check_labels(probabilities, labels);
  double s = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    s -= std::log(std::max(probabilities(i, static_cast<std::size_t>(labels[i])), 1e-12));
  }
  return s / static_cast<double>(labels.size());
}

Matrix cross_entropy_grad(const Matrix& probabilities, std::span<const int> labels) {
  check_labels(probabilities, labels);
  Matrix g = probabilities;
  const double inv_n = 1.0 / static_cast<double>(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    g(i, static_cast<std::size_t>(labels[i])) -= 1.0;
    for (double& v : g.row(i)) v *= inv_n;
  }
  return g;
}

void backward(const ModelParams& params, const FeatureStack& stack, const Matrix* ce_grad, const TapGrads& taps,
              double beta, ModelParams& grads) {
  const std::size_t n = stack.input.rows();
  const std::size_t top = params.logits_index();
  if (stack.outputs.size() != params.layers.size()) throw Error("backward: stack does not match model");
  if (grads.layers.size() != params.layers.size()) throw Error("backward: gradient buffer does not match model");

  auto check = [&](const Matrix& g, const Matrix& act, const char* what) {
    if (g.rows() != n || g.cols() != act.cols()) throw Error(std::string("backward: shape mismatch for ") + what);
  };

  Matrix upstream(n, params.classes());
  if (ce_grad != nullptr) {
    check(*ce_grad, stack.logits(), "cross-entropy gradient");
    upstream = *ce_grad;
  }
  if (taps.output) {
    check(*taps.output, stack.logits(), "output tap");
    if (taps.output_kind == OutputTap::Logits) {
      for (std::size_t i = 0; i < upstream.size(); ++i) upstream.values()[i] += beta * taps.output->values()[i];
    } else {
      // Softmax Jacobian: dL/dz_j = p_j (g_j - sum_k g_k p_k).
      for (std::size_t r = 0; r < n; ++r) {
        const auto p = stack.probabilities.row(r);
        const auto g = taps.output->row(r);
        const double s = simd::dot(g, p);
        auto u = upstream.row(r);
        for (std::size_t j = 0; j < u.size(); ++j) u[j] += beta * p[j] * (g[j] - s);
      }
    }
  }
  if (taps.bottleneck) check(*taps.bottleneck, stack.bottleneck(), "bottleneck tap");

  for (std::size_t l = top + 1; l-- > 0;) {
    const Matrix& input = l == 0 ? stack.input : stack.outputs[l - 1];
    if (l < params.hidden_layers()) {
      const Matrix& out = stack.outputs[l];
      for (std::size_t i = 0; i < upstream.size(); ++i) {
        if (out.values()[i] <= 0.0) upstream.values()[i] = 0.0;
      }
    }
    accumulate_affine_param_grad(upstream, input, grads.layers[l].weight, grads.layers[l].bias);
    if (l == 0) break;
    Matrix next = affine_input_grad(upstream, params.layers[l].weight);
    if (l == top && taps.bottleneck) {
      for (std::size_t i = 0; i < next.size(); ++i) next.values()[i] += beta * taps.bottleneck->values()[i];
    }
    upstream = std::move(next);
  }
}

double LrSchedule::rate(std::size_t step) const {
  if (total_steps == 0) throw Error("lr schedule: total_steps must be positive");
  const double p = static_cast<double>(step) / static_cast<double>(total_steps);
  return eta0 / std::pow(1.0 + a * p, b);
}

void SgdMomentum::step(ModelParams& params, const ModelParams& grads, const LrSchedule& schedule, std::size_t step,
                       std::span<const double> layer_lr_multipliers) {
  if (step >= schedule.total_steps) throw Error("sgd: step beyond schedule");
  if (velocity_.layers.empty()) velocity_ = params.zeros_like();
  if (grads.layers.size() != params.layers.size()) throw Error("sgd: gradient shape mismatch");
  if (!layer_lr_multipliers.empty() && layer_lr_multipliers.size() != params.layers.size()) {
    throw Error("sgd: one learning-rate multiplier per layer required");
  }
  for (const auto& g : grads.layers) {
    if (!all_finite(g.weight.values()) || !all_finite(g.bias)) throw Error("divergence");
  }

  const double eta = schedule.rate(step);
  const double m = schedule.momentum;
  auto update = [&](std::span<double> theta, std::span<double> v, std::span<const double> g, double lr, double wd) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
      v[i] = m * v[i] + g[i] + wd * theta[i];
      theta[i] -= lr * v[i];
    }
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const double lr = eta * (layer_lr_multipliers.empty() ? 1.0 : layer_lr_multipliers[l]);
    update(params.layers[l].weight.values(), velocity_.layers[l].weight.values(), grads.layers[l].weight.values(), lr,
           schedule.weight_decay);
    update(params.layers[l].bias, velocity_.layers[l].bias, grads.layers[l].bias, lr, 0.0);
    if (!all_finite(params.layers[l].weight.values()) || !all_finite(params.layers[l].bias)) throw Error("divergence");
  }
}

}  // namespace can
