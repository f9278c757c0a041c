#include "can/gradcheck.hpp"

#include "can/error.hpp"
#include "can/kernels.hpp"
#include "can/rng.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>

namespace can {

std::vector<double> numeric_gradient(const std::function<double()>& f, std::span<double> x, double step) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double fp = f();
    x[i] = saved - step;
    const double fm = f();
    x[i] = saved;
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

double scaled_max_error(std::span<const double> analytic, std::span<const double> numeric) {
  if (analytic.size() != numeric.size()) throw Error("gradient check: size mismatch");
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
    scale = std::max(scale, std::abs(numeric[i]));
  }
  if (scale == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return diff / scale;
}

namespace {

LabeledBatch tap_batch(const FeatureStack& s, const FeatureStack& t, const CompositeProblem& p) {
  return {s.taps(p.output_tap),
          t.taps(p.output_tap),
          p.cdd_source_labels,
          p.cdd_target_labels,
          p.class_set};
}

}  // namespace

double composite_loss(const ModelParams& params, const CompositeProblem& p) {
  const FeatureStack ce = forward(params, p.ce_inputs);
  double loss = cross_entropy(ce.probabilities, p.ce_labels);
  if (p.beta != 0.0) {
    const FeatureStack s = forward(params, p.cdd_source_inputs);
    const FeatureStack t = forward(params, p.cdd_target_inputs);
    loss += p.beta * cdd(p.kernels, tap_batch(s, t, p), p.options).total;
  }
  return loss;
}

ModelParams composite_grad(const ModelParams& params, const CompositeProblem& p) {
  ModelParams grads = params.zeros_like();
  const FeatureStack ce = forward(params, p.ce_inputs);
  const Matrix g = cross_entropy_grad(ce.probabilities, p.ce_labels);
  backward(params, ce, &g, {}, 0.0, grads);
  if (p.beta != 0.0) {
    const FeatureStack s = forward(params, p.cdd_source_inputs);
    const FeatureStack t = forward(params, p.cdd_target_inputs);
    const auto fg = cdd_grad(p.kernels, tap_batch(s, t, p), p.options);
    backward(params, s, nullptr, TapGrads{fg[0].source, fg[1].source, p.output_tap}, p.beta, grads);
    backward(params, t, nullptr, TapGrads{fg[0].target, fg[1].target, p.output_tap}, p.beta, grads);
  }
  return grads;
}

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Matrix m(r, c);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

std::vector<double> flatten(const ModelParams& p) {
  std::vector<double> v;
  for (const auto& l : p.layers) {
    v.insert(v.end(), l.weight.values().begin(), l.weight.values().end());
    v.insert(v.end(), l.bias.begin(), l.bias.end());
  }
  return v;
}

void record(ComponentReport& rep, double err, std::size_t entries) {
  ++rep.instances;
  rep.entries += entries;
  rep.max_error = std::max(rep.max_error, err);
}

ComponentReport check_kernels(const GradCheckOptions& o, Rng& rng) {
  ComponentReport rep{"kernel_matrix"};
  for (std::size_t n = 0; n < o.instances_per_component; ++n) {
    const std::size_t na = 2 + rng.index(3), nb = 2 + rng.index(3), d = 1 + rng.index(3);
    Matrix a = random_matrix(rng, na, d), b = random_matrix(rng, nb, d);
    const Matrix up = random_matrix(rng, na, nb);
    const KernelSpec spec = KernelSpec::multi_scale(median_heuristic(a, b));
    const KernelGrad g = kernel_matrix_grad(spec, a, b, up);
    auto f = [&] {
      const Matrix k = kernel_matrix(spec, a, b);
      double s = 0.0;
      for (std::size_t i = 0; i < k.size(); ++i) s += up.values()[i] * k.values()[i];
      return s;
    };
    std::vector<double> analytic(g.grad_a.values().begin(), g.grad_a.values().end());
    analytic.insert(analytic.end(), g.grad_b.values().begin(), g.grad_b.values().end());
    std::vector<double> numeric = numeric_gradient(f, a.values(), o.step);
    const auto nb_grad = numeric_gradient(f, b.values(), o.step);
    numeric.insert(numeric.end(), nb_grad.begin(), nb_grad.end());
    record(rep, scaled_max_error(analytic, numeric), analytic.size());
  }
  return rep;
}

// Random batch where every class in class_set has both source and target rows.
LabeledBatch random_batch(Rng& rng, std::size_t ns, std::size_t nt, int classes, std::vector<std::size_t> dims) {
  LabeledBatch b;
  for (int c = 0; c < classes; ++c) b.class_set.push_back(c);
  for (std::size_t i = 0; i < ns; ++i) b.source_labels.push_back(static_cast<int>(i % static_cast<std::size_t>(classes)));
  for (std::size_t i = 0; i < nt; ++i) b.target_labels.push_back(static_cast<int>(i % static_cast<std::size_t>(classes)));
  for (std::size_t d : dims) {
    b.source_features.push_back(random_matrix(rng, ns, d));
    b.target_features.push_back(random_matrix(rng, nt, d));
  }
  return b;
}

ComponentReport check_cdd(const GradCheckOptions& o, Rng& rng) {
  ComponentReport rep{"cdd"};
  for (std::size_t n = 0; n < o.instances_per_component; ++n) {
    const int classes = 1 + static_cast<int>(rng.index(3));
    const std::size_t ns = static_cast<std::size_t>(classes) * (1 + rng.index(3));
    const std::size_t nt = static_cast<std::size_t>(classes) * (1 + rng.index(3));
    LabeledBatch b = random_batch(rng, ns, nt, classes, {1 + rng.index(3), 1 + rng.index(3)});
    const std::vector<KernelSpec> specs = kernels_for_batch(b);
    const auto g = cdd_grad(specs, b);
    std::vector<double> analytic, numeric;
    auto f = [&] { return cdd(specs, b).total; };
    for (std::size_t l = 0; l < b.layers(); ++l) {
      analytic.insert(analytic.end(), g[l].source.values().begin(), g[l].source.values().end());
      analytic.insert(analytic.end(), g[l].target.values().begin(), g[l].target.values().end());
      auto ns_grad = numeric_gradient(f, b.source_features[l].values(), o.step);
      auto nt_grad = numeric_gradient(f, b.target_features[l].values(), o.step);
      numeric.insert(numeric.end(), ns_grad.begin(), ns_grad.end());
      numeric.insert(numeric.end(), nt_grad.begin(), nt_grad.end());
    }
    record(rep, scaled_max_error(analytic, numeric), analytic.size());
  }
  return rep;
}

CompositeProblem random_problem(Rng& rng, const ModelParams& params, OutputTap tap) {
  CompositeProblem p;
  p.output_tap = tap;
  const std::size_t d = params.input_dim();
  const int m = static_cast<int>(params.classes());
  p.ce_inputs = random_matrix(rng, 5, d);
  for (std::size_t i = 0; i < 5; ++i) p.ce_labels.push_back(static_cast<int>(rng.index(static_cast<std::size_t>(m))));
  p.cdd_source_inputs = random_matrix(rng, 6, d);
  p.cdd_target_inputs = random_matrix(rng, 6, d);
  for (std::size_t i = 0; i < 6; ++i) {
    p.cdd_source_labels.push_back(static_cast<int>(i % 2));
    p.cdd_target_labels.push_back(static_cast<int>((i + 1) % 2));
  }
  p.class_set = {0, 1};
  const FeatureStack s = forward(params, p.cdd_source_inputs);
  const FeatureStack t = forward(params, p.cdd_target_inputs);
  p.kernels = kernels_for_batch(LabeledBatch{s.taps(tap),
                                             t.taps(tap),
                                             p.cdd_source_labels,
                                             p.cdd_target_labels,
                                             p.class_set});
  p.beta = 0.3;
  return p;
}

ComponentReport check_composite(const GradCheckOptions& o, Rng& rng, OutputTap tap) {
  ComponentReport rep{"composite_" + to_string(tap)};
  for (std::size_t n = 0; n < o.instances_per_component; ++n) {
    ModelParams params = init_params(Architecture{3, {4}, 2, 2}, rng.next_u64());
    // Non-zero biases so ReLU kinks are not aligned with the origin.
    for (auto& l : params.layers)
      for (double& b : l.bias) b = 0.1 * rng.normal();
    const CompositeProblem p = random_problem(rng, params, tap);
    const std::vector<double> analytic = flatten(composite_grad(params, p));
    std::vector<double> numeric;
    auto f = [&] { return composite_loss(params, p); };
    for (auto& l : params.layers) {
      auto gw = numeric_gradient(f, l.weight.values(), o.step);
      auto gb = numeric_gradient(f, l.bias, o.step);
      numeric.insert(numeric.end(), gw.begin(), gw.end());
      numeric.insert(numeric.end(), gb.begin(), gb.end());
    }
    record(rep, scaled_max_error(analytic, numeric), analytic.size());
  }
  return rep;
}

}  // namespace

bool GradCheckReport::passed() const {
  return !components.empty() && std::ranges::all_of(components, [](const auto& c) { return c.passed; });
}

GradCheckReport run_gradcheck(const GradCheckOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(options.seed);
  GradCheckReport r;
  r.components.push_back(check_kernels(options, rng));
  r.components.push_back(check_cdd(options, rng));
  r.components.push_back(check_composite(options, rng, OutputTap::Logits));
  r.components.push_back(check_composite(options, rng, OutputTap::Probabilities));
  for (auto& c : r.components) c.passed = c.max_error <= options.rtol;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace can
