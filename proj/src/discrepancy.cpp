#include "can/discrepancy.hpp"

#include "can/error.hpp"

#include <algorithm>
#include <set>
#include <string>

namespace can {

namespace {

double block_sum(const Matrix& k, const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) {
  double s = 0.0;
  for (std::size_t i : rows)
    for (std::size_t j : cols) s += k(i, j);
  return s;
}

using Members = std::map<int, std::vector<std::size_t>>;

Members members_of(const std::vector<int>& labels) {
  Members m;
  for (std::size_t i = 0; i < labels.size(); ++i) m[labels[i]].push_back(i);
  return m;
}

const std::vector<std::size_t>& members(const Members& m, int c) {
  static const std::vector<std::size_t> none;
  auto it = m.find(c);
  return it == m.end() ? none : it->second;
}

void check_shapes(const LabeledBatch& b) {
  if (b.source_features.size() != b.target_features.size() || b.source_features.empty()) {
    throw Error("labeled batch: source and target layer counts differ or are empty");
  }
  for (std::size_t l = 0; l < b.layers(); ++l) {
    if (b.source_features[l].rows() != b.source_labels.size() ||
        b.target_features[l].rows() != b.target_labels.size()) {
      throw Error("labeled batch: label count does not match feature rows at layer " + std::to_string(l));
    }
    if (b.source_features[l].cols() != b.target_features[l].cols()) {
      throw Error("labeled batch: feature width mismatch at layer " + std::to_string(l));
    }
  }
}

// A weighted class-pair term w * D^{c1 c2} of the objective.
struct Term {
  int c1;
  int c2;
  double weight;
  bool intra;
};

struct Layout {
  Members source;
  Members target;
  std::vector<Term> terms;
  std::size_t intra_count = 0;
  std::size_t inter_count = 0;
};

Layout plan_terms(const LabeledBatch& batch, const CddOptions& options) {
  check_shapes(batch);
  Layout lay{members_of(batch.source_labels), members_of(batch.target_labels), {}, 0, 0};

  std::vector<int> intra;
  std::vector<std::pair<int, int>> inter;
  if (!options.skip_missing_pairs) {
    if (batch.class_set.empty()) throw Error("cdd: empty class set");
    if (!std::ranges::is_sorted(batch.class_set)) throw Error("cdd: class set must be sorted");
    const std::set<int> allowed(batch.class_set.begin(), batch.class_set.end());
    for (const auto* m : {&lay.source, &lay.target}) {
      for (const auto& [c, idx] : *m) {
        if (!allowed.contains(c)) throw Error("cdd: label " + std::to_string(c) + " outside class set");
      }
    }
    for (int c : batch.class_set) {
      if (members(lay.source, c).empty() || members(lay.target, c).empty()) throw Error("empty class pair");
      intra.push_back(c);
    }
    for (int c : batch.class_set)
      for (int cp : batch.class_set)
        if (c != cp) inter.emplace_back(c, cp);
  } else {
    std::set<int> classes;
    for (const auto& [c, idx] : lay.source) classes.insert(c);
    for (const auto& [c, idx] : lay.target) classes.insert(c);
    for (int c : classes)
      if (!members(lay.source, c).empty() && !members(lay.target, c).empty()) intra.push_back(c);
    for (int c : classes)
      for (int cp : classes)
        if (c != cp && !members(lay.source, c).empty() && !members(lay.target, cp).empty()) inter.emplace_back(c, cp);
  }
  if (!options.include_inter) inter.clear();

  lay.intra_count = intra.size();
  lay.inter_count = inter.size();
  for (int c : intra) lay.terms.push_back({c, c, 1.0 / static_cast<double>(intra.size()), true});
  for (auto [c, cp] : inter) lay.terms.push_back({c, cp, -1.0 / static_cast<double>(inter.size()), false});
  return lay;
}

struct LayerKernels {
  Matrix ss;
  Matrix tt;
  Matrix st;
};

LayerKernels layer_kernels(const KernelSpec& spec, const LabeledBatch& batch, std::size_t l) {
  const Matrix& s = batch.source_features[l];
  const Matrix& t = batch.target_features[l];
  return {kernel_matrix(spec, s, s), kernel_matrix(spec, t, t), kernel_matrix(spec, s, t)};
}

PairTerms pair_terms(const LayerKernels& k, const Layout& lay, int c1, int c2) {
  const auto& s1 = members(lay.source, c1);
  const auto& t2 = members(lay.target, c2);
  if (s1.empty() || t2.empty()) throw Error("empty class pair");
  const double ns = static_cast<double>(s1.size());
  const double nt = static_cast<double>(t2.size());
  PairTerms p;
  p.e1 = block_sum(k.ss, s1, s1) / (ns * ns);
  p.e2 = block_sum(k.tt, t2, t2) / (nt * nt);
  p.e3 = block_sum(k.st, s1, t2) / (ns * nt);
  p.value = p.e1 + p.e2 - 2.0 * p.e3;
  return p;
}

void check_specs(const std::vector<KernelSpec>& specs, const LabeledBatch& batch) {
  if (specs.size() != batch.layers()) throw Error("cdd: one kernel spec per layer required");
}

}  // namespace

double mmd_squared(const KernelSpec& spec, const Matrix& source, const Matrix& target) {
  if (source.rows() == 0 || target.rows() == 0) throw Error("empty domain in MMD");
  if (source.cols() != target.cols()) throw Error("mmd: dimension mismatch");
  const double ns = static_cast<double>(source.rows());
  const double nt = static_cast<double>(target.rows());
  auto sum = [](const Matrix& m) {
    double s = 0.0;
    for (double v : m.values()) s += v;
    return s;
  };
  return sum(kernel_matrix(spec, source, source)) / (ns * ns) +
         sum(kernel_matrix(spec, target, target)) / (nt * nt) -
         2.0 * sum(kernel_matrix(spec, source, target)) / (ns * nt);
}

PairTerms class_pair_discrepancy(const KernelSpec& spec, const LabeledBatch& batch, std::size_t layer,
                                 int c1, int c2) {
  check_shapes(batch);
  if (layer >= batch.layers()) throw Error("class pair discrepancy: layer out of range");
  const Layout lay{members_of(batch.source_labels), members_of(batch.target_labels), {}, 0, 0};
  if (members(lay.source, c1).empty() || members(lay.target, c2).empty()) throw Error("empty class pair");
  return pair_terms(layer_kernels(spec, batch, layer), lay, c1, c2);
}

CddValue cdd(const std::vector<KernelSpec>& specs, const LabeledBatch& batch, const CddOptions& options) {
  check_specs(specs, batch);
  const Layout lay = plan_terms(batch, options);
  CddValue out;
  for (std::size_t l = 0; l < batch.layers(); ++l) {
    const LayerKernels k = layer_kernels(specs[l], batch, l);
    LayerCdd layer;
    for (const Term& t : lay.terms) {
      const double d = pair_terms(k, lay, t.c1, t.c2).value;
      out.per_pair[{l, t.c1, t.c2}] = d;
      if (t.intra) {
        layer.intra += t.weight * d;
      } else {
        layer.inter -= t.weight * d;
      }
    }
    layer.total = layer.intra - layer.inter;
    out.intra += layer.intra;
    out.inter += layer.inter;
    out.total += layer.total;
    out.per_layer.push_back(layer);
  }
  return out;
}

std::vector<FeatureGrad> cdd_grad(const std::vector<KernelSpec>& specs, const LabeledBatch& batch,
                                  const CddOptions& options) {
  check_specs(specs, batch);
  const Layout lay = plan_terms(batch, options);

  // d total / d e1(c), d e2(c), d e3(c1, c2) accumulated over the weighted terms.
  std::map<int, double> coef_e1;
  std::map<int, double> coef_e2;
  std::map<std::pair<int, int>, double> coef_e3;
  for (const Term& t : lay.terms) {
    coef_e1[t.c1] += t.weight;
    coef_e2[t.c2] += t.weight;
    coef_e3[{t.c1, t.c2}] += -2.0 * t.weight;
  }

  const std::size_t ns = batch.source_labels.size();
  const std::size_t nt = batch.target_labels.size();
  auto count = [](const Members& m, int c) { return static_cast<double>(members(m, c).size()); };

  Matrix u_ss(ns, ns);
  for (const auto& [c, w] : coef_e1) {
    const auto& idx = members(lay.source, c);
    const double scale = w / (count(lay.source, c) * count(lay.source, c));
    for (std::size_t i : idx)
      for (std::size_t j : idx) u_ss(i, j) = scale;
  }
  Matrix u_tt(nt, nt);
  for (const auto& [c, w] : coef_e2) {
    const auto& idx = members(lay.target, c);
    const double scale = w / (count(lay.target, c) * count(lay.target, c));
    for (std::size_t i : idx)
      for (std::size_t j : idx) u_tt(i, j) = scale;
  }
  Matrix u_st(ns, nt);
  for (const auto& [pair, w] : coef_e3) {
    const auto& si = members(lay.source, pair.first);
    const auto& tj = members(lay.target, pair.second);
    const double scale = w / (count(lay.source, pair.first) * count(lay.target, pair.second));
    for (std::size_t i : si)
      for (std::size_t j : tj) u_st(i, j) = scale;
  }

  std::vector<FeatureGrad> grads;
  grads.reserve(batch.layers());
  for (std::size_t l = 0; l < batch.layers(); ++l) {
    const Matrix& s = batch.source_features[l];
    const Matrix& t = batch.target_features[l];
    const KernelGrad gss = kernel_matrix_grad(specs[l], s, s, u_ss);
    const KernelGrad gtt = kernel_matrix_grad(specs[l], t, t, u_tt);
    const KernelGrad gst = kernel_matrix_grad(specs[l], s, t, u_st);
    FeatureGrad g{gss.grad_a, gtt.grad_a};
    for (std::size_t i = 0; i < g.source.size(); ++i) {
      g.source.values()[i] += gss.grad_b.values()[i] + gst.grad_a.values()[i];
    }
    for (std::size_t i = 0; i < g.target.size(); ++i) {
      g.target.values()[i] += gtt.grad_b.values()[i] + gst.grad_b.values()[i];
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

std::vector<KernelSpec> kernels_for_batch(const LabeledBatch& batch) {
  check_shapes(batch);
  std::vector<KernelSpec> specs;
  for (std::size_t l = 0; l < batch.layers(); ++l) {
    specs.push_back(KernelSpec::multi_scale(median_heuristic(batch.source_features[l], batch.target_features[l])));
  }
  return specs;
}

}  // namespace can
