#pragma once

#include "can/discrepancy.hpp"
#include "can/model.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace can {

// Central-difference gradient of f at x (x is restored on return).
std::vector<double> numeric_gradient(const std::function<double()>& f, std::span<double> x, double step);

// max_i |analytic_i - numeric_i| / max_i |numeric_i|; 0 when both vanish.
double scaled_max_error(std::span<const double> analytic, std::span<const double> numeric);

// A composite training objective on raw inputs:
//   CE(source_ce) + beta * CDD(network taps of cdd_source / cdd_target).
struct CompositeProblem {
  Matrix ce_inputs;
  std::vector<int> ce_labels;
  Matrix cdd_source_inputs;
  std::vector<int> cdd_source_labels;
  Matrix cdd_target_inputs;
  std::vector<int> cdd_target_labels;
  std::vector<int> class_set;
  std::vector<KernelSpec> kernels;  // one per tap (bottleneck, output)
  OutputTap output_tap = OutputTap::Logits;
  double beta = 0.3;
  CddOptions options;
};

double composite_loss(const ModelParams& params, const CompositeProblem& problem);
ModelParams composite_grad(const ModelParams& params, const CompositeProblem& problem);

struct GradCheckOptions {
  std::uint64_t seed = 0;
  double rtol = 1e-4;
  double step = 1e-5;
  std::size_t instances_per_component = 10;
};

struct ComponentReport {
  std::string name;
  std::size_t instances = 0;
  std::size_t entries = 0;
  double max_error = 0.0;
  bool passed = false;
};

struct GradCheckReport {
  std::vector<ComponentReport> components;
  double seconds = 0.0;
  bool passed() const;
};

// Seeded finite-difference checks of kernel_matrix_grad, cdd_grad and the full
// composite model gradient (with either output tap).
GradCheckReport run_gradcheck(const GradCheckOptions& options);

}  // namespace can
