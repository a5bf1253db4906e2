#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "atnf/autograd.hpp"
#include "atnf/tensor.hpp"

// Central-difference verification of reverse-mode gradients.
namespace atnf::gradcheck {

struct Options {
  double eps = 1e-3;
  /// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  /// Entries checked per tensor; 0 checks every entry.
  int max_entries_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct Param {
  std::string name;
  Tensor* tensor;
};

struct Report {
  double max_rel_error = 0.0;
  int checked = 0;
  /// Entries whose +/- eps or +/- 2 eps evaluations changed a ReLU/max/clamp pattern.
  int skipped_kinks = 0;
  std::string worst_name;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Builds a scalar loss; every tensor read through the binder is a candidate parameter.
using LossBuilder = std::function<ad::Var(ad::Binder&)>;

/// Analytic gradients of the loss with respect to `trainable` (others are constants).
std::vector<Tensor> analytic_gradients(const std::vector<Param>& params, const LossBuilder& loss);

/// Compares analytic gradients with fourth-order central differences at step
/// eps for every (sampled) entry of every parameter. Throws ArgumentError for eps <= 0 and
/// NumericError for a non-finite loss.
Report grad_check(const std::vector<Param>& params, const LossBuilder& loss, const Options& options = {});

}  // namespace atnf::gradcheck
