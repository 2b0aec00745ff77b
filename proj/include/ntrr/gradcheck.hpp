#pragma once

// Central finite differences, used as the independent oracle for every
// analytic gradient in the library.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ntrr/tensor.hpp"

namespace ntrr {

inline constexpr double kFiniteDiffStep = 1e-5;
/// Denominator floor for relative errors: |a - n| / max(|a|, |n|, floor).
/// One rounding unit of a central difference on an O(1) loss is ~2e-11, so a
/// smaller floor turns exactly-zero gradients into noise.
inline constexpr double kRelErrorFloor = 1e-5;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// d f / d params by fourth-order central differences, one scalar at a time. `f` must be
/// deterministic (fixed rng streams) and read the current parameter values.
std::vector<std::vector<double>> finite_diff_grad(const std::function<double()>& f, std::span<Tensor> params,
                                                  double step = kFiniteDiffStep);

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                          double floor = kRelErrorFloor);

struct GroupError {
  std::string name;
  std::size_t count = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GroupError> groups;
  double worst() const;
  bool passed(double tolerance) const { return worst() <= tolerance; }
};

/// Runs `loss_fn` once with backward, then compares every parameter's
/// gradient with finite differences of `loss_fn().item()`. Parameter
/// gradients are zeroed first and left holding the analytic values.
/// Tensors sharing a group prefix (text before the first '.') are pooled
/// when `group_by_prefix` is set.
GradCheckReport check_gradients(const std::function<Tensor()>& loss_fn, std::span<NamedTensor> params,
                                double step = kFiniteDiffStep, bool group_by_prefix = false);

}  // namespace ntrr
