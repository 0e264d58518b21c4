#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mail/numeric/parameter_store.hpp"

namespace mail::numeric {

// Computes the loss at the store's current values and adds analytic
// gradients into store grads (typically: build a tape, call backward()).
using LossFn = std::function<double(ParameterStore&)>;

struct GradCheckOptions {
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  // Coordinates per parameter; tensors at or below this size are checked
  // exhaustively, larger ones are sampled.
  std::size_t max_coords_per_param = 64;
  std::uint64_t seed = 0;
  // Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  double denominator_floor = 1e-8;
};

struct ParamCheck {
  std::string name;
  std::size_t coords_checked = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  std::vector<std::string> skipped_frozen;
  double max_rel_error = 0.0;
  bool passed = true;
};

// Central differences (L(t+e) - L(t-e)) / 2e against analytic gradients.
// Throws Error(kNonFiniteLoss) when any evaluation is not finite.
GradCheckReport grad_check(const LossFn& loss_fn, ParameterStore& store, const GradCheckOptions& options = {});

}  // namespace mail::numeric
