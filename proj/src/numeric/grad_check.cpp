#include "mail/numeric/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "mail/error.hpp"
#include "mail/numeric/random.hpp"

namespace mail::numeric {
namespace {

double evaluate(const LossFn& loss_fn, ParameterStore& store) {
  const double loss = loss_fn(store);
  if (!std::isfinite(loss)) throw Error(ErrorCode::kNonFiniteLoss, "grad_check loss evaluated to " + std::to_string(loss));
  return loss;
}

}  // namespace

GradCheckReport grad_check(const LossFn& loss_fn, ParameterStore& store, const GradCheckOptions& options) {
  store.zero_grad();
  evaluate(loss_fn, store);
  std::map<std::string, Tensor> analytic;
  for (const auto& [name, p] : store.entries()) analytic.emplace(name, p.grad);
  store.zero_grad();

  GradCheckReport report;
  Rng rng(options.seed);
  for (const auto& [name, p] : store.entries()) {
    if (p.frozen) {
      report.skipped_frozen.push_back(name);
      continue;
    }
    const std::size_t n = p.value.numel();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (n > options.max_coords_per_param) {
      rng.shuffle(coords);
      coords.resize(options.max_coords_per_param);
      std::sort(coords.begin(), coords.end());
    }

    ParamCheck check{name, coords.size(), 0.0, 0.0};
    for (std::size_t i : coords) {
      Tensor& value = store.mutable_value(name);
      const double original = value[i];
      value[i] = original + options.epsilon;
      const double plus = evaluate(loss_fn, store);
      store.mutable_value(name)[i] = original - options.epsilon;
      const double minus = evaluate(loss_fn, store);
      store.mutable_value(name)[i] = original;

      const double numeric = (plus - minus) / (2.0 * options.epsilon);
      const double exact = analytic.at(name)[i];
      const double abs_err = std::abs(exact - numeric);
      const double rel_err = abs_err / std::max({std::abs(exact), std::abs(numeric), options.denominator_floor});
      check.max_abs_error = std::max(check.max_abs_error, abs_err);
      check.max_rel_error = std::max(check.max_rel_error, rel_err);
    }
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.params.push_back(std::move(check));
  }
  store.zero_grad();
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

}  // namespace mail::numeric
