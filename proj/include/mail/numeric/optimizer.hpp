#pragma once

#include <map>
#include <string>

#include "mail/numeric/parameter_store.hpp"

namespace mail::numeric {

// theta <- theta - lr * grad for every trainable parameter, then zero grads.
void sgd_step(ParameterStore& store, double learning_rate);

struct AdamHyperparams {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamHyperparams hp = {}) : hp_(hp) {}

  // Bias-corrected Adam update; frozen parameters are skipped and all
  // gradients are zeroed afterwards.
  void step(ParameterStore& store);

  const AdamHyperparams& hyperparams() const noexcept { return hp_; }
  long steps() const noexcept { return t_; }

 private:
  struct Moments {
    Tensor m;
    Tensor v;
  };

  AdamHyperparams hp_;
  long t_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace mail::numeric
