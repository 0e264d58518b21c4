#include "mail/numeric/optimizer.hpp"

#include <cmath>

namespace mail::numeric {

void sgd_step(ParameterStore& store, double learning_rate) {
  for (const auto& [name, p] : store.entries()) {
    if (p.frozen) continue;
    Tensor& value = store.mutable_value(name);
    auto g = p.grad.data();
    auto v = value.data();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= learning_rate * g[i];
  }
  store.zero_grad();
}

void Adam::step(ParameterStore& store) {
  ++t_;
  const double correction1 = 1.0 - std::pow(hp_.beta1, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(hp_.beta2, static_cast<double>(t_));
  for (const auto& [name, p] : store.entries()) {
    if (p.frozen) continue;
    auto [it, inserted] = moments_.try_emplace(name, Moments{Tensor(p.value.shape()), Tensor(p.value.shape())});
    Moments& mom = it->second;
    Tensor& value = store.mutable_value(name);
    auto g = p.grad.data();
    auto v = value.data();
    for (std::size_t i = 0; i < v.size(); ++i) {
      mom.m[i] = hp_.beta1 * mom.m[i] + (1.0 - hp_.beta1) * g[i];
      mom.v[i] = hp_.beta2 * mom.v[i] + (1.0 - hp_.beta2) * g[i] * g[i];
      const double m_hat = mom.m[i] / correction1;
      const double v_hat = mom.v[i] / correction2;
      v[i] -= hp_.learning_rate * m_hat / (std::sqrt(v_hat) + hp_.epsilon);
    }
  }
  store.zero_grad();
}

}  // namespace mail::numeric
