#include "mail/numeric/tape.hpp"

#include "mail/error.hpp"

namespace mail::numeric {

const Tensor& Var::value() const { return tape_->value(id_); }

bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(Tensor value) { return record(std::move(value), false, nullptr, "constant"); }

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor{}, true, nullptr, nullptr, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(ParameterStore& store, const std::string& name) {
  if (store.frozen(name)) return constant(store.value(name));
  Var v = leaf(store.value(name));
  nodes_.back().store = &store;
  nodes_.back().param_name = name;
  return v;
}

Var Tape::record(Tensor value, bool requires_grad, BackwardFn backward, const char* op) {
#ifndef NDEBUG
  if (!value.all_finite()) {
    throw Error(ErrorCode::kNonFiniteLoss, std::string("non-finite value produced by ") + op);
  }
#else
  (void)op;
#endif
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  if (requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor* Tape::grad_sink(Var v) {
  Node& node = nodes_[v.id()];
  if (!node.requires_grad) return nullptr;
  if (node.grad.numel() != node.value.numel() || node.grad.shape() != node.value.shape()) {
    node.grad = Tensor(node.value.shape());
  }
  return &node.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& node = nodes_[v.id()];
  if (node.grad.shape() == node.value.shape() && node.grad.numel() == node.value.numel()) {
    return node.grad;
  }
  return Tensor(node.value.shape());
}

void Tape::backward(Var loss, double seed) {
  if (loss.value().numel() != 1) {
    throw Error(ErrorCode::kShapeMismatch, "backward() needs a scalar loss, got " +
                                               shape_string(loss.shape()));
  }
  for (Node& node : nodes_) node.grad = Tensor{};
  Tensor* g = grad_sink(loss);
  if (g == nullptr) return;
  (*g)[0] = seed;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || node.grad.shape() != node.value.shape() ||
        node.grad.numel() != node.value.numel()) {
      continue;
    }
    if (node.backward) node.backward(*this, node.grad);
    if (node.store != nullptr) node.store->accumulate_grad(node.param_name, node.grad);
  }
}

}  // namespace mail::numeric
