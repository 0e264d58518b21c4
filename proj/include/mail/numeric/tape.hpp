#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "mail/numeric/parameter_store.hpp"
#include "mail/numeric/tensor.hpp"

namespace mail::numeric {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
// owning tape is alive.
class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode differentiation over a dynamically recorded operation list.
// Every primitive in ops.hpp appends one node whose backward closure pushes
// the output gradient onto its inputs.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var leaf(Tensor value);
  // Frozen parameters enter the tape as constants; trainable ones are leaves
  // whose gradient is added to the store by backward().
  Var parameter(ParameterStore& store, const std::string& name);

  // Records an op result. `backward` is dropped when no input needs a gradient.
  Var record(Tensor value, bool requires_grad, BackwardFn backward, const char* op);

  void backward(Var loss, double seed = 1.0);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Gradient of the most recent backward() w.r.t. a node (zeros if untouched).
  Tensor grad(Var v) const;
  // Mutable gradient buffer of an input, allocated on first use; nullptr
  // when the node does not require a gradient.
  Tensor* grad_sink(Var v);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
    ParameterStore* store = nullptr;
    std::string param_name;
  };

  // deque: references to recorded values stay valid as the tape grows.
  std::deque<Node> nodes_;
};

}  // namespace mail::numeric
