#include "mail/numeric/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "mail/error.hpp"

namespace mail::numeric {

std::size_t shape_numel(const Shape& shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_numel(shape_)) {
    throw Error(ErrorCode::kShapeMismatch, "tensor data length " + std::to_string(data_.size()) +
                                               " does not match shape " + shape_string(shape_));
  }
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(Shape{n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor(Shape{rows, cols}, std::move(values));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

std::size_t Tensor::rows() const noexcept { return rank() == 2 ? shape_[0] : 1; }

std::size_t Tensor::cols() const noexcept {
  if (rank() == 2) return shape_[1];
  if (rank() == 1) return shape_[0];
  return 1;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw Error(ErrorCode::kShapeMismatch, "item() on tensor of shape " + shape_string(shape_));
  }
  return data_[0];
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != numel()) {
    throw Error(ErrorCode::kShapeMismatch,
                "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorCode::kShapeMismatch, std::string(op) + ": " + shape_string(a.shape()) + " vs " +
                                               shape_string(b.shape()));
  }
}

}  // namespace mail::numeric
