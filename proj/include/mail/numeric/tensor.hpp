#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace mail::numeric {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

// Dense row-major tensor of doubles. Rank 0 (scalar), 1 (vector) and
// 2 (matrix) are the only ranks the model uses.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor identity(std::size_t n);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t numel() const noexcept { return data_.size(); }
  // Matrix view: a vector is treated as a single row, a scalar as 1x1.
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<const double> row(std::size_t r) const { return data().subspan(r * cols(), cols()); }
  std::span<double> row(std::size_t r) { return data().subspan(r * cols(), cols()); }

  double item() const;
  void fill(double value);
  Tensor reshaped(Shape shape) const;
  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

}  // namespace mail::numeric
