#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lcam {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

// Thrown when kernel operands do not conform.
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense row-major array of doubles. Kernels work on rank-2 tensors; a vector
// is a 1 x n row and a scalar is 1 x 1.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(std::size_t rows, std::size_t cols);
  static Tensor filled(std::size_t rows, std::size_t cols, double value);
  static Tensor scalar(double value);
  static Tensor row(std::vector<double> values);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor from_rows(const std::vector<std::vector<double>>& rows);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const { return values_; }
  std::span<double> mutable_values() { return values_; }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }

  double item() const;
  std::vector<double> row_values(std::size_t r) const;
  bool all_finite() const;

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

}  // namespace lcam
