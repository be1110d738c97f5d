#include "lcam/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

namespace lcam {

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (shape_.empty()) throw DimensionError("tensor: empty shape");
  std::size_t n = 1;
  for (std::size_t d : shape_) {
    if (d == 0) throw DimensionError("tensor: zero extent in shape " + shape_string(shape_));
    n *= d;
  }
  if (n != values_.size()) {
    throw DimensionError("tensor: shape " + shape_string(shape_) + " needs " + std::to_string(n) +
                         " values, got " + std::to_string(values_.size()));
  }
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols) { return filled(rows, cols, 0.0); }

Tensor Tensor::filled(std::size_t rows, std::size_t cols, double value) {
  return Tensor({rows, cols}, std::vector<double>(rows * cols, value));
}

Tensor Tensor::scalar(double value) { return Tensor({1, 1}, {value}); }

Tensor Tensor::row(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({1, n}, std::move(values));
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  std::vector<std::vector<double>> copy;
  for (const auto& r : rows) copy.emplace_back(r);
  return from_rows(copy);
}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw DimensionError("tensor: no rows");
  const std::size_t cols = rows.front().size();
  std::vector<double> values;
  values.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw DimensionError("tensor: ragged rows");
    values.insert(values.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), cols}, std::move(values));
}

std::size_t Tensor::rows() const {
  if (shape_.size() != 2) throw DimensionError("tensor: rows() on rank-" + std::to_string(shape_.size()) + " tensor");
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (shape_.size() != 2) throw DimensionError("tensor: cols() on rank-" + std::to_string(shape_.size()) + " tensor");
  return shape_[1];
}

double Tensor::item() const {
  if (values_.size() != 1) throw DimensionError("tensor: item() on shape " + shape_string(shape_));
  return values_[0];
}

std::vector<double> Tensor::row_values(std::size_t r) const {
  const std::size_t c = cols();
  return {values_.begin() + static_cast<std::ptrdiff_t>(r * c),
          values_.begin() + static_cast<std::ptrdiff_t>((r + 1) * c)};
}

bool Tensor::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace lcam
