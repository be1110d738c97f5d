#pragma once

#include <cstddef>
#include <span>

#include "lcam/tensor.hpp"

// Forward kernels shared by the tape and by direct (tape-free) callers.
// Every kernel validates its operands and throws DimensionError naming the
// kernel and the offending shapes.
namespace lcam::kernels {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
// Adds a 1 x n row to every row of an m x n matrix.
Tensor add_rows(const Tensor& matrix, const Tensor& row);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor concat_rows(std::span<const Tensor* const> parts);
Tensor concat_cols(std::span<const Tensor* const> parts);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count);
Tensor select_row(const Tensor& a, std::size_t row);
// Mean over axis 0: m x n -> 1 x n.
Tensor mean_rows(const Tensor& a);
// Applies a precomputed (already scaled) dropout mask.
Tensor dropout(const Tensor& a, const Tensor& mask);
// Softmax along each row, max-subtracted.
Tensor softmax_rows(const Tensor& a);
Tensor sum(const Tensor& a);
// Sum over rows of -log softmax(logits[r])[targets[r]].
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets);
// Sum of binary cross-entropy of sigmoid(logits) against 0/1 targets,
// evaluated in the overflow-free logits form.
Tensor bce_with_logits(const Tensor& logits, const Tensor& targets);

// Vector softmax over a 1 x n row (empty input is an error).
std::vector<double> softmax(std::span<const double> v);

}  // namespace lcam::kernels
