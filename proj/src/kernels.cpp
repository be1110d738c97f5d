#include "lcam/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lcam::kernels {
namespace {

void require_matrix(const Tensor& a, const char* kernel) {
  if (a.rank() != 2) {
    throw DimensionError(std::string(kernel) + ": expected a matrix, got " + shape_string(a.shape()));
  }
}

[[noreturn]] void mismatch(const char* kernel, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(kernel) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                       shape_string(b.shape()));
}

void require_same(const Tensor& a, const Tensor& b, const char* kernel) {
  if (a.shape() != b.shape()) mismatch(kernel, a, b);
}

template <typename F>
Tensor map(const Tensor& a, F f) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return Tensor(a.shape(), std::move(out));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.cols() != b.rows()) mismatch("matmul", a, b);
  const std::size_t m = a.rows(), n = a.cols(), p = b.cols();
  std::vector<double> out(m * p, 0.0);
  // i-k-j order; each output entry still accumulates over k in ascending order.
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * p;
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = a(i, k);
      const double* brow = b.values().data() + k * p;
      for (std::size_t j = 0; j < p; ++j) row[j] += aik * brow[j];
    }
  }
  return Tensor({m, p}, std::move(out));
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a(i, j);
  return Tensor({n, m}, std::move(out));
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return Tensor(a.shape(), std::move(out));
}

Tensor add_rows(const Tensor& matrix, const Tensor& row) {
  require_matrix(matrix, "add_rows");
  require_matrix(row, "add_rows");
  if (row.rows() != 1 || row.cols() != matrix.cols()) mismatch("add_rows", matrix, row);
  const std::size_t m = matrix.rows(), n = matrix.cols();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = matrix(i, j) + row[j];
  return Tensor(matrix.shape(), std::move(out));
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return Tensor(a.shape(), std::move(out));
}

Tensor scale(const Tensor& a, double factor) {
  return map(a, [factor](double x) { return x * factor; });
}

Tensor tanh(const Tensor& a) {
  return map(a, [](double x) { return std::tanh(x); });
}

Tensor sigmoid(const Tensor& a) { return map(a, stable_sigmoid); }

Tensor concat_rows(std::span<const Tensor* const> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  require_matrix(*parts[0], "concat_rows");
  const std::size_t n = parts[0]->cols();
  std::size_t m = 0;
  std::vector<double> out;
  for (const Tensor* p : parts) {
    require_matrix(*p, "concat_rows");
    if (p->cols() != n) mismatch("concat_rows", *parts[0], *p);
    m += p->rows();
    out.insert(out.end(), p->values().begin(), p->values().end());
  }
  return Tensor({m, n}, std::move(out));
}

Tensor concat_cols(std::span<const Tensor* const> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  require_matrix(*parts[0], "concat_cols");
  const std::size_t m = parts[0]->rows();
  std::size_t n = 0;
  for (const Tensor* p : parts) {
    require_matrix(*p, "concat_cols");
    if (p->rows() != m) mismatch("concat_cols", *parts[0], *p);
    n += p->cols();
  }
  std::vector<double> out(m * n);
  std::size_t offset = 0;
  for (const Tensor* p : parts) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < p->cols(); ++j) out[i * n + offset + j] = (*p)(i, j);
    offset += p->cols();
  }
  return Tensor({m, n}, std::move(out));
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count) {
  require_matrix(a, "slice_cols");
  if (count == 0 || begin + count > a.cols()) {
    throw DimensionError("slice_cols: columns [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + shape_string(a.shape()));
  }
  const std::size_t m = a.rows();
  std::vector<double> out(m * count);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = a(i, begin + j);
  return Tensor({m, count}, std::move(out));
}

Tensor select_row(const Tensor& a, std::size_t row) {
  require_matrix(a, "select_row");
  if (row >= a.rows()) {
    throw DimensionError("select_row: row " + std::to_string(row) + " out of range for " + shape_string(a.shape()));
  }
  return Tensor::row(a.row_values(row));
}

Tensor mean_rows(const Tensor& a) {
  require_matrix(a, "mean_rows");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += a(i, j);
  for (double& v : out) v /= static_cast<double>(m);
  return Tensor({1, n}, std::move(out));
}

Tensor dropout(const Tensor& a, const Tensor& mask) {
  require_same(a, mask, "dropout");
  return mul(a, mask);
}

std::vector<double> softmax(std::span<const double> v) {
  if (v.empty()) throw DimensionError("softmax: empty vector");
  const double peak = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - peak);
    total += out[i];
  }
  for (double& x : out) x /= total;
  return out;
}

Tensor softmax_rows(const Tensor& a) {
  require_matrix(a, "softmax_rows");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out;
  out.reserve(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = softmax(a.values().subspan(i * n, n));
    out.insert(out.end(), row.begin(), row.end());
  }
  return Tensor(a.shape(), std::move(out));
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  return Tensor::scalar(total);
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets) {
  require_matrix(logits, "cross_entropy");
  if (targets.size() != logits.rows()) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                         shape_string(logits.shape()));
  }
  const std::size_t n = logits.cols();
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    if (targets[r] >= n) throw DimensionError("cross_entropy: target index out of range");
    const auto row = logits.values().subspan(r * n, n);
    const double peak = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double x : row) z += std::exp(x - peak);
    total += peak + std::log(z) - row[targets[r]];
  }
  return Tensor::scalar(total);
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& targets) {
  require_same(logits, targets, "bce_with_logits");
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i], y = targets[i];
    total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  return Tensor::scalar(total);
}

}  // namespace lcam::kernels
