#include "lcam/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lcam {
namespace {

double evaluate(const LossBuilder& f, std::span<const Tensor> params) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (const Tensor& p : params) leaves.push_back(tape.leaf(p, false));
  const double value = f(tape, leaves).value().item();
  if (!std::isfinite(value)) throw std::domain_error("finite_difference_check: loss is not finite");
  return value;
}

}  // namespace

GradCheckResult finite_difference_check(const LossBuilder& f, std::span<const Tensor> params, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_difference_check: step must be positive");

  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const Tensor& p : params) leaves.push_back(tape.leaf(p, true));
    const Var loss = f(tape, leaves);
    if (!std::isfinite(loss.value().item())) throw std::domain_error("finite_difference_check: loss is not finite");
    const Gradients grads = tape.backward(loss);
    for (Var leaf : leaves) analytic.push_back(grads[leaf]);
  }

  GradCheckResult result;
  result.per_param.assign(params.size(), 0.0);
  std::vector<Tensor> probe(params.begin(), params.end());
  for (std::size_t p = 0; p < probe.size(); ++p) {
    for (std::size_t i = 0; i < probe[p].size(); ++i) {
      const double saved = probe[p][i];
      probe[p][i] = saved + h;
      const double up = evaluate(f, probe);
      probe[p][i] = saved - h;
      const double down = evaluate(f, probe);
      probe[p][i] = saved;

      const double numeric = (up - down) / (2.0 * h);
      const double exact = analytic[p][i];
      if (!std::isfinite(exact)) {
        throw std::domain_error("finite_difference_check: non-finite gradient in parameter " + std::to_string(p));
      }
      const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
      const double err = std::abs(exact - numeric) / denom;
      result.per_param[p] = std::max(result.per_param[p], err);
      result.max_relative_error = std::max(result.max_relative_error, err);
      ++result.entries;
    }
  }
  return result;
}

}  // namespace lcam
