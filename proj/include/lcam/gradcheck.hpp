#pragma once

#include <functional>
#include <span>
#include <vector>

#include "lcam/tape.hpp"

namespace lcam {

// Builds a scalar loss on `tape` from leaves bound to the parameters.
using LossBuilder = std::function<Var(Tape& tape, std::span<const Var> params)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::vector<double> per_param;  // max relative error per parameter tensor
  std::size_t entries = 0;
};

// Compares backward() against central differences (f(p+h) - f(p-h)) / 2h for
// every parameter entry. Relative error is |a - n| / max(|a|, |n|, 1e-8).
// Throws std::domain_error if the loss or any gradient is not finite.
GradCheckResult finite_difference_check(const LossBuilder& f, std::span<const Tensor> params, double h = 1e-4);

}  // namespace lcam
