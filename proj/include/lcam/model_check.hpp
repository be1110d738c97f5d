#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lcam/corpus.hpp"
#include "lcam/params.hpp"

namespace lcam {

struct ModelGradCheck {
  double max_relative_error = 0.0;
  std::vector<std::pair<std::string, double>> per_param;  // ParamSet order
  std::size_t entries = 0;
};

// Two-sentence abstract of `tokens`-token sentences with spans and types
// (multi-label in the first sentence); used as the gradient-check probe.
AbstractDoc gradcheck_abstract(std::size_t tokens);

// Central-difference check of the mean joint loss over the probe abstract,
// for a randomly initialised model with random inputs, dropout off.
ModelGradCheck model_gradcheck(const ModelConfig& config, std::uint64_t seed, std::size_t tokens = 5,
                               double h = 1e-4);

}  // namespace lcam
