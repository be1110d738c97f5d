#include "lcam/params.hpp"

#include <cmath>
#include <stdexcept>

#include "lcam/rng.hpp"

namespace lcam {

std::string_view encoder_mode_name(EncoderMode mode) {
  return mode == EncoderMode::bilstm ? "bilstm" : "precomputed";
}

std::optional<EncoderMode> parse_encoder_mode(std::string_view text) {
  if (text == "bilstm") return EncoderMode::bilstm;
  if (text == "precomputed") return EncoderMode::precomputed;
  return std::nullopt;
}

void ModelConfig::validate() const {
  if (input_dim == 0 || hidden_dim == 0 || attention_b == 0) {
    throw std::invalid_argument("model config: dimensions must be positive");
  }
  if (encoder_mode == EncoderMode::bilstm && hidden_dim % 2 != 0) {
    throw std::invalid_argument("model config: bilstm hidden_dim must be even, got " + std::to_string(hidden_dim));
  }
  if (encoder_mode == EncoderMode::precomputed && hidden_dim != input_dim) {
    throw std::invalid_argument("model config: precomputed mode needs hidden_dim == embedding dim (" +
                                std::to_string(hidden_dim) + " vs " + std::to_string(input_dim) + ")");
  }
}

Shape expected_shape(const ModelConfig& c, std::string_view name) {
  const std::size_t k = c.hidden_dim, b = c.attention_b, d = c.input_dim, h = k / 2;
  if (name.starts_with("encoder.")) {
    if (name.ends_with(".input_weights")) return {d, 4 * h};
    if (name.ends_with(".recurrent_weights")) return {h, 4 * h};
    if (name.ends_with(".bias")) return {1, 4 * h};
  }
  const bool token = name.starts_with("token_");
  const std::size_t labels = token ? kTokenLabels : kSentenceLabels;
  if (name.ends_with("attention.W")) return {labels, b};
  if (name.ends_with("attention.V")) return {b, k};
  if (name.ends_with("attention.U")) return {labels, k};
  if (name.ends_with("head.weight")) return {1, k};
  if (name.ends_with("head.bias")) return {1, labels};
  throw std::invalid_argument("unknown parameter '" + std::string(name) + "'");
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams p;
  p.has_encoder = config.encoder_mode == EncoderMode::bilstm;
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.hidden_dim));
  const std::size_t h = config.hidden_dim / 2;
  p.for_each([&](std::string_view name, Tensor& t) {
    const Shape shape = expected_shape(config, name);
    std::vector<double> values(shape[0] * shape[1], 0.0);
    if (name.starts_with("encoder.") && name.ends_with(".bias")) {
      for (std::size_t j = h; j < 2 * h; ++j) values[j] = 1.0;
    } else if (!name.ends_with("head.bias")) {
      for (double& v : values) v = rng.uniform(-bound, bound);
    }
    t = Tensor(shape, std::move(values));
  });
  return p;
}

BoundParams bind(Tape& tape, const ModelParams& params, bool requires_grad) {
  BoundParams out;
  out.has_encoder = params.has_encoder;
  // Walk both structures in the same order.
  std::vector<Var> vars;
  params.for_each([&](std::string_view, const Tensor& t) { vars.push_back(tape.leaf(t, requires_grad)); });
  std::size_t i = 0;
  out.for_each([&](std::string_view, Var& v) { v = vars[i++]; });
  return out;
}

}  // namespace lcam
