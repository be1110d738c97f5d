#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "lcam/corpus.hpp"
#include "lcam/tape.hpp"
#include "lcam/tensor.hpp"

namespace lcam {

enum class EncoderMode { bilstm, precomputed };

std::string_view encoder_mode_name(EncoderMode mode);
std::optional<EncoderMode> parse_encoder_mode(std::string_view text);

inline constexpr std::size_t kTokenLabels = kNumTags;             // |l_w|
inline constexpr std::size_t kSentenceLabels = kNumOutcomeTypes;  // |l_s|

struct ModelConfig {
  EncoderMode encoder_mode = EncoderMode::bilstm;
  std::size_t input_dim = 0;    // d
  std::size_t hidden_dim = 0;   // k
  std::size_t attention_b = 0;  // b
  bool disable_attention = false;
  bool disable_abstract_context = false;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Gate blocks are laid out [input | forget | cell | output] along the columns.
template <typename T>
struct LstmDirection {
  T input_weights;      // d x 4h
  T recurrent_weights;  // h x 4h
  T bias;               // 1 x 4h
};

template <typename T>
struct AttentionParams {
  T W;  // L x b
  T V;  // b x k
  T U;  // L x k
};

template <typename T>
struct ScoringHead {
  T weight;  // 1 x k, shared across the label rows of E
  T bias;    // 1 x L, one offset per label
};

// All trainable weights. Instantiated with Tensor for storage and with Var
// for a set bound to a Tape.
template <typename T>
struct ParamSet {
  bool has_encoder = false;  // bilstm mode only
  LstmDirection<T> forward;
  LstmDirection<T> backward;
  AttentionParams<T> token_attention;
  AttentionParams<T> sentence_attention;
  ScoringHead<T> token_head;
  ScoringHead<T> sentence_head;

  // Calls f(name, member) in a fixed order.
  template <typename F>
  void for_each(F&& f) {
    visit(*this, f);
  }
  template <typename F>
  void for_each(F&& f) const {
    visit(*this, f);
  }

 private:
  template <typename Self, typename F>
  static void visit(Self& self, F& f) {
    if (self.has_encoder) {
      f("encoder.forward.input_weights", self.forward.input_weights);
      f("encoder.forward.recurrent_weights", self.forward.recurrent_weights);
      f("encoder.forward.bias", self.forward.bias);
      f("encoder.backward.input_weights", self.backward.input_weights);
      f("encoder.backward.recurrent_weights", self.backward.recurrent_weights);
      f("encoder.backward.bias", self.backward.bias);
    }
    f("token_attention.W", self.token_attention.W);
    f("token_attention.V", self.token_attention.V);
    f("token_attention.U", self.token_attention.U);
    f("sentence_attention.W", self.sentence_attention.W);
    f("sentence_attention.V", self.sentence_attention.V);
    f("sentence_attention.U", self.sentence_attention.U);
    f("token_head.weight", self.token_head.weight);
    f("token_head.bias", self.token_head.bias);
    f("sentence_head.weight", self.sentence_head.weight);
    f("sentence_head.bias", self.sentence_head.bias);
  }
};

using ModelParams = ParamSet<Tensor>;
using BoundParams = ParamSet<Var>;

struct Model {
  ModelConfig config;
  ModelParams params;
};

// Weights uniform in [-1/sqrt(k), 1/sqrt(k)]; LSTM forget-gate bias 1, other
// biases 0.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

// Expected shape of every parameter; used by init and checkpoint loading.
Shape expected_shape(const ModelConfig& config, std::string_view name);

BoundParams bind(Tape& tape, const ModelParams& params, bool requires_grad);

}  // namespace lcam
