#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lcam/corpus.hpp"
#include "lcam/embeddings.hpp"
#include "lcam/params.hpp"
#include "lcam/tape.hpp"

namespace lcam {

// Encoder inputs for a corpus: one N x d matrix per sentence, indexed
// [abstract][sentence] in corpus order.
struct FeatureStore {
  std::size_t dim = 0;
  std::vector<std::vector<Tensor>> inputs;

  const std::vector<Tensor>& abstract(std::size_t a) const { return inputs.at(a); }
};

FeatureStore make_static_features(const Corpus& corpus, const EmbeddingTable& table);
FeatureStore make_contextual_features(const Corpus& corpus, const ContextualEmbeddings& emb);

// Tape-level encoder. Outputs are N x k, one row per token.
Var encode_sentence(const ModelConfig& config, const BoundParams& params, Var inputs);
// Mean over every token row of every encoded sentence: 1 x k.
Var abstract_context(std::span<const Var> encoded_sentences);
Var contextualize(Var hidden, Var context);

struct AbstractEncoding {
  std::vector<Var> sentences;  // N_i x k each
  Var context;                 // 1 x k; zeros when the abstract context is disabled
};

// Encodes every sentence of an abstract once; sentence encodings are reused
// for both the context pool and the per-sentence hidden states.
AbstractEncoding encode_abstract(const ModelConfig& config, const BoundParams& params,
                                 std::span<const Tensor> sentence_inputs, Tape& tape);

// Value-level wrappers.
struct HiddenStates {
  Tensor states;  // N x k
  bool context_injected = false;
};

HiddenStates encode_sentence(const Model& model, const Tensor& inputs);
Tensor abstract_context(const Model& model, std::span<const Tensor> sentence_inputs);
HiddenStates contextualize(const HiddenStates& hidden, const Tensor& context);

}  // namespace lcam
