#include "lcam/encoder.hpp"

#include <stdexcept>

#include "lcam/kernels.hpp"

namespace lcam {

FeatureStore make_static_features(const Corpus& corpus, const EmbeddingTable& table) {
  FeatureStore store;
  store.dim = table.dim();
  for (const auto& doc : corpus.abstracts) {
    auto& rows = store.inputs.emplace_back();
    for (const auto& s : doc.sentences) rows.push_back(table.sentence_matrix(s.tokens));
  }
  return store;
}

FeatureStore make_contextual_features(const Corpus& corpus, const ContextualEmbeddings& emb) {
  FeatureStore store;
  store.dim = emb.dim;
  for (const auto& doc : corpus.abstracts) {
    auto& rows = store.inputs.emplace_back();
    for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
      const Tensor& m = emb.at(doc.doc_id, i);
      if (m.rows() != doc.sentences[i].tokens.size()) {
        throw DataError("token-count mismatch for " + doc.doc_id + "/" + std::to_string(i));
      }
      rows.push_back(m);
    }
  }
  return store;
}

namespace {

// One LSTM direction over the rows of `inputs`; returns N x h in token order.
Var run_direction(const LstmDirection<Var>& p, Var inputs, std::size_t h, bool reverse) {
  const std::size_t n = inputs.value().rows();
  const Var projected = add_rows(matmul(inputs, p.input_weights), p.bias);  // N x 4h

  std::vector<Var> states(n);
  Var hidden, cell;
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t t = reverse ? n - 1 - step : step;
    Var pre = select_row(projected, t);
    // The initial hidden and cell states are zero, so their terms are skipped.
    if (step > 0) pre = add(pre, matmul(hidden, p.recurrent_weights));
    const Var in_gate = sigmoid(slice_cols(pre, 0, h));
    const Var candidate = tanh(slice_cols(pre, 2 * h, h));
    const Var out_gate = sigmoid(slice_cols(pre, 3 * h, h));
    Var next_cell = mul(in_gate, candidate);
    if (step > 0) next_cell = add(next_cell, mul(sigmoid(slice_cols(pre, h, h)), cell));
    cell = next_cell;
    hidden = mul(out_gate, tanh(cell));
    states[t] = hidden;
  }
  return concat_rows(states);
}

}  // namespace

Var encode_sentence(const ModelConfig& config, const BoundParams& params, Var inputs) {
  if (inputs.value().cols() != config.input_dim) {
    throw DimensionError("encode_sentence: input dim " + std::to_string(inputs.value().cols()) + ", expected " +
                         std::to_string(config.input_dim));
  }
  if (config.encoder_mode == EncoderMode::precomputed) {
    if (config.hidden_dim != config.input_dim) {
      throw std::invalid_argument("encode_sentence: precomputed mode requires hidden_dim == input dim");
    }
    return inputs;
  }
  if (!params.has_encoder) throw std::invalid_argument("encode_sentence: bilstm mode without encoder weights");
  const std::size_t h = config.hidden_dim / 2;
  const Var parts[] = {run_direction(params.forward, inputs, h, false),
                       run_direction(params.backward, inputs, h, true)};
  return concat_cols(parts);
}

Var abstract_context(std::span<const Var> encoded_sentences) {
  if (encoded_sentences.empty()) throw std::invalid_argument("abstract_context: empty abstract");
  if (encoded_sentences.size() == 1) return mean_rows(encoded_sentences[0]);
  return mean_rows(concat_rows(encoded_sentences));
}

Var contextualize(Var hidden, Var context) { return add_rows(hidden, context); }

AbstractEncoding encode_abstract(const ModelConfig& config, const BoundParams& params,
                                 std::span<const Tensor> sentence_inputs, Tape& tape) {
  AbstractEncoding out;
  for (const Tensor& x : sentence_inputs) {
    out.sentences.push_back(encode_sentence(config, params, tape.constant(x)));
  }
  if (config.disable_abstract_context) {
    out.context = tape.constant(Tensor::zeros(1, config.hidden_dim));
  } else {
    out.context = abstract_context(out.sentences);
  }
  return out;
}

HiddenStates encode_sentence(const Model& model, const Tensor& inputs) {
  Tape tape;
  const BoundParams p = bind(tape, model.params, false);
  return HiddenStates{encode_sentence(model.config, p, tape.constant(inputs)).value(), false};
}

Tensor abstract_context(const Model& model, std::span<const Tensor> sentence_inputs) {
  Tape tape;
  const BoundParams p = bind(tape, model.params, false);
  std::vector<Var> encoded;
  for (const Tensor& x : sentence_inputs) encoded.push_back(encode_sentence(model.config, p, tape.constant(x)));
  return abstract_context(encoded).value();
}

HiddenStates contextualize(const HiddenStates& hidden, const Tensor& context) {
  if (hidden.context_injected) throw std::logic_error("contextualize: abstract context already injected");
  return HiddenStates{kernels::add_rows(hidden.states, context), true};
}

}  // namespace lcam
