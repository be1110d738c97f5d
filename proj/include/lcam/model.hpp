#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lcam/corpus.hpp"
#include "lcam/encoder.hpp"
#include "lcam/params.hpp"
#include "lcam/tape.hpp"

namespace lcam {

// Supplies an already-scaled dropout mask of the requested shape. An empty
// function means no dropout.
using MaskFn = std::function<Tensor(std::size_t rows, std::size_t cols)>;

struct AttentionPair {
  Var a1;  // softmax attention
  Var a2;  // label-hidden interaction, unnormalised
};

// Token level: rows of hc (N x k) -> A1, A2 of shape N x |l_w|, i.e. the
// transposed per-token column vectors.
AttentionPair token_attention(Var hc, const AttentionParams<Var>& p);

// (A1 + A2) h^T for one token: weights 1 x L, h 1 x k -> E of shape L x k.
Var label_word_representation(Var weights, Var h);

// logit[l] = head.weight . E[l] + head.bias[l]: L x k -> 1 x L.
Var token_logits(Var label_word, const ScoringHead<Var>& head);

// Summed categorical cross-entropy over the sentence: logits N x |l_w|.
Var osd_loss(Var logits, const std::vector<Tag>& gold);

// Row i = E_i[label_i] + context.
Var span_representation(std::span<const Var> label_word, std::span<const Tag> labels, Var context);

struct SentenceAttention {
  AttentionPair attention;  // |l_s| x m each
  Var representation;       // E_s: |l_s| x k
};

SentenceAttention sentence_attention(Var span_rows, const AttentionParams<Var>& p);
// Uniform-weight replacement used by the attention ablation: every label row
// is the mean of the span rows.
SentenceAttention uniform_sentence_attention(Var span_rows);

// 1 x |l_s| logits from E_s; probabilities are their sigmoids.
Var oc_logits(Var sentence_repr, const ScoringHead<Var>& head);
Tensor type_targets(const std::vector<std::string>& types);
Var oc_loss(Var logits, const std::vector<std::string>& gold_types);

Var joint_loss(Var osd, std::span<const Var> oc_losses);
double joint_loss(double osd, std::span<const double> oc_losses);

// First maximum in B < I < O order.
Tag argmax_tag(std::span<const double> logits);

// Maximal B I* runs; an I that does not continue a span opens a new one.
std::vector<Span> decode_spans(const std::vector<Tag>& tags);

struct TokenStage {
  Var hidden;       // N x k
  Var context;      // 1 x k
  Var contextualized;
  AttentionPair attention;  // N x |l_w| each (uniform constant when ablated)
  Var weights;              // A1 + A2
  std::vector<Var> label_word;  // per token, |l_w| x k
  Var logits;                   // N x |l_w|
};

TokenStage token_stage(const ModelConfig& config, const BoundParams& params, Var hidden, Var context,
                       const MaskFn& mask = {});

struct SpanStage {
  Span span;
  Var rows;  // O_s: m x k
  SentenceAttention attention;
  Var logits;  // 1 x |l_s|
};

SpanStage span_stage(const ModelConfig& config, const BoundParams& params, const TokenStage& tokens, Span span,
                     std::span<const Tag> labels, const MaskFn& mask = {});

struct SentenceLoss {
  TokenStage tokens;
  std::vector<SpanStage> spans;  // gold spans, teacher-forced
  Var osd;
  std::vector<Var> oc;
  Var total;
};

// Training objective for one sentence: L_osd plus one L_oc per gold span.
SentenceLoss sentence_loss(const ModelConfig& config, const BoundParams& params, Var hidden, Var context,
                           const TaggedSentence& sentence, const MaskFn& mask = {});

struct SpanPrediction {
  std::size_t sentence_index = 0;
  std::size_t start = 0;
  std::size_t end = 0;
  std::vector<Tag> tags;
  std::array<double, kSentenceLabels> type_probs{};
  std::vector<std::string> predicted_types;
};

struct SentencePrediction {
  std::size_t sentence_index = 0;
  std::vector<Tag> tags;
  std::vector<SpanPrediction> spans;       // end-to-end: predicted spans
  std::vector<SpanPrediction> gold_spans;  // OC-only: gold spans, gold labels
};

std::vector<std::string> types_at_threshold(std::span<const double> probs, double threshold);

// Inference over every sentence of one abstract (dropout off).
std::vector<SentencePrediction> predict_abstract(const Model& model, const AbstractDoc& doc,
                                                 std::span<const Tensor> inputs, double threshold,
                                                 bool with_gold_spans = false);

// Single sentence of an abstract.
std::vector<SpanPrediction> predict(const Model& model, const AbstractDoc& doc, std::span<const Tensor> inputs,
                                    std::size_t sentence_index, double threshold);

}  // namespace lcam
