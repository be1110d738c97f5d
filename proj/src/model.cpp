#include "lcam/model.hpp"

#include <cmath>
#include <stdexcept>

#include "lcam/kernels.hpp"

namespace lcam {

AttentionPair token_attention(Var hc, const AttentionParams<Var>& p) {
  const Var scores = matmul(tanh(matmul(hc, transpose(p.V))), transpose(p.W));
  return {softmax_rows(scores), matmul(hc, transpose(p.U))};
}

Var label_word_representation(Var weights, Var h) { return matmul(transpose(weights), h); }

Var token_logits(Var label_word, const ScoringHead<Var>& head) {
  return add(transpose(matmul(label_word, transpose(head.weight))), head.bias);
}

Var osd_loss(Var logits, const std::vector<Tag>& gold) {
  std::vector<std::size_t> targets;
  targets.reserve(gold.size());
  for (Tag t : gold) targets.push_back(static_cast<std::size_t>(t));
  return cross_entropy(logits, std::move(targets));
}

Var span_representation(std::span<const Var> label_word, std::span<const Tag> labels, Var context) {
  if (label_word.empty()) throw std::invalid_argument("span_representation: empty span");
  if (label_word.size() != labels.size()) throw std::invalid_argument("span_representation: one label per token");
  std::vector<Var> rows;
  rows.reserve(label_word.size());
  for (std::size_t i = 0; i < label_word.size(); ++i) {
    rows.push_back(select_row(label_word[i], static_cast<std::size_t>(labels[i])));
  }
  const Var stacked = rows.size() == 1 ? rows.front() : concat_rows(rows);
  return add_rows(stacked, context);
}

SentenceAttention sentence_attention(Var span_rows, const AttentionParams<Var>& p) {
  const Var rows_t = transpose(span_rows);  // k x m
  const Var a1 = softmax_rows(matmul(p.W, tanh(matmul(p.V, rows_t))));
  const Var a2 = matmul(p.U, rows_t);
  return {{a1, a2}, matmul(add(a1, a2), span_rows)};
}

SentenceAttention uniform_sentence_attention(Var span_rows) {
  Tape& tape = *span_rows.tape();
  const std::size_t m = span_rows.value().rows();
  const Var a1 = tape.constant(Tensor::filled(kSentenceLabels, m, 1.0 / static_cast<double>(m)));
  const Var a2 = tape.constant(Tensor::zeros(kSentenceLabels, m));
  return {{a1, a2}, matmul(add(a1, a2), span_rows)};
}

Var oc_logits(Var sentence_repr, const ScoringHead<Var>& head) {
  return add(transpose(matmul(sentence_repr, transpose(head.weight))), head.bias);
}

Tensor type_targets(const std::vector<std::string>& types) {
  Tensor y = Tensor::zeros(1, kSentenceLabels);
  for (const auto& t : types) {
    const auto idx = outcome_type_index(t);
    if (!idx) throw std::invalid_argument("unknown outcome type '" + t + "'");
    y[*idx] = 1.0;
  }
  return y;
}

Var oc_loss(Var logits, const std::vector<std::string>& gold_types) {
  return bce_with_logits(logits, type_targets(gold_types));
}

Var joint_loss(Var osd, std::span<const Var> oc_losses) {
  Var total = osd;
  for (Var l : oc_losses) total = add(total, l);
  return total;
}

double joint_loss(double osd, std::span<const double> oc_losses) {
  double total = osd;
  for (double l : oc_losses) total += l;
  return total;
}

Tag argmax_tag(std::span<const double> logits) {
  if (logits.size() != kTokenLabels) throw std::invalid_argument("argmax_tag: expected 3 logits");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return static_cast<Tag>(best);
}

std::vector<Span> decode_spans(const std::vector<Tag>& tags) {
  std::vector<Span> spans;
  bool open = false;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    switch (tags[i]) {
      case Tag::B:
        spans.push_back({i, i});
        open = true;
        break;
      case Tag::I:
        if (open) {
          spans.back().end = i;
        } else {
          spans.push_back({i, i});
          open = true;
        }
        break;
      case Tag::O:
        open = false;
        break;
    }
  }
  return spans;
}

TokenStage token_stage(const ModelConfig& config, const BoundParams& params, Var hidden, Var context,
                       const MaskFn& mask) {
  Tape& tape = *hidden.tape();
  TokenStage out;
  out.hidden = hidden;
  out.context = context;
  out.contextualized = contextualize(hidden, context);
  Var hc = out.contextualized;
  const std::size_t n = hc.value().rows();
  if (mask) hc = dropout(hc, mask(n, config.hidden_dim));

  if (config.disable_attention) {
    out.attention = {tape.constant(Tensor::filled(n, kTokenLabels, 1.0 / static_cast<double>(kTokenLabels))),
                     tape.constant(Tensor::zeros(n, kTokenLabels))};
  } else {
    out.attention = token_attention(hc, params.token_attention);
  }
  out.weights = add(out.attention.a1, out.attention.a2);

  std::vector<Var> logits;
  logits.reserve(n);
  out.label_word.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    const Var e = label_word_representation(select_row(out.weights, t), select_row(hc, t));
    out.label_word.push_back(e);
    logits.push_back(token_logits(e, params.token_head));
  }
  out.logits = n == 1 ? logits.front() : concat_rows(logits);
  return out;
}

SpanStage span_stage(const ModelConfig& config, const BoundParams& params, const TokenStage& tokens, Span span,
                     std::span<const Tag> labels, const MaskFn& mask) {
  if (span.end < span.start || span.end >= tokens.label_word.size()) {
    throw std::invalid_argument("span_stage: span out of range");
  }
  SpanStage out;
  out.span = span;
  const std::span<const Var> words(tokens.label_word.data() + span.start, span.end - span.start + 1);
  out.rows = span_representation(words, labels, tokens.context);
  Var rows = out.rows;
  if (mask) rows = dropout(rows, mask(rows.value().rows(), config.hidden_dim));
  out.attention = config.disable_attention ? uniform_sentence_attention(rows)
                                           : sentence_attention(rows, params.sentence_attention);
  out.logits = oc_logits(out.attention.representation, params.sentence_head);
  return out;
}

SentenceLoss sentence_loss(const ModelConfig& config, const BoundParams& params, Var hidden, Var context,
                           const TaggedSentence& sentence, const MaskFn& mask) {
  SentenceLoss out;
  out.tokens = token_stage(config, params, hidden, context, mask);
  out.osd = osd_loss(out.tokens.logits, sentence.tags);
  for (const Span& s : bio_runs(sentence.tags)) {
    const std::span<const Tag> labels(sentence.tags.data() + s.start, s.end - s.start + 1);
    out.spans.push_back(span_stage(config, params, out.tokens, s, labels, mask));
    out.oc.push_back(oc_loss(out.spans.back().logits, sentence.outcome_types));
  }
  out.total = joint_loss(out.osd, out.oc);
  return out;
}

std::vector<std::string> types_at_threshold(std::span<const double> probs, double threshold) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < probs.size() && i < kOutcomeTypes.size(); ++i) {
    if (probs[i] >= threshold) out.emplace_back(kOutcomeTypes[i]);
  }
  return out;
}

namespace {

SpanPrediction make_span_prediction(const SpanStage& stage, std::size_t sentence_index, std::span<const Tag> labels,
                                    double threshold) {
  SpanPrediction p;
  p.sentence_index = sentence_index;
  p.start = stage.span.start;
  p.end = stage.span.end;
  p.tags.assign(labels.begin(), labels.end());
  const Tensor probs = kernels::sigmoid(stage.logits.value());
  for (std::size_t i = 0; i < kSentenceLabels; ++i) p.type_probs[i] = probs[i];
  p.predicted_types = types_at_threshold(p.type_probs, threshold);
  return p;
}

}  // namespace

std::vector<SentencePrediction> predict_abstract(const Model& model, const AbstractDoc& doc,
                                                 std::span<const Tensor> inputs, double threshold,
                                                 bool with_gold_spans) {
  if (inputs.size() != doc.sentences.size()) throw std::invalid_argument("predict: one input matrix per sentence");
  Tape tape;
  const BoundParams params = bind(tape, model.params, false);
  const AbstractEncoding enc = encode_abstract(model.config, params, inputs, tape);

  std::vector<SentencePrediction> out;
  for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
    SentencePrediction sp;
    sp.sentence_index = s;
    const TokenStage tokens = token_stage(model.config, params, enc.sentences[s], enc.context);
    const Tensor& logits = tokens.logits.value();
    for (std::size_t t = 0; t < logits.rows(); ++t) {
      sp.tags.push_back(argmax_tag(logits.values().subspan(t * kTokenLabels, kTokenLabels)));
    }
    for (const Span& span : decode_spans(sp.tags)) {
      const std::span<const Tag> labels(sp.tags.data() + span.start, span.end - span.start + 1);
      const SpanStage stage = span_stage(model.config, params, tokens, span, labels);
      sp.spans.push_back(make_span_prediction(stage, s, labels, threshold));
    }
    if (with_gold_spans) {
      const auto& gold_tags = doc.sentences[s].tags;
      for (const Span& span : bio_runs(gold_tags)) {
        const std::span<const Tag> labels(gold_tags.data() + span.start, span.end - span.start + 1);
        const SpanStage stage = span_stage(model.config, params, tokens, span, labels);
        sp.gold_spans.push_back(make_span_prediction(stage, s, labels, threshold));
      }
    }
    out.push_back(std::move(sp));
  }
  return out;
}

std::vector<SpanPrediction> predict(const Model& model, const AbstractDoc& doc, std::span<const Tensor> inputs,
                                    std::size_t sentence_index, double threshold) {
  auto all = predict_abstract(model, doc, inputs, threshold);
  return std::move(all.at(sentence_index).spans);
}

}  // namespace lcam
