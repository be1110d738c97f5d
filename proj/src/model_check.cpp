#include "lcam/model_check.hpp"

#include <stdexcept>

#include "lcam/encoder.hpp"
#include "lcam/gradcheck.hpp"
#include "lcam/model.hpp"
#include "lcam/rng.hpp"
#include "lcam/trainer.hpp"

namespace lcam {

AbstractDoc gradcheck_abstract(std::size_t tokens) {
  if (tokens < 3) throw std::invalid_argument("gradcheck_abstract: need at least 3 tokens");
  AbstractDoc doc{"gradcheck", {}};
  TaggedSentence a, b;
  for (std::size_t i = 0; i < tokens; ++i) {
    a.tokens.push_back("a" + std::to_string(i));
    b.tokens.push_back("b" + std::to_string(i));
    a.tags.push_back(Tag::O);
    b.tags.push_back(Tag::O);
  }
  // a: B I O ... B at the end; b: O B I I ...
  a.tags[0] = Tag::B;
  a.tags[1] = Tag::I;
  a.tags[tokens - 1] = Tag::B;
  b.tags[1] = Tag::B;
  for (std::size_t i = 2; i < tokens && i < 4; ++i) b.tags[i] = Tag::I;
  a.outcome_types = {"Physiological", "Mortality"};
  b.outcome_types = {"Life-Impact"};
  doc.sentences = {a, b};
  return doc;
}

ModelGradCheck model_gradcheck(const ModelConfig& config, std::uint64_t seed, std::size_t tokens, double h) {
  config.validate();
  const AbstractDoc doc = gradcheck_abstract(tokens);
  Rng rng(mix_seed(seed, 7));
  std::vector<Tensor> inputs;
  for (const auto& s : doc.sentences) {
    std::vector<double> values(s.tokens.size() * config.input_dim);
    for (double& v : values) v = rng.normal();
    inputs.emplace_back(Shape{s.tokens.size(), config.input_dim}, std::move(values));
  }
  const ModelParams params = init_params(config, seed);
  const std::vector<Tensor> flat = param_values(params);
  const std::vector<std::string> names = param_names(params);

  const LossBuilder f = [&](Tape& tape, std::span<const Var> leaves) {
    BoundParams bound;
    bound.has_encoder = params.has_encoder;
    std::size_t i = 0;
    bound.for_each([&](const char*, Var& v) { v = leaves[i++]; });
    const AbstractEncoding enc = encode_abstract(config, bound, inputs, tape);
    Var total;
    for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
      const SentenceLoss sl = sentence_loss(config, bound, enc.sentences[s], enc.context, doc.sentences[s]);
      total = s == 0 ? sl.total : add(total, sl.total);
    }
    return scale(total, 1.0 / static_cast<double>(doc.sentences.size()));
  };

  const GradCheckResult r = finite_difference_check(f, flat, h);
  ModelGradCheck out;
  out.max_relative_error = r.max_relative_error;
  out.entries = r.entries;
  for (std::size_t i = 0; i < names.size(); ++i) out.per_param.emplace_back(names[i], r.per_param[i]);
  return out;
}

}  // namespace lcam
