#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lcam/corpus.hpp"
#include "lcam/model.hpp"

namespace lcam {

// One JSON record per sentence, in corpus order:
//   {"doc_id", "sentence_index", "tags": "BIO...", "spans": [...], "gold_spans": [...]}
// with spans as {"start", "end", "tags", "type_probs": {type: p}, "types": [...]}.
std::string predictions_text(const Corpus& corpus, const std::vector<std::vector<SentencePrediction>>& predictions);
void write_predictions(const std::filesystem::path& path, const Corpus& corpus,
                       const std::vector<std::vector<SentencePrediction>>& predictions);

// Aligns records with the corpus; every sentence must be covered exactly once.
std::vector<std::vector<SentencePrediction>> parse_predictions(std::string_view text, const Corpus& corpus);
std::vector<std::vector<SentencePrediction>> load_predictions(const std::filesystem::path& path, const Corpus& corpus);

}  // namespace lcam
