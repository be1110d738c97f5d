#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lcam/align.hpp"
#include "lcam/corpus.hpp"
#include "lcam/embeddings.hpp"
#include "lcam/encoder.hpp"

namespace lcam::testing {

// "the [incisional hernia] healed" -> tokens with B/I tags on the bracketed run.
TaggedSentence marked_sentence(const std::string& text, std::vector<std::string> types);

// 2 abstracts x 10 sentences; all five types, some multi-label spans.
Corpus overfit_corpus();

// Gaussian vector per distinct token of the corpus.
EmbeddingTable random_table(const Corpus& corpus, std::size_t dim, std::uint64_t seed);

// Random N x d inputs for every sentence.
FeatureStore random_features(const Corpus& corpus, std::size_t dim, std::uint64_t seed);

// Random abstract with `sentences` sentences of `length` tokens and at least one span.
AbstractDoc random_abstract(const std::string& doc_id, std::size_t sentences, std::size_t length, std::uint64_t seed);

struct PlantedAlignment {
  Corpus source;  // labels "S0".."S4"
  Corpus target;  // the five outcome types
  FeatureStore source_vectors;
  FeatureStore target_vectors;
  std::map<std::string, std::string> truth;  // source label -> target type
};

// Span tokens of label j are center_j + sigma * N(0, I) with centers 3 e_j,
// so centers sit 3 sqrt(2) / sigma standard deviations apart. The target side
// uses a seeded permutation of the types.
PlantedAlignment planted_alignment(std::uint64_t seed, double sigma = 0.3);

// Cosine distances between EBM-NLP labels (rows) and EBM-COMET outcome
// domains (columns). "01330" in the source table is read as 0.1330.
DistanceMatrix published_matrix();

}  // namespace lcam::testing
