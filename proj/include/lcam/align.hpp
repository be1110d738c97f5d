#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lcam/corpus.hpp"
#include "lcam/encoder.hpp"
#include "lcam/tensor.hpp"

namespace lcam {

struct LabelEmbedding {
  std::string label;
  std::vector<double> centroid;
  std::size_t support = 0;  // spans averaged
};

// Mean of the span's token rows of an N x d sentence matrix.
std::vector<double> span_embedding(const Tensor& sentence_vectors, Span span);

// Centroid of every span whose sentence carries `label`. Throws DataError
// naming the label if no span does.
LabelEmbedding label_embedding(const Corpus& corpus, const std::string& label, const FeatureStore& vectors);
// One embedding per label in use, sorted by label name.
std::vector<LabelEmbedding> label_embeddings(const Corpus& corpus, const FeatureStore& vectors);

// 1 - cos(u, v). Throws DimensionError on length mismatch, DataError on a zero vector.
double cosine_distance(std::span<const double> u, std::span<const double> v);

struct DistanceMatrix {
  std::vector<std::string> rows;  // source labels
  std::vector<std::string> cols;  // target labels
  std::vector<std::vector<double>> values;

  double at(std::size_t r, std::size_t c) const { return values.at(r).at(c); }
};

DistanceMatrix distance_matrix(std::span<const LabelEmbedding> source, std::span<const LabelEmbedding> target);
std::string distance_tsv(const DistanceMatrix& m);
DistanceMatrix parse_distance_tsv(std::string_view text);

// Parent outcome type of a target label: the five types map to themselves,
// outcome domains "P <n>" (or "P<n>") are lifted through the taxonomy.
std::optional<std::string> parent_type(std::string_view target_label);
// P 37 has no column in the published grouping; its parent is inferred.
bool parent_is_flagged(std::string_view target_label);

using ParentFn = std::function<std::optional<std::string>(std::string_view)>;

enum class MappingRule {
  // Each target column picks its nearest source row; a row chosen by several
  // columns keeps its nearest one; rows no column picks use row_argmin.
  column_argmin,
  // Each source row takes its nearest target column.
  row_argmin,
};

std::string_view mapping_rule_name(MappingRule rule);
std::optional<MappingRule> parse_mapping_rule(std::string_view text);

struct MappingEntry {
  std::string source;
  std::string target_type;
  // Provenance: the winning cell.
  std::string column;
  std::size_t row_index = 0;
  std::size_t column_index = 0;
  double distance = 0.0;
  bool from_column = false;  // chosen by a column search rather than row fallback
  bool flagged = false;      // parent assignment flagged
};

struct LabelMapping {
  MappingRule rule = MappingRule::column_argmin;
  std::string vectors;  // "contextual" or "static" when known
  std::vector<MappingEntry> entries;  // one per matrix row, in row order
  std::vector<std::string> warnings;

  const MappingEntry* find(std::string_view source) const;
};

LabelMapping derive_mapping(const DistanceMatrix& matrix, MappingRule rule = MappingRule::column_argmin,
                            const ParentFn& parent = parent_type);

std::string mapping_json(const LabelMapping& mapping);
LabelMapping parse_mapping_json(std::string_view text);

struct MergeOptions {
  std::string source_prefix;
  std::string target_prefix;
};

struct MergeResult {
  Corpus merged;
  CorpusStats source;
  CorpusStats target;
  CorpusStats combined;
};

// Source types are rewritten through the mapping, target types lifted to
// their parent types; abstracts are concatenated source first.
MergeResult merge_corpora(const Corpus& source, const Corpus& target, const LabelMapping& mapping,
                          const MergeOptions& options = {}, const ParentFn& parent = parent_type);

// Stats of a concatenation computed from the stats of its parts.
CorpusStats combine_stats(const CorpusStats& a, const CorpusStats& b, std::size_t combined_labels);

}  // namespace lcam
