#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lcam/corpus.hpp"
#include "lcam/tensor.hpp"

namespace lcam {

// Static word vectors (GloVe-style text). Absent tokens map to the mean of
// all loaded vectors.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::size_t dim, std::unordered_map<std::string, std::vector<double>> vectors);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  bool contains(const std::string& token) const { return vectors_.count(token) != 0; }
  std::span<const double> lookup(const std::string& token) const;
  std::span<const double> unk_vector() const { return unk_; }

  // N x dim matrix, one row per token.
  Tensor sentence_matrix(const std::vector<std::string>& tokens) const;

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> vectors_;
  std::vector<double> unk_;
};

// expected_dim == 0 takes the dimension from the first line.
EmbeddingTable load_static_embeddings(const std::filesystem::path& path, std::size_t expected_dim = 0);
EmbeddingTable parse_static_embeddings(std::istream& in, std::size_t expected_dim = 0);

using SentenceKey = std::pair<std::string, std::size_t>;  // (doc_id, sentence_index)

// Word-level vectors produced by an external encoder, one n_tokens x dim
// matrix per corpus sentence.
struct ContextualEmbeddings {
  std::size_t dim = 0;
  std::map<SentenceKey, Tensor> sentences;

  const Tensor& at(const std::string& doc_id, std::size_t sentence_index) const;
};

// JSON Lines: a preamble {"dim", "format", "version"} followed by one
// {"doc_id", "sentence_index", "vectors"} record per sentence.
inline constexpr const char* kContextualFormat = "lcam-contextual-embeddings";
inline constexpr int kContextualVersion = 1;

ContextualEmbeddings load_contextual_embeddings(const std::filesystem::path& path, const Corpus& corpus);
ContextualEmbeddings parse_contextual_embeddings(std::istream& in, const Corpus& corpus);
// Writes records in corpus order.
void write_contextual_embeddings(const std::filesystem::path& path, const ContextualEmbeddings& emb,
                                 const Corpus& corpus);

}  // namespace lcam
