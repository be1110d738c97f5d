#include "lcam/embeddings.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace lcam {

using nlohmann::json;

EmbeddingTable::EmbeddingTable(std::size_t dim, std::unordered_map<std::string, std::vector<double>> vectors)
    : dim_(dim), vectors_(std::move(vectors)), unk_(dim, 0.0) {
  if (dim_ == 0) throw DataError("embedding table: dimension must be positive");
  // Accumulate in sorted key order so the mean does not depend on hash order.
  std::vector<const std::string*> keys;
  keys.reserve(vectors_.size());
  for (const auto& [k, v] : vectors_) {
    if (v.size() != dim_) throw DataError("embedding table: vector for '" + k + "' has wrong dimension");
    keys.push_back(&k);
  }
  std::sort(keys.begin(), keys.end(), [](const std::string* a, const std::string* b) { return *a < *b; });
  for (const std::string* k : keys) {
    const auto& v = vectors_.at(*k);
    for (std::size_t j = 0; j < dim_; ++j) unk_[j] += v[j];
  }
  if (!keys.empty()) {
    for (double& x : unk_) x /= static_cast<double>(keys.size());
  }
}

std::span<const double> EmbeddingTable::lookup(const std::string& token) const {
  const auto it = vectors_.find(token);
  return it == vectors_.end() ? std::span<const double>(unk_) : std::span<const double>(it->second);
}

Tensor EmbeddingTable::sentence_matrix(const std::vector<std::string>& tokens) const {
  std::vector<double> values;
  values.reserve(tokens.size() * dim_);
  for (const auto& t : tokens) {
    const auto v = lookup(t);
    values.insert(values.end(), v.begin(), v.end());
  }
  return Tensor({tokens.size(), dim_}, std::move(values));
}

EmbeddingTable parse_static_embeddings(std::istream& in, std::size_t expected_dim) {
  std::unordered_map<std::string, std::vector<double>> vectors;
  std::size_t dim = expected_dim;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string token;
    fields >> token;
    std::vector<double> v;
    std::string num;
    while (fields >> num) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(num, &used));
        if (used != num.size()) throw std::invalid_argument(num);
      } catch (const std::exception&) {
        throw ParseError("malformed number '" + num + "'", line_no);
      }
    }
    if (dim == 0) dim = v.size();
    if (v.size() != dim || dim == 0) {
      throw ParseError("expected " + std::to_string(dim) + " components for '" + token + "', got " +
                           std::to_string(v.size()),
                       line_no);
    }
    vectors[token] = std::move(v);
  }
  if (dim == 0) throw DataError("embedding file is empty and no dimension was given");
  return EmbeddingTable(dim, std::move(vectors));
}

EmbeddingTable load_static_embeddings(const std::filesystem::path& path, std::size_t expected_dim) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open embeddings '" + path.string() + "'");
  return parse_static_embeddings(in, expected_dim);
}

const Tensor& ContextualEmbeddings::at(const std::string& doc_id, std::size_t sentence_index) const {
  const auto it = sentences.find({doc_id, sentence_index});
  if (it == sentences.end()) {
    throw DataError("no contextual vectors for " + doc_id + "/" + std::to_string(sentence_index));
  }
  return it->second;
}

ContextualEmbeddings parse_contextual_embeddings(std::istream& in, const Corpus& corpus) {
  std::map<SentenceKey, std::size_t> expected;
  for (const auto& doc : corpus.abstracts) {
    for (std::size_t i = 0; i < doc.sentences.size(); ++i) expected[{doc.doc_id, i}] = doc.sentences[i].tokens.size();
  }

  ContextualEmbeddings out;
  std::string line;
  std::size_t line_no = 0;
  bool have_preamble = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    try {
      if (!have_preamble) {
        if (rec.value("format", std::string()) != kContextualFormat) {
          throw ParseError("missing contextual-embeddings preamble", line_no);
        }
        if (rec.at("version").get<int>() != kContextualVersion) throw ParseError("unsupported version", line_no);
        out.dim = rec.at("dim").get<std::size_t>();
        if (out.dim == 0) throw ParseError("dim must be positive", line_no);
        have_preamble = true;
        continue;
      }
      const auto doc_id = rec.at("doc_id").get<std::string>();
      const auto index = rec.at("sentence_index").get<std::size_t>();
      const std::string where = doc_id + "/" + std::to_string(index);
      const auto it = expected.find({doc_id, index});
      if (it == expected.end()) throw DataError("record " + where + " does not match any corpus sentence");
      if (out.sentences.count({doc_id, index})) throw DataError("duplicate record for " + where);
      const auto rows = rec.at("vectors").get<std::vector<std::vector<double>>>();
      if (rows.size() != it->second) {
        throw DataError("token-count mismatch for " + where + ": corpus has " + std::to_string(it->second) +
                        " tokens, record has " + std::to_string(rows.size()) + " vectors");
      }
      for (const auto& r : rows) {
        if (r.size() != out.dim) {
          throw DataError("dim mismatch for " + where + ": expected " + std::to_string(out.dim) + ", got " +
                          std::to_string(r.size()));
        }
      }
      out.sentences.emplace(SentenceKey{doc_id, index}, Tensor::from_rows(rows));
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed record: ") + e.what(), line_no);
    }
  }
  if (!have_preamble) throw DataError("contextual embeddings file is empty");
  for (const auto& [key, n] : expected) {
    if (!out.sentences.count(key)) {
      throw DataError("missing contextual vectors for doc '" + key.first + "' sentence " + std::to_string(key.second));
    }
  }
  return out;
}

ContextualEmbeddings load_contextual_embeddings(const std::filesystem::path& path, const Corpus& corpus) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open contextual embeddings '" + path.string() + "'");
  return parse_contextual_embeddings(in, corpus);
}

void write_contextual_embeddings(const std::filesystem::path& path, const ContextualEmbeddings& emb,
                                 const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot write '" + path.string() + "'");
  out << json{{"format", kContextualFormat}, {"version", kContextualVersion}, {"dim", emb.dim}}.dump() << '\n';
  for (const auto& doc : corpus.abstracts) {
    for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
      const Tensor& m = emb.at(doc.doc_id, i);
      json rows = json::array();
      for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(m.row_values(r));
      out << json{{"doc_id", doc.doc_id}, {"sentence_index", i}, {"vectors", rows}}.dump() << '\n';
    }
  }
}

}  // namespace lcam
