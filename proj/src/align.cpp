#include "lcam/align.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lcam/text.hpp"

namespace lcam {

using nlohmann::json;

std::vector<double> span_embedding(const Tensor& sentence_vectors, Span span) {
  if (span.end < span.start || span.end >= sentence_vectors.rows()) {
    throw std::invalid_argument("span_embedding: span [" + std::to_string(span.start) + ", " +
                                std::to_string(span.end) + "] outside a sentence of " +
                                std::to_string(sentence_vectors.rows()) + " tokens");
  }
  const std::size_t d = sentence_vectors.cols();
  std::vector<double> out(d, 0.0);
  for (std::size_t t = span.start; t <= span.end; ++t) {
    for (std::size_t j = 0; j < d; ++j) out[j] += sentence_vectors(t, j);
  }
  const double n = static_cast<double>(span.end - span.start + 1);
  for (double& x : out) x /= n;
  return out;
}

LabelEmbedding label_embedding(const Corpus& corpus, const std::string& label, const FeatureStore& vectors) {
  if (vectors.inputs.size() != corpus.abstracts.size()) {
    throw DataError("vectors cover " + std::to_string(vectors.inputs.size()) + " abstracts, corpus has " +
                    std::to_string(corpus.abstracts.size()));
  }
  LabelEmbedding out{label, std::vector<double>(vectors.dim, 0.0), 0};
  for (std::size_t a = 0; a < corpus.abstracts.size(); ++a) {
    const auto& doc = corpus.abstracts[a];
    for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
      const auto& sent = doc.sentences[s];
      if (std::find(sent.outcome_types.begin(), sent.outcome_types.end(), label) == sent.outcome_types.end()) continue;
      for (const Span& span : bio_runs(sent.tags)) {
        const auto e = span_embedding(vectors.inputs.at(a).at(s), span);
        for (std::size_t j = 0; j < e.size(); ++j) out.centroid[j] += e[j];
        ++out.support;
      }
    }
  }
  if (out.support == 0) throw DataError("no outcome spans carry label '" + label + "'");
  for (double& x : out.centroid) x /= static_cast<double>(out.support);
  return out;
}

std::vector<LabelEmbedding> label_embeddings(const Corpus& corpus, const FeatureStore& vectors) {
  std::set<std::string> labels;
  for (const auto& doc : corpus.abstracts) {
    for (const auto& s : doc.sentences) labels.insert(s.outcome_types.begin(), s.outcome_types.end());
  }
  std::vector<LabelEmbedding> out;
  for (const auto& l : labels) out.push_back(label_embedding(corpus, l, vectors));
  return out;
}

double cosine_distance(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw DimensionError("cosine_distance: dimensions " + std::to_string(u.size()) + " and " +
                         std::to_string(v.size()) + " differ");
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw DataError("cosine_distance: zero-norm vector");
  return 1.0 - dot / (std::sqrt(nu) * std::sqrt(nv));
}

DistanceMatrix distance_matrix(std::span<const LabelEmbedding> source, std::span<const LabelEmbedding> target) {
  DistanceMatrix m;
  for (const auto& s : source) m.rows.push_back(s.label);
  for (const auto& t : target) m.cols.push_back(t.label);
  for (const auto& s : source) {
    auto& row = m.values.emplace_back();
    for (const auto& t : target) {
      try {
        row.push_back(cosine_distance(s.centroid, t.centroid));
      } catch (const DataError&) {
        throw DataError("zero-norm centroid for '" + s.label + "' or '" + t.label + "'");
      }
    }
  }
  return m;
}

std::string distance_tsv(const DistanceMatrix& m) {
  std::ostringstream out;
  out << "source";
  for (const auto& c : m.cols) out << '\t' << c;
  out << '\n';
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    out << m.rows[r];
    for (double v : m.values[r]) out << '\t' << format_real(v);
    out << '\n';
  }
  return out.str();
}

DistanceMatrix parse_distance_tsv(std::string_view text) {
  DistanceMatrix m;
  std::size_t line_no = 0;
  for (std::string_view line : split(text, '\n')) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    if (m.cols.empty() && m.rows.empty() && line_no == 1) {
      if (fields.size() < 2) throw ParseError("distance header needs at least one column", line_no);
      for (std::size_t i = 1; i < fields.size(); ++i) m.cols.emplace_back(fields[i]);
      continue;
    }
    if (fields.size() != m.cols.size() + 1) throw ParseError("wrong number of fields", line_no);
    m.rows.emplace_back(fields[0]);
    auto& row = m.values.emplace_back();
    for (std::size_t i = 1; i < fields.size(); ++i) {
      double v = 0.0;
      const auto f = fields[i];
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw ParseError("malformed distance '" + std::string(f) + "'", line_no);
      }
      row.push_back(v);
    }
  }
  if (m.cols.empty()) throw ParseError("empty distance matrix", 1);
  return m;
}

namespace {

std::optional<int> domain_number(std::string_view label) {
  if (label.empty() || label.front() != 'P') return std::nullopt;
  label.remove_prefix(1);
  if (!label.empty() && label.front() == ' ') label.remove_prefix(1);
  int n = -1;
  const auto [ptr, ec] = std::from_chars(label.data(), label.data() + label.size(), n);
  if (ec != std::errc() || ptr != label.data() + label.size() || label.empty()) return std::nullopt;
  return n;
}

}  // namespace

std::optional<std::string> parent_type(std::string_view label) {
  if (outcome_type_index(label)) return std::string(label);
  const auto n = domain_number(label);
  if (!n) return std::nullopt;
  if (*n == 0) return "Physiological";
  if (*n == 1) return "Mortality";
  if (*n >= 2 && *n <= 24) return "Physiological";  // physiological/clinical sub-domains
  if (*n >= 25 && *n <= 33) return "Life-Impact";
  if (*n >= 34 && *n <= 37) return "Resource-use";
  if (*n == 38) return "Adverse-effects";
  return std::nullopt;
}

bool parent_is_flagged(std::string_view label) { return domain_number(label) == 37; }

std::string_view mapping_rule_name(MappingRule rule) {
  return rule == MappingRule::column_argmin ? "column_argmin" : "row_argmin";
}

std::optional<MappingRule> parse_mapping_rule(std::string_view text) {
  if (text == "column_argmin") return MappingRule::column_argmin;
  if (text == "row_argmin") return MappingRule::row_argmin;
  return std::nullopt;
}

const MappingEntry* LabelMapping::find(std::string_view source) const {
  for (const auto& e : entries) {
    if (e.source == source) return &e;
  }
  return nullptr;
}

LabelMapping derive_mapping(const DistanceMatrix& m, MappingRule rule, const ParentFn& parent) {
  if (m.rows.empty() || m.cols.empty()) throw std::invalid_argument("derive_mapping: empty distance matrix");
  if (m.values.size() != m.rows.size()) throw DimensionError("derive_mapping: row count mismatch");
  for (const auto& row : m.values) {
    if (row.size() != m.cols.size()) throw DimensionError("derive_mapping: ragged distance matrix");
  }
  LabelMapping out;
  out.rule = rule;
  const std::size_t nr = m.rows.size(), nc = m.cols.size();

  // Columns assigned to each row by the column search.
  std::vector<std::vector<std::size_t>> claimed(nr);
  if (rule == MappingRule::column_argmin) {
    for (std::size_t c = 0; c < nc; ++c) {
      std::size_t best = 0;
      for (std::size_t r = 1; r < nr; ++r) {
        if (m.values[r][c] < m.values[best][c]) best = r;
      }
      for (std::size_t r = best + 1; r < nr; ++r) {
        if (m.values[r][c] == m.values[best][c]) {
          out.warnings.push_back("tie in column '" + m.cols[c] + "' between '" + m.rows[best] + "' and '" +
                                 m.rows[r] + "'; kept '" + m.rows[best] + "'");
        }
      }
      claimed[best].push_back(c);
    }
  }

  for (std::size_t r = 0; r < nr; ++r) {
    std::vector<std::size_t> candidates = claimed[r];
    const bool from_column = !candidates.empty();
    if (!from_column) {
      for (std::size_t c = 0; c < nc; ++c) candidates.push_back(c);
    }
    std::size_t best = candidates.front();
    for (std::size_t c : candidates) {
      if (m.values[r][c] < m.values[r][best]) best = c;
    }
    for (std::size_t c : candidates) {
      if (c != best && m.values[r][c] == m.values[r][best]) {
        out.warnings.push_back("tie for '" + m.rows[r] + "' between '" + m.cols[best] + "' and '" + m.cols[c] +
                               "'; kept '" + m.cols[best] + "'");
      }
    }
    const auto type = parent(m.cols[best]);
    if (!type) throw DataError("no parent outcome type for target label '" + m.cols[best] + "'");
    MappingEntry e;
    e.source = m.rows[r];
    e.target_type = *type;
    e.column = m.cols[best];
    e.row_index = r;
    e.column_index = best;
    e.distance = m.values[r][best];
    e.from_column = from_column;
    e.flagged = parent_is_flagged(m.cols[best]);
    if (e.flagged) {
      out.warnings.push_back("'" + e.source + "' maps through '" + e.column + "', whose parent type is assumed");
    }
    out.entries.push_back(std::move(e));
  }
  return out;
}

std::string mapping_json(const LabelMapping& mapping) {
  json entries = json::array();
  for (const auto& e : mapping.entries) {
    entries.push_back({{"source", e.source},
                       {"target_type", e.target_type},
                       {"column", e.column},
                       {"distance", e.distance},
                       {"selected_by", e.from_column ? "column" : "row_fallback"},
                       {"flagged", e.flagged}});
  }
  json doc = {{"rule", mapping_rule_name(mapping.rule)}, {"mappings", entries}, {"warnings", mapping.warnings}};
  if (!mapping.vectors.empty()) doc["vectors"] = mapping.vectors;
  return doc.dump(2) + "\n";
}

LabelMapping parse_mapping_json(std::string_view text) {
  try {
    const json doc = json::parse(text);
    LabelMapping out;
    const auto rule = parse_mapping_rule(doc.at("rule").get<std::string>());
    if (!rule) throw DataError("mapping: unknown rule");
    out.rule = *rule;
    out.vectors = doc.value("vectors", std::string());
    for (const json& j : doc.at("mappings")) {
      MappingEntry e;
      e.source = j.at("source").get<std::string>();
      e.target_type = j.at("target_type").get<std::string>();
      if (!outcome_type_index(e.target_type)) {
        throw DataError("mapping: '" + e.target_type + "' is not an outcome type");
      }
      e.column = j.value("column", std::string());
      e.distance = j.value("distance", 0.0);
      e.from_column = j.value("selected_by", std::string()) == "column";
      e.flagged = j.value("flagged", false);
      if (out.find(e.source)) throw DataError("mapping: duplicate source label '" + e.source + "'");
      out.entries.push_back(std::move(e));
    }
    out.warnings = doc.value("warnings", std::vector<std::string>{});
    return out;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed mapping: ") + e.what());
  }
}

namespace {

std::vector<std::string> rewrite_types(const std::vector<std::string>& types,
                                       const std::function<std::string(const std::string&)>& map) {
  std::vector<std::string> out;
  for (const auto& t : types) {
    std::string mapped = map(t);
    if (std::find(out.begin(), out.end(), mapped) == out.end()) out.push_back(std::move(mapped));
  }
  return out;
}

}  // namespace

MergeResult merge_corpora(const Corpus& source, const Corpus& target, const LabelMapping& mapping,
                          const MergeOptions& options, const ParentFn& parent) {
  MergeResult result;
  std::set<std::string> unmapped;
  const auto map_source = [&](const std::string& label) {
    const MappingEntry* e = mapping.find(label);
    if (!e) {
      unmapped.insert(label);
      return label;
    }
    return e->target_type;
  };
  const auto map_target = [&](const std::string& label) {
    const auto p = parent(label);
    if (!p) {
      unmapped.insert(label);
      return label;
    }
    return *p;
  };

  std::map<std::string, int> seen;
  std::vector<std::string> collisions;
  const auto add = [&](const Corpus& c, const std::string& prefix,
                       const std::function<std::string(const std::string&)>& map) {
    for (const auto& doc : c.abstracts) {
      AbstractDoc out{prefix + doc.doc_id, {}};
      if (seen[out.doc_id]++ == 1) collisions.push_back(out.doc_id);
      for (const auto& s : doc.sentences) {
        TaggedSentence t = s;
        t.outcome_types = rewrite_types(s.outcome_types, map);
        out.sentences.push_back(std::move(t));
      }
      result.merged.abstracts.push_back(std::move(out));
    }
  };
  add(source, options.source_prefix, map_source);
  add(target, options.target_prefix, map_target);

  if (!unmapped.empty()) {
    std::string list;
    for (const auto& l : unmapped) list += (list.empty() ? "" : ", ") + ("'" + l + "'");
    throw DataError("labels without a mapping: " + list);
  }
  if (!collisions.empty()) {
    std::string list;
    for (const auto& id : collisions) list += (list.empty() ? "" : ", ") + ("'" + id + "'");
    throw DataError("doc_id collisions: " + list);
  }
  result.source = corpus_stats(source);
  result.target = corpus_stats(target);
  result.combined = corpus_stats(result.merged);
  return result;
}

CorpusStats combine_stats(const CorpusStats& a, const CorpusStats& b, std::size_t combined_labels) {
  CorpusStats out;
  out.abstracts = a.abstracts + b.abstracts;
  out.sentences = a.sentences + b.sentences;
  out.labels = combined_labels;
  out.tokens = a.tokens + b.tokens;
  out.spans = a.spans + b.spans;
  out.sentences_with_outcomes = a.sentences_with_outcomes + b.sentences_with_outcomes;
  out.mean_sentence_length =
      out.sentences == 0 ? 0.0 : static_cast<double>(out.tokens) / static_cast<double>(out.sentences);
  return out;
}

}  // namespace lcam
