#include "lcam/predictions.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "lcam/text.hpp"

namespace lcam {

using nlohmann::json;

namespace {

std::string tag_string(const std::vector<Tag>& tags) {
  std::string out;
  for (Tag t : tags) out += tag_char(t);
  return out;
}

std::vector<Tag> parse_tags(const std::string& text, std::size_t line) {
  std::vector<Tag> out;
  for (char c : text) {
    const auto t = parse_tag(std::string_view(&c, 1));
    if (!t) throw ParseError(std::string("unknown tag '") + c + "'", line);
    out.push_back(*t);
  }
  return out;
}

json span_json(const SpanPrediction& p) {
  json probs = json::object();
  for (std::size_t i = 0; i < kNumOutcomeTypes; ++i) probs[std::string(kOutcomeTypes[i])] = p.type_probs[i];
  return {{"start", p.start}, {"end", p.end}, {"tags", tag_string(p.tags)}, {"type_probs", probs},
          {"types", p.predicted_types}};
}

SpanPrediction parse_span(const json& j, std::size_t sentence_index, std::size_t n_tokens, std::size_t line) {
  SpanPrediction p;
  p.sentence_index = sentence_index;
  p.start = j.at("start").get<std::size_t>();
  p.end = j.at("end").get<std::size_t>();
  if (p.end < p.start || p.end >= n_tokens) throw ParseError("span outside the sentence", line);
  p.tags = parse_tags(j.at("tags").get<std::string>(), line);
  if (p.tags.size() != p.end - p.start + 1) throw ParseError("span tag count does not match its length", line);
  const json& probs = j.at("type_probs");
  for (std::size_t i = 0; i < kNumOutcomeTypes; ++i) p.type_probs[i] = probs.at(std::string(kOutcomeTypes[i]));
  p.predicted_types = j.at("types").get<std::vector<std::string>>();
  for (const auto& t : p.predicted_types) {
    if (!outcome_type_index(t)) throw ParseError("unknown outcome type '" + t + "'", line);
  }
  return p;
}

}  // namespace

std::string predictions_text(const Corpus& corpus, const std::vector<std::vector<SentencePrediction>>& predictions) {
  std::ostringstream out;
  for (std::size_t a = 0; a < corpus.abstracts.size(); ++a) {
    for (const SentencePrediction& sp : predictions.at(a)) {
      json spans = json::array(), gold = json::array();
      for (const auto& p : sp.spans) spans.push_back(span_json(p));
      for (const auto& p : sp.gold_spans) gold.push_back(span_json(p));
      out << json{{"doc_id", corpus.abstracts[a].doc_id},
                  {"sentence_index", sp.sentence_index},
                  {"tags", tag_string(sp.tags)},
                  {"spans", spans},
                  {"gold_spans", gold}}
                 .dump()
          << '\n';
    }
  }
  return out.str();
}

void write_predictions(const std::filesystem::path& path, const Corpus& corpus,
                       const std::vector<std::vector<SentencePrediction>>& predictions) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot write '" + path.string() + "'");
  out << predictions_text(corpus, predictions);
}

std::vector<std::vector<SentencePrediction>> parse_predictions(std::string_view text, const Corpus& corpus) {
  std::map<std::string, std::size_t> doc_index;
  std::vector<std::vector<SentencePrediction>> out(corpus.abstracts.size());
  std::vector<std::vector<bool>> seen(corpus.abstracts.size());
  for (std::size_t a = 0; a < corpus.abstracts.size(); ++a) {
    doc_index[corpus.abstracts[a].doc_id] = a;
    out[a].resize(corpus.abstracts[a].sentences.size());
    seen[a].assign(corpus.abstracts[a].sentences.size(), false);
  }
  std::size_t line_no = 0;
  for (std::string_view line : split(text, '\n')) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const json rec = json::parse(line);
      const auto doc_id = rec.at("doc_id").get<std::string>();
      const auto s = rec.at("sentence_index").get<std::size_t>();
      const auto it = doc_index.find(doc_id);
      if (it == doc_index.end() || s >= out[it->second].size()) {
        throw DataError("prediction for unknown sentence " + doc_id + "/" + std::to_string(s));
      }
      if (seen[it->second][s]) throw DataError("duplicate prediction for " + doc_id + "/" + std::to_string(s));
      seen[it->second][s] = true;
      const std::size_t n = corpus.abstracts[it->second].sentences[s].tokens.size();
      SentencePrediction sp;
      sp.sentence_index = s;
      sp.tags = parse_tags(rec.at("tags").get<std::string>(), line_no);
      if (sp.tags.size() != n) throw DataError("tag count mismatch for " + doc_id + "/" + std::to_string(s));
      for (const json& j : rec.at("spans")) sp.spans.push_back(parse_span(j, s, n, line_no));
      for (const json& j : rec.value("gold_spans", json::array())) sp.gold_spans.push_back(parse_span(j, s, n, line_no));
      out[it->second][s] = std::move(sp);
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed prediction record: ") + e.what(), line_no);
    }
  }
  for (std::size_t a = 0; a < seen.size(); ++a) {
    for (std::size_t s = 0; s < seen[a].size(); ++s) {
      if (!seen[a][s]) {
        throw DataError("no prediction for " + corpus.abstracts[a].doc_id + "/" + std::to_string(s));
      }
    }
  }
  return out;
}

std::vector<std::vector<SentencePrediction>> load_predictions(const std::filesystem::path& path, const Corpus& corpus) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open predictions '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_predictions(buf.str(), corpus);
}

}  // namespace lcam
