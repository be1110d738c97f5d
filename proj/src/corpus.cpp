#include "lcam/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "lcam/rng.hpp"

namespace lcam {

char tag_char(Tag tag) {
  switch (tag) {
    case Tag::B: return 'B';
    case Tag::I: return 'I';
    case Tag::O: return 'O';
  }
  return '?';
}

std::optional<Tag> parse_tag(std::string_view text) {
  if (text == "B") return Tag::B;
  if (text == "I") return Tag::I;
  if (text == "O") return Tag::O;
  return std::nullopt;
}

std::optional<std::size_t> outcome_type_index(std::string_view name) {
  for (std::size_t i = 0; i < kOutcomeTypes.size(); ++i) {
    if (kOutcomeTypes[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t Corpus::sentence_count() const {
  std::size_t n = 0;
  for (const auto& a : abstracts) n += a.sentences.size();
  return n;
}

ParseError::ParseError(const std::string& message, std::size_t line)
    : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

namespace {

constexpr std::string_view kDocPrefix = "#doc ";
constexpr std::string_view kTypesPrefix = "#types:";

std::vector<std::string> split_types(std::string_view text) {
  std::vector<std::string> out;
  if (text.empty()) return out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t bar = text.find('|', pos);
    out.emplace_back(text.substr(pos, bar == std::string_view::npos ? std::string_view::npos : bar - pos));
    if (bar == std::string_view::npos) break;
    pos = bar + 1;
  }
  return out;
}

}  // namespace

Corpus parse_corpus_text(std::string_view text, LabelPolicy policy) {
  Corpus corpus;
  std::unordered_set<std::string> seen_ids;
  TaggedSentence pending;
  std::size_t pending_line = 0;
  std::size_t line_no = 0;
  std::size_t pos = 0;

  auto finish_doc_check = [&](std::size_t at) {
    if (!pending.tokens.empty()) throw ParseError("sentence not terminated by #types: line", at);
    if (!corpus.abstracts.empty() && corpus.abstracts.back().sentences.empty()) {
      throw ParseError("document '" + corpus.abstracts.back().doc_id + "' has no sentences", at);
    }
  };

  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) throw ParseError("missing final newline", line_no + 1);
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;

    if (line.starts_with(kDocPrefix)) {
      finish_doc_check(line_no);
      std::string id(line.substr(kDocPrefix.size()));
      if (id.empty()) throw ParseError("empty doc_id", line_no);
      if (!seen_ids.insert(id).second) throw ParseError("duplicate doc_id '" + id + "'", line_no);
      corpus.abstracts.push_back(AbstractDoc{std::move(id), {}});
      continue;
    }
    if (corpus.abstracts.empty()) throw ParseError("content before the first #doc header", line_no);

    if (line.starts_with(kTypesPrefix)) {
      if (pending.tokens.empty()) throw ParseError("#types: line without tokens", line_no);
      std::vector<std::string> types = split_types(line.substr(kTypesPrefix.size()));
      std::set<std::string> unique;
      for (const auto& t : types) {
        if (t.empty()) throw ParseError("empty outcome type name", line_no);
        if (policy == LabelPolicy::outcome_types && !outcome_type_index(t)) {
          throw ParseError("unknown outcome type '" + t + "'", line_no);
        }
        if (!unique.insert(t).second) throw ParseError("duplicate outcome type '" + t + "'", line_no);
      }
      const bool has_span = std::find(pending.tags.begin(), pending.tags.end(), Tag::B) != pending.tags.end();
      if (has_span && types.empty()) throw ParseError("sentence has outcome spans but no outcome types", line_no);
      if (!has_span && !types.empty()) throw ParseError("outcome types given for a sentence without spans", line_no);
      pending.outcome_types = std::move(types);
      corpus.abstracts.back().sentences.push_back(std::move(pending));
      pending = TaggedSentence{};
      continue;
    }

    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos) throw ParseError("expected token<TAB>tag", line_no);
    const std::string_view token = line.substr(0, tab);
    const std::string_view tag_text = line.substr(tab + 1);
    if (token.empty()) throw ParseError("empty token", line_no);
    if (tag_text.find('\t') != std::string_view::npos) {
      throw ParseError("token/tag arity mismatch (more than one tab)", line_no);
    }
    const auto tag = parse_tag(tag_text);
    if (!tag) throw ParseError("unknown tag '" + std::string(tag_text) + "'", line_no);
    if (*tag == Tag::I && (pending.tags.empty() || pending.tags.back() == Tag::O)) {
      throw ParseError("I tag does not continue a span", line_no);
    }
    if (pending.tokens.empty()) pending_line = line_no;
    pending.tokens.emplace_back(token);
    pending.tags.push_back(*tag);
  }
  if (!pending.tokens.empty()) throw ParseError("sentence not terminated by #types: line", pending_line);
  finish_doc_check(line_no);
  return corpus;
}

Corpus parse_corpus(const std::filesystem::path& path, LabelPolicy policy) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open corpus '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus_text(buf.str(), policy);
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& doc : corpus.abstracts) {
    out += kDocPrefix;
    out += doc.doc_id;
    out += '\n';
    for (const auto& s : doc.sentences) {
      for (std::size_t i = 0; i < s.tokens.size(); ++i) {
        out += s.tokens[i];
        out += '\t';
        out += tag_char(s.tags[i]);
        out += '\n';
      }
      out += kTypesPrefix;
      for (std::size_t i = 0; i < s.outcome_types.size(); ++i) {
        if (i > 0) out += '|';
        out += s.outcome_types[i];
      }
      out += '\n';
    }
  }
  return out;
}

void write_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot write corpus '" + path.string() + "'");
  out << serialize_corpus(corpus);
}

std::vector<Span> bio_runs(const std::vector<Tag>& tags) {
  std::vector<Span> spans;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i] != Tag::B) continue;
    std::size_t end = i;
    while (end + 1 < tags.size() && tags[end + 1] == Tag::I) ++end;
    spans.push_back({i, end});
  }
  return spans;
}

std::vector<GoldSpan> gold_spans(const TaggedSentence& sentence, std::size_t sentence_index) {
  std::vector<GoldSpan> out;
  for (const Span& s : bio_runs(sentence.tags)) {
    out.push_back(GoldSpan{sentence_index, s.start, s.end, sentence.outcome_types});
  }
  return out;
}

std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("split_corpus: fraction must lie in (0, 1)");
  }
  if (corpus.abstracts.empty()) throw std::invalid_argument("split_corpus: empty corpus");

  const std::size_t n = corpus.abstracts.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test_idx(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  // Keep the original corpus order inside each part.
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  std::pair<Corpus, Corpus> parts;
  for (std::size_t i : train_idx) parts.first.abstracts.push_back(corpus.abstracts[i]);
  for (std::size_t i : test_idx) parts.second.abstracts.push_back(corpus.abstracts[i]);
  return parts;
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats st;
  std::set<std::string> labels;
  st.abstracts = corpus.abstracts.size();
  for (const auto& doc : corpus.abstracts) {
    for (const auto& s : doc.sentences) {
      ++st.sentences;
      st.tokens += s.tokens.size();
      st.spans += bio_runs(s.tags).size();
      if (!s.outcome_types.empty()) ++st.sentences_with_outcomes;
      labels.insert(s.outcome_types.begin(), s.outcome_types.end());
    }
  }
  st.labels = labels.size();
  st.mean_sentence_length =
      st.sentences == 0 ? 0.0 : static_cast<double>(st.tokens) / static_cast<double>(st.sentences);
  return st;
}

std::string stats_tsv(const std::vector<std::pair<std::string, CorpusStats>>& columns) {
  std::ostringstream out;
  out << "statistic";
  for (const auto& [name, st] : columns) out << '\t' << name;
  out << '\n';
  auto row = [&](const char* label, auto get) {
    out << label;
    for (const auto& [name, st] : columns) out << '\t' << get(st);
    out << '\n';
  };
  row("abstracts", [](const CorpusStats& s) { return std::to_string(s.abstracts); });
  row("sentences", [](const CorpusStats& s) { return std::to_string(s.sentences); });
  row("outcome_labels", [](const CorpusStats& s) { return std::to_string(s.labels); });
  row("avg_sentence_length", [](const CorpusStats& s) {
    std::ostringstream v;
    v << std::fixed << std::setprecision(2) << s.mean_sentence_length;
    return v.str();
  });
  row("tokens", [](const CorpusStats& s) { return std::to_string(s.tokens); });
  row("outcome_spans", [](const CorpusStats& s) { return std::to_string(s.spans); });
  row("sentences_with_outcomes", [](const CorpusStats& s) { return std::to_string(s.sentences_with_outcomes); });
  return out.str();
}

}  // namespace lcam
