#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lcam {

enum class Tag : std::uint8_t { B = 0, I = 1, O = 2 };
inline constexpr std::size_t kNumTags = 3;

char tag_char(Tag tag);
std::optional<Tag> parse_tag(std::string_view text);

// The five top-level outcome types, in the fixed order used for indices,
// serialization and tie-breaking.
inline constexpr std::array<std::string_view, 5> kOutcomeTypes = {
    "Physiological", "Mortality", "Life-Impact", "Resource-use", "Adverse-effects"};
inline constexpr std::size_t kNumOutcomeTypes = kOutcomeTypes.size();

std::optional<std::size_t> outcome_type_index(std::string_view name);

struct TaggedSentence {
  std::vector<std::string> tokens;
  std::vector<Tag> tags;
  // Sentence-level type list; a set (no duplicates), kept in file order.
  std::vector<std::string> outcome_types;

  bool operator==(const TaggedSentence&) const = default;
};

struct AbstractDoc {
  std::string doc_id;
  std::vector<TaggedSentence> sentences;

  bool operator==(const AbstractDoc&) const = default;
};

struct Corpus {
  std::vector<AbstractDoc> abstracts;

  std::size_t sentence_count() const;
  bool operator==(const Corpus&) const = default;
};

// Inclusive token range [start, end].
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  bool operator==(const Span&) const = default;
  auto operator<=>(const Span&) const = default;
};

struct GoldSpan {
  std::size_t sentence_index = 0;
  std::size_t start = 0;
  std::size_t end = 0;
  std::vector<std::string> types;

  bool operator==(const GoldSpan&) const = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t line);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Data-level inconsistency outside the line grammar (coverage, dimensions,
// collisions).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Which type names the parser accepts: the fixed outcome taxonomy, or any
// label (used for corpora that are about to be aligned).
enum class LabelPolicy { outcome_types, open };

// Grammar (UTF-8, LF):
//   #doc <doc_id>
//   token<TAB>tag          (tag in B, I, O)
//   ...
//   #types:<t1>|<t2>|...   (possibly empty; terminates a sentence)
Corpus parse_corpus_text(std::string_view text, LabelPolicy policy = LabelPolicy::outcome_types);
Corpus parse_corpus(const std::filesystem::path& path, LabelPolicy policy = LabelPolicy::outcome_types);
std::string serialize_corpus(const Corpus& corpus);
void write_corpus(const std::filesystem::path& path, const Corpus& corpus);

// Maximal B I* runs. Stray I tags are not spans here; the parser rejects them.
std::vector<Span> bio_runs(const std::vector<Tag>& tags);
std::vector<GoldSpan> gold_spans(const TaggedSentence& sentence, std::size_t sentence_index = 0);

// Abstract-level split: round(fraction * n) abstracts go to the first part.
std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double train_fraction, std::uint64_t seed);

struct CorpusStats {
  std::size_t abstracts = 0;
  std::size_t sentences = 0;
  std::size_t labels = 0;  // distinct outcome type names in use
  std::size_t tokens = 0;
  std::size_t spans = 0;
  std::size_t sentences_with_outcomes = 0;
  double mean_sentence_length = 0.0;
};

CorpusStats corpus_stats(const Corpus& corpus);
std::string stats_tsv(const std::vector<std::pair<std::string, CorpusStats>>& columns);

}  // namespace lcam
