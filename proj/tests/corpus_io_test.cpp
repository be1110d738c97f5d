#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "lcam/corpus.hpp"
#include "lcam/embeddings.hpp"
#include "lcam/rng.hpp"
#include "synthetic.hpp"

namespace lcam {
namespace {

namespace fs = std::filesystem;

std::string hernia_text() {
  const char* words[] = {"We",      "observed", "a",    "trend", "toward",  "decreased", "incisional", "hernia",
                         "rates",   "in",       "patients", "treated", "with", "NPWT",  "."};
  const char* tags[] = {"O", "O", "O", "O", "O", "O", "B", "I", "O", "O", "O", "O", "O", "O", "O"};
  std::string text = "#doc hernia\n";
  for (std::size_t i = 0; i < 15; ++i) text += std::string(words[i]) + "\t" + tags[i] + "\n";
  return text + "#types:Physiological\n";
}

std::size_t error_line(const std::string& text) {
  try {
    parse_corpus_text(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

TEST(Corpus, ParsesTheWorkedExample) {
  const Corpus c = parse_corpus_text(hernia_text());
  ASSERT_EQ(c.abstracts.size(), 1u);
  ASSERT_EQ(c.abstracts[0].sentences.size(), 1u);
  const auto spans = gold_spans(c.abstracts[0].sentences[0]);
  ASSERT_EQ(spans.size(), 1u);
  EXPECT_EQ(spans[0].start, 6u);
  EXPECT_EQ(spans[0].end, 7u);
  EXPECT_EQ(c.abstracts[0].sentences[0].tokens[spans[0].start] + " " + c.abstracts[0].sentences[0].tokens[spans[0].end],
            "incisional hernia");
  EXPECT_EQ(spans[0].types, (std::vector<std::string>{"Physiological"}));
}

TEST(Corpus, EmptyFileIsEmptyCorpus) { EXPECT_TRUE(parse_corpus_text("").abstracts.empty()); }

TEST(Corpus, SerializeRoundTripsBytes) {
  const std::string text = hernia_text() + "#doc second\nno\tO\nspans\tO\n#types:\nbad\tB\nsleep\tI\n#types:Life-Impact|Physiological\n";
  EXPECT_EQ(serialize_corpus(parse_corpus_text(text)), text);
  const Corpus synth = testing::overfit_corpus();
  EXPECT_EQ(parse_corpus_text(serialize_corpus(synth)), synth);
}

TEST(Corpus, FileRoundTrip) {
  const fs::path path = fs::temp_directory_path() / "lcam_corpus_io_test.corpus";
  const Corpus synth = testing::overfit_corpus();
  write_corpus(path, synth);
  EXPECT_EQ(parse_corpus(path), synth);
  fs::remove(path);
  EXPECT_THROW(parse_corpus(path), std::ios_base::failure);
}

TEST(Corpus, ErrorsCarryLineNumbers) {
  EXPECT_EQ(error_line("#doc a\nx\tQ\n#types:\n"), 2u);                        // unknown tag
  EXPECT_EQ(error_line("#doc a\nx\n#types:\n"), 2u);                           // arity
  EXPECT_EQ(error_line("#doc a\nx\tO\tO\n#types:\n"), 2u);                     // arity
  EXPECT_EQ(error_line("#doc a\nx\tB\n#types:Cardiac\n"), 3u);                 // unknown type
  EXPECT_EQ(error_line("#doc a\nx\tO\n#types:\n#doc a\ny\tO\n#types:\n"), 4u);  // duplicate doc id
  EXPECT_EQ(error_line("#doc a\nx\tO\ny\tO\n#types:Mortality\n"), 4u);         // types without spans
  EXPECT_EQ(error_line("#doc a\nx\tB\n#types:\n"), 3u);                        // spans without types
  EXPECT_EQ(error_line("#doc a\nx\tO\ny\tI\n#types:Mortality\n"), 3u);         // orphan I
  EXPECT_EQ(error_line("#doc a\nx\tO\n"), 2u);                                 // unterminated
  EXPECT_EQ(error_line("x\tO\n#types:\n"), 1u);                                // before #doc
  EXPECT_EQ(error_line("#doc a\n#doc b\nx\tO\n#types:\n"), 2u);                // empty abstract
  EXPECT_EQ(error_line("#doc a\nx\tO\n#types:"), 3u);                          // final newline
}

TEST(Corpus, OpenPolicyAcceptsAnyLabel) {
  const Corpus c = parse_corpus_text("#doc a\nx\tB\n#types:P 12|Mental\n", LabelPolicy::open);
  EXPECT_EQ(c.abstracts[0].sentences[0].outcome_types, (std::vector<std::string>{"P 12", "Mental"}));
}

TEST(Corpus, SmallGoldSpanCases) {
  auto spans_of = [](std::vector<Tag> tags) {
    TaggedSentence s;
    s.tokens.assign(tags.size(), "w");
    s.tags = std::move(tags);
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& g : gold_spans(s)) out.emplace_back(g.start, g.end);
    return out;
  };
  using P = std::vector<std::pair<std::size_t, std::size_t>>;
  EXPECT_EQ(spans_of({Tag::B, Tag::I, Tag::O}), (P{{0, 1}}));
  EXPECT_EQ(spans_of({Tag::O, Tag::O, Tag::O}), P{});
  EXPECT_EQ(spans_of({Tag::B, Tag::B, Tag::I}), (P{{0, 0}, {1, 2}}));
}

// Every valid tag sequence up to length 8 against a regex scan for B I*.
TEST(Corpus, GoldSpansMatchRegexOracleExhaustively) {
  const std::regex run("BI*");
  std::size_t checked = 0;
  for (std::size_t len = 1; len <= 8; ++len) {
    std::size_t total = 1;
    for (std::size_t i = 0; i < len; ++i) total *= 3;
    for (std::size_t code = 0; code < total; ++code) {
      std::string text;
      std::size_t c = code;
      for (std::size_t i = 0; i < len; ++i, c /= 3) text += "BIO"[c % 3];
      // Only sequences the parser accepts: no I after O or at the start.
      if (std::regex_search(text, std::regex("(^|O)I"))) continue;
      TaggedSentence s;
      for (char ch : text) {
        s.tokens.push_back("w");
        s.tags.push_back(*parse_tag(std::string(1, ch)));
      }
      std::vector<std::pair<std::size_t, std::size_t>> want;
      for (auto it = std::sregex_iterator(text.begin(), text.end(), run); it != std::sregex_iterator(); ++it) {
        want.emplace_back(it->position(), it->position() + it->length() - 1);
      }
      std::vector<std::pair<std::size_t, std::size_t>> got;
      for (const auto& g : gold_spans(s)) got.emplace_back(g.start, g.end);
      ASSERT_EQ(got, want) << text;
      ASSERT_EQ(got.size(), static_cast<std::size_t>(std::count(text.begin(), text.end(), 'B')));
      ++checked;
    }
  }
  EXPECT_GT(checked, 1000u);
}

Corpus numbered_corpus(std::size_t n) {
  Corpus c;
  for (std::size_t i = 0; i < n; ++i) {
    c.abstracts.push_back(AbstractDoc{"doc" + std::to_string(i), {testing::marked_sentence("x y", {})}});
  }
  return c;
}

TEST(Corpus, SplitSizesAndPartition) {
  const Corpus ten = numbered_corpus(10);
  const auto [train, test] = split_corpus(ten, 0.8, 7);
  EXPECT_EQ(train.abstracts.size(), 8u);
  EXPECT_EQ(test.abstracts.size(), 2u);
  std::set<std::string> ids;
  for (const auto& d : train.abstracts) ids.insert(d.doc_id);
  for (const auto& d : test.abstracts) EXPECT_TRUE(ids.insert(d.doc_id).second);
  EXPECT_EQ(ids.size(), 10u);
  const auto again = split_corpus(ten, 0.8, 7);
  EXPECT_EQ(again.first, train);
  EXPECT_EQ(again.second, test);

  const auto big = split_corpus(numbered_corpus(5300), 0.8, 1);
  EXPECT_EQ(big.first.abstracts.size(), 4240u);
  EXPECT_EQ(big.second.abstracts.size(), 1060u);

  EXPECT_THROW(split_corpus(Corpus{}, 0.8, 1), std::invalid_argument);
  EXPECT_THROW(split_corpus(ten, 1.0, 1), std::invalid_argument);
}

TEST(Corpus, Stats) {
  const Corpus c = parse_corpus_text(hernia_text() + "#doc b\nx\tO\n#types:\n");
  const CorpusStats st = corpus_stats(c);
  EXPECT_EQ(st.abstracts, 2u);
  EXPECT_EQ(st.sentences, 2u);
  EXPECT_EQ(st.tokens, 16u);
  EXPECT_EQ(st.spans, 1u);
  EXPECT_EQ(st.labels, 1u);
  EXPECT_EQ(st.sentences_with_outcomes, 1u);
  EXPECT_DOUBLE_EQ(st.mean_sentence_length, 8.0);
}

TEST(StaticEmbeddings, LoadLookupAndUnk) {
  std::istringstream in("a 1 1\nb 3 3\n");
  const EmbeddingTable t = parse_static_embeddings(in, 2);
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(t.dim(), 2u);
  EXPECT_EQ(std::vector<double>(t.lookup("b").begin(), t.lookup("b").end()), (std::vector<double>{3, 3}));
  EXPECT_EQ(std::vector<double>(t.unk_vector().begin(), t.unk_vector().end()), (std::vector<double>{2, 2}));
  const auto missing = t.lookup("zzz");
  EXPECT_EQ(std::vector<double>(missing.begin(), missing.end()), (std::vector<double>{2, 2}));
  const Tensor m = t.sentence_matrix({"a", "zzz"});
  EXPECT_EQ(m, Tensor::from_rows({{1, 1}, {2, 2}}));
}

TEST(StaticEmbeddings, ThreeDimensionalTable) {
  std::istringstream in("x 1 2 3\ny 4 5 6\n");
  const EmbeddingTable t = parse_static_embeddings(in);
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(t.dim(), 3u);
}

TEST(StaticEmbeddings, DimensionMismatchNamesLine) {
  std::istringstream in("a 1 1\nb 3 3 3\n");
  try {
    parse_static_embeddings(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream wrong_dim("a 1 1\n");
  EXPECT_THROW(parse_static_embeddings(wrong_dim, 3), ParseError);
  std::istringstream junk("a 1 x\n");
  EXPECT_THROW(parse_static_embeddings(junk), ParseError);
}

class ContextualFile : public ::testing::Test {
 protected:
  void SetUp() override {
    corpus = parse_corpus_text("#doc d1\na\tB\nb\tI\nc\tO\n#types:Mortality\n#doc d2\nx\tO\ny\tO\n#types:\n");
    Rng rng(4);
    emb.dim = 3;
    for (const auto& doc : corpus.abstracts) {
      for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
        Tensor m = Tensor::zeros(doc.sentences[i].tokens.size(), 3);
        for (auto& v : m.mutable_values()) v = rng.normal() / 7.0;
        emb.sentences[{doc.doc_id, i}] = m;
      }
    }
    path = fs::temp_directory_path() / "lcam_contextual_test.jsonl";
    write_contextual_embeddings(path, emb, corpus);
  }
  void TearDown() override { fs::remove(path); }

  std::vector<std::string> lines() const {
    std::ifstream in(path);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
  }
  std::string message_for(const std::string& text) const {
    std::istringstream in(text);
    try {
      parse_contextual_embeddings(in, corpus);
    } catch (const std::exception& e) {
      return e.what();
    }
    return "";
  }

  Corpus corpus;
  ContextualEmbeddings emb;
  fs::path path;
};

TEST_F(ContextualFile, RoundTripIsBitExact) {
  const ContextualEmbeddings back = load_contextual_embeddings(path, corpus);
  EXPECT_EQ(back.dim, 3u);
  for (const auto& [key, m] : emb.sentences) EXPECT_EQ(back.at(key.first, key.second), m);
}

TEST_F(ContextualFile, MissingDocumentIsNamed) {
  const auto l = lines();
  const std::string msg = message_for(l[0] + "\n" + l[1] + "\n");
  EXPECT_NE(msg.find("d2"), std::string::npos) << msg;
}

TEST_F(ContextualFile, TokenCountMismatch) {
  auto l = lines();
  l[1] = R"({"doc_id":"d1","sentence_index":0,"vectors":[[0,0,0],[0,0,0]]})";
  const std::string msg = message_for(l[0] + "\n" + l[1] + "\n" + l[2] + "\n");
  EXPECT_NE(msg.find("d1/0"), std::string::npos) << msg;
  EXPECT_NE(msg.find("token-count"), std::string::npos) << msg;
}

TEST_F(ContextualFile, DimensionMismatch) {
  auto l = lines();
  l[2] = R"({"doc_id":"d2","sentence_index":0,"vectors":[[0,0],[0,0]]})";
  const std::string msg = message_for(l[0] + "\n" + l[1] + "\n" + l[2] + "\n");
  EXPECT_NE(msg.find("d2/0"), std::string::npos) << msg;
}

TEST_F(ContextualFile, MissingPreambleAndDuplicates) {
  auto l = lines();
  EXPECT_NE(message_for(l[1] + "\n").find("preamble"), std::string::npos);
  EXPECT_NE(message_for(l[0] + "\n" + l[1] + "\n" + l[1] + "\n").find("duplicate"), std::string::npos);
  EXPECT_NE(message_for("").find("empty"), std::string::npos);
}

}  // namespace
}  // namespace lcam
