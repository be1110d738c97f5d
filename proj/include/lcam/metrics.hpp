#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lcam/corpus.hpp"
#include "lcam/model.hpp"

namespace lcam {

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Set when the corresponding denominator was zero and the value defaulted to 0.
  bool no_predictions = false;
  bool no_gold = false;
};

PRF prf_from_counts(std::size_t true_positives, std::size_t predicted, std::size_t gold);

struct SpanKey {
  std::string doc_id;
  std::size_t sentence = 0;
  std::size_t start = 0;
  std::size_t end = 0;
  auto operator<=>(const SpanKey&) const = default;
};

// Exact-match span scoring; duplicate keys count once.
PRF span_prf(std::span<const SpanKey> predicted, std::span<const SpanKey> gold);

using TypeSet = std::array<bool, kNumOutcomeTypes>;
TypeSet type_set(const std::vector<std::string>& names);

struct OcReport {
  std::array<PRF, kNumOutcomeTypes> per_type{};
  std::array<bool, kNumOutcomeTypes> in_gold{};
  PRF macro;  // mean over types present in gold
  PRF micro;
  std::size_t instances = 0;
};

// One-vs-rest counts per type over paired (predicted, gold) instances.
OcReport oc_scores(std::span<const TypeSet> predicted, std::span<const TypeSet> gold);

// Ranking of the five types by probability, ties broken by taxonomy order.
std::array<std::size_t, kNumOutcomeTypes> rank_types(std::span<const double> probs);
double precision_at_n(std::span<const double> probs, const TypeSet& gold, std::size_t n);
// Empty when the gold set is empty (the instance is skipped).
std::optional<double> ndcg_at_n(std::span<const double> probs, const TypeSet& gold, std::size_t n);

struct RankingRow {
  std::size_t n = 0;
  double precision = 0.0;
  double ndcg = 0.0;
  std::size_t instances = 0;  // scored
  std::size_t skipped = 0;    // empty gold
};

std::vector<RankingRow> ranking_scores(std::span<const std::array<double, kNumOutcomeTypes>> probs,
                                       std::span<const TypeSet> gold, std::span<const std::size_t> ns);

struct TokenScores {
  double accuracy = 0.0;
  std::array<PRF, kNumTags> per_tag{};
  PRF macro;
  std::size_t tokens = 0;
};

TokenScores token_scores(std::span<const Tag> predicted, std::span<const Tag> gold);

struct EvalReport {
  PRF osd;
  TokenScores tokens;
  OcReport oc_end_to_end;  // predicted spans; unmatched on either side count against
  OcReport oc_gold_spans;  // gold spans with gold labels
  std::vector<RankingRow> ranking;
  std::size_t sentences = 0;
  std::size_t gold_spans = 0;
  std::size_t predicted_spans = 0;
};

// predictions[a][s] must line up with gold.abstracts[a].sentences[s]. Ranking
// and OC-only scores use the predictions' gold_spans entries.
EvalReport evaluate_predictions(const Corpus& gold, const std::vector<std::vector<SentencePrediction>>& predictions,
                                std::span<const std::size_t> ns);

std::string report_json(const EvalReport& report);
std::string report_tsv(const EvalReport& report);
// n, P@n, nDCG@n rows.
std::string plot_tsv(const EvalReport& report);

}  // namespace lcam
