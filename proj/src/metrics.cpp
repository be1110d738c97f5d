#include "lcam/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "lcam/text.hpp"

namespace lcam {

using nlohmann::json;

PRF prf_from_counts(std::size_t tp, std::size_t predicted, std::size_t gold) {
  PRF out;
  out.no_predictions = predicted == 0;
  out.no_gold = gold == 0;
  if (predicted > 0) out.precision = static_cast<double>(tp) / static_cast<double>(predicted);
  if (gold > 0) out.recall = static_cast<double>(tp) / static_cast<double>(gold);
  if (out.precision + out.recall > 0.0) {
    out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
  }
  return out;
}

PRF span_prf(std::span<const SpanKey> predicted, std::span<const SpanKey> gold) {
  const std::set<SpanKey> p(predicted.begin(), predicted.end());
  const std::set<SpanKey> g(gold.begin(), gold.end());
  std::size_t tp = 0;
  for (const auto& k : p) tp += g.count(k);
  return prf_from_counts(tp, p.size(), g.size());
}

TypeSet type_set(const std::vector<std::string>& names) {
  TypeSet out{};
  for (const auto& n : names) {
    const auto idx = outcome_type_index(n);
    if (!idx) throw std::invalid_argument("unknown outcome type '" + n + "'");
    out[*idx] = true;
  }
  return out;
}

namespace {

PRF mean_prf(std::span<const PRF> items) {
  PRF out;
  if (items.empty()) {
    out.no_gold = true;
    return out;
  }
  for (const PRF& p : items) {
    out.precision += p.precision;
    out.recall += p.recall;
    out.f1 += p.f1;
  }
  const double n = static_cast<double>(items.size());
  out.precision /= n;
  out.recall /= n;
  out.f1 /= n;
  return out;
}

}  // namespace

OcReport oc_scores(std::span<const TypeSet> predicted, std::span<const TypeSet> gold) {
  if (predicted.size() != gold.size()) throw std::invalid_argument("oc_scores: instance counts differ");
  OcReport out;
  out.instances = gold.size();
  std::size_t all_tp = 0, all_pred = 0, all_gold = 0;
  std::vector<PRF> present;
  for (std::size_t t = 0; t < kNumOutcomeTypes; ++t) {
    std::size_t tp = 0, np = 0, ng = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      tp += predicted[i][t] && gold[i][t];
      np += predicted[i][t];
      ng += gold[i][t];
    }
    out.per_type[t] = prf_from_counts(tp, np, ng);
    out.in_gold[t] = ng > 0;
    if (ng > 0) present.push_back(out.per_type[t]);
    all_tp += tp;
    all_pred += np;
    all_gold += ng;
  }
  out.macro = mean_prf(present);
  out.micro = prf_from_counts(all_tp, all_pred, all_gold);
  return out;
}

std::array<std::size_t, kNumOutcomeTypes> rank_types(std::span<const double> probs) {
  if (probs.size() != kNumOutcomeTypes) throw std::invalid_argument("rank_types: expected 5 probabilities");
  std::array<std::size_t, kNumOutcomeTypes> order{};
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  return order;
}

namespace {

void check_n(std::size_t n) {
  if (n < 1 || n > kNumOutcomeTypes) throw std::invalid_argument("ranking cutoff n must be in [1, 5]");
}

}  // namespace

double precision_at_n(std::span<const double> probs, const TypeSet& gold, std::size_t n) {
  check_n(n);
  const auto order = rank_types(probs);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) hits += gold[order[i]];
  return static_cast<double>(hits) / static_cast<double>(n);
}

std::optional<double> ndcg_at_n(std::span<const double> probs, const TypeSet& gold, std::size_t n) {
  check_n(n);
  const std::size_t relevant = static_cast<std::size_t>(std::count(gold.begin(), gold.end(), true));
  if (relevant == 0) return std::nullopt;
  const auto order = rank_types(probs);
  double dcg = 0.0, ideal = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double discount = 1.0 / std::log2(static_cast<double>(i) + 2.0);
    if (gold[order[i]]) dcg += discount;
    if (i < relevant) ideal += discount;
  }
  return dcg / ideal;
}

std::vector<RankingRow> ranking_scores(std::span<const std::array<double, kNumOutcomeTypes>> probs,
                                       std::span<const TypeSet> gold, std::span<const std::size_t> ns) {
  if (probs.size() != gold.size()) throw std::invalid_argument("ranking_scores: instance counts differ");
  std::vector<RankingRow> rows;
  for (std::size_t n : ns) {
    RankingRow row;
    row.n = n;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      const auto nd = ndcg_at_n(probs[i], gold[i], n);
      if (!nd) {
        ++row.skipped;
        continue;
      }
      row.ndcg += *nd;
      row.precision += precision_at_n(probs[i], gold[i], n);
      ++row.instances;
    }
    if (row.instances > 0) {
      row.ndcg /= static_cast<double>(row.instances);
      row.precision /= static_cast<double>(row.instances);
    }
    rows.push_back(row);
  }
  return rows;
}

TokenScores token_scores(std::span<const Tag> predicted, std::span<const Tag> gold) {
  if (predicted.size() != gold.size()) throw std::invalid_argument("token_scores: sequence lengths differ");
  TokenScores out;
  out.tokens = gold.size();
  std::array<std::size_t, kNumTags> tp{}, np{}, ng{};
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto p = static_cast<std::size_t>(predicted[i]);
    const auto g = static_cast<std::size_t>(gold[i]);
    ++np[p];
    ++ng[g];
    if (p == g) {
      ++tp[g];
      ++correct;
    }
  }
  if (!gold.empty()) out.accuracy = static_cast<double>(correct) / static_cast<double>(gold.size());
  std::vector<PRF> seen;
  for (std::size_t t = 0; t < kNumTags; ++t) {
    out.per_tag[t] = prf_from_counts(tp[t], np[t], ng[t]);
    if (np[t] + ng[t] > 0) seen.push_back(out.per_tag[t]);
  }
  out.macro = mean_prf(seen);
  return out;
}

EvalReport evaluate_predictions(const Corpus& gold, const std::vector<std::vector<SentencePrediction>>& predictions,
                                std::span<const std::size_t> ns) {
  if (predictions.size() != gold.abstracts.size()) {
    throw DataError("predictions cover " + std::to_string(predictions.size()) + " abstracts, gold has " +
                    std::to_string(gold.abstracts.size()));
  }
  EvalReport report;
  std::vector<SpanKey> pred_keys, gold_keys;
  std::vector<Tag> pred_tags, gold_tags;
  std::vector<TypeSet> e2e_pred, e2e_gold, oc_pred, oc_gold;
  std::vector<std::array<double, kNumOutcomeTypes>> probs;

  for (std::size_t a = 0; a < gold.abstracts.size(); ++a) {
    const AbstractDoc& doc = gold.abstracts[a];
    if (predictions[a].size() != doc.sentences.size()) {
      throw DataError("predictions for '" + doc.doc_id + "' cover " + std::to_string(predictions[a].size()) +
                      " sentences, gold has " + std::to_string(doc.sentences.size()));
    }
    for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
      const TaggedSentence& sent = doc.sentences[s];
      const SentencePrediction& pred = predictions[a][s];
      if (pred.tags.size() != sent.tags.size()) {
        throw DataError("predicted tag count differs for " + doc.doc_id + "/" + std::to_string(s));
      }
      ++report.sentences;
      pred_tags.insert(pred_tags.end(), pred.tags.begin(), pred.tags.end());
      gold_tags.insert(gold_tags.end(), sent.tags.begin(), sent.tags.end());

      const TypeSet gold_types = type_set(sent.outcome_types);
      std::map<Span, TypeSet> gold_by_span;
      for (const Span& sp : bio_runs(sent.tags)) {
        gold_keys.push_back({doc.doc_id, s, sp.start, sp.end});
        gold_by_span[sp] = gold_types;
      }
      std::map<Span, TypeSet> pred_by_span;
      for (const SpanPrediction& sp : pred.spans) {
        pred_keys.push_back({doc.doc_id, s, sp.start, sp.end});
        pred_by_span[{sp.start, sp.end}] = type_set(sp.predicted_types);
      }
      for (const auto& [span, types] : pred_by_span) {
        const auto it = gold_by_span.find(span);
        e2e_pred.push_back(types);
        e2e_gold.push_back(it == gold_by_span.end() ? TypeSet{} : it->second);
      }
      for (const auto& [span, types] : gold_by_span) {
        if (!pred_by_span.count(span)) {
          e2e_pred.push_back(TypeSet{});
          e2e_gold.push_back(types);
        }
      }
      for (const SpanPrediction& sp : pred.gold_spans) {
        oc_pred.push_back(type_set(sp.predicted_types));
        oc_gold.push_back(gold_types);
        probs.push_back(sp.type_probs);
      }
    }
  }
  report.gold_spans = std::set<SpanKey>(gold_keys.begin(), gold_keys.end()).size();
  report.predicted_spans = std::set<SpanKey>(pred_keys.begin(), pred_keys.end()).size();
  report.osd = span_prf(pred_keys, gold_keys);
  report.tokens = token_scores(pred_tags, gold_tags);
  report.oc_end_to_end = oc_scores(e2e_pred, e2e_gold);
  report.oc_gold_spans = oc_scores(oc_pred, oc_gold);
  report.ranking = ranking_scores(probs, oc_gold, ns);
  return report;
}

namespace {

json prf_json(const PRF& p) {
  json out = {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
  if (p.no_predictions) out["no_predictions"] = true;
  if (p.no_gold) out["no_gold"] = true;
  return out;
}

json oc_json(const OcReport& r) {
  json per_type = json::object();
  for (std::size_t t = 0; t < kNumOutcomeTypes; ++t) {
    json entry = prf_json(r.per_type[t]);
    entry["in_gold"] = r.in_gold[t];
    per_type[std::string(kOutcomeTypes[t])] = entry;
  }
  return {{"instances", r.instances}, {"macro", prf_json(r.macro)}, {"micro", prf_json(r.micro)},
          {"per_type", per_type}};
}

void prf_rows(std::ostringstream& out, const std::string& section, const PRF& p) {
  out << section << "\tprecision\t" << format_real(p.precision) << '\n';
  out << section << "\trecall\t" << format_real(p.recall) << '\n';
  out << section << "\tf1\t" << format_real(p.f1) << '\n';
}

}  // namespace

std::string report_json(const EvalReport& r) {
  json tokens = {{"accuracy", r.tokens.accuracy}, {"macro", prf_json(r.tokens.macro)}, {"tokens", r.tokens.tokens}};
  json ranking = json::array();
  for (const RankingRow& row : r.ranking) {
    ranking.push_back({{"n", row.n},
                       {"precision_at_n", row.precision},
                       {"ndcg_at_n", row.ndcg},
                       {"instances", row.instances},
                       {"skipped_empty_gold", row.skipped}});
  }
  json doc = {{"counts",
               {{"sentences", r.sentences}, {"gold_spans", r.gold_spans}, {"predicted_spans", r.predicted_spans}}},
              {"osd", {{"span", prf_json(r.osd)}, {"token", tokens}}},
              {"oc", {{"end_to_end", oc_json(r.oc_end_to_end)}, {"gold_spans", oc_json(r.oc_gold_spans)}}},
              {"ranking", ranking}};
  return doc.dump(2) + "\n";
}

std::string report_tsv(const EvalReport& r) {
  std::ostringstream out;
  out << "section\tmetric\tvalue\n";
  out << "counts\tsentences\t" << r.sentences << '\n';
  out << "counts\tgold_spans\t" << r.gold_spans << '\n';
  out << "counts\tpredicted_spans\t" << r.predicted_spans << '\n';
  prf_rows(out, "osd_span", r.osd);
  out << "osd_token\taccuracy\t" << format_real(r.tokens.accuracy) << '\n';
  prf_rows(out, "osd_token_macro", r.tokens.macro);
  const std::pair<const char*, const OcReport*> oc[] = {{"oc_end_to_end", &r.oc_end_to_end},
                                                        {"oc_gold_spans", &r.oc_gold_spans}};
  for (const auto& [name, rep] : oc) {
    prf_rows(out, std::string(name) + "_macro", rep->macro);
    prf_rows(out, std::string(name) + "_micro", rep->micro);
    for (std::size_t t = 0; t < kNumOutcomeTypes; ++t) {
      prf_rows(out, std::string(name) + ":" + std::string(kOutcomeTypes[t]), rep->per_type[t]);
    }
  }
  for (const RankingRow& row : r.ranking) {
    out << "ranking\tP@" << row.n << '\t' << format_real(row.precision) << '\n';
    out << "ranking\tnDCG@" << row.n << '\t' << format_real(row.ndcg) << '\n';
  }
  return out.str();
}

std::string plot_tsv(const EvalReport& r) {
  std::ostringstream out;
  out << "n\tp_at_n\tndcg_at_n\n";
  for (const RankingRow& row : r.ranking) {
    out << row.n << '\t' << format_real(row.precision) << '\t' << format_real(row.ndcg) << '\n';
  }
  return out.str();
}

}  // namespace lcam
