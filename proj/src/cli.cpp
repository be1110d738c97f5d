#include "lcam/cli.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <array>
#include <fstream>
#include <optional>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "lcam/align.hpp"
#include "lcam/checkpoint.hpp"
#include "lcam/corpus.hpp"
#include "lcam/embeddings.hpp"
#include "lcam/encoder.hpp"
#include "lcam/metrics.hpp"
#include "lcam/model.hpp"
#include "lcam/model_check.hpp"
#include "lcam/predictions.hpp"
#include "lcam/text.hpp"
#include "lcam/trainer.hpp"

namespace lcam::cli {

using nlohmann::json;
namespace fs = std::filesystem;

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFile("cannot read '" + path.string() + "'");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 15];
  }
  return hex;
}

namespace {

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " path is not set");
  if (!fs::is_regular_file(path)) throw MissingFile(what + " '" + path + "' does not exist");
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot write '" + path.string() + "'");
  out << text;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFile("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Written next to every command's outputs. No timestamps, so reruns are
// byte-identical.
class Manifest {
 public:
  explicit Manifest(std::string command) { doc_["command"] = std::move(command); }

  void input(const std::string& role, const std::string& path) {
    doc_["inputs"].push_back({{"role", role}, {"path", path}, {"sha256", sha256_file(path)}});
  }
  void output(const std::string& name) { doc_["outputs"].push_back(name); }
  void config(const TrainConfig& c, const std::vector<std::string>& overrides) {
    json cfg = json::object();
    const std::string text = format_train_config(c);
    for (std::string_view line : split(text, '\n')) {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) continue;
      cfg[std::string(trim(line.substr(0, eq)))] = std::string(trim(line.substr(eq + 1)));
    }
    doc_["config"] = cfg;
    doc_["overrides"] = overrides;
  }
  json& operator[](const std::string& key) { return doc_[key]; }

  void write(const fs::path& dir) const { write_file(dir / "manifest.json", doc_.dump(2) + "\n"); }

 private:
  json doc_ = {{"inputs", json::array()}, {"outputs", json::array()}};
};

struct ConfigArgs {
  std::string path;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", path, "Configuration file (key = value)");
    cmd->add_option("--set", overrides, "Override a config key, key=value (repeatable)");
  }

  TrainConfig resolve(Manifest& manifest) const {
    TrainConfig c;
    if (!path.empty()) {
      require_file(path, "config");
      c = load_train_config(path);
      manifest.input("config", path);
    }
    for (const auto& o : overrides) apply_override(c, o);
    c.validate();
    manifest.config(c, overrides);
    return c;
  }
};

FeatureStore load_features(EncoderMode mode, const TrainConfig& c, const Corpus& corpus, Manifest& manifest) {
  if (mode == EncoderMode::bilstm) {
    require_file(c.embeddings_path, "embeddings");
    manifest.input("embeddings", c.embeddings_path);
    return make_static_features(corpus, load_static_embeddings(c.embeddings_path));
  }
  require_file(c.contextual_path, "contextual embeddings");
  manifest.input("contextual", c.contextual_path);
  return make_contextual_features(corpus, load_contextual_embeddings(c.contextual_path, corpus));
}

Corpus load_corpus(const std::string& path, Manifest& manifest, const std::string& role,
                   LabelPolicy policy = LabelPolicy::outcome_types) {
  require_file(path, role);
  manifest.input(role, path);
  return parse_corpus(path, policy);
}

fs::path prepare_dir(const std::string& dir) {
  if (dir.empty()) throw ConfigError("output directory is not set");
  fs::create_directories(dir);
  return dir;
}

std::vector<std::vector<SentencePrediction>> run_predictions(const Model& model, const Corpus& corpus,
                                                             const FeatureStore& features, double threshold) {
  if (features.dim != model.config.input_dim) {
    throw CheckpointError("checkpoint expects " + std::to_string(model.config.input_dim) +
                          "-dim inputs, embeddings have " + std::to_string(features.dim));
  }
  std::vector<std::vector<SentencePrediction>> out;
  for (std::size_t a = 0; a < corpus.abstracts.size(); ++a) {
    out.push_back(predict_abstract(model, corpus.abstracts[a], features.abstract(a), threshold, true));
  }
  return out;
}

Model load_model(const std::string& path, Manifest& manifest) {
  require_file(path, "checkpoint");
  manifest.input("checkpoint", path);
  return load_checkpoint(path);
}

int cmd_train(const ConfigArgs& cfg, const std::string& corpus_path, const std::string& out_dir, std::ostream& out) {
  Manifest manifest("train");
  const TrainConfig config = cfg.resolve(manifest);
  const Corpus corpus = load_corpus(corpus_path, manifest, "corpus");
  const FeatureStore features = load_features(config.encoder_mode, config, corpus, manifest);
  const fs::path dir = prepare_dir(out_dir);
  manifest["seeds"] = {{"seed", config.seed}};

  try {
    const TrainResult result = train(corpus, features, config, [&](const EpochLog& e) {
      out << "epoch " << e.epoch << " mean_loss " << format_real(e.mean_loss) << '\n';
    });
    save_checkpoint(dir / "checkpoint.json", result.model);
    write_file(dir / "loss_log.tsv", format_epoch_log(result.log));
    manifest.output("checkpoint.json");
    manifest.output("loss_log.tsv");
    manifest.write(dir);
  } catch (const TrainingDiverged& e) {
    save_checkpoint(dir / "checkpoint.last_good.json", e.last_good());
    write_file(dir / "loss_log.tsv", format_epoch_log(e.log()));
    manifest.output("checkpoint.last_good.json");
    manifest.output("loss_log.tsv");
    manifest["diverged"] = e.what();
    manifest.write(dir);
    throw;
  }
  return kOk;
}

int cmd_predict(const ConfigArgs& cfg, const std::string& checkpoint, const std::string& corpus_path,
                const std::string& out_dir) {
  Manifest manifest("predict");
  const TrainConfig config = cfg.resolve(manifest);
  const Model model = load_model(checkpoint, manifest);
  const Corpus corpus = load_corpus(corpus_path, manifest, "corpus");
  const FeatureStore features = load_features(model.config.encoder_mode, config, corpus, manifest);
  const auto preds = run_predictions(model, corpus, features, config.oc_threshold);
  const fs::path dir = prepare_dir(out_dir);
  write_predictions(dir / "predictions.jsonl", corpus, preds);
  manifest.output("predictions.jsonl");
  manifest.write(dir);
  return kOk;
}

int cmd_evaluate(const ConfigArgs& cfg, const std::string& checkpoint, const std::string& predictions_path,
                 const std::string& corpus_path, const std::vector<std::size_t>& ns, const std::string& out_dir,
                 std::ostream& out) {
  Manifest manifest("evaluate");
  if (checkpoint.empty() == predictions_path.empty()) {
    throw CLI::ValidationError("evaluate", "give exactly one of --checkpoint or --predictions");
  }
  const Corpus corpus = load_corpus(corpus_path, manifest, "gold");
  const fs::path dir = prepare_dir(out_dir);
  std::vector<std::vector<SentencePrediction>> preds;
  if (!checkpoint.empty()) {
    const TrainConfig config = cfg.resolve(manifest);
    const Model model = load_model(checkpoint, manifest);
    const FeatureStore features = load_features(model.config.encoder_mode, config, corpus, manifest);
    preds = run_predictions(model, corpus, features, config.oc_threshold);
    write_predictions(dir / "predictions.jsonl", corpus, preds);
    manifest.output("predictions.jsonl");
  } else {
    require_file(predictions_path, "predictions");
    manifest.input("predictions", predictions_path);
    preds = load_predictions(predictions_path, corpus);
  }
  const EvalReport report = evaluate_predictions(corpus, preds, ns);
  write_file(dir / "report.json", report_json(report));
  write_file(dir / "report.tsv", report_tsv(report));
  write_file(dir / "plot.tsv", plot_tsv(report));
  for (const char* name : {"report.json", "report.tsv", "plot.tsv"}) manifest.output(name);
  manifest.write(dir);
  out << "span F1 " << format_fixed(report.osd.f1, 4) << ", OC macro F1 " << format_fixed(report.oc_end_to_end.macro.f1, 4)
      << '\n';
  return kOk;
}

FeatureStore alignment_vectors(const Corpus& corpus, const std::string& contextual, const std::string& embeddings,
                               const std::string& role, Manifest& manifest, std::string& kind) {
  if (!contextual.empty()) {
    require_file(contextual, role + " contextual embeddings");
    manifest.input(role + "_contextual", contextual);
    kind = "contextual";
    return make_contextual_features(corpus, load_contextual_embeddings(contextual, corpus));
  }
  require_file(embeddings, "embeddings");
  manifest.input(role + "_embeddings", embeddings);
  if (kind.empty()) kind = "static";
  return make_static_features(corpus, load_static_embeddings(embeddings));
}

int cmd_align(const std::string& source_path, const std::string& target_path, const std::string& source_ctx,
              const std::string& target_ctx, const std::string& embeddings, const std::string& rule_name,
              const std::string& out_dir, std::ostream& out) {
  Manifest manifest("align");
  const auto rule = parse_mapping_rule(rule_name);
  if (!rule) throw CLI::ValidationError("--rule", "expected column_argmin or row_argmin");
  const Corpus source = load_corpus(source_path, manifest, "source", LabelPolicy::open);
  const Corpus target = load_corpus(target_path, manifest, "target", LabelPolicy::open);
  std::string kind_s, kind_t;
  const FeatureStore sv = alignment_vectors(source, source_ctx, embeddings, "source", manifest, kind_s);
  const FeatureStore tv = alignment_vectors(target, target_ctx, embeddings, "target", manifest, kind_t);
  const auto matrix = distance_matrix(label_embeddings(source, sv), label_embeddings(target, tv));
  LabelMapping mapping = derive_mapping(matrix, *rule);
  mapping.vectors = kind_s == kind_t ? kind_s : kind_s + "+" + kind_t;
  const fs::path dir = prepare_dir(out_dir);
  write_file(dir / "distances.tsv", distance_tsv(matrix));
  write_file(dir / "mapping.json", mapping_json(mapping));
  manifest.output("distances.tsv");
  manifest.output("mapping.json");
  manifest["rule"] = mapping_rule_name(*rule);
  manifest.write(dir);
  for (const auto& e : mapping.entries) out << e.source << " -> " << e.target_type << " (" << e.column << ")\n";
  return kOk;
}

int cmd_merge(const std::string& source_path, const std::string& target_path, const std::string& mapping_path,
              const MergeOptions& options, const std::string& out_dir, std::ostream& out) {
  Manifest manifest("merge");
  const Corpus source = load_corpus(source_path, manifest, "source", LabelPolicy::open);
  const Corpus target = load_corpus(target_path, manifest, "target", LabelPolicy::open);
  require_file(mapping_path, "mapping");
  manifest.input("mapping", mapping_path);
  const LabelMapping mapping = parse_mapping_json(read_file(mapping_path));
  const MergeResult merged = merge_corpora(source, target, mapping, options);
  const fs::path dir = prepare_dir(out_dir);
  write_corpus(dir / "merged.corpus", merged.merged);
  const std::string stats = stats_tsv({{"source", merged.source}, {"target", merged.target},
                                       {"merged", merged.combined}});
  write_file(dir / "stats.tsv", stats);
  manifest.output("merged.corpus");
  manifest.output("stats.tsv");
  manifest["prefixes"] = {{"source", options.source_prefix}, {"target", options.target_prefix}};
  manifest.write(dir);
  out << stats;
  return kOk;
}

int cmd_gradcheck(const std::string& mode_name, std::size_t hidden, std::size_t b, std::size_t input_dim,
                  std::size_t tokens, std::uint64_t seed, double tolerance, std::ostream& out) {
  std::vector<EncoderMode> modes;
  if (mode_name == "both") {
    modes = {EncoderMode::bilstm, EncoderMode::precomputed};
  } else {
    const auto m = parse_encoder_mode(mode_name);
    if (!m) throw CLI::ValidationError("--mode", "expected bilstm, precomputed or both");
    modes = {*m};
  }
  json report = {{"seed", seed}, {"tolerance", tolerance}, {"modes", json::array()}};
  double worst = 0.0;
  for (EncoderMode mode : modes) {
    ModelConfig c;
    c.encoder_mode = mode;
    c.hidden_dim = hidden;
    c.attention_b = b;
    c.input_dim = mode == EncoderMode::bilstm ? input_dim : hidden;
    try {
      c.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    const ModelGradCheck r = model_gradcheck(c, seed, tokens);
    json groups = json::object();
    for (const auto& [name, err] : r.per_param) groups[name] = err;
    report["modes"].push_back({{"encoder_mode", encoder_mode_name(mode)},
                               {"max_relative_error", r.max_relative_error},
                               {"entries", r.entries},
                               {"per_param", groups}});
    worst = std::max(worst, r.max_relative_error);
  }
  report["max_relative_error"] = worst;
  report["passed"] = worst <= tolerance;
  out << report.dump(2) << '\n';
  return worst <= tolerance ? kOk : kCheckFailed;
}

int cmd_stats(const std::vector<std::string>& corpora, bool open_labels, const std::string& out_path,
              std::ostream& out) {
  std::vector<std::pair<std::string, CorpusStats>> columns;
  for (const auto& path : corpora) {
    require_file(path, "corpus");
    const Corpus c = parse_corpus(path, open_labels ? LabelPolicy::open : LabelPolicy::outcome_types);
    columns.emplace_back(fs::path(path).stem().string(), corpus_stats(c));
  }
  const std::string tsv = stats_tsv(columns);
  if (!out_path.empty()) write_file(out_path, tsv);
  out << tsv;
  return kOk;
}

void report_error(std::ostream& err, int code, const std::string& kind, const std::string& message,
                  std::optional<std::size_t> line = std::nullopt) {
  json e = {{"exit_code", code}, {"kind", kind}, {"message", message}};
  if (line) e["line"] = *line;
  err << json{{"error", e}}.dump() << '\n';
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint outcome span detection and classification"};
  app.require_subcommand(1);

  ConfigArgs train_cfg, predict_cfg, eval_cfg;
  std::string corpus, out_dir, checkpoint, predictions_path;

  auto* train = app.add_subcommand("train", "Train a model; writes checkpoint.json and loss_log.tsv");
  train_cfg.attach(train);
  train->add_option("--corpus", corpus, "Training corpus")->required();
  train->add_option("--out", out_dir, "Output directory")->required();

  auto* predict = app.add_subcommand("predict", "Tag spans and types; writes predictions.jsonl");
  predict_cfg.attach(predict);
  predict->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  predict->add_option("--corpus", corpus, "Input corpus")->required();
  predict->add_option("--out", out_dir, "Output directory")->required();

  std::vector<std::size_t> ns = {1, 2, 3, 4, 5};
  auto* evaluate = app.add_subcommand("evaluate", "Score a model or a predictions file against a gold corpus");
  eval_cfg.attach(evaluate);
  evaluate->add_option("--checkpoint", checkpoint, "Model checkpoint");
  evaluate->add_option("--predictions", predictions_path, "Predictions file instead of a checkpoint");
  evaluate->add_option("--corpus", corpus, "Gold corpus")->required();
  evaluate->add_option("--n", ns, "Ranking cutoffs")->check(CLI::Range(1, 5));
  evaluate->add_option("--out", out_dir, "Output directory")->required();

  std::string source, target, source_ctx, target_ctx, embeddings, rule = "column_argmin", mapping_path;
  auto* align = app.add_subcommand("align", "Map source labels onto target outcome types");
  align->add_option("--source", source, "Source corpus (any label names)")->required();
  align->add_option("--target", target, "Target corpus")->required();
  align->add_option("--source-contextual", source_ctx, "Contextual vectors for the source corpus");
  align->add_option("--target-contextual", target_ctx, "Contextual vectors for the target corpus");
  align->add_option("--embeddings", embeddings, "Static embeddings, used where contextual vectors are absent");
  align->add_option("--rule", rule, "column_argmin or row_argmin");
  align->add_option("--out", out_dir, "Output directory")->required();

  MergeOptions merge_options;
  auto* merge = app.add_subcommand("merge", "Relabel the source corpus and concatenate it with the target");
  merge->add_option("--source", source, "Source corpus")->required();
  merge->add_option("--target", target, "Target corpus")->required();
  merge->add_option("--mapping", mapping_path, "mapping.json from align")->required();
  merge->add_option("--source-prefix", merge_options.source_prefix, "Prefix for source doc ids");
  merge->add_option("--target-prefix", merge_options.target_prefix, "Prefix for target doc ids");
  merge->add_option("--out", out_dir, "Output directory")->required();

  std::string gc_mode = "both";
  std::size_t gc_hidden = 8, gc_b = 4, gc_input = 6, gc_tokens = 5;
  std::uint64_t gc_seed = 1;
  double gc_tol = 1e-4;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the full joint loss");
  gradcheck->add_option("--mode", gc_mode, "bilstm, precomputed or both");
  gradcheck->add_option("--hidden", gc_hidden, "Hidden dimension k");
  gradcheck->add_option("--b", gc_b, "Attention width b");
  gradcheck->add_option("--input-dim", gc_input, "Input dimension d (bilstm)");
  gradcheck->add_option("--tokens", gc_tokens, "Tokens per sentence")->check(CLI::Range(3, 64));
  gradcheck->add_option("--seed", gc_seed, "Initialisation seed");
  gradcheck->add_option("--tolerance", gc_tol, "Maximum relative error");

  std::vector<std::string> stats_corpora;
  bool open_labels = false;
  std::string stats_out;
  auto* stats = app.add_subcommand("stats", "Corpus statistics as TSV");
  stats->add_option("--corpus", stats_corpora, "Corpus file (repeatable)")->required();
  stats->add_flag("--open-labels", open_labels, "Accept label names outside the five outcome types");
  stats->add_option("--out", stats_out, "Also write the table here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    report_error(err, kUsage, "usage", e.what());
    return kUsage;
  }

  try {
    if (*train) return cmd_train(train_cfg, corpus, out_dir, out);
    if (*predict) return cmd_predict(predict_cfg, checkpoint, corpus, out_dir);
    if (*evaluate) return cmd_evaluate(eval_cfg, checkpoint, predictions_path, corpus, ns, out_dir, out);
    if (*align) return cmd_align(source, target, source_ctx, target_ctx, embeddings, rule, out_dir, out);
    if (*merge) return cmd_merge(source, target, mapping_path, merge_options, out_dir, out);
    if (*gradcheck) return cmd_gradcheck(gc_mode, gc_hidden, gc_b, gc_input, gc_tokens, gc_seed, gc_tol, out);
    if (*stats) return cmd_stats(stats_corpora, open_labels, stats_out, out);
  } catch (const CLI::Error& e) {
    report_error(err, kUsage, "usage", e.what());
    return kUsage;
  } catch (const MissingFile& e) {
    report_error(err, kMissingFile, "missing_file", e.what());
    return kMissingFile;
  } catch (const ConfigError& e) {
    report_error(err, kBadConfig, "bad_config", e.what());
    return kBadConfig;
  } catch (const CheckpointError& e) {
    report_error(err, kCheckpointMismatch, "checkpoint_mismatch", e.what());
    return kCheckpointMismatch;
  } catch (const ParseError& e) {
    report_error(err, kDataError, "parse_error", e.what(), e.line());
    return kDataError;
  } catch (const DataError& e) {
    report_error(err, kDataError, "data_error", e.what());
    return kDataError;
  } catch (const DimensionError& e) {
    report_error(err, kDataError, "dimension_error", e.what());
    return kDataError;
  } catch (const TrainingDiverged& e) {
    report_error(err, kDiverged, "diverged", e.what());
    return kDiverged;
  } catch (const std::ios_base::failure& e) {
    report_error(err, kMissingFile, "io_error", e.what());
    return kMissingFile;
  } catch (const std::exception& e) {
    report_error(err, kFailure, "failure", e.what());
    return kFailure;
  }
  report_error(err, kUsage, "usage", "no command given");
  return kUsage;
}

}  // namespace lcam::cli
