#include "lcam/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "lcam/rng.hpp"
#include "lcam/text.hpp"

namespace lcam {

namespace {

template <typename T>
T parse_unsigned(std::string_view key, std::string_view text) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError("config: '" + std::string(key) + "' expects a non-negative integer, got '" + std::string(text) +
                      "'");
  }
  return value;
}

double parse_real(std::string_view key, std::string_view text) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty() || !std::isfinite(value)) {
    throw ConfigError("config: '" + std::string(key) + "' expects a real number, got '" + std::string(text) + "'");
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("config: '" + std::string(key) + "' expects true or false, got '" + std::string(text) + "'");
}

}  // namespace

std::size_t TrainConfig::resolved_hidden_dim() const {
  if (hidden_dim) return *hidden_dim;
  return encoder_mode == EncoderMode::bilstm ? 300 : 768;
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("config: batch_size must be at least 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("config: dropout must be in [0, 1)");
  if (!(learning_rate > 0.0)) throw ConfigError("config: learning_rate must be positive");
  if (attention_b == 0) throw ConfigError("config: attention_b must be positive");
  const std::size_t k = resolved_hidden_dim();
  if (k == 0) throw ConfigError("config: hidden_dim must be positive");
  if (encoder_mode == EncoderMode::bilstm && k % 2 != 0) {
    throw ConfigError("config: hidden_dim must be even in bilstm mode");
  }
  if (!(oc_threshold >= 0.0)) throw ConfigError("config: oc_threshold must be non-negative");
}

void set_config_value(TrainConfig& c, std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "batch_size") {
    c.batch_size = parse_unsigned<std::size_t>(key, value);
  } else if (key == "dropout") {
    c.dropout = parse_real(key, value);
  } else if (key == "epochs") {
    c.epochs = parse_unsigned<std::size_t>(key, value);
  } else if (key == "learning_rate") {
    c.learning_rate = parse_real(key, value);
  } else if (key == "hidden_dim") {
    if (value == "auto") {
      c.hidden_dim.reset();
    } else {
      c.hidden_dim = parse_unsigned<std::size_t>(key, value);
    }
  } else if (key == "attention_b") {
    c.attention_b = parse_unsigned<std::size_t>(key, value);
  } else if (key == "seed") {
    c.seed = parse_unsigned<std::uint64_t>(key, value);
  } else if (key == "encoder_mode") {
    const auto mode = parse_encoder_mode(value);
    if (!mode) throw ConfigError("config: encoder_mode must be bilstm or precomputed, got '" + std::string(value) + "'");
    c.encoder_mode = *mode;
  } else if (key == "embeddings_path") {
    c.embeddings_path = std::string(value);
  } else if (key == "contextual_path") {
    c.contextual_path = std::string(value);
  } else if (key == "disable_attention") {
    c.disable_attention = parse_bool(key, value);
  } else if (key == "disable_abstract_context") {
    c.disable_abstract_context = parse_bool(key, value);
  } else if (key == "oc_threshold") {
    c.oc_threshold = parse_real(key, value);
  } else {
    throw ConfigError("config: unknown key '" + std::string(key) + "'");
  }
}

TrainConfig parse_train_config(std::string_view text) {
  TrainConfig config;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  for (std::string_view raw : split(text, '\n')) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string_view key = trim(line.substr(0, eq));
    if (!seen.insert(std::string(key)).second) {
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + std::string(key) + "'");
    }
    try {
      set_config_value(config, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  config.validate();
  return config;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open config '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_train_config(buf.str());
}

void apply_override(TrainConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  }
  set_config_value(config, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

std::string format_train_config(const TrainConfig& c) {
  std::ostringstream out;
  out << "batch_size = " << c.batch_size << '\n';
  out << "dropout = " << format_real(c.dropout) << '\n';
  out << "epochs = " << c.epochs << '\n';
  out << "learning_rate = " << format_real(c.learning_rate) << '\n';
  out << "hidden_dim = " << (c.hidden_dim ? std::to_string(*c.hidden_dim) : std::string("auto")) << '\n';
  out << "attention_b = " << c.attention_b << '\n';
  out << "seed = " << c.seed << '\n';
  out << "encoder_mode = " << encoder_mode_name(c.encoder_mode) << '\n';
  out << "embeddings_path = " << c.embeddings_path << '\n';
  out << "contextual_path = " << c.contextual_path << '\n';
  out << "disable_attention = " << (c.disable_attention ? "true" : "false") << '\n';
  out << "disable_abstract_context = " << (c.disable_abstract_context ? "true" : "false") << '\n';
  out << "oc_threshold = " << format_real(c.oc_threshold) << '\n';
  return out.str();
}

ModelConfig model_config(const TrainConfig& config, std::size_t input_dim) {
  config.validate();
  ModelConfig mc;
  mc.encoder_mode = config.encoder_mode;
  mc.input_dim = input_dim;
  mc.hidden_dim = config.resolved_hidden_dim();
  mc.attention_b = config.attention_b;
  mc.disable_attention = config.disable_attention;
  mc.disable_abstract_context = config.disable_abstract_context;
  try {
    mc.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return mc;
}

AdamState make_adam_state(std::span<const Tensor> params) {
  AdamState state;
  for (const Tensor& p : params) {
    state.m.push_back(Tensor::zeros(p.rows(), p.cols()));
    state.v.push_back(Tensor::zeros(p.rows(), p.cols()));
  }
  return state;
}

AdamState make_adam_state(const ModelParams& params) { return make_adam_state(param_values(params)); }

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state, double lr) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw std::invalid_argument("adam_step: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i].shape() || grads[i].shape() != state.m[i].shape()) {
      throw DimensionError("adam_step: parameter " + std::to_string(i) + " has shape " +
                           shape_string(params[i]->shape()) + ", gradient " + shape_string(grads[i].shape()));
    }
    if (!grads[i].all_finite()) {
      throw std::domain_error("adam_step: non-finite gradient for parameter " + std::to_string(i));
    }
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->mutable_values();
    auto m = state.m[i].mutable_values();
    auto v = state.v[i].mutable_values();
    const auto g = grads[i].values();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      p[j] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

void adam_step(ModelParams& params, std::span<const Tensor> grads, AdamState& state, double lr) {
  const auto ptrs = param_pointers(params);
  adam_step(ptrs, grads, state, lr);
}

std::vector<Tensor*> param_pointers(ModelParams& params) {
  std::vector<Tensor*> out;
  params.for_each([&](const char*, Tensor& t) { out.push_back(&t); });
  return out;
}

std::vector<Tensor> param_values(const ModelParams& params) {
  std::vector<Tensor> out;
  params.for_each([&](const char*, const Tensor& t) { out.push_back(t); });
  return out;
}

std::vector<std::string> param_names(const ModelParams& params) {
  std::vector<std::string> out;
  params.for_each([&](const char* name, const Tensor&) { out.emplace_back(name); });
  return out;
}

std::vector<Batch> make_batches(const Corpus& corpus, std::size_t batch_size, std::uint64_t seed, std::size_t epoch) {
  if (batch_size == 0) throw std::invalid_argument("make_batches: batch_size must be at least 1");
  Rng rng(mix_seed(seed, epoch, 1));
  std::vector<std::size_t> order(corpus.abstracts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  std::vector<SentenceRef> flat;
  for (std::size_t a : order) {
    std::vector<std::size_t> sentences(corpus.abstracts[a].sentences.size());
    for (std::size_t i = 0; i < sentences.size(); ++i) sentences[i] = i;
    rng.shuffle(sentences);
    for (std::size_t s : sentences) flat.push_back({a, s});
  }

  std::vector<Batch> batches;
  for (std::size_t i = 0; i < flat.size(); i += batch_size) {
    const std::size_t end = std::min(flat.size(), i + batch_size);
    batches.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(i), flat.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

BatchResult batch_gradients(const Model& model, const Corpus& corpus, const FeatureStore& features,
                            const Batch& batch, const MaskFn& mask) {
  if (batch.empty()) throw std::invalid_argument("batch_gradients: empty batch");
  if (features.inputs.size() != corpus.abstracts.size()) {
    throw DataError("features cover " + std::to_string(features.inputs.size()) + " abstracts, corpus has " +
                    std::to_string(corpus.abstracts.size()));
  }
  Tape tape;
  const BoundParams params = bind(tape, model.params, true);
  std::map<std::size_t, AbstractEncoding> encodings;

  BatchResult result;
  std::vector<Var> totals;
  totals.reserve(batch.size());
  for (const SentenceRef& ref : batch) {
    auto it = encodings.find(ref.abstract);
    if (it == encodings.end()) {
      it = encodings.emplace(ref.abstract, encode_abstract(model.config, params, features.abstract(ref.abstract), tape))
               .first;
    }
    const SentenceLoss sl = sentence_loss(model.config, params, it->second.sentences.at(ref.sentence),
                                          it->second.context, corpus.abstracts[ref.abstract].sentences[ref.sentence],
                                          mask);
    totals.push_back(sl.total);
    result.osd += sl.osd.value().item();
    for (Var l : sl.oc) result.oc += l.value().item();
  }
  Var total = totals.front();
  for (std::size_t i = 1; i < totals.size(); ++i) total = add(total, totals[i]);
  const double n = static_cast<double>(batch.size());
  const Var loss = scale(total, 1.0 / n);
  result.loss = loss.value().item();
  result.osd /= n;
  result.oc /= n;

  const Gradients grads = tape.backward(loss);
  params.for_each([&](const char*, const Var& v) { result.grads.push_back(grads[v]); });
  return result;
}

MaskFn make_dropout_masks(double rate, std::uint64_t seed) {
  if (rate <= 0.0) return {};
  if (rate >= 1.0) throw std::invalid_argument("dropout rate must be below 1");
  auto rng = std::make_shared<Rng>(seed);
  const double keep_scale = 1.0 / (1.0 - rate);
  return [rng, rate, keep_scale](std::size_t rows, std::size_t cols) {
    std::vector<double> values(rows * cols);
    for (double& v : values) v = rng->uniform() < rate ? 0.0 : keep_scale;
    return Tensor({rows, cols}, std::move(values));
  };
}

TrainResult train(const Corpus& corpus, const FeatureStore& features, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  const ModelConfig mc = model_config(config, features.dim);
  Model model{mc, init_params(mc, mix_seed(config.seed, 0, 0))};
  return train(std::move(model), corpus, features, config, on_epoch);
}

TrainResult train(Model model, const Corpus& corpus, const FeatureStore& features, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (corpus.abstracts.empty()) throw DataError("training corpus is empty");
  if (features.dim != model.config.input_dim) {
    throw ConfigError("embedding dim " + std::to_string(features.dim) + " does not match model input dim " +
                      std::to_string(model.config.input_dim));
  }
  TrainResult result;
  AdamState adam = make_adam_state(model.params);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    EpochLog log;
    log.epoch = epoch + 1;
    const auto batches = make_batches(corpus, config.batch_size, config.seed, epoch);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const MaskFn mask = make_dropout_masks(config.dropout, mix_seed(config.seed, epoch, 2 + b));
      const BatchResult br = batch_gradients(model, corpus, features, batches[b], mask);
      const std::string where = "epoch " + std::to_string(epoch + 1) + ", batch " + std::to_string(b + 1);
      if (!std::isfinite(br.loss)) {
        throw TrainingDiverged("training diverged at " + where + ": loss is not finite", model, result.log);
      }
      Model next = model;
      try {
        adam_step(next.params, br.grads, adam, config.learning_rate);
      } catch (const std::domain_error& e) {
        throw TrainingDiverged("training diverged at " + where + ": " + e.what(), model, result.log);
      }
      model = std::move(next);
      const double n = static_cast<double>(batches[b].size());
      log.mean_loss += br.loss * n;
      log.mean_osd += br.osd * n;
      log.mean_oc += br.oc * n;
      log.sentences += batches[b].size();
      ++log.batches;
    }
    if (log.sentences > 0) {
      const double n = static_cast<double>(log.sentences);
      log.mean_loss /= n;
      log.mean_osd /= n;
      log.mean_oc /= n;
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  result.model = std::move(model);
  return result;
}

std::string format_epoch_log(const std::vector<EpochLog>& log) {
  std::ostringstream out;
  out << "epoch\tmean_loss\tmean_osd\tmean_oc\tsentences\tbatches\n";
  for (const EpochLog& e : log) {
    out << e.epoch << '\t' << format_real(e.mean_loss) << '\t' << format_real(e.mean_osd) << '\t'
        << format_real(e.mean_oc) << '\t' << e.sentences << '\t' << e.batches << '\n';
  }
  return out.str();
}

}  // namespace lcam
