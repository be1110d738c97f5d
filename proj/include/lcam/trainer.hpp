#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lcam/corpus.hpp"
#include "lcam/encoder.hpp"
#include "lcam/model.hpp"
#include "lcam/params.hpp"

namespace lcam {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  std::size_t batch_size = 64;
  double dropout = 0.1;
  std::size_t epochs = 10;
  double learning_rate = 1e-3;
  std::optional<std::size_t> hidden_dim;  // unset: 300 (bilstm) or 768 (precomputed)
  std::size_t attention_b = 200;
  std::uint64_t seed = 1;
  EncoderMode encoder_mode = EncoderMode::bilstm;
  std::string embeddings_path;
  std::string contextual_path;
  bool disable_attention = false;
  bool disable_abstract_context = false;
  double oc_threshold = 0.5;

  std::size_t resolved_hidden_dim() const;
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

inline constexpr std::array<std::string_view, 13> kConfigKeys = {
    "batch_size",  "dropout",         "epochs",
    "learning_rate", "hidden_dim",    "attention_b",
    "seed",        "encoder_mode",    "embeddings_path",
    "contextual_path", "disable_attention", "disable_abstract_context",
    "oc_threshold"};

// `key = value` lines; blank lines and lines starting with '#' are ignored.
TrainConfig parse_train_config(std::string_view text);
TrainConfig load_train_config(const std::filesystem::path& path);
void set_config_value(TrainConfig& config, std::string_view key, std::string_view value);
// "key=value" as given to --set.
void apply_override(TrainConfig& config, std::string_view assignment);
// Every key in canonical order; parse_train_config(format_train_config(c)) == c.
std::string format_train_config(const TrainConfig& config);

ModelConfig model_config(const TrainConfig& config, std::size_t input_dim);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t t = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

AdamState make_adam_state(std::span<const Tensor> params);
AdamState make_adam_state(const ModelParams& params);

// Bias-corrected Adam over parallel lists of parameters and gradients.
// Throws std::domain_error on a non-finite gradient, leaving params untouched.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state, double lr);
void adam_step(ModelParams& params, std::span<const Tensor> grads, AdamState& state, double lr);

std::vector<Tensor*> param_pointers(ModelParams& params);
std::vector<Tensor> param_values(const ModelParams& params);
std::vector<std::string> param_names(const ModelParams& params);

struct SentenceRef {
  std::size_t abstract = 0;
  std::size_t sentence = 0;
  bool operator==(const SentenceRef&) const = default;
};
using Batch = std::vector<SentenceRef>;

// Abstracts and the sentences inside each abstract are shuffled from
// (seed, epoch); sentences of one abstract stay contiguous so its context is
// computed once per batch.
std::vector<Batch> make_batches(const Corpus& corpus, std::size_t batch_size, std::uint64_t seed,
                                std::size_t epoch = 0);

struct BatchResult {
  double loss = 0.0;  // mean over sentences of L_osd + sum L_oc
  double osd = 0.0;
  double oc = 0.0;
  std::vector<Tensor> grads;  // ParamSet::for_each order
};

// Forward and backward for one batch. `mask` may be empty (no dropout).
BatchResult batch_gradients(const Model& model, const Corpus& corpus, const FeatureStore& features,
                            const Batch& batch, const MaskFn& mask = {});

// Inverted-dropout masks drawn from rng: entries 0 or 1/(1-rate).
MaskFn make_dropout_masks(double rate, std::uint64_t seed);

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double mean_osd = 0.0;
  double mean_oc = 0.0;
  std::size_t sentences = 0;
  std::size_t batches = 0;
};

struct TrainResult {
  Model model;
  std::vector<EpochLog> log;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& message, Model last_good, std::vector<EpochLog> log)
      : std::runtime_error(message), last_good_(std::move(last_good)), log_(std::move(log)) {}
  const Model& last_good() const { return last_good_; }
  const std::vector<EpochLog>& log() const { return log_; }

 private:
  Model last_good_;
  std::vector<EpochLog> log_;
};

using EpochCallback = std::function<void(const EpochLog&)>;

TrainResult train(const Corpus& corpus, const FeatureStore& features, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});
// Continues from an existing model (config dimensions taken from it).
TrainResult train(Model model, const Corpus& corpus, const FeatureStore& features, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

std::string format_epoch_log(const std::vector<EpochLog>& log);

}  // namespace lcam
