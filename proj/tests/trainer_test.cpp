#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "lcam/checkpoint.hpp"
#include "lcam/rng.hpp"
#include "lcam/trainer.hpp"
#include "synthetic.hpp"

namespace lcam {
namespace {

namespace fs = std::filesystem;

TEST(Adam, ZeroGradientsLeaveParametersUnchanged) {
  Tensor p = Tensor::row({0.3, -0.7});
  const Tensor before = p;
  Tensor* params[] = {&p};
  const std::vector<Tensor> grads = {Tensor::zeros(1, 2)};
  AdamState st = make_adam_state(std::vector<Tensor>{p});
  for (int i = 0; i < 3; ++i) adam_step(params, grads, st, 1e-3);
  EXPECT_EQ(p, before);
  EXPECT_EQ(st.t, 3u);
}

TEST(Adam, SingleStepByHand) {
  Tensor p = Tensor::scalar(2.0);
  Tensor* params[] = {&p};
  const std::vector<Tensor> grads = {Tensor::scalar(1.0)};
  AdamState st = make_adam_state(std::vector<Tensor>{p});
  EXPECT_EQ(st.beta1, 0.9);
  EXPECT_EQ(st.beta2, 0.999);
  EXPECT_EQ(st.epsilon, 1e-8);
  adam_step(params, grads, st, 1e-3);
  // m = 0.1, v = 0.001; bias-corrected both are 1.
  const double m_hat = 0.1 / (1 - 0.9), v_hat = 0.001 / (1 - 0.999);
  EXPECT_NEAR(p.item(), 2.0 - 1e-3 * m_hat / (std::sqrt(v_hat) + 1e-8), 1e-15);
  EXPECT_NEAR(p.item(), 2.0 - 1e-3, 1e-10);
}

TEST(Adam, Deterministic) {
  auto run = [] {
    Rng rng(3);
    Tensor p = Tensor::zeros(2, 3);
    Tensor* params[] = {&p};
    AdamState st = make_adam_state(std::vector<Tensor>{p});
    for (int i = 0; i < 20; ++i) {
      Tensor g = Tensor::zeros(2, 3);
      for (auto& v : g.mutable_values()) v = rng.normal();
      adam_step(params, std::vector<Tensor>{g}, st, 1e-2);
    }
    return p;
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, RejectsNanAndShapeMismatch) {
  Tensor p = Tensor::row({1, 2});
  const Tensor before = p;
  Tensor* params[] = {&p};
  AdamState st = make_adam_state(std::vector<Tensor>{p});
  EXPECT_THROW(adam_step(params, std::vector<Tensor>{Tensor::row({1, std::nan("")})}, st, 1e-3), std::domain_error);
  EXPECT_EQ(p, before);
  EXPECT_EQ(st.t, 0u);
  EXPECT_THROW(adam_step(params, std::vector<Tensor>{Tensor::row({1, 2, 3})}, st, 1e-3), DimensionError);
}

Corpus corpus_of_sizes(const std::vector<std::size_t>& sizes) {
  Corpus c;
  for (std::size_t a = 0; a < sizes.size(); ++a) {
    AbstractDoc d{"a" + std::to_string(a), {}};
    for (std::size_t s = 0; s < sizes[a]; ++s) d.sentences.push_back(testing::marked_sentence("x y", {}));
    c.abstracts.push_back(d);
  }
  return c;
}

std::vector<std::size_t> batch_sizes(const std::vector<Batch>& batches) {
  std::vector<std::size_t> out;
  for (const auto& b : batches) out.push_back(b.size());
  return out;
}

TEST(Batches, Sizes) {
  EXPECT_EQ(batch_sizes(make_batches(corpus_of_sizes({4, 6}), 64, 1)), (std::vector<std::size_t>{10}));
  EXPECT_EQ(batch_sizes(make_batches(corpus_of_sizes({50, 30, 50}), 64, 1)), (std::vector<std::size_t>{64, 64, 2}));
  EXPECT_EQ(batch_sizes(make_batches(corpus_of_sizes({3}), 1, 1)), (std::vector<std::size_t>{1, 1, 1}));
}

TEST(Batches, PermutationGroupedByAbstract) {
  const Corpus c = corpus_of_sizes({5, 7, 3, 9, 1});
  const auto batches = make_batches(c, 4, 11, 2);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::vector<std::size_t> abstract_order;
  for (const auto& b : batches) {
    for (const auto& r : b) {
      EXPECT_TRUE(seen.insert({r.abstract, r.sentence}).second);
      if (abstract_order.empty() || abstract_order.back() != r.abstract) abstract_order.push_back(r.abstract);
    }
  }
  EXPECT_EQ(seen.size(), 25u);
  EXPECT_EQ(abstract_order.size(), 5u);  // each abstract's sentences are contiguous
}

TEST(Batches, SeedAndEpochDetermineOrder) {
  const Corpus c = corpus_of_sizes({4, 4, 4, 4, 4, 4});
  auto flat = [&](std::uint64_t seed, std::size_t epoch) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& b : make_batches(c, 5, seed, epoch)) {
      for (const auto& r : b) out.emplace_back(r.abstract, r.sentence);
    }
    return out;
  };
  EXPECT_EQ(flat(1, 0), flat(1, 0));
  // Over 50 seeds the orders should almost never collide.
  std::set<std::vector<std::pair<std::size_t, std::size_t>>> orders;
  for (std::uint64_t s = 0; s < 50; ++s) orders.insert(flat(s, 0));
  EXPECT_GE(orders.size(), 49u);
  EXPECT_NE(flat(1, 0), flat(1, 1));
}

TEST(Dropout, MaskValues) {
  EXPECT_FALSE(static_cast<bool>(make_dropout_masks(0.0, 1)));
  const MaskFn mask = make_dropout_masks(0.25, 1);
  const Tensor m = mask(200, 50);
  double total = 0;
  for (double v : m.values()) {
    EXPECT_TRUE(v == 0.0 || v == 1.0 / 0.75);
    total += v;
  }
  EXPECT_NEAR(total / 10000.0, 1.0, 0.03);
  EXPECT_EQ(make_dropout_masks(0.25, 9)(3, 3), make_dropout_masks(0.25, 9)(3, 3));
}

TEST(Config, DefaultsAndHiddenDim) {
  TrainConfig c;
  EXPECT_EQ(c.batch_size, 64u);
  EXPECT_EQ(c.dropout, 0.1);
  EXPECT_EQ(c.epochs, 10u);
  EXPECT_EQ(c.learning_rate, 1e-3);
  EXPECT_EQ(c.attention_b, 200u);
  EXPECT_EQ(c.resolved_hidden_dim(), 300u);
  c.encoder_mode = EncoderMode::precomputed;
  EXPECT_EQ(c.resolved_hidden_dim(), 768u);
  c.hidden_dim = 12;
  EXPECT_EQ(c.resolved_hidden_dim(), 12u);
}

TEST(Config, ParseAndRoundTrip) {
  const TrainConfig c = parse_train_config(
      "# comment\n"
      "batch_size = 8\n"
      "dropout=0.2\n"
      "epochs = 3\n"
      "learning_rate = 0.005\n"
      "hidden_dim = 16\n"
      "attention_b = 4\n"
      "seed = 99\n"
      "encoder_mode = precomputed\n"
      "embeddings_path = glove.txt\n"
      "contextual_path = ctx.jsonl\n"
      "disable_attention = true\n"
      "disable_abstract_context = 0\n"
      "oc_threshold = 0.4\n");
  EXPECT_EQ(c.batch_size, 8u);
  EXPECT_EQ(c.dropout, 0.2);
  EXPECT_EQ(c.encoder_mode, EncoderMode::precomputed);
  EXPECT_EQ(c.hidden_dim, 16u);
  EXPECT_TRUE(c.disable_attention);
  EXPECT_FALSE(c.disable_abstract_context);
  EXPECT_EQ(c.contextual_path, "ctx.jsonl");
  EXPECT_EQ(parse_train_config(format_train_config(c)), c);
  EXPECT_EQ(parse_train_config(format_train_config(TrainConfig{})), TrainConfig{});
  for (std::string_view key : kConfigKeys) {
    EXPECT_NE(format_train_config(c).find(std::string(key) + " ="), std::string::npos) << key;
  }
}

TEST(Config, Rejections) {
  EXPECT_THROW(parse_train_config("batchsize = 3\n"), ConfigError);
  EXPECT_THROW(parse_train_config("seed = 1\nseed = 2\n"), ConfigError);
  EXPECT_THROW(parse_train_config("epochs = -1\n"), ConfigError);
  EXPECT_THROW(parse_train_config("epochs = 3x\n"), ConfigError);
  EXPECT_THROW(parse_train_config("dropout = 1\n"), ConfigError);
  EXPECT_THROW(parse_train_config("hidden_dim = 7\n"), ConfigError);
  EXPECT_THROW(parse_train_config("encoder_mode = cnn\n"), ConfigError);
  EXPECT_THROW(parse_train_config("disable_attention = maybe\n"), ConfigError);
  EXPECT_THROW(parse_train_config("no equals sign\n"), ConfigError);
  try {
    parse_train_config("seed = 1\n\nmystery = 2\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("mystery"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos);
  }
}

TEST(Config, Overrides) {
  TrainConfig c;
  apply_override(c, "epochs=4");
  apply_override(c, "hidden_dim = auto");
  EXPECT_EQ(c.epochs, 4u);
  EXPECT_FALSE(c.hidden_dim.has_value());
  EXPECT_THROW(apply_override(c, "epochs"), ConfigError);
  EXPECT_THROW(apply_override(c, "nothing=1"), ConfigError);
}

TEST(Config, PrecomputedDimensionMismatch) {
  TrainConfig c;
  c.encoder_mode = EncoderMode::precomputed;
  c.hidden_dim = 8;
  EXPECT_THROW(model_config(c, 6), ConfigError);
  EXPECT_EQ(model_config(c, 8).hidden_dim, 8u);
}

TrainConfig small_config() {
  TrainConfig c;
  c.hidden_dim = 8;
  c.attention_b = 4;
  c.batch_size = 4;
  c.epochs = 3;
  c.seed = 5;
  return c;
}

TEST(Train, ZeroEpochsReturnsInitialisation) {
  const Corpus corpus = testing::overfit_corpus();
  const FeatureStore features = testing::random_features(corpus, 6, 1);
  TrainConfig c = small_config();
  c.epochs = 0;
  const TrainResult r = train(corpus, features, c);
  EXPECT_TRUE(r.log.empty());
  const ModelConfig mc = model_config(c, 6);
  EXPECT_EQ(checkpoint_text(r.model), checkpoint_text(Model{mc, init_params(mc, mix_seed(c.seed, 0, 0))}));
}

TEST(Train, BitReproducible) {
  const Corpus corpus = testing::overfit_corpus();
  const FeatureStore features = testing::random_features(corpus, 6, 1);
  for (double dropout : {0.0, 0.1}) {
    TrainConfig c = small_config();
    c.dropout = dropout;
    std::vector<EpochLog> seen;
    const TrainResult a = train(corpus, features, c, [&](const EpochLog& e) { seen.push_back(e); });
    const TrainResult b = train(corpus, features, c);
    EXPECT_EQ(checkpoint_text(a.model), checkpoint_text(b.model));
    EXPECT_EQ(format_epoch_log(a.log), format_epoch_log(b.log));
    EXPECT_EQ(seen.size(), 3u);
    EXPECT_EQ(a.log[0].sentences, 20u);
    EXPECT_EQ(a.log[0].batches, 5u);
  }
}

TEST(Train, BatchLossIsMeanOfSentenceLosses) {
  const Corpus corpus = testing::overfit_corpus();
  const FeatureStore features = testing::random_features(corpus, 6, 2);
  const ModelConfig mc = model_config(small_config(), 6);
  const Model model{mc, init_params(mc, 3)};
  const Batch batch = {{0, 1}, {1, 3}, {0, 5}};
  const BatchResult br = batch_gradients(model, corpus, features, batch, {});
  double total = 0;
  for (const auto& r : batch) {
    Tape tape;
    const BoundParams p = bind(tape, model.params, false);
    const AbstractEncoding enc = encode_abstract(mc, p, features.abstract(r.abstract), tape);
    total += sentence_loss(mc, p, enc.sentences[r.sentence], enc.context,
                           corpus.abstracts[r.abstract].sentences[r.sentence])
                 .total.value()
                 .item();
  }
  EXPECT_NEAR(br.loss, total / 3.0, 1e-12);
  EXPECT_NEAR(br.loss, br.osd + br.oc, 1e-12);
  EXPECT_EQ(br.grads.size(), param_names(model.params).size());
}

// Precomputed inputs [v, -v] per single-sentence abstract pool to a zero
// context, so dropping the context must not change any loss.
TEST(Train, ZeroContextEquivalence) {
  Corpus corpus;
  FeatureStore features;
  features.dim = 4;
  Rng rng(12);
  for (int a = 0; a < 4; ++a) {
    corpus.abstracts.push_back({"z" + std::to_string(a), {testing::marked_sentence("[pain] fell", {"Physiological"})}});
    Tensor x = Tensor::zeros(2, 4);
    for (std::size_t j = 0; j < 4; ++j) {
      x(0, j) = rng.normal();
      x(1, j) = -x(0, j);
    }
    features.inputs.push_back({x});
  }
  TrainConfig c = small_config();
  c.encoder_mode = EncoderMode::precomputed;
  c.hidden_dim = 4;
  c.dropout = 0.0;
  const TrainResult with = train(corpus, features, c);
  c.disable_abstract_context = true;
  const TrainResult without = train(corpus, features, c);
  EXPECT_EQ(format_epoch_log(with.log), format_epoch_log(without.log));
  EXPECT_EQ(with.model.params.token_head.weight, without.model.params.token_head.weight);
}

TEST(Train, DivergenceKeepsLastGoodModel) {
  const Corpus corpus = testing::overfit_corpus();
  FeatureStore features = testing::random_features(corpus, 6, 1);
  features.inputs[1][2](0, 0) = std::nan("");
  TrainConfig c = small_config();
  c.batch_size = 64;
  try {
    train(corpus, features, c);
    FAIL();
  } catch (const TrainingDiverged& e) {
    const ModelConfig mc = model_config(c, 6);
    EXPECT_EQ(checkpoint_text(e.last_good()), checkpoint_text(Model{mc, init_params(mc, mix_seed(c.seed, 0, 0))}));
    EXPECT_TRUE(e.log().empty());
  }
}

TEST(Train, InputDimensionMismatch) {
  const Corpus corpus = testing::overfit_corpus();
  const FeatureStore features = testing::random_features(corpus, 6, 1);
  const ModelConfig mc = model_config(small_config(), 5);
  EXPECT_THROW(train(Model{mc, init_params(mc, 1)}, corpus, features, small_config()), ConfigError);
}

TEST(EpochLog, Format) {
  const std::vector<EpochLog> log = {{1, 2.5, 2.0, 0.5, 20, 1}};
  EXPECT_EQ(format_epoch_log(log), "epoch\tmean_loss\tmean_osd\tmean_oc\tsentences\tbatches\n1\t2.5\t2\t0.5\t20\t1\n");
}

class CheckpointFile : public ::testing::Test {
 protected:
  void SetUp() override {
    model.config = ModelConfig{EncoderMode::bilstm, 6, 8, 4, false, true};
    model.params = init_params(model.config, 77);
    path = fs::temp_directory_path() / "lcam_checkpoint_test.json";
  }
  void TearDown() override { fs::remove(path); }
  Model model;
  fs::path path;
};

TEST_F(CheckpointFile, RoundTripIsExact) {
  save_checkpoint(path, model);
  const Model back = load_checkpoint(path);
  EXPECT_EQ(back.config, model.config);
  const auto a = param_values(model.params), b = param_values(back.params);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
  EXPECT_EQ(checkpoint_text(back), checkpoint_text(model));
}

TEST_F(CheckpointFile, PrecomputedModelsHaveNoEncoder) {
  Model pre;
  pre.config = ModelConfig{EncoderMode::precomputed, 8, 8, 4, true, false};
  pre.params = init_params(pre.config, 1);
  const Model back = parse_checkpoint(checkpoint_text(pre));
  EXPECT_FALSE(back.params.has_encoder);
  EXPECT_EQ(back.config, pre.config);
}

TEST_F(CheckpointFile, RejectsMismatches) {
  const std::string good = checkpoint_text(model);
  auto replaced = [&](const std::string& from, const std::string& to) {
    std::string s = good;
    const auto pos = s.find(from);
    EXPECT_NE(pos, std::string::npos) << from;
    return s.replace(pos, from.size(), to);
  };
  EXPECT_THROW(parse_checkpoint(replaced("\"version\": 1", "\"version\": 2")), CheckpointError);
  EXPECT_THROW(parse_checkpoint(replaced("lcam-checkpoint", "other")), CheckpointError);
  EXPECT_THROW(parse_checkpoint(replaced("\"hidden_dim\": 8", "\"hidden_dim\": 10")), CheckpointError);
  EXPECT_THROW(parse_checkpoint(replaced("token_head.bias", "token_head.offset")), CheckpointError);
  EXPECT_THROW(parse_checkpoint(replaced("\"Mortality\"", "\"Death\"")), CheckpointError);
  EXPECT_THROW(parse_checkpoint("{"), CheckpointError);
  EXPECT_THROW(load_checkpoint(path), std::exception);
}

}  // namespace
}  // namespace lcam
