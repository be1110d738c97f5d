#include "lcam/checkpoint.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace lcam {

using nlohmann::json;

namespace {

json token_labels() {
  json out = json::array();
  for (std::size_t i = 0; i < kNumTags; ++i) out.push_back(std::string(1, tag_char(static_cast<Tag>(i))));
  return out;
}

json sentence_labels() {
  json out = json::array();
  for (auto t : kOutcomeTypes) out.push_back(std::string(t));
  return out;
}

}  // namespace

std::string checkpoint_text(const Model& model) {
  const ModelConfig& c = model.config;
  json doc;
  doc["format"] = kCheckpointFormat;
  doc["version"] = kCheckpointVersion;
  doc["config"] = {{"encoder_mode", encoder_mode_name(c.encoder_mode)},
                   {"input_dim", c.input_dim},
                   {"hidden_dim", c.hidden_dim},
                   {"attention_b", c.attention_b},
                   {"disable_attention", c.disable_attention},
                   {"disable_abstract_context", c.disable_abstract_context}};
  doc["token_labels"] = token_labels();
  doc["sentence_labels"] = sentence_labels();
  json params = json::array();
  model.params.for_each([&](const char* name, const Tensor& t) {
    params.push_back({{"name", name}, {"shape", {t.rows(), t.cols()}}, {"values", std::vector<double>(t.values().begin(), t.values().end())}});
  });
  doc["params"] = std::move(params);
  return doc.dump(1) + "\n";
}

Model parse_checkpoint(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (doc.value("format", std::string()) != kCheckpointFormat) throw CheckpointError("not an lcam checkpoint");
    const int version = doc.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                            std::to_string(kCheckpointVersion) + ")");
    }
    if (doc.at("token_labels") != token_labels() || doc.at("sentence_labels") != sentence_labels()) {
      throw CheckpointError("checkpoint label vocabularies do not match this build");
    }
    const json& jc = doc.at("config");
    Model model;
    const auto mode = parse_encoder_mode(jc.at("encoder_mode").get<std::string>());
    if (!mode) throw CheckpointError("checkpoint has an unknown encoder mode");
    model.config.encoder_mode = *mode;
    model.config.input_dim = jc.at("input_dim").get<std::size_t>();
    model.config.hidden_dim = jc.at("hidden_dim").get<std::size_t>();
    model.config.attention_b = jc.at("attention_b").get<std::size_t>();
    model.config.disable_attention = jc.at("disable_attention").get<bool>();
    model.config.disable_abstract_context = jc.at("disable_abstract_context").get<bool>();
    try {
      model.config.validate();
    } catch (const std::invalid_argument& e) {
      throw CheckpointError(std::string("checkpoint config: ") + e.what());
    }

    std::map<std::string, const json*> stored;
    for (const json& p : doc.at("params")) {
      const auto name = p.at("name").get<std::string>();
      if (!stored.emplace(name, &p).second) throw CheckpointError("duplicate parameter '" + name + "'");
    }
    model.params.has_encoder = model.config.encoder_mode == EncoderMode::bilstm;
    std::size_t used = 0;
    model.params.for_each([&](const char* name, Tensor& t) {
      const auto it = stored.find(name);
      if (it == stored.end()) throw CheckpointError(std::string("checkpoint is missing parameter '") + name + "'");
      const Shape want = expected_shape(model.config, name);
      const auto shape = it->second->at("shape").get<std::vector<std::size_t>>();
      if (shape != want) {
        throw CheckpointError(std::string("parameter '") + name + "' has shape " + shape_string(shape) +
                              ", expected " + shape_string(want));
      }
      auto values = it->second->at("values").get<std::vector<double>>();
      if (values.size() != want[0] * want[1]) {
        throw CheckpointError(std::string("parameter '") + name + "' has the wrong number of values");
      }
      t = Tensor(want, std::move(values));
      ++used;
    });
    if (used != stored.size()) throw CheckpointError("checkpoint has parameters this model does not use");
    return model;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot write checkpoint '" + path.string() + "'");
  out << checkpoint_text(model);
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

}  // namespace lcam
