#include "config.hpp"

#include <algorithm>
#include <fstream>

#include "corpus.hpp"
#include "error.hpp"

namespace aste {

namespace {

// Single field table drives both directions so they cannot drift apart.
template <typename Fn>
void for_each_field(ModelConfig& c, Fn&& fn) {
  fn("encoder_name", c.encoder_name);
  fn("d_b", c.d_b);
  fn("encoder_layers", c.encoder_layers);
  fn("encoder_heads", c.encoder_heads);
  fn("encoder_ffn", c.encoder_ffn);
  fn("max_subwords", c.max_subwords);
  fn("encoder_dropout", c.encoder_dropout);
  fn("d_g", c.d_g);
  fn("d_s", c.d_s);
  fn("d_p", c.d_p);
  fn("lstm_hidden", c.lstm_hidden);
  fn("gcn_layers", c.gcn_layers);
  fn("self_loops", c.self_loops);
  fn("interaction_layers", c.interaction_layers);
  fn("attention_heads", c.attention_heads);
  fn("share_interaction_params", c.share_interaction_params);
  fn("dropout", c.dropout);
  fn("d_relation", c.d_relation);
  fn("cnn_layers", c.cnn_layers);
  fn("top_k", c.top_k);
  fn("top_k_floor", c.top_k_floor);
  fn("pooling", c.pooling);
  fn("pos_weight", c.pos_weight);
  fn("train_with_gold_cells", c.train_with_gold_cells);
  fn("epochs", c.epochs);
  fn("batch_size", c.batch_size);
  fn("lr_encoder", c.lr_encoder);
  fn("lr_head", c.lr_head);
  fn("weight_decay", c.weight_decay);
  fn("clip_norm", c.clip_norm);
  fn("seed", c.seed);
  fn("select_on_test", c.select_on_test);
}

template <typename Fn>
void for_each_ablation(AblationFlags& a, Fn&& fn) {
  fn("no_basic", a.no_basic);
  fn("no_particular", a.no_particular);
  fn("no_interaction", a.no_interaction);
  fn("single_embedding", a.single_embedding);
  fn("no_gcn", a.no_gcn);
}

}  // namespace

int ModelConfig::top_k_for(int n) const {
  const int cells = n * n;
  const int k = top_k > 0 ? top_k : std::max(n, top_k_floor);
  return std::min(k, cells);
}

void ModelConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid config: " + what);
  };
  require(d_b > 0 && d_g > 0 && d_s > 0 && d_p > 0 && lstm_hidden > 0 &&
              d_relation > 0,
          "all widths must be > 0");
  require(encoder_layers >= 0, "encoder_layers must be >= 0");
  require(encoder_heads > 0 && d_b % encoder_heads == 0,
          "encoder_heads must divide d_b");
  require(encoder_ffn > 0, "encoder_ffn must be > 0");
  require(max_subwords >= 3, "max_subwords must be >= 3");
  require(gcn_layers >= 0, "gcn_layers must be >= 0");
  require(interaction_layers >= 1 || ablation.no_interaction ||
              !uses_interaction(),
          "interaction_layers must be >= 1 unless no_interaction");
  require(attention_heads >= 1 && d_b % attention_heads == 0 &&
              d_l() % attention_heads == 0,
          "attention_heads must divide d_b and d_l");
  require(cnn_layers >= 0, "cnn_layers must be >= 0");
  require(top_k >= 0 && top_k_floor >= 1, "top_k must be >= 0, floor >= 1");
  require(pooling == "mean" || pooling == "max", "pooling must be mean|max");
  require(dropout >= 0 && dropout < 1 && encoder_dropout >= 0 &&
              encoder_dropout < 1,
          "dropout rates must lie in [0,1)");
  require(pos_weight > 0, "pos_weight must be > 0");
  require(epochs >= 1, "epochs must be >= 1");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(lr_encoder >= 0 && lr_head > 0, "learning rates must be positive");
  require(clip_norm >= 0, "clip_norm must be >= 0");
  require(!(ablation.no_basic && ablation.no_particular),
          "no_basic and no_particular cannot both be set");
}

nlohmann::ordered_json to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  ModelConfig copy = c;
  for_each_field(copy, [&](const char* key, auto& v) { j[key] = v; });
  nlohmann::ordered_json abl;
  for_each_ablation(copy.ablation, [&](const char* key, bool& v) { abl[key] = v; });
  j["ablation"] = abl;
  return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ModelConfig c;
  size_t known = 0;
  try {
    for_each_field(c, [&](const char* key, auto& v) {
      if (j.contains(key)) {
        j.at(key).get_to(v);
        ++known;
      }
    });
    if (j.contains("ablation")) {
      ++known;
      const auto& a = j.at("ablation");
      if (!a.is_object()) throw ConfigError("ablation must be an object");
      size_t known_abl = 0;
      for_each_ablation(c.ablation, [&](const char* key, bool& v) {
        if (a.contains(key)) {
          a.at(key).get_to(v);
          ++known_abl;
        }
      });
      if (known_abl != a.size()) throw ConfigError("unknown ablation flag in config");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field has wrong type: ") + e.what());
  }
  if (known != j.size()) {
    ModelConfig probe;
    for (const auto& [key, _] : j.items()) {
      bool found = key == "ablation";
      for_each_field(probe, [&](const char* k, auto&) { found = found || key == k; });
      if (!found) throw ConfigError("unknown config key '" + key + "'");
    }
  }
  return c;
}

ModelConfig load_config(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("cannot parse config " + path + ": " + e.what());
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return config_from_json(j);
}

void save_config(const ModelConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << to_json(c).dump(2) << '\n';
}

}  // namespace aste
