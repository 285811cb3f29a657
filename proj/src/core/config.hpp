#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace aste {

struct AblationFlags {
  bool no_basic = false;
  bool no_particular = false;
  bool no_interaction = false;
  bool single_embedding = false;
  bool no_gcn = false;

  bool operator==(const AblationFlags&) const = default;
};

// Every field has a default; a config file only needs to name overrides.
struct ModelConfig {
  // Basic encoder. "scratch" builds a randomly initialised transformer with
  // a corpus-derived vocabulary; any other name is looked up in the encoder
  // cache directory.
  std::string encoder_name = "bert-base-uncased";
  int d_b = 768;
  int encoder_layers = 2;
  int encoder_heads = 4;
  int encoder_ffn = 1024;
  int max_subwords = 512;
  double encoder_dropout = 0.1;

  // Particular encoder.
  int d_g = 300;
  int d_s = 500;
  int d_p = 100;
  int lstm_hidden = 300;  // per direction; d_l = 2 * lstm_hidden
  int gcn_layers = 2;
  bool self_loops = true;

  // Interaction.
  int interaction_layers = 2;
  int attention_heads = 1;
  bool share_interaction_params = false;
  double dropout = 0.1;

  // Table-filling head.
  int d_relation = 256;
  int cnn_layers = 2;
  // 0 selects k = max(n, top_k_floor); otherwise a fixed k. Always clamped
  // to n * n.
  int top_k = 0;
  int top_k_floor = 10;
  std::string pooling = "mean";  // "mean" | "max"
  double pos_weight = 1.0;
  // Adds gold start/end cells to the candidate pool during training.
  bool train_with_gold_cells = true;

  // Optimisation.
  int epochs = 15;
  int batch_size = 8;
  double lr_encoder = 2e-5;
  double lr_head = 1e-3;
  double weight_decay = 0.0;
  double clip_norm = 1.0;
  uint64_t seed = 42;
  bool select_on_test = false;

  AblationFlags ablation;

  int d_l() const { return 2 * lstm_hidden; }
  bool uses_basic() const { return !ablation.no_basic; }
  bool uses_particular() const { return !ablation.no_particular; }
  bool uses_interaction() const {
    return uses_basic() && uses_particular() && !ablation.no_interaction;
  }
  int effective_gcn_layers() const { return ablation.no_gcn ? 0 : gcn_layers; }
  int embedding_width() const {
    return ablation.single_embedding ? d_g : d_g + d_s + d_p;
  }
  int top_k_for(int n) const;

  // Throws ConfigError describing the first violated invariant.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

nlohmann::ordered_json to_json(const ModelConfig& c);
// Unknown keys are rejected so typos do not silently fall back to defaults.
ModelConfig config_from_json(const nlohmann::json& j);
ModelConfig load_config(const std::string& path);
void save_config(const ModelConfig& c, const std::string& path);

}  // namespace aste
