#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "align.hpp"
#include "bdtf_head.hpp"
#include "config.hpp"
#include "corpus.hpp"
#include "encoders.hpp"
#include "fusion.hpp"
#include "metrics.hpp"
#include "params.hpp"

namespace aste {

// Per-sentence inputs that do not depend on parameters.
struct PreparedSentence {
  AnnotatedSentence sentence;
  SubwordEncoding encoding;  // empty when the basic encoder is ablated
  DependencyGraph graph;     // n == 0 when the particular encoder is ablated
  GoldGrids gold;
};

// Frozen lookup resources shipped inside every checkpoint.
struct ModelResources {
  WordPieceTokenizer tokenizer;
  EmbeddingTable general;
  EmbeddingTable domain;
};

class Model {
 public:
  Model(ModelConfig config, ModelResources resources);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }
  const ModelResources& resources() const { return resources_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const ContextualEncoder& basic() const { return basic_; }
  ContextualEncoder& basic() { return basic_; }
  const ParticularEncoder& particular() const { return particular_; }
  const InteractionStack& interaction() const { return interaction_; }
  const TableHead& head() const { return head_; }

  // Throws RangeError for sentences beyond the encoder length and
  // AlignmentError for unannotated sentences when syntax is needed.
  PreparedSentence prepare(const AnnotatedSentence& s) const;

  // Word-level features fed to the table head. rng != nullptr enables
  // dropout (training mode).
  ag::Var head_input(const PreparedSentence& p, std::mt19937_64* rng) const;

  TableHead::Output forward(const PreparedSentence& p, std::mt19937_64* rng,
                            bool add_gold_cells) const;
  LossBreakdown loss(const PreparedSentence& p, std::mt19937_64* rng) const;
  // Evaluation mode: no dropout, no gradient tape.
  std::vector<Triplet> predict(const PreparedSentence& p) const;

 private:
  ModelConfig config_;
  ModelResources resources_;
  ParamStore params_;
  ContextualEncoder basic_;
  ParticularEncoder particular_;
  InteractionStack interaction_;
  ag::Var proj_w_, proj_b_;  // no_basic / no_interaction projections
  TableHead head_;
};

struct CheckpointMeta {
  int epoch = 0;
  Metrics best_metric;
};

// Layout: magic, version, JSON header (config, tokenizer, embedding word
// lists, epoch, metric), embedding matrices, then the parameter block.
void save_checkpoint(const Model& model, const CheckpointMeta& meta,
                     std::ostream& out);
void save_checkpoint(const Model& model, const CheckpointMeta& meta,
                     const std::string& path);
struct LoadedCheckpoint {
  std::unique_ptr<Model> model;
  CheckpointMeta meta;
};
LoadedCheckpoint load_checkpoint(std::istream& in);
LoadedCheckpoint load_checkpoint(const std::string& path);

// Directory holding exported pretrained encoders: $ASTE_ENCODER_CACHE, or
// ~/.cache/aste/encoders.
std::string encoder_cache_dir();

// Loads <cache>/<name>/{vocab.txt, encoder.json, weights.bin}. Throws
// InitError when the encoder is not present.
struct PretrainedEncoder {
  WordPieceTokenizer tokenizer;
  TransformerShape shape;
  std::map<std::string, ag::Matrix> weights;
};
PretrainedEncoder load_pretrained_encoder(const std::string& name, int max_subwords);

}  // namespace aste
