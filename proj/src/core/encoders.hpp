#pragma once

#include <optional>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "align.hpp"
#include "config.hpp"
#include "corpus.hpp"
#include "params.hpp"
#include "tensor.hpp"

namespace aste {

// Word vectors with one shared unknown row (the last row).
struct EmbeddingTable {
  std::unordered_map<std::string, int> vocab;
  ag::Matrix vectors;
  int dim = 0;
  int unk_index = -1;

  int size() const { return static_cast<int>(vectors.rows()); }
  // Exact match first, then ASCII-lowercased; unk_index otherwise.
  int lookup(const std::string& token) const;
  // Words in row order (the unknown row excluded).
  std::vector<std::string> words() const;
};

// Builds a table from words + vectors; appends the unknown row as the mean
// of all in-vocabulary rows (zero if there are none).
EmbeddingTable make_embedding_table(std::vector<std::string> words,
                                    ag::Matrix vectors);

// `token v1 ... vd` lines. d is inferred from the first line; rows of a
// different width are rejected. When keep is given, only those words (or
// their lowercase forms) are retained.
EmbeddingTable load_embedding_file(const std::string& path,
                                   const std::set<std::string>* keep = nullptr);

// Row t = [E_g[tok_t] ; E_s[tok_t] ; E_p[pos_t]]. A null domain table or an
// undefined pos_table drops that block.
ag::Var embed_3domain(const std::vector<std::string>& tokens,
                      const std::vector<PosClass>& pos,
                      const EmbeddingTable& general,
                      const EmbeddingTable* domain, const ag::Var& pos_table);

// Single-layer bidirectional LSTM; gate order (input, forget, cell, output).
class BiLstm {
 public:
  BiLstm() = default;
  BiLstm(ParamStore& params, const std::string& prefix, int input, int hidden,
         std::mt19937_64& rng);

  // n x input -> n x 2*hidden, forward states then backward states.
  ag::Var forward(const ag::Var& x) const;

  int input() const { return input_; }
  int hidden() const { return hidden_; }

  struct Direction {
    ag::Var w_ih, w_hh, bias;
  };
  const Direction& fwd() const { return fwd_; }
  const Direction& bwd() const { return bwd_; }
  Direction& fwd() { return fwd_; }
  Direction& bwd() { return bwd_; }

  // One direction over rows in the given order; returns rows in input order.
  static ag::Var run_direction(const Direction& d, const ag::Var& x,
                               bool reverse);

 private:
  int input_ = 0, hidden_ = 0;
  Direction fwd_, bwd_;
};

enum class Activation { kRelu, kIdentity };

// One graph convolution: act(normalized * h * w).
ag::Var gcn_layer(const ag::Var& h, const ag::Matrix& normalized,
                  const ag::Var& w, Activation act = Activation::kRelu);
ag::Var gcn_stack(const ag::Var& h0, const DependencyGraph& graph,
                  const std::vector<ag::Var>& weights,
                  Activation act = Activation::kRelu);

struct TransformerShape {
  int vocab_size = 0;
  int hidden = 768;
  int layers = 12;
  int heads = 12;
  int ffn = 3072;
  int max_positions = 512;
  int type_vocab = 2;
  double ln_eps = 1e-12;
};

// Post-layer-norm transformer encoder with learned absolute positions, the
// architecture of BERT. Parameter names mirror the exported weight layout.
class ContextualEncoder {
 public:
  ContextualEncoder() = default;
  ContextualEncoder(ParamStore& params, const std::string& prefix,
                    const TransformerShape& shape, std::mt19937_64& rng);

  // Overwrites parameters from an exported weight file (names relative to
  // the prefix). Missing or misshapen tensors raise InitError.
  void load_pretrained(const std::map<std::string, ag::Matrix>& weights);

  // ids -> (m x hidden) states; dropout applies only when rng is set.
  ag::Var forward(const std::vector<int>& ids, double dropout,
                  std::mt19937_64* rng) const;

  const TransformerShape& shape() const { return shape_; }
  bool loaded() const { return loaded_; }

 private:
  struct Layer {
    ag::Var wq, bq, wk, bk, wv, bv, wo, bo;
    ag::Var ln1_g, ln1_b, w1, b1, w2, b2, ln2_g, ln2_b;
  };
  ParamStore* params_ = nullptr;
  std::string prefix_;
  TransformerShape shape_;
  ag::Var word_, position_, type_, ln_g_, ln_b_;
  std::vector<Layer> layers_;
  bool loaded_ = false;
};

// h_b: run the contextual encoder over [CLS] subwords [SEP] and average
// subword states per word.
ag::Var encode_basic(const SubwordEncoding& encoding,
                     const ContextualEncoder& encoder, double dropout,
                     std::mt19937_64* rng);

// 3-domain embedding -> BiLSTM -> dependency GCN stack.
class ParticularEncoder {
 public:
  ParticularEncoder() = default;
  ParticularEncoder(ParamStore& params, const std::string& prefix,
                    const ModelConfig& config, std::mt19937_64& rng);

  ag::Var embed(const AnnotatedSentence& s, const EmbeddingTable& general,
                const EmbeddingTable* domain) const;
  // h_p; equals the BiLSTM output X when there are no GCN layers.
  ag::Var encode(const AnnotatedSentence& s, const DependencyGraph& graph,
                 const EmbeddingTable& general,
                 const EmbeddingTable* domain) const;

  const BiLstm& lstm() const { return lstm_; }
  const std::vector<ag::Var>& gcn_weights() const { return gcn_; }
  const ag::Var& pos_table() const { return pos_table_; }

 private:
  ag::Var pos_table_;
  BiLstm lstm_;
  std::vector<ag::Var> gcn_;
};

}  // namespace aste
