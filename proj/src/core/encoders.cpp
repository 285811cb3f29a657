#include "encoders.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "error.hpp"
#include "log.hpp"

namespace aste {

namespace {

std::string ascii_lower(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

ag::Var row_param(ParamStore& params, const std::string& name, int cols,
                  double fill, ParamGroup group) {
  return params.add(name, ag::Matrix::Constant(1, cols, fill), true, group);
}

}  // namespace

// ---------------------------------------------------------------------------
// Embedding tables

int EmbeddingTable::lookup(const std::string& token) const {
  auto it = vocab.find(token);
  if (it != vocab.end()) return it->second;
  it = vocab.find(ascii_lower(token));
  if (it != vocab.end()) return it->second;
  return unk_index;
}

std::vector<std::string> EmbeddingTable::words() const {
  std::vector<std::string> out(vocab.size());
  for (const auto& [w, i] : vocab) out[static_cast<size_t>(i)] = w;
  return out;
}

EmbeddingTable make_embedding_table(std::vector<std::string> words,
                                    ag::Matrix vectors) {
  if (static_cast<ag::Index>(words.size()) != vectors.rows())
    throw ShapeError("embedding table: word count differs from row count");
  if (vectors.cols() <= 0) throw ShapeError("embedding table: zero width");
  EmbeddingTable t;
  t.dim = static_cast<int>(vectors.cols());
  for (size_t i = 0; i < words.size(); ++i) {
    if (!t.vocab.emplace(words[i], static_cast<int>(i)).second)
      throw ParseError("embedding table: duplicate word '" + words[i] + "'");
  }
  t.vectors.resize(vectors.rows() + 1, vectors.cols());
  t.vectors.topRows(vectors.rows()) = vectors;
  if (vectors.rows() > 0) {
    t.vectors.row(vectors.rows()) = vectors.colwise().mean();
  } else {
    t.vectors.row(0).setZero();
  }
  t.unk_index = static_cast<int>(vectors.rows());
  return t;
}

EmbeddingTable load_embedding_file(const std::string& path,
                                   const std::set<std::string>* keep) {
  const std::string text = read_file(path);
  std::vector<std::string> words;
  std::vector<std::vector<double>> rows;
  std::set<std::string> seen;
  int dim = -1;
  int line_no = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_whitespace(line);
    if (fields.empty()) continue;
    if (dim < 0 && fields.size() == 2 &&
        fields[0].find_first_not_of("0123456789") == std::string::npos &&
        fields[1].find_first_not_of("0123456789") == std::string::npos)
      continue;  // word2vec "count dim" header
    const int width = static_cast<int>(fields.size()) - 1;
    if (dim < 0) {
      if (width <= 0) throw ParseError(path + ": first row has no vector", line_no);
      dim = width;
    } else if (width != dim) {
      throw ParseError(path + ": row has " + std::to_string(width) +
                           " values, expected " + std::to_string(dim),
                       line_no);
    }
    const std::string& word = fields[0];
    if (keep && !keep->count(word) && !keep->count(ascii_lower(word))) continue;
    if (!seen.insert(word).second) continue;
    std::vector<double> v(static_cast<size_t>(dim));
    for (int k = 0; k < dim; ++k) {
      try {
        v[static_cast<size_t>(k)] = std::stod(fields[static_cast<size_t>(k) + 1]);
      } catch (const std::exception&) {
        throw ParseError(path + ": bad number '" + fields[static_cast<size_t>(k) + 1] + "'",
                         line_no);
      }
    }
    words.push_back(word);
    rows.push_back(std::move(v));
  }
  if (dim < 0) throw ParseError(path + ": empty embedding file");
  ag::Matrix m(static_cast<ag::Index>(rows.size()), dim);
  for (size_t r = 0; r < rows.size(); ++r)
    for (int k = 0; k < dim; ++k) m(static_cast<ag::Index>(r), k) = rows[r][static_cast<size_t>(k)];
  return make_embedding_table(std::move(words), std::move(m));
}

ag::Var embed_3domain(const std::vector<std::string>& tokens,
                      const std::vector<PosClass>& pos,
                      const EmbeddingTable& general,
                      const EmbeddingTable* domain, const ag::Var& pos_table) {
  const auto n = static_cast<ag::Index>(tokens.size());
  if (pos_table.defined() && static_cast<ag::Index>(pos.size()) != n)
    throw ShapeError("embed_3domain: POS count differs from token count");

  std::vector<ag::Var> blocks;
  auto lookup_block = [&](const EmbeddingTable& table) {
    ag::Matrix m(n, table.dim);
    for (ag::Index t = 0; t < n; ++t)
      m.row(t) = table.vectors.row(table.lookup(tokens[static_cast<size_t>(t)]));
    return ag::constant(std::move(m));
  };
  blocks.push_back(lookup_block(general));
  if (domain) blocks.push_back(lookup_block(*domain));
  if (pos_table.defined()) {
    std::vector<int> idx;
    idx.reserve(pos.size());
    for (PosClass p : pos) idx.push_back(static_cast<int>(p));
    blocks.push_back(ag::gather_rows(pos_table, idx));
  }
  return ag::concat_cols(blocks);
}

// ---------------------------------------------------------------------------
// BiLSTM

BiLstm::BiLstm(ParamStore& params, const std::string& prefix, int input,
               int hidden, std::mt19937_64& rng)
    : input_(input), hidden_(hidden) {
  auto make = [&](const std::string& dir) {
    Direction d;
    d.w_ih = params.add(prefix + "." + dir + ".w_ih",
                        xavier_uniform(input, 4 * hidden, rng));
    d.w_hh = params.add(prefix + "." + dir + ".w_hh",
                        xavier_uniform(hidden, 4 * hidden, rng));
    ag::Matrix b = ag::Matrix::Zero(1, 4 * hidden);
    b.middleCols(hidden, hidden).setOnes();  // forget gate
    d.bias = params.add(prefix + "." + dir + ".bias", std::move(b));
    return d;
  };
  fwd_ = make("fwd");
  bwd_ = make("bwd");
}

ag::Var BiLstm::run_direction(const Direction& d, const ag::Var& x,
                              bool reverse) {
  const auto n = x.rows();
  const auto hidden = d.w_hh.rows();
  const ag::Var pre = ag::linear(x, d.w_ih, d.bias);
  ag::Var h = ag::constant(ag::Matrix::Zero(1, hidden));
  ag::Var c = ag::constant(ag::Matrix::Zero(1, hidden));
  std::vector<ag::Var> states(static_cast<size_t>(n));
  for (ag::Index step = 0; step < n; ++step) {
    const ag::Index t = reverse ? n - 1 - step : step;
    const ag::Var z =
        ag::add(ag::slice_rows(pre, t, 1), ag::matmul(h, d.w_hh));
    const ag::Var i = ag::sigmoid(ag::slice_cols(z, 0, hidden));
    const ag::Var f = ag::sigmoid(ag::slice_cols(z, hidden, hidden));
    const ag::Var g = ag::tanh(ag::slice_cols(z, 2 * hidden, hidden));
    const ag::Var o = ag::sigmoid(ag::slice_cols(z, 3 * hidden, hidden));
    c = ag::add(ag::mul(f, c), ag::mul(i, g));
    h = ag::mul(o, ag::tanh(c));
    states[static_cast<size_t>(t)] = h;
  }
  return ag::concat_rows(states);
}

ag::Var BiLstm::forward(const ag::Var& x) const {
  if (x.cols() != input_)
    throw ShapeError("BiLstm: input width " + std::to_string(x.cols()) +
                     ", expected " + std::to_string(input_));
  if (x.rows() == 0) throw ShapeError("BiLstm: empty sequence");
  const std::vector<ag::Var> halves{run_direction(fwd_, x, false),
                                    run_direction(bwd_, x, true)};
  return ag::concat_cols(halves);
}

// ---------------------------------------------------------------------------
// GCN

ag::Var gcn_layer(const ag::Var& h, const ag::Matrix& normalized,
                  const ag::Var& w, Activation act) {
  if (normalized.rows() != h.rows() || normalized.cols() != h.rows())
    throw ShapeError("gcn_layer: graph has " + std::to_string(normalized.rows()) +
                     " nodes, features have " + std::to_string(h.rows()) + " rows");
  ag::Var out = ag::matmul(ag::matmul(ag::constant(normalized), h), w);
  return act == Activation::kRelu ? ag::relu(out) : out;
}

ag::Var gcn_stack(const ag::Var& h0, const DependencyGraph& graph,
                  const std::vector<ag::Var>& weights, Activation act) {
  ag::Var h = h0;
  for (const ag::Var& w : weights) h = gcn_layer(h, graph.normalized, w, act);
  return h;
}

// ---------------------------------------------------------------------------
// Contextual encoder

ContextualEncoder::ContextualEncoder(ParamStore& params,
                                     const std::string& prefix,
                                     const TransformerShape& shape,
                                     std::mt19937_64& rng)
    : params_(&params), prefix_(prefix), shape_(shape) {
  if (shape.vocab_size <= 0) throw InitError("encoder vocabulary is empty");
  if (shape.hidden % shape.heads != 0)
    throw InitError("encoder heads must divide hidden width");
  const auto g = ParamGroup::kEncoder;
  const int d = shape.hidden;
  auto add = [&](const std::string& name, ag::Matrix m) {
    return params.add(prefix + "." + name, std::move(m), true, g);
  };
  word_ = add("embeddings.word", normal_init(shape.vocab_size, d, 0.02, rng));
  position_ = add("embeddings.position", normal_init(shape.max_positions, d, 0.02, rng));
  type_ = add("embeddings.type", normal_init(shape.type_vocab, d, 0.02, rng));
  ln_g_ = row_param(params, prefix + ".embeddings.ln.g", d, 1.0, g);
  ln_b_ = row_param(params, prefix + ".embeddings.ln.b", d, 0.0, g);
  for (int l = 0; l < shape.layers; ++l) {
    const std::string p = "layer." + std::to_string(l) + ".";
    Layer layer;
    layer.wq = add(p + "attn.wq", normal_init(d, d, 0.02, rng));
    layer.bq = row_param(params, prefix + "." + p + "attn.bq", d, 0.0, g);
    layer.wk = add(p + "attn.wk", normal_init(d, d, 0.02, rng));
    layer.bk = row_param(params, prefix + "." + p + "attn.bk", d, 0.0, g);
    layer.wv = add(p + "attn.wv", normal_init(d, d, 0.02, rng));
    layer.bv = row_param(params, prefix + "." + p + "attn.bv", d, 0.0, g);
    layer.wo = add(p + "attn.wo", normal_init(d, d, 0.02, rng));
    layer.bo = row_param(params, prefix + "." + p + "attn.bo", d, 0.0, g);
    layer.ln1_g = row_param(params, prefix + "." + p + "ln1.g", d, 1.0, g);
    layer.ln1_b = row_param(params, prefix + "." + p + "ln1.b", d, 0.0, g);
    layer.w1 = add(p + "ffn.w1", normal_init(d, shape.ffn, 0.02, rng));
    layer.b1 = row_param(params, prefix + "." + p + "ffn.b1", shape.ffn, 0.0, g);
    layer.w2 = add(p + "ffn.w2", normal_init(shape.ffn, d, 0.02, rng));
    layer.b2 = row_param(params, prefix + "." + p + "ffn.b2", d, 0.0, g);
    layer.ln2_g = row_param(params, prefix + "." + p + "ln2.g", d, 1.0, g);
    layer.ln2_b = row_param(params, prefix + "." + p + "ln2.b", d, 0.0, g);
    layers_.push_back(std::move(layer));
  }
}

void ContextualEncoder::load_pretrained(
    const std::map<std::string, ag::Matrix>& weights) {
  if (!params_) throw InitError("encoder not constructed");
  for (auto& [name, entry] : params_->entries()) {
    if (name.rfind(prefix_ + ".", 0) != 0) continue;
    const std::string rel = name.substr(prefix_.size() + 1);
    auto it = weights.find(rel);
    if (it == weights.end())
      throw InitError("pretrained weights lack tensor '" + rel + "'");
    auto& v = entry.var.mutable_value();
    if (v.rows() != it->second.rows() || v.cols() != it->second.cols())
      throw InitError("pretrained tensor '" + rel + "' has shape " +
                      std::to_string(it->second.rows()) + "x" +
                      std::to_string(it->second.cols()) + ", expected " +
                      std::to_string(v.rows()) + "x" + std::to_string(v.cols()));
    v = it->second;
  }
  loaded_ = true;
}

ag::Var ContextualEncoder::forward(const std::vector<int>& ids, double dropout,
                                   std::mt19937_64* rng) const {
  if (!params_) throw InitError("contextual encoder not loaded");
  const int m = static_cast<int>(ids.size());
  if (m > shape_.max_positions)
    throw RangeError("subword sequence of " + std::to_string(m) +
                     " exceeds encoder limit " + std::to_string(shape_.max_positions));
  for (int id : ids)
    if (id < 0 || id >= shape_.vocab_size) throw ShapeError("subword id out of range");
  std::vector<int> positions(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) positions[static_cast<size_t>(i)] = i;
  const std::vector<int> types(static_cast<size_t>(m), 0);

  ag::Var x = ag::add(ag::add(ag::gather_rows(word_, ids),
                              ag::gather_rows(position_, positions)),
                      ag::gather_rows(type_, types));
  x = ag::dropout(ag::layer_norm_rows(x, ln_g_, ln_b_, shape_.ln_eps), dropout, rng);

  const int d = shape_.hidden, heads = shape_.heads, dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (const Layer& L : layers_) {
    const ag::Var q = ag::linear(x, L.wq, L.bq);
    const ag::Var k = ag::linear(x, L.wk, L.bk);
    const ag::Var v = ag::linear(x, L.wv, L.bv);
    std::vector<ag::Var> ctx;
    for (int h = 0; h < heads; ++h) {
      const ag::Var qh = ag::slice_cols(q, h * dh, dh);
      const ag::Var kh = ag::slice_cols(k, h * dh, dh);
      const ag::Var vh = ag::slice_cols(v, h * dh, dh);
      ag::Var att = ag::softmax_rows(
          ag::scale(ag::matmul(qh, ag::transpose(kh)), inv_sqrt));
      att = ag::dropout(att, dropout, rng);
      ctx.push_back(ag::matmul(att, vh));
    }
    ag::Var attn = ag::linear(ag::concat_cols(ctx), L.wo, L.bo);
    x = ag::layer_norm_rows(ag::add(ag::dropout(attn, dropout, rng), x),
                            L.ln1_g, L.ln1_b, shape_.ln_eps);
    ag::Var ff = ag::linear(ag::gelu(ag::linear(x, L.w1, L.b1)), L.w2, L.b2);
    x = ag::layer_norm_rows(ag::add(ag::dropout(ff, dropout, rng), x), L.ln2_g,
                            L.ln2_b, shape_.ln_eps);
  }
  return x;
}

ag::Var encode_basic(const SubwordEncoding& encoding,
                     const ContextualEncoder& encoder, double dropout,
                     std::mt19937_64* rng) {
  return pool_subwords(encoder.forward(encoding.ids, dropout, rng),
                       encoding.alignment);
}

// ---------------------------------------------------------------------------
// Particular encoder

ParticularEncoder::ParticularEncoder(ParamStore& params,
                                     const std::string& prefix,
                                     const ModelConfig& config,
                                     std::mt19937_64& rng) {
  if (!config.ablation.single_embedding)
    pos_table_ = params.add(prefix + ".pos_table",
                            normal_init(kNumPosClasses, config.d_p, 1.0, rng));
  lstm_ = BiLstm(params, prefix + ".lstm", config.embedding_width(),
                 config.lstm_hidden, rng);
  for (int l = 0; l < config.effective_gcn_layers(); ++l)
    gcn_.push_back(params.add(prefix + ".gcn." + std::to_string(l) + ".w",
                              xavier_uniform(config.d_l(), config.d_l(), rng)));
}

ag::Var ParticularEncoder::embed(const AnnotatedSentence& s,
                                 const EmbeddingTable& general,
                                 const EmbeddingTable* domain) const {
  return embed_3domain(s.sentence.tokens, s.pos, general,
                       pos_table_.defined() ? domain : nullptr, pos_table_);
}

ag::Var ParticularEncoder::encode(const AnnotatedSentence& s,
                                  const DependencyGraph& graph,
                                  const EmbeddingTable& general,
                                  const EmbeddingTable* domain) const {
  const ag::Var x = lstm_.forward(embed(s, general, domain));
  return gcn_stack(x, graph, gcn_);
}

}  // namespace aste
