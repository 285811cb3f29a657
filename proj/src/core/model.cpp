#include "model.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "error.hpp"

namespace aste {

namespace {

constexpr char kMagic[8] = {'A', 'S', 'T', 'E', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

TransformerShape shape_for(const ModelConfig& c, int vocab_size) {
  TransformerShape s;
  s.vocab_size = vocab_size;
  s.hidden = c.d_b;
  s.layers = c.encoder_layers;
  s.heads = c.encoder_heads;
  s.ffn = c.encoder_ffn;
  s.max_positions = c.max_subwords;
  return s;
}

}  // namespace

Model::Model(ModelConfig config, ModelResources resources)
    : config_(std::move(config)), resources_(std::move(resources)) {
  config_.validate();
  std::mt19937_64 rng(config_.seed ^ 0x5eed5eedULL);
  if (config_.uses_basic())
    basic_ = ContextualEncoder(params_, "basic",
                               shape_for(config_, resources_.tokenizer.vocab_size()),
                               rng);
  if (config_.uses_particular()) {
    if (resources_.general.dim != config_.d_g)
      throw ConfigError("general embedding width " +
                        std::to_string(resources_.general.dim) +
                        " differs from d_g = " + std::to_string(config_.d_g));
    if (!config_.ablation.single_embedding && resources_.domain.dim != config_.d_s)
      throw ConfigError("domain embedding width " +
                        std::to_string(resources_.domain.dim) +
                        " differs from d_s = " + std::to_string(config_.d_s));
    particular_ = ParticularEncoder(params_, "particular", config_, rng);
  }
  if (config_.uses_interaction()) {
    interaction_ = InteractionStack(params_, "fusion", config_, rng);
  } else if (config_.ablation.no_basic) {
    proj_w_ = params_.add("proj.w", xavier_uniform(config_.d_l(), config_.d_b, rng));
    proj_b_ = params_.add("proj.b", ag::Matrix::Zero(1, config_.d_b));
  } else if (config_.uses_particular()) {  // no_interaction
    proj_w_ = params_.add(
        "proj.w", xavier_uniform(config_.d_b + config_.d_l(), config_.d_b, rng));
    proj_b_ = params_.add("proj.b", ag::Matrix::Zero(1, config_.d_b));
  }
  head_ = TableHead(params_, "head", config_.d_b, config_, rng);
}

PreparedSentence Model::prepare(const AnnotatedSentence& s) const {
  PreparedSentence p;
  p.sentence = s;
  const int n = s.size();
  if (n < 1) throw RangeError("sentence " + s.sentence.id + " is empty");
  validate_triplets(s.gold, n, s.sentence.id);
  if (config_.uses_basic()) {
    try {
      p.encoding = tokenize_with_alignment(s.sentence.tokens, resources_.tokenizer);
    } catch (const RangeError& e) {
      throw RangeError("sentence " + s.sentence.id + ": " + e.what());
    }
  }
  if (config_.uses_particular()) {
    if (!s.annotated())
      throw AlignmentError("sentence " + s.sentence.id +
                           " has no POS/dependency annotation");
    p.graph = build_dependency_graph(s.heads, n, config_.self_loops);
  }
  p.gold = encode_gold_grids(s.gold, n);
  return p;
}

ag::Var Model::head_input(const PreparedSentence& p, std::mt19937_64* rng) const {
  ag::Var h_b, h_p;
  if (config_.uses_basic())
    h_b = encode_basic(p.encoding, basic_, config_.encoder_dropout, rng);
  if (config_.uses_particular())
    h_p = particular_.encode(p.sentence, p.graph, resources_.general,
                             config_.ablation.single_embedding ? nullptr
                                                               : &resources_.domain);
  if (!config_.uses_particular()) return h_b;
  if (!config_.uses_basic()) return ag::linear(h_p, proj_w_, proj_b_);
  if (!config_.uses_interaction()) {
    const std::vector<ag::Var> both{h_b, h_p};
    return ag::linear(ag::concat_cols(both), proj_w_, proj_b_);
  }
  return interaction_.forward(h_b, h_p, p.graph, rng);
}

TableHead::Output Model::forward(const PreparedSentence& p, std::mt19937_64* rng,
                                 bool add_gold_cells) const {
  return head_.forward(head_input(p, rng), config_.top_k_for(p.sentence.size()),
                       add_gold_cells ? &p.gold : nullptr);
}

LossBreakdown Model::loss(const PreparedSentence& p, std::mt19937_64* rng) const {
  const TableHead::Output out = forward(p, rng, config_.train_with_gold_cells);
  return compute_loss(out.boundaries.grids.start_logits,
                      out.boundaries.grids.end_logits, out.class_logits, out.pairs,
                      p.gold, config_.pos_weight);
}

std::vector<Triplet> Model::predict(const PreparedSentence& p) const {
  ag::NoGradGuard no_grad;
  return decode_triplets(forward(p, nullptr, false).candidates);
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const Model& model, const CheckpointMeta& meta,
                     std::ostream& out) {
  nlohmann::ordered_json header;
  header["config"] = to_json(model.config());
  header["epoch"] = meta.epoch;
  header["best_metric"] = to_json(meta.best_metric);
  const auto& res = model.resources();
  header["tokenizer"] = {{"lowercase", res.tokenizer.lowercase()},
                         {"max_length", res.tokenizer.max_length()},
                         {"vocab", res.tokenizer.vocab()}};
  header["general_words"] = res.general.words();
  header["domain_words"] = res.domain.words();
  const std::string text = header.dump();

  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
  const uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(len));
  write_tensor(out, "resources.general", res.general.vectors);
  write_tensor(out, "resources.domain", res.domain.vectors);
  model.params().write(out);
  if (!out) throw IoError("failed writing checkpoint");
}

void save_checkpoint(const Model& model, const CheckpointMeta& meta,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  save_checkpoint(model, meta, out);
}

LoadedCheckpoint load_checkpoint(std::istream& in) {
  char magic[sizeof kMagic];
  uint32_t version = 0;
  uint64_t len = 0;
  if (!in.read(magic, sizeof magic) ||
      std::string(magic, sizeof magic) != std::string(kMagic, sizeof kMagic))
    throw IoError("not a checkpoint file (bad magic)");
  if (!in.read(reinterpret_cast<char*>(&version), sizeof version) ||
      version != kVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  if (!in.read(reinterpret_cast<char*>(&len), sizeof len) || len > (1ull << 34))
    throw IoError("corrupt checkpoint header");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len)))
    throw IoError("truncated checkpoint header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("corrupt checkpoint header: ") + e.what());
  }

  auto read_matrix = [&](const std::string& expect) {
    std::string name;
    ag::Matrix m;
    if (!read_tensor(in, name, m) || name != expect)
      throw IoError("checkpoint lacks " + expect);
    return m;
  };
  auto rebuild_table = [](std::vector<std::string> words, ag::Matrix vectors) {
    EmbeddingTable t;
    if (vectors.size() == 0) return t;
    if (static_cast<ag::Index>(words.size()) + 1 != vectors.rows())
      throw IoError("checkpoint embedding table is inconsistent");
    for (size_t i = 0; i < words.size(); ++i)
      t.vocab.emplace(std::move(words[i]), static_cast<int>(i));
    t.dim = static_cast<int>(vectors.cols());
    t.unk_index = static_cast<int>(vectors.rows()) - 1;
    t.vectors = std::move(vectors);
    return t;
  };

  LoadedCheckpoint out;
  ModelResources res;
  ModelConfig config;
  try {
    config = config_from_json(header.at("config"));
    out.meta.epoch = header.at("epoch").get<int>();
    out.meta.best_metric = metrics_from_json(header.at("best_metric"));
    const auto& tok = header.at("tokenizer");
    res.tokenizer = WordPieceTokenizer(tok.at("vocab").get<std::vector<std::string>>(),
                                       tok.at("lowercase").get<bool>(),
                                       tok.at("max_length").get<int>());
    auto general_words = header.at("general_words").get<std::vector<std::string>>();
    auto domain_words = header.at("domain_words").get<std::vector<std::string>>();
    res.general = rebuild_table(std::move(general_words), read_matrix("resources.general"));
    res.domain = rebuild_table(std::move(domain_words), read_matrix("resources.domain"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("corrupt checkpoint header: ") + e.what());
  }
  out.model = std::make_unique<Model>(std::move(config), std::move(res));
  out.model->params().read_into(in);
  return out;
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  return load_checkpoint(in);
}

std::string encoder_cache_dir() {
  if (const char* env = std::getenv("ASTE_ENCODER_CACHE"); env && *env) return env;
  if (const char* home = std::getenv("HOME"); home && *home)
    return std::string(home) + "/.cache/aste/encoders";
  return ".aste-encoders";
}

PretrainedEncoder load_pretrained_encoder(const std::string& name, int max_subwords) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::path(encoder_cache_dir()) / name;
  const fs::path vocab = dir / "vocab.txt", meta = dir / "encoder.json",
                 weights = dir / "weights.bin";
  for (const auto& f : {vocab, meta, weights}) {
    if (!fs::exists(f))
      throw InitError("pretrained encoder '" + name + "' not found: missing " +
                      f.string() + " (set ASTE_ENCODER_CACHE or export it with "
                      "tools/export_encoder.py)");
  }
  PretrainedEncoder enc;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(meta.string()));
    enc.shape.hidden = j.at("hidden").get<int>();
    enc.shape.layers = j.at("layers").get<int>();
    enc.shape.heads = j.at("heads").get<int>();
    enc.shape.ffn = j.at("ffn").get<int>();
    enc.shape.max_positions = j.at("max_positions").get<int>();
    enc.shape.type_vocab = j.value("type_vocab", 2);
    enc.shape.ln_eps = j.value("ln_eps", 1e-12);
  } catch (const nlohmann::json::exception& e) {
    throw InitError("bad encoder.json for '" + name + "': " + e.what());
  }
  const int limit = std::min(max_subwords, enc.shape.max_positions);
  enc.tokenizer = WordPieceTokenizer::from_vocab_file(
      vocab.string(), j.value("lowercase", true), limit);
  enc.shape.vocab_size = enc.tokenizer.vocab_size();
  enc.weights = read_tensor_file(weights.string());
  return enc;
}

}  // namespace aste
