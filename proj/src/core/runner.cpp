#include "runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "error.hpp"
#include "log.hpp"

namespace aste {

namespace {

std::set<std::string> vocabulary_of(const TrainData& data) {
  std::set<std::string> words;
  for (const auto* split : {&data.train, &data.dev, &data.test})
    for (const auto& s : *split)
      for (const auto& t : s.sentence.tokens) {
        words.insert(t);
        std::string low = t;
        for (char& c : low) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        words.insert(low);
      }
  return words;
}

std::vector<PreparedSentence> prepare_all(const Model& model,
                                          const std::vector<AnnotatedSentence>& data) {
  std::vector<PreparedSentence> out;
  out.reserve(data.size());
  for (const auto& s : data) out.push_back(model.prepare(s));
  return out;
}

Metrics evaluate_prepared(const Model& model, const std::vector<PreparedSentence>& data) {
  std::vector<SentenceTriplets> pred, gold;
  for (const auto& p : data) {
    pred.push_back({p.sentence.sentence.id, model.predict(p)});
    gold.push_back({p.sentence.sentence.id, p.sentence.gold});
  }
  return score_corpus(pred, gold);
}

nlohmann::ordered_json to_json(const EpochLog& e) {
  nlohmann::ordered_json j;
  j["epoch"] = e.epoch;
  j["loss"] = e.loss;
  j["l_start"] = e.l_start;
  j["l_end"] = e.l_end;
  j["l_sentiment"] = e.l_sentiment;
  j["dev"] = to_json(e.dev);
  if (e.test) j["test"] = to_json(*e.test);
  return j;
}

}  // namespace

ParseOptions parse_options_for(const std::string& corpus_path) {
  ParseOptions o;
  o.id_prefix = std::filesystem::path(corpus_path).stem().string() + "-";
  return o;
}

std::vector<AnnotationRecord> load_sidecars(const std::vector<std::string>& paths) {
  std::vector<AnnotationRecord> all;
  for (const auto& p : paths) {
    auto recs = load_sidecar(p);
    all.insert(all.end(), std::make_move_iterator(recs.begin()),
               std::make_move_iterator(recs.end()));
  }
  return all;
}

std::vector<AnnotationRecord> select_records(const std::vector<AnnotationRecord>& all,
                                             const std::vector<AnnotatedSentence>& sentences) {
  std::unordered_map<std::string, const AnnotationRecord*> by_id;
  for (const auto& r : all) by_id.emplace(r.id, &r);
  std::vector<AnnotationRecord> out;
  for (const auto& s : sentences) {
    auto it = by_id.find(s.sentence.id);
    if (it != by_id.end()) out.push_back(*it->second);
  }
  return out;
}

std::vector<AnnotatedSentence> load_annotated(const std::string& corpus_path,
                                              const std::vector<AnnotationRecord>& sidecar) {
  auto sentences = load_aste_file(corpus_path, parse_options_for(corpus_path));
  auto records = select_records(sidecar, sentences);
  return merge_annotations(std::move(sentences), records);
}

TrainResult train(const ModelConfig& config_in, const TrainData& data,
                  const EpochCallback& on_epoch) {
  ModelConfig config = config_in;
  config.validate();
  if (data.train.empty()) throw RangeError("training corpus is empty");
  if (data.dev.empty()) throw RangeError("dev corpus is empty");
  if (config.select_on_test && data.test.empty())
    throw ConfigError("select_on_test requires a test corpus");

  ModelResources res;
  std::optional<PretrainedEncoder> pretrained;
  if (config.encoder_name == "scratch" || !config.uses_basic()) {
    std::vector<std::vector<std::string>> all_tokens;
    for (const auto* split : {&data.train, &data.dev, &data.test})
      for (const auto& s : *split) all_tokens.push_back(s.sentence.tokens);
    res.tokenizer = WordPieceTokenizer::build_from_corpus(all_tokens, config.max_subwords);
  } else {
    pretrained = load_pretrained_encoder(config.encoder_name, config.max_subwords);
    if (pretrained->shape.hidden != config.d_b)
      throw ConfigError("encoder '" + config.encoder_name + "' has width " +
                        std::to_string(pretrained->shape.hidden) + " but d_b = " +
                        std::to_string(config.d_b));
    config.encoder_layers = pretrained->shape.layers;
    config.encoder_heads = pretrained->shape.heads;
    config.encoder_ffn = pretrained->shape.ffn;
    config.max_subwords = std::min(config.max_subwords, pretrained->shape.max_positions);
    res.tokenizer = pretrained->tokenizer;
  }
  res.general = data.general;
  res.domain = data.domain;

  auto model = std::make_unique<Model>(config, std::move(res));
  if (pretrained) model->basic().load_pretrained(pretrained->weights);

  const auto train_set = prepare_all(*model, data.train);
  const auto dev_set = prepare_all(*model, data.dev);
  const auto test_set = prepare_all(*model, data.test);

  AdamOptions opt;
  opt.lr_encoder = config.lr_encoder;
  opt.lr_head = config.lr_head;
  opt.weight_decay = config.weight_decay;
  opt.clip_norm = config.clip_norm;
  Adam adam(opt);

  std::mt19937_64 rng(config.seed);
  std::vector<size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  double best_f1 = -1.0;
  std::string best_params;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog log_entry;
    log_entry.epoch = epoch;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config.batch_size)) {
      const size_t stop = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
      const double inv = 1.0 / static_cast<double>(stop - start);
      model->params().zero_grad();
      for (size_t b = start; b < stop; ++b) {
        const PreparedSentence& p = train_set[order[b]];
        LossBreakdown loss = model->loss(p, &rng);
        if (!std::isfinite(loss.total)) {
          nlohmann::ordered_json diag;
          diag["epoch"] = epoch;
          diag["sentence"] = p.sentence.sentence.id;
          diag["l_start"] = loss.l_start;
          diag["l_end"] = loss.l_end;
          diag["l_sentiment"] = loss.l_sentiment;
          diag["optimizer_steps"] = adam.steps();
          throw RuntimeFailure("non-finite loss: " + diag.dump());
        }
        ag::backward(ag::scale(loss.objective, inv));
        log_entry.loss += loss.total;
        log_entry.l_start += loss.l_start;
        log_entry.l_end += loss.l_end;
        log_entry.l_sentiment += loss.l_sentiment;
      }
      adam.step(model->params());
    }
    const double count = static_cast<double>(train_set.size());
    log_entry.loss /= count;
    log_entry.l_start /= count;
    log_entry.l_end /= count;
    log_entry.l_sentiment /= count;
    log_entry.dev = evaluate_prepared(*model, dev_set);
    if (!test_set.empty()) log_entry.test = evaluate_prepared(*model, test_set);

    const Metrics& selector = config.select_on_test ? *log_entry.test : log_entry.dev;
    if (selector.f1 > best_f1) {
      best_f1 = selector.f1;
      result.best_epoch = epoch;
      result.best = selector;
      std::ostringstream snap;
      model->params().write(snap);
      best_params = snap.str();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log::info("epoch " + std::to_string(epoch) + " loss " + std::to_string(log_entry.loss) +
              " dev F1 " + std::to_string(log_entry.dev.f1) + " (" +
              std::to_string(secs) + "s)");
    result.epochs.push_back(log_entry);
    if (on_epoch) on_epoch(log_entry);
  }
  std::istringstream restore(best_params);
  model->params().read_into(restore);
  result.model = std::move(model);
  return result;
}

TrainResult train_files(const ModelConfig& config, const TrainFiles& files,
                        const EpochCallback& on_epoch) {
  config.validate();
  if (files.train.empty() || files.dev.empty())
    throw ConfigError("train and dev corpora are required");
  if (files.glove.empty()) throw ConfigError("a general-domain embedding file is required");
  if (files.domain_emb.empty() && !config.ablation.single_embedding)
    throw ConfigError("a domain embedding file is required unless single_embedding");
  if (files.annotations.empty() && config.uses_particular())
    throw ConfigError("an annotation sidecar is required for the particular encoder");

  const auto sidecar = load_sidecars(files.annotations);
  TrainData data;
  auto load_split = [&](const std::string& path) {
    if (!config.uses_particular() && files.annotations.empty())
      return load_aste_file(path, parse_options_for(path));
    return load_annotated(path, sidecar);
  };
  data.train = load_split(files.train);
  data.dev = load_split(files.dev);
  if (!files.test.empty()) data.test = load_split(files.test);

  const auto vocab = vocabulary_of(data);
  data.general = load_embedding_file(files.glove, &vocab);
  if (!files.domain_emb.empty()) data.domain = load_embedding_file(files.domain_emb, &vocab);

  std::ofstream log_out;
  if (!files.log.empty()) {
    log_out.open(files.log);
    if (!log_out) throw IoError("cannot write " + files.log);
  }
  auto callback = [&](const EpochLog& e) {
    if (log_out) log_out << to_json(e).dump() << '\n' << std::flush;
    if (on_epoch) on_epoch(e);
  };
  TrainResult result = train(config, data, callback);
  CheckpointMeta meta;
  meta.epoch = result.best_epoch;
  meta.best_metric = result.best;
  save_checkpoint(*result.model, meta, files.output);
  return result;
}

std::vector<SentenceTriplets> predict_corpus(const Model& model,
                                             const std::vector<AnnotatedSentence>& data) {
  std::vector<SentenceTriplets> out;
  out.reserve(data.size());
  for (const auto& s : data) out.push_back({s.sentence.id, model.predict(model.prepare(s))});
  return out;
}

Metrics evaluate(const Model& model, const std::vector<AnnotatedSentence>& data,
                 bool macro) {
  if (data.empty()) throw RangeError("cannot evaluate an empty corpus");
  const auto pred = predict_corpus(model, data);
  std::vector<SentenceTriplets> gold;
  for (const auto& s : data) gold.push_back({s.sentence.id, s.gold});
  return macro ? score_corpus_macro(pred, gold) : score_corpus(pred, gold);
}

nlohmann::ordered_json to_json(const PredictionRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  if (!r.error.empty()) {
    j["error"] = r.error;
    j["triplets"] = nlohmann::json::array();
    return j;
  }
  auto arr = nlohmann::ordered_json::array();
  for (const Triplet& t : r.triplets) {
    nlohmann::ordered_json tj;
    tj["aspect"] = {t.aspect.start, t.aspect.end};
    tj["opinion"] = {t.opinion.start, t.opinion.end};
    tj["sentiment"] = std::string(sentiment_name(t.sentiment));
    arr.push_back(tj);
  }
  j["triplets"] = arr;
  return j;
}

PredictionRecord prediction_from_json(const nlohmann::json& j) {
  PredictionRecord r;
  r.id = j.at("id").get<std::string>();
  r.error = j.value("error", "");
  for (const auto& tj : j.at("triplets")) {
    Triplet t;
    const auto a = tj.at("aspect").get<std::vector<int>>();
    const auto o = tj.at("opinion").get<std::vector<int>>();
    if (a.size() != 2 || o.size() != 2) throw ParseError("span must be [start, end]");
    t.aspect = Span{a[0], a[1]};
    t.opinion = Span{o[0], o[1]};
    t.sentiment = parse_sentiment(tj.at("sentiment").get<std::string>());
    r.triplets.push_back(t);
  }
  return r;
}

std::vector<PredictionRecord> load_predictions(const std::string& path) {
  std::vector<PredictionRecord> out;
  std::istringstream in(read_file(path));
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (split_whitespace(line).empty()) continue;
    try {
      out.push_back(prediction_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("prediction record: ") + e.what(), line_no);
    }
  }
  return out;
}

std::vector<Sentence> load_raw_sentences(const std::string& path) {
  const ParseOptions opts = parse_options_for(path);
  std::vector<Sentence> out;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    const size_t sep = line.find("####");
    auto tokens = split_whitespace(sep == std::string::npos ? line : line.substr(0, sep));
    if (tokens.empty()) continue;
    out.push_back(Sentence{make_sentence_id(opts, out.size() + 1), std::move(tokens)});
  }
  return out;
}

std::vector<PredictionRecord> predict_sentences(const Model& model,
                                                const std::vector<Sentence>& sentences,
                                                const std::vector<AnnotationRecord>* sidecar,
                                                Annotator* annotator) {
  std::unordered_map<std::string, AnnotationResult> annotations;
  if (model.config().uses_particular()) {
    if (sidecar) {
      for (const auto& r : *sidecar) annotations[r.id] = AnnotationResult{r, ""};
    } else if (annotator) {
      try {
        for (auto& r : annotator->annotate(sentences)) annotations[r.record.id] = std::move(r);
      } catch (const Error& e) {
        for (const auto& s : sentences)
          annotations[s.id] = AnnotationResult{AnnotationRecord{s.id, {}, {}, {}}, e.what()};
      }
    } else {
      throw ConfigError("prediction needs annotations or an annotator backend");
    }
  }
  std::vector<PredictionRecord> out;
  for (const Sentence& s : sentences) {
    PredictionRecord rec;
    rec.id = s.id;
    try {
      AnnotatedSentence a;
      a.sentence = s;
      if (model.config().uses_particular()) {
        auto it = annotations.find(s.id);
        if (it == annotations.end()) throw AlignmentError("no annotation record");
        if (!it->second.ok()) throw AlignmentError("annotator failed: " + it->second.error);
        check_annotation(s, it->second.record);
        for (const auto& tag : it->second.record.pos) a.pos.push_back(map_pos_tag(tag));
        a.heads = it->second.record.heads;
      }
      rec.triplets = model.predict(model.prepare(a));
    } catch (const Error& e) {
      rec.error = e.what();
      log::warn("sentence " + s.id + ": " + rec.error);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

void annotate_file(const std::string& input, const std::string& output,
                   const std::string& backend) {
  auto annotator = make_annotator(backend);
  const auto sentences = load_raw_sentences(input);
  const auto records = annotate_corpus(sentences, *annotator);
  std::ofstream out(output);
  if (!out) throw IoError("cannot write " + output);
  out << serialize_sidecar(records);
}

}  // namespace aste
