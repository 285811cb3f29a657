#include "aste/aste.h"

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "error.hpp"
#include "log.hpp"
#include "model.hpp"
#include "runner.hpp"

struct aste_model {
  std::unique_ptr<aste::Model> model;
  aste::CheckpointMeta meta;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <class F>
aste_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return ASTE_OK;
  } catch (const aste::Error& e) {
    g_last_error = e.what();
    return static_cast<aste_status>(e.kind());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = std::string("invalid JSON: ") + e.what();
    return ASTE_ERR_USAGE;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return ASTE_ERR_RUNTIME;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return ASTE_ERR_RUNTIME;
  }
}

void require(const void* p, const char* what) {
  if (!p) throw aste::ConfigError(std::string(what) + " must not be null");
}

std::vector<std::string> path_list(const char* const* paths, size_t n) {
  std::vector<std::string> out;
  if (n > 0) require(paths, "annotation_paths");
  for (size_t i = 0; i < n; ++i) {
    require(paths[i], "annotation path");
    out.emplace_back(paths[i]);
  }
  return out;
}

std::vector<aste::AnnotatedSentence> load_corpus(const std::string& path,
                                                 const std::vector<std::string>& sidecars,
                                                 bool needs_syntax) {
  if (sidecars.empty()) {
    if (needs_syntax)
      throw aste::ConfigError("this model needs an annotation sidecar");
    return aste::load_aste_file(path, aste::parse_options_for(path));
  }
  return aste::load_annotated(path, aste::load_sidecars(sidecars));
}

nlohmann::ordered_json epoch_json(const aste::EpochLog& e) {
  nlohmann::ordered_json j;
  j["epoch"] = e.epoch;
  j["loss"] = e.loss;
  j["l_start"] = e.l_start;
  j["l_end"] = e.l_end;
  j["l_sentiment"] = e.l_sentiment;
  j["dev"] = aste::to_json(e.dev);
  if (e.test) j["test"] = aste::to_json(*e.test);
  return j;
}

}  // namespace

extern "C" {

const char* aste_last_error(void) { return g_last_error.c_str(); }

const char* aste_version(void) { return "1.0.0"; }

void aste_set_log_level(int level) {
  if (level < 0) level = 0;
  if (level > 4) level = 4;
  aste::log::set_level(static_cast<aste::log::Level>(level));
}

void aste_string_free(char* s) { std::free(s); }

aste_status aste_train(const char* request_json, char** result_json) {
  return guarded([&] {
    require(request_json, "request_json");
    const auto req = nlohmann::json::parse(request_json);
    nlohmann::json cfg = nlohmann::json::object();
    if (req.contains("config") && !req.at("config").is_null())
      cfg = aste::to_json(aste::load_config(req.at("config").get<std::string>()));
    if (req.contains("overrides")) cfg.merge_patch(req.at("overrides"));
    const aste::ModelConfig config = aste::config_from_json(cfg);

    aste::TrainFiles files;
    files.train = req.value("train", "");
    files.dev = req.value("dev", "");
    files.test = req.value("test", "");
    files.glove = req.value("glove", "");
    files.domain_emb = req.value("domain_emb", "");
    if (req.contains("annotations"))
      files.annotations = req.at("annotations").get<std::vector<std::string>>();
    files.output = req.value("output", files.output);
    files.log = req.value("log", "");

    const aste::TrainResult result = aste::train_files(config, files);
    if (result_json) {
      nlohmann::ordered_json out;
      out["best_epoch"] = result.best_epoch;
      out["best"] = aste::to_json(result.best);
      auto epochs = nlohmann::ordered_json::array();
      for (const auto& e : result.epochs) epochs.push_back(epoch_json(e));
      out["epochs"] = epochs;
      *result_json = dup_string(out.dump());
    }
  });
}

aste_status aste_model_load(const char* checkpoint_path, aste_model** out) {
  return guarded([&] {
    require(checkpoint_path, "checkpoint_path");
    require(out, "out");
    *out = nullptr;
    auto loaded = aste::load_checkpoint(std::string(checkpoint_path));
    *out = new aste_model{std::move(loaded.model), loaded.meta};
  });
}

void aste_model_free(aste_model* model) { delete model; }

aste_status aste_model_config(const aste_model* model, char** config_json) {
  return guarded([&] {
    require(model, "model");
    require(config_json, "config_json");
    *config_json = dup_string(aste::to_json(model->model->config()).dump(2));
  });
}

aste_status aste_model_census(const aste_model* model, char** census_json) {
  return guarded([&] {
    require(model, "model");
    require(census_json, "census_json");
    nlohmann::ordered_json j(model->model->params().census());
    *census_json = dup_string(j.dump());
  });
}

aste_status aste_model_evaluate(const aste_model* model, const char* corpus_path,
                                const char* const* annotation_paths, size_t n_annotations,
                                int macro, char** metrics_json) {
  return guarded([&] {
    require(model, "model");
    require(corpus_path, "corpus_path");
    require(metrics_json, "metrics_json");
    const auto data = load_corpus(corpus_path, path_list(annotation_paths, n_annotations),
                                  model->model->config().uses_particular());
    const aste::Metrics m = aste::evaluate(*model->model, data, macro != 0);
    *metrics_json = dup_string(aste::to_json(m).dump());
  });
}

aste_status aste_model_predict(const aste_model* model, const char* input_path,
                               const char* output_path,
                               const char* const* annotation_paths, size_t n_annotations,
                               const char* backend, size_t* n_errors) {
  return guarded([&] {
    require(model, "model");
    require(input_path, "input_path");
    require(output_path, "output_path");
    const auto sidecars = path_list(annotation_paths, n_annotations);
    const auto sentences = aste::load_raw_sentences(input_path);

    std::vector<aste::AnnotationRecord> records;
    std::unique_ptr<aste::Annotator> annotator;
    if (!sidecars.empty()) {
      records = aste::load_sidecars(sidecars);
    } else if (model->model->config().uses_particular()) {
      annotator = aste::make_annotator(backend ? backend : "heuristic");
    }
    const auto preds = aste::predict_sentences(
        *model->model, sentences, sidecars.empty() ? nullptr : &records, annotator.get());

    std::ofstream out(output_path);
    if (!out) throw aste::IoError(std::string("cannot write ") + output_path);
    size_t errors = 0;
    for (const auto& p : preds) {
      if (!p.error.empty()) ++errors;
      out << aste::to_json(p).dump() << '\n';
    }
    if (!out) throw aste::IoError(std::string("failed writing ") + output_path);
    if (n_errors) *n_errors = errors;
  });
}

aste_status aste_annotate(const char* corpus_path, const char* output_path,
                          const char* backend) {
  return guarded([&] {
    require(corpus_path, "corpus_path");
    require(output_path, "output_path");
    require(backend, "backend");
    aste::annotate_file(corpus_path, output_path, backend);
  });
}

aste_status aste_score_files(const char* predictions_path, const char* gold_corpus_path,
                             int macro, char** metrics_json) {
  return guarded([&] {
    require(predictions_path, "predictions_path");
    require(gold_corpus_path, "gold_corpus_path");
    require(metrics_json, "metrics_json");
    const auto records = aste::load_predictions(predictions_path);
    const auto gold_corpus =
        aste::load_aste_file(gold_corpus_path, aste::parse_options_for(gold_corpus_path));
    std::vector<aste::SentenceTriplets> pred, gold;
    for (const auto& r : records) pred.push_back({r.id, r.triplets});
    for (const auto& s : gold_corpus) gold.push_back({s.sentence.id, s.gold});
    const aste::Metrics m =
        macro ? aste::score_corpus_macro(pred, gold) : aste::score_corpus(pred, gold);
    *metrics_json = dup_string(aste::to_json(m).dump());
  });
}

}  // extern "C"
