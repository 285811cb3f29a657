#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "annotator.hpp"
#include "config.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "metrics.hpp"
#include "model.hpp"

namespace aste {

class RuntimeFailure : public Error {
 public:
  explicit RuntimeFailure(const std::string& w) : Error(ErrorKind::kRuntime, w) {}
};

// Sentence ids of a corpus file are "<file stem>-NNNN", which keeps ids
// unique across splits that share one annotation sidecar.
ParseOptions parse_options_for(const std::string& corpus_path);

// Loads a corpus file and merges the matching records from the sidecars.
std::vector<AnnotatedSentence> load_annotated(
    const std::string& corpus_path, const std::vector<AnnotationRecord>& sidecar);
std::vector<AnnotationRecord> load_sidecars(const std::vector<std::string>& paths);
// Subset of `all` whose ids occur in `sentences`, in sentence order.
std::vector<AnnotationRecord> select_records(const std::vector<AnnotationRecord>& all,
                                             const std::vector<AnnotatedSentence>& sentences);

struct TrainData {
  std::vector<AnnotatedSentence> train;
  std::vector<AnnotatedSentence> dev;
  std::vector<AnnotatedSentence> test;  // optional
  EmbeddingTable general;
  EmbeddingTable domain;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double l_start = 0.0;
  double l_end = 0.0;
  double l_sentiment = 0.0;
  Metrics dev;
  std::optional<Metrics> test;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  int best_epoch = 0;
  Metrics best;
  std::unique_ptr<Model> model;  // parameters of the selected epoch
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Builds the model (scratch or cached pretrained encoder) and runs
// mini-batch training, selecting the epoch with the best dev F1 (test F1
// when config.select_on_test). Deterministic for a fixed seed.
TrainResult train(const ModelConfig& config, const TrainData& data,
                  const EpochCallback& on_epoch = nullptr);

struct TrainFiles {
  std::string train, dev, test;
  std::string glove, domain_emb;
  std::vector<std::string> annotations;
  std::string output = "model.ckpt";
  std::string log;  // per-epoch JSON lines; empty to skip
};
TrainResult train_files(const ModelConfig& config, const TrainFiles& files,
                        const EpochCallback& on_epoch = nullptr);

std::vector<SentenceTriplets> predict_corpus(const Model& model,
                                             const std::vector<AnnotatedSentence>& data);
// Throws RangeError for an empty corpus.
Metrics evaluate(const Model& model, const std::vector<AnnotatedSentence>& data,
                 bool macro = false);

struct PredictionRecord {
  std::string id;
  std::vector<Triplet> triplets;
  std::string error;
};
nlohmann::ordered_json to_json(const PredictionRecord& r);
PredictionRecord prediction_from_json(const nlohmann::json& j);
std::vector<PredictionRecord> load_predictions(const std::string& path);

// Raw input lines are whitespace-tokenized; a `####` suffix is ignored. With
// a sidecar, annotations are taken from it; otherwise the annotator runs.
// Failures become per-sentence error records.
std::vector<PredictionRecord> predict_sentences(
    const Model& model, const std::vector<Sentence>& sentences,
    const std::vector<AnnotationRecord>* sidecar, Annotator* annotator);
std::vector<Sentence> load_raw_sentences(const std::string& path);

// Accepts corpus files or raw one-sentence-per-line text.
void annotate_file(const std::string& input, const std::string& output,
                   const std::string& backend);

}  // namespace aste
