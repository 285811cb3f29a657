#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "aste/aste.h"

namespace {

using nlohmann::json;

int fail(aste_status status) {
  std::cerr << "error: " << aste_last_error() << "\n";
  return static_cast<int>(status);
}

std::string take(char* s) {
  std::string out = s ? s : "";
  aste_string_free(s);
  return out;
}

std::vector<const char*> c_paths(const std::vector<std::string>& paths) {
  std::vector<const char*> out;
  for (const auto& p : paths) out.push_back(p.c_str());
  return out;
}

// "key=value" or "ablation.no_gcn=true"; the value is read as JSON when it
// parses, else as a plain string.
void apply_set(json& overrides, const std::string& item) {
  const auto eq = item.find('=');
  if (eq == std::string::npos || eq == 0)
    throw CLI::ValidationError("--set", "expected key=value, got '" + item + "'");
  const std::string key = item.substr(0, eq);
  const std::string text = item.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &overrides;
  size_t start = 0;
  for (size_t dot; (dot = key.find('.', start)) != std::string::npos; start = dot + 1)
    node = &(*node)[key.substr(start, dot - start)];
  (*node)[key.substr(start)] = value;
}

struct TrainArgs {
  std::string config, train, dev, test, glove, domain_emb, out = "model.ckpt", log;
  std::vector<std::string> annotations, sets;
  std::optional<uint64_t> seed;
  std::optional<int> epochs, batch_size;
  std::optional<double> lr_encoder, lr_head;
  std::optional<std::string> encoder;
  bool no_basic = false, no_particular = false, no_interaction = false,
       single_embedding = false, no_gcn = false, no_self_loops = false,
       select_on_test = false;
};

void add_train_options(CLI::App* cmd, TrainArgs& a) {
  cmd->add_option("--config", a.config, "Config file (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--train", a.train, "Training corpus")->required();
  cmd->add_option("--dev", a.dev, "Dev corpus")->required();
  cmd->add_option("--test", a.test, "Test corpus");
  cmd->add_option("--glove", a.glove, "General-domain word vectors")->required();
  cmd->add_option("--domain-emb", a.domain_emb, "Review-domain word vectors");
  cmd->add_option("--annotations", a.annotations, "Annotation sidecar(s)");
  cmd->add_option("--out", a.out, "Checkpoint path");
  cmd->add_option("--log", a.log, "Per-epoch JSON-lines log");
  cmd->add_option("--seed", a.seed);
  cmd->add_option("--epochs", a.epochs);
  cmd->add_option("--batch-size", a.batch_size);
  cmd->add_option("--lr-encoder", a.lr_encoder);
  cmd->add_option("--lr-head", a.lr_head);
  cmd->add_option("--encoder", a.encoder, "Encoder name or 'scratch'");
  cmd->add_option("--set", a.sets, "Override any config field: key=value");
  cmd->add_flag("--no-basic", a.no_basic);
  cmd->add_flag("--no-particular", a.no_particular);
  cmd->add_flag("--no-interaction", a.no_interaction);
  cmd->add_flag("--single-embedding", a.single_embedding);
  cmd->add_flag("--no-gcn", a.no_gcn);
  cmd->add_flag("--no-self-loops", a.no_self_loops);
  cmd->add_flag("--select-on-test", a.select_on_test);
}

json train_request(const TrainArgs& a) {
  json overrides = json::object();
  for (const auto& s : a.sets) apply_set(overrides, s);
  if (a.seed) overrides["seed"] = *a.seed;
  if (a.epochs) overrides["epochs"] = *a.epochs;
  if (a.batch_size) overrides["batch_size"] = *a.batch_size;
  if (a.lr_encoder) overrides["lr_encoder"] = *a.lr_encoder;
  if (a.lr_head) overrides["lr_head"] = *a.lr_head;
  if (a.encoder) overrides["encoder_name"] = *a.encoder;
  if (a.no_self_loops) overrides["self_loops"] = false;
  if (a.select_on_test) overrides["select_on_test"] = true;
  const std::pair<const char*, bool> flags[] = {
      {"no_basic", a.no_basic},
      {"no_particular", a.no_particular},
      {"no_interaction", a.no_interaction},
      {"single_embedding", a.single_embedding},
      {"no_gcn", a.no_gcn}};
  for (const auto& [name, on] : flags)
    if (on) overrides["ablation"][name] = true;

  json req;
  if (!a.config.empty()) req["config"] = a.config;
  req["overrides"] = overrides;
  req["train"] = a.train;
  req["dev"] = a.dev;
  if (!a.test.empty()) req["test"] = a.test;
  req["glove"] = a.glove;
  if (!a.domain_emb.empty()) req["domain_emb"] = a.domain_emb;
  req["annotations"] = a.annotations;
  req["output"] = a.out;
  if (!a.log.empty()) req["log"] = a.log;
  return req;
}

int run_train(const TrainArgs& a) {
  char* result = nullptr;
  const aste_status st = aste_train(train_request(a).dump().c_str(), &result);
  if (st != ASTE_OK) return fail(st);
  const json r = json::parse(take(result));
  json summary;
  summary["checkpoint"] = a.out;
  summary["best_epoch"] = r["best_epoch"];
  summary["best"] = r["best"];
  std::cout << summary.dump() << "\n";
  return 0;
}

std::string with_seed(const std::string& path, uint64_t seed) {
  const auto dot = path.rfind('.');
  const auto slash = path.rfind('/');
  const std::string tag = ".seed" + std::to_string(seed);
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return path + tag;
  return path.substr(0, dot) + tag + path.substr(dot);
}

int run_sweep(TrainArgs a, const std::vector<uint64_t>& seeds) {
  const std::string base_out = a.out, base_log = a.log;
  json runs = json::array();
  std::optional<size_t> best;
  for (uint64_t seed : seeds) {
    a.seed = seed;
    a.out = with_seed(base_out, seed);
    if (!base_log.empty()) a.log = with_seed(base_log, seed);
    char* result = nullptr;
    const aste_status st = aste_train(train_request(a).dump().c_str(), &result);
    if (st != ASTE_OK) return fail(st);
    const json r = json::parse(take(result));
    runs.push_back({{"seed", seed}, {"checkpoint", a.out},
                    {"best_epoch", r["best_epoch"]}, {"best", r["best"]}});
    const double f1 = r["best"]["f1"].get<double>();
    if (!best || f1 > runs[*best]["best"]["f1"].get<double>()) best = runs.size() - 1;
  }
  json out;
  out["runs"] = runs;
  if (best) out["selected"] = runs[*best];
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Aspect sentiment triplet extraction with a dual encoder"};
  app.require_subcommand(1);
  int verbosity = 1;
  app.add_option("--log-level", verbosity, "0 debug, 1 info, 2 warn, 3 error")
      ->check(CLI::Range(0, 4));
  app.set_version_flag("--version", std::string(aste_version()));

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train a model and write a checkpoint");
  add_train_options(train, train_args);

  TrainArgs sweep_args;
  std::vector<uint64_t> seeds;
  auto* sweep = app.add_subcommand("sweep", "Train once per seed and report the best run");
  add_train_options(sweep, sweep_args);
  sweep->add_option("--seeds", seeds, "Seeds to train with")->required();

  std::string checkpoint, data, input, output, backend = "heuristic", predictions;
  std::vector<std::string> annotations;
  bool macro = false;

  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on a corpus");
  evaluate->add_option("--checkpoint", checkpoint)->required();
  evaluate->add_option("--data", data)->required();
  evaluate->add_option("--annotations", annotations);
  evaluate->add_flag("--macro", macro, "Macro-average over sentences");

  auto* predict = app.add_subcommand("predict", "Decode triplets for raw sentences");
  predict->add_option("--checkpoint", checkpoint)->required();
  predict->add_option("--input", input)->required();
  predict->add_option("--output", output)->required();
  predict->add_option("--annotations", annotations, "Sidecar(s); else run --backend");
  predict->add_option("--backend", backend, "Annotator: heuristic | cmd:<command>");

  auto* annotate = app.add_subcommand("annotate", "Write a POS/dependency sidecar");
  annotate->add_option("--input", input)->required();
  annotate->add_option("--output", output)->required();
  annotate->add_option("--backend", backend)->required();

  auto* score = app.add_subcommand("score", "Score a predictions file against gold");
  score->add_option("--predictions", predictions)->required();
  score->add_option("--gold", data)->required();
  score->add_flag("--macro", macro);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  aste_set_log_level(verbosity);

  try {
    if (*train) return run_train(train_args);
    if (*sweep) return run_sweep(sweep_args, seeds);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  if (*annotate) {
    const aste_status st = aste_annotate(input.c_str(), output.c_str(), backend.c_str());
    return st == ASTE_OK ? 0 : fail(st);
  }
  if (*score) {
    char* metrics = nullptr;
    const aste_status st =
        aste_score_files(predictions.c_str(), data.c_str(), macro ? 1 : 0, &metrics);
    if (st != ASTE_OK) return fail(st);
    std::cout << take(metrics) << "\n";
    return 0;
  }

  aste_model* model = nullptr;
  if (aste_status st = aste_model_load(checkpoint.c_str(), &model); st != ASTE_OK)
    return fail(st);
  const auto paths = c_paths(annotations);
  aste_status st = ASTE_OK;
  if (*evaluate) {
    char* metrics = nullptr;
    st = aste_model_evaluate(model, data.c_str(), paths.data(), paths.size(),
                             macro ? 1 : 0, &metrics);
    if (st == ASTE_OK) std::cout << take(metrics) << "\n";
  } else if (*predict) {
    size_t errors = 0;
    st = aste_model_predict(model, input.c_str(), output.c_str(), paths.data(),
                            paths.size(), backend.c_str(), &errors);
    if (st == ASTE_OK && errors > 0)
      std::cerr << errors << " sentence(s) could not be decoded; see error records in "
                << output << "\n";
  }
  aste_model_free(model);
  return st == ASTE_OK ? 0 : fail(st);
}
