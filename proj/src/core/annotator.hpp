#pragma once

#include <memory>
#include <string>
#include <vector>

#include "corpus.hpp"

namespace aste {

struct AnnotationResult {
  AnnotationRecord record;
  std::string error;  // non-empty when this sentence failed

  bool ok() const { return error.empty(); }
};

// Produces universal POS tags and dependency heads for pre-tokenized
// sentences. Implementations must not retokenize.
class Annotator {
 public:
  virtual ~Annotator() = default;
  virtual std::string name() const = 0;
  virtual std::vector<AnnotationResult> annotate(
      const std::vector<Sentence>& sentences) = 0;
};

// Rule-based tagger (closed-class lexicon plus suffix rules) with a
// noun-phrase attachment heuristic for heads. Deterministic, no resources.
class HeuristicAnnotator : public Annotator {
 public:
  std::string name() const override { return "heuristic"; }
  std::vector<AnnotationResult> annotate(
      const std::vector<Sentence>& sentences) override;

  static std::string tag_word(const std::string& word);
  static std::vector<int> attach_heads(const std::vector<std::string>& tags);
};

// Runs an external program: it receives a path to a JSON-lines file of
// {id, tokens} records as its last argument and must print one sidecar
// record (or {id, error}) per input line to stdout.
class CommandAnnotator : public Annotator {
 public:
  explicit CommandAnnotator(std::string command) : command_(std::move(command)) {}
  std::string name() const override { return "cmd:" + command_; }
  std::vector<AnnotationResult> annotate(
      const std::vector<Sentence>& sentences) override;

 private:
  std::string command_;
};

// "heuristic" or "cmd:<command line>". Throws ConfigError otherwise.
std::unique_ptr<Annotator> make_annotator(const std::string& backend);

// Checks a result against its sentence: same id, byte-identical tokens,
// one tag and head per token, a single-rooted tree.
void check_annotation(const Sentence& s, const AnnotationRecord& r);

// Annotates a whole corpus; any per-sentence failure is fatal and names the
// sentence.
std::vector<AnnotationRecord> annotate_corpus(const std::vector<Sentence>& sentences,
                                              Annotator& annotator);

}  // namespace aste
