#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tensor.hpp"

namespace aste {

enum class Sentiment : uint8_t { kPos = 0, kNeu = 1, kNeg = 2 };

std::string_view sentiment_name(Sentiment s);
// Accepts POS/NEU/NEG and the spelled-out forms, case-insensitive.
Sentiment parse_sentiment(std::string_view text);

// Inclusive word-index span.
struct Span {
  int start = 0;
  int end = 0;

  int length() const { return end - start + 1; }
  bool overlaps(const Span& o) const { return start <= o.end && o.start <= end; }
  auto operator<=>(const Span&) const = default;
};

struct Triplet {
  Span aspect;
  Span opinion;
  Sentiment sentiment = Sentiment::kPos;

  auto operator<=>(const Triplet&) const = default;
};

struct Sentence {
  std::string id;
  std::vector<std::string> tokens;

  int size() const { return static_cast<int>(tokens.size()); }
};

enum class PosClass : uint8_t {
  kNoun = 0,
  kVerb = 1,
  kAdj = 2,
  kAdv = 3,
  kOther = 4,
};
inline constexpr int kNumPosClasses = 5;

struct AnnotatedSentence {
  Sentence sentence;
  std::vector<PosClass> pos;
  // Head word per token, -1 for the root.
  std::vector<int> heads;
  std::vector<Triplet> gold;

  int size() const { return sentence.size(); }
  bool annotated() const { return !pos.empty(); }
};

struct DependencyGraph {
  int n = 0;
  ag::Matrix adjacency;
  ag::Matrix degree;
  // D^-1/2 A D^-1/2
  ag::Matrix normalized;
};

// One line of the annotation sidecar.
struct AnnotationRecord {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<std::string> pos;
  std::vector<int> heads;
};

struct ParseOptions {
  // Sentence ids are id_prefix followed by the 1-based, zero-padded
  // sentence ordinal ("s-0001").
  std::string id_prefix = "s-";
};

std::string make_sentence_id(const ParseOptions& options, size_t ordinal);

// Parses `sentence####[([a..], [o..], 'POS'), ...]` lines. Blank lines are
// skipped. Throws ParseError (with line number) or RangeError.
std::vector<AnnotatedSentence> parse_aste_file(std::string_view text,
                                               const ParseOptions& options = {});
std::vector<AnnotatedSentence> load_aste_file(const std::string& path,
                                              const ParseOptions& options = {});
// Writes the corpus format back; parse(serialize(x)) == x.
std::string serialize_aste(const std::vector<AnnotatedSentence>& sentences);

// Throws if any triplet violates the span invariants for a sentence of n
// words.
void validate_triplets(const std::vector<Triplet>& triplets, int n,
                       const std::string& id);

PosClass map_pos_tag(std::string_view raw_tag);

std::vector<AnnotationRecord> parse_sidecar(std::string_view text);
std::vector<AnnotationRecord> load_sidecar(const std::string& path);
std::string serialize_sidecar(const std::vector<AnnotationRecord>& records);

// Checks the head list forms a single tree over n words.
void validate_heads(const std::vector<int>& heads, int n, const std::string& id);

// Populates pos and heads from the sidecar, matching by sentence id. Throws
// AlignmentError naming the offending sentence.
std::vector<AnnotatedSentence> merge_annotations(
    std::vector<AnnotatedSentence> sentences,
    const std::vector<AnnotationRecord>& sidecar);

// Adjacency is symmetric in head/dependent edges; self_loops adds the
// identity. Zero-degree rows (only possible without self-loops) normalize to
// zero.
DependencyGraph build_dependency_graph(const std::vector<int>& heads, int n,
                                       bool self_loops = true);

// Splits on runs of ASCII whitespace.
std::vector<std::string> split_whitespace(std::string_view text);
std::string read_file(const std::string& path);

}  // namespace aste
