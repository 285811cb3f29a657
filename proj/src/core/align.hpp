#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "corpus.hpp"
#include "tensor.hpp"

namespace aste {

// Greedy longest-match-first subword tokenizer over a BERT-style vocabulary
// (continuation pieces carry a "##" prefix).
class WordPieceTokenizer {
 public:
  WordPieceTokenizer() = default;
  WordPieceTokenizer(std::vector<std::string> vocab, bool lowercase = true,
                     int max_length = 512);

  // One entry per line, id = line number.
  static WordPieceTokenizer from_vocab_file(const std::string& path,
                                            bool lowercase = true,
                                            int max_length = 512);
  // Whole words, single characters and their continuation forms, plus the
  // special markers, collected from the given sentences.
  static WordPieceTokenizer build_from_corpus(
      const std::vector<std::vector<std::string>>& sentences,
      int max_length = 512);

  // Subword ids for one word; empty when nothing survives normalization.
  std::vector<int> tokenize_word(const std::string& word) const;
  // Joins pieces, dropping "##" on continuations.
  std::string detokenize(const std::vector<int>& ids) const;
  std::string normalize_word(const std::string& word) const;

  const std::vector<std::string>& vocab() const { return vocab_; }
  int vocab_size() const { return static_cast<int>(vocab_.size()); }
  int id_of(const std::string& piece) const;
  bool lowercase() const { return lowercase_; }
  int max_length() const { return max_length_; }

  int cls_id() const { return cls_id_; }
  int sep_id() const { return sep_id_; }
  int unk_id() const { return unk_id_; }

 private:
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> ids_;
  bool lowercase_ = true;
  int max_length_ = 512;
  int cls_id_ = -1, sep_id_ = -1, unk_id_ = -1;
};

// Per-word inclusive subword range over the marker-free subword sequence.
struct AlignmentMap {
  std::vector<Span> spans;
};

struct SubwordEncoding {
  // [CLS] subwords... [SEP]
  std::vector<int> ids;
  AlignmentMap alignment;
};

// Throws RangeError when the encoding would exceed the tokenizer's maximum
// length, since truncation would corrupt word indices.
SubwordEncoding tokenize_with_alignment(const std::vector<std::string>& tokens,
                                        const WordPieceTokenizer& tokenizer);

void validate_alignment(const AlignmentMap& alignment, int covered);

// Averages subword states back to word states. `states` includes the two
// marker rows, which are discarded.
ag::Var pool_subwords(const ag::Var& states, const AlignmentMap& alignment);

}  // namespace aste
