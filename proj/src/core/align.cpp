#include "align.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "error.hpp"
#include "log.hpp"

namespace aste {

namespace {

constexpr const char* kSpecials[] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]",
                                     "[MASK]"};
constexpr size_t kMaxCharsPerWord = 100;

size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

std::vector<std::string> utf8_chars(const std::string& s) {
  std::vector<std::string> out;
  for (size_t i = 0; i < s.size();) {
    size_t len = std::min(utf8_length(static_cast<unsigned char>(s[i])),
                          s.size() - i);
    out.push_back(s.substr(i, len));
    i += len;
  }
  return out;
}

// Splits a normalized word into runs of non-punctuation and single
// punctuation characters, as BERT's basic tokenizer does.
std::vector<std::string> split_punctuation(const std::string& word) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : word) {
    if (std::ispunct(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
      out.emplace_back(1, c);
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace

WordPieceTokenizer::WordPieceTokenizer(std::vector<std::string> vocab,
                                       bool lowercase, int max_length)
    : vocab_(std::move(vocab)), lowercase_(lowercase), max_length_(max_length) {
  for (size_t i = 0; i < vocab_.size(); ++i)
    ids_.emplace(vocab_[i], static_cast<int>(i));
  cls_id_ = id_of("[CLS]");
  sep_id_ = id_of("[SEP]");
  unk_id_ = id_of("[UNK]");
  if (cls_id_ < 0 || sep_id_ < 0 || unk_id_ < 0)
    throw InitError("vocabulary lacks [CLS]/[SEP]/[UNK]");
  if (max_length_ < 3) throw InitError("tokenizer max_length must be >= 3");
}

WordPieceTokenizer WordPieceTokenizer::from_vocab_file(const std::string& path,
                                                       bool lowercase,
                                                       int max_length) {
  std::vector<std::string> vocab;
  const std::string text = read_file(path);
  size_t pos = 0;
  while (pos < text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    vocab.push_back(std::move(line));
    pos = eol + 1;
  }
  return WordPieceTokenizer(std::move(vocab), lowercase, max_length);
}

WordPieceTokenizer WordPieceTokenizer::build_from_corpus(
    const std::vector<std::vector<std::string>>& sentences, int max_length) {
  WordPieceTokenizer probe(
      std::vector<std::string>(std::begin(kSpecials), std::end(kSpecials)),
      true, max_length);
  std::set<std::string> words, chars;
  for (const auto& tokens : sentences) {
    for (const auto& tok : tokens) {
      for (const auto& piece : split_punctuation(probe.normalize_word(tok))) {
        words.insert(piece);
        for (auto& c : utf8_chars(piece)) chars.insert(c);
      }
    }
  }
  std::vector<std::string> vocab(std::begin(kSpecials), std::end(kSpecials));
  for (const auto& c : chars) vocab.push_back(c);
  for (const auto& c : chars) vocab.push_back("##" + c);
  for (const auto& w : words) {
    if (!chars.count(w)) vocab.push_back(w);
  }
  return WordPieceTokenizer(std::move(vocab), true, max_length);
}

int WordPieceTokenizer::id_of(const std::string& piece) const {
  auto it = ids_.find(piece);
  return it == ids_.end() ? -1 : it->second;
}

std::string WordPieceTokenizer::normalize_word(const std::string& word) const {
  std::string out;
  out.reserve(word.size());
  for (char c : word) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 0x20 || u == 0x7F) continue;
    if (std::isspace(u)) continue;
    out += lowercase_ && u < 0x80 ? static_cast<char>(std::tolower(u)) : c;
  }
  return out;
}

std::vector<int> WordPieceTokenizer::tokenize_word(const std::string& word) const {
  std::vector<int> out;
  for (const auto& piece : split_punctuation(normalize_word(word))) {
    const auto chars = utf8_chars(piece);
    if (chars.size() > kMaxCharsPerWord) {
      out.push_back(unk_id_);
      continue;
    }
    std::vector<int> sub;
    size_t start = 0;
    bool bad = false;
    while (start < chars.size()) {
      size_t end = chars.size();
      int found = -1;
      while (end > start) {
        std::string cand;
        for (size_t k = start; k < end; ++k) cand += chars[k];
        if (start > 0) cand = "##" + cand;
        found = id_of(cand);
        if (found >= 0) break;
        --end;
      }
      if (found < 0) {
        bad = true;
        break;
      }
      sub.push_back(found);
      start = end;
    }
    if (bad) {
      out.push_back(unk_id_);
    } else {
      out.insert(out.end(), sub.begin(), sub.end());
    }
  }
  return out;
}

std::string WordPieceTokenizer::detokenize(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    const std::string& piece = vocab_.at(static_cast<size_t>(id));
    out += piece.rfind("##", 0) == 0 ? piece.substr(2) : piece;
  }
  return out;
}

SubwordEncoding tokenize_with_alignment(const std::vector<std::string>& tokens,
                                        const WordPieceTokenizer& tokenizer) {
  if (tokens.empty()) throw RangeError("cannot tokenize an empty sentence");
  SubwordEncoding enc;
  enc.ids.push_back(tokenizer.cls_id());
  int covered = 0;
  for (const auto& word : tokens) {
    auto ids = tokenizer.tokenize_word(word);
    if (ids.empty()) {
      log::warn("word '" + word + "' produced no subwords; using [UNK]");
      ids.push_back(tokenizer.unk_id());
    }
    const int n = static_cast<int>(ids.size());
    enc.alignment.spans.push_back(Span{covered, covered + n - 1});
    covered += n;
    enc.ids.insert(enc.ids.end(), ids.begin(), ids.end());
  }
  enc.ids.push_back(tokenizer.sep_id());
  if (static_cast<int>(enc.ids.size()) > tokenizer.max_length())
    throw RangeError("sentence needs " + std::to_string(enc.ids.size()) +
                     " subwords; encoder limit is " +
                     std::to_string(tokenizer.max_length()));
  return enc;
}

void validate_alignment(const AlignmentMap& alignment, int covered) {
  int next = 0;
  for (const Span& s : alignment.spans) {
    if (s.start != next || s.end < s.start)
      throw AlignmentError("alignment spans are not contiguous and ordered");
    next = s.end + 1;
  }
  if (next != covered)
    throw AlignmentError("alignment covers " + std::to_string(next) +
                         " subwords, expected " + std::to_string(covered));
}

ag::Var pool_subwords(const ag::Var& states, const AlignmentMap& alignment) {
  const int m = static_cast<int>(states.rows());
  std::vector<std::vector<int>> groups;
  groups.reserve(alignment.spans.size());
  for (const Span& s : alignment.spans) {
    // +1 skips the leading marker row.
    if (s.start < 0 || s.end < s.start || s.end + 1 >= m - 1)
      throw AlignmentError("subword span [" + std::to_string(s.start) + "," +
                           std::to_string(s.end) + "] outside " +
                           std::to_string(m - 2) + " covered subwords");
    std::vector<int> rows;
    for (int r = s.start; r <= s.end; ++r) rows.push_back(r + 1);
    groups.push_back(std::move(rows));
  }
  if (alignment.spans.empty() || alignment.spans.back().end + 3 != m)
    throw AlignmentError("state count " + std::to_string(m) +
                         " does not match alignment coverage plus markers");
  return ag::mean_pool_rows(states, groups);
}

}  // namespace aste
