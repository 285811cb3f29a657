#include "corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "error.hpp"

namespace aste {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Cursor over one triplet list such as [([1, 2], [4], 'POS')].
class TripletListParser {
 public:
  TripletListParser(std::string_view text, int line) : text_(text), line_(line) {}

  std::vector<std::pair<std::vector<int>, std::vector<int>>> spans;
  std::vector<Sentiment> sentiments;

  void parse() {
    expect('[');
    skip_ws();
    if (peek() == ']') {
      ++pos_;
      finish();
      return;
    }
    while (true) {
      expect('(');
      auto aspect = parse_int_list();
      expect(',');
      auto opinion = parse_int_list();
      expect(',');
      sentiments.push_back(parse_label());
      expect(')');
      spans.emplace_back(std::move(aspect), std::move(opinion));
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      expect(']');
      break;
    }
    finish();
  }

 private:
  void finish() {
    skip_ws();
    if (pos_ != text_.size()) fail("trailing characters after triplet list");
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(what + " at column " + std::to_string(pos_), line_);
  }

  void skip_ws() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void expect(char c) {
    skip_ws();
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::vector<int> parse_int_list() {
    expect('[');
    std::vector<int> out;
    skip_ws();
    if (peek() == ']') fail("empty index list");
    while (true) {
      skip_ws();
      size_t start = pos_;
      while (pos_ < text_.size() &&
             std::isdigit(static_cast<unsigned char>(text_[pos_])))
        ++pos_;
      if (start == pos_) fail("expected word index");
      out.push_back(std::stoi(std::string(text_.substr(start, pos_ - start))));
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      expect(']');
      return out;
    }
  }

  Sentiment parse_label() {
    skip_ws();
    const char quote = peek();
    if (quote != '\'' && quote != '"') fail("expected quoted sentiment label");
    ++pos_;
    const size_t close = text_.find(quote, pos_);
    if (close == std::string_view::npos) fail("unterminated sentiment label");
    std::string_view label = text_.substr(pos_, close - pos_);
    pos_ = close + 1;
    try {
      return parse_sentiment(label);
    } catch (const ParseError&) {
      fail("unknown sentiment label '" + std::string(label) + "'");
    }
  }

  std::string_view text_;
  int line_;
  size_t pos_ = 0;
};

Span to_span(std::vector<int> indices, int line) {
  std::sort(indices.begin(), indices.end());
  for (size_t i = 1; i < indices.size(); ++i) {
    if (indices[i] != indices[i - 1] + 1)
      throw ParseError("non-contiguous index list", line);
  }
  return Span{indices.front(), indices.back()};
}

std::string index_list(const Span& s) {
  std::string out = "[";
  for (int i = s.start; i <= s.end; ++i) {
    if (i > s.start) out += ", ";
    out += std::to_string(i);
  }
  return out + "]";
}

}  // namespace

std::string_view sentiment_name(Sentiment s) {
  switch (s) {
    case Sentiment::kPos: return "POS";
    case Sentiment::kNeu: return "NEU";
    case Sentiment::kNeg: return "NEG";
  }
  return "?";
}

Sentiment parse_sentiment(std::string_view text) {
  const std::string t = lower(text);
  if (t == "pos" || t == "positive") return Sentiment::kPos;
  if (t == "neu" || t == "neutral") return Sentiment::kNeu;
  if (t == "neg" || t == "negative") return Sentiment::kNeg;
  throw ParseError("unknown sentiment '" + std::string(text) + "'");
}

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string make_sentence_id(const ParseOptions& options, size_t ordinal) {
  std::string num = std::to_string(ordinal);
  if (num.size() < 4) num.insert(0, 4 - num.size(), '0');
  return options.id_prefix + num;
}

void validate_triplets(const std::vector<Triplet>& triplets, int n,
                       const std::string& id) {
  for (const Triplet& t : triplets) {
    for (const Span* s : {&t.aspect, &t.opinion}) {
      if (s->start < 0 || s->end >= n || s->start > s->end)
        throw RangeError("sentence " + id + ": span [" +
                         std::to_string(s->start) + "," +
                         std::to_string(s->end) + "] outside [0," +
                         std::to_string(n) + ")");
    }
    if (t.aspect.overlaps(t.opinion))
      throw RangeError("sentence " + id + ": aspect and opinion spans overlap");
  }
}

std::vector<AnnotatedSentence> parse_aste_file(std::string_view text,
                                               const ParseOptions& options) {
  std::vector<AnnotatedSentence> out;
  int line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (split_whitespace(line).empty()) {
      if (eol == text.size()) break;
      continue;
    }

    const size_t sep = line.find("####");
    if (sep == std::string_view::npos)
      throw ParseError("missing '####' separator", line_no);
    AnnotatedSentence s;
    s.sentence.id = make_sentence_id(options, out.size() + 1);
    s.sentence.tokens = split_whitespace(line.substr(0, sep));
    if (s.sentence.tokens.empty()) throw ParseError("empty sentence", line_no);

    TripletListParser parser(line.substr(sep + 4), line_no);
    parser.parse();
    const int n = s.size();
    for (size_t i = 0; i < parser.spans.size(); ++i) {
      Triplet t{to_span(parser.spans[i].first, line_no),
                to_span(parser.spans[i].second, line_no), parser.sentiments[i]};
      if (t.aspect.end >= n || t.opinion.end >= n)
        throw RangeError("line " + std::to_string(line_no) + ": index " +
                         std::to_string(std::max(t.aspect.end, t.opinion.end)) +
                         " >= sentence length " + std::to_string(n));
      s.gold.push_back(t);
    }
    validate_triplets(s.gold, n, s.sentence.id);
    out.push_back(std::move(s));
    if (eol == text.size()) break;
  }
  return out;
}

std::vector<AnnotatedSentence> load_aste_file(const std::string& path,
                                              const ParseOptions& options) {
  return parse_aste_file(read_file(path), options);
}

std::string serialize_aste(const std::vector<AnnotatedSentence>& sentences) {
  std::string out;
  for (const auto& s : sentences) {
    for (size_t i = 0; i < s.sentence.tokens.size(); ++i) {
      if (i) out += ' ';
      out += s.sentence.tokens[i];
    }
    out += "####[";
    for (size_t i = 0; i < s.gold.size(); ++i) {
      const Triplet& t = s.gold[i];
      if (i) out += ", ";
      out += "(" + index_list(t.aspect) + ", " + index_list(t.opinion) + ", '" +
             std::string(sentiment_name(t.sentiment)) + "')";
    }
    out += "]\n";
  }
  return out;
}

PosClass map_pos_tag(std::string_view raw_tag) {
  if (raw_tag == "NOUN" || raw_tag == "PROPN") return PosClass::kNoun;
  if (raw_tag == "VERB" || raw_tag == "AUX") return PosClass::kVerb;
  if (raw_tag == "ADJ") return PosClass::kAdj;
  if (raw_tag == "ADV") return PosClass::kAdv;
  return PosClass::kOther;
}

std::vector<AnnotationRecord> parse_sidecar(std::string_view text) {
  std::vector<AnnotationRecord> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (split_whitespace(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      AnnotationRecord r;
      r.id = j.at("id").get<std::string>();
      r.tokens = j.at("tokens").get<std::vector<std::string>>();
      r.pos = j.at("pos").get<std::vector<std::string>>();
      r.heads = j.at("heads").get<std::vector<int>>();
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("annotation record: ") + e.what(), line_no);
    }
  }
  return out;
}

std::vector<AnnotationRecord> load_sidecar(const std::string& path) {
  return parse_sidecar(read_file(path));
}

std::string serialize_sidecar(const std::vector<AnnotationRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["tokens"] = r.tokens;
    j["pos"] = r.pos;
    j["heads"] = r.heads;
    out += j.dump() + "\n";
  }
  return out;
}

void validate_heads(const std::vector<int>& heads, int n, const std::string& id) {
  if (n <= 0) throw RangeError("sentence " + id + ": empty dependency graph");
  if (static_cast<int>(heads.size()) != n)
    throw AlignmentError("sentence " + id + ": " + std::to_string(heads.size()) +
                         " heads for " + std::to_string(n) + " tokens");
  int roots = 0;
  for (int h : heads) {
    if (h == -1) {
      ++roots;
    } else if (h < 0 || h >= n) {
      throw RangeError("sentence " + id + ": head index " + std::to_string(h) +
                       " out of range");
    }
  }
  if (roots != 1)
    throw GraphError("sentence " + id + ": expected exactly one root, found " +
                     std::to_string(roots));
  for (int i = 0; i < n; ++i) {
    int cur = i;
    for (int steps = 0; cur != -1; ++steps) {
      if (steps > n) throw GraphError("sentence " + id + ": cycle in heads");
      cur = heads[cur];
    }
  }
}

std::vector<AnnotatedSentence> merge_annotations(
    std::vector<AnnotatedSentence> sentences,
    const std::vector<AnnotationRecord>& sidecar) {
  std::unordered_map<std::string, const AnnotationRecord*> by_id;
  for (const auto& r : sidecar) {
    if (!by_id.emplace(r.id, &r).second)
      throw AlignmentError("duplicate annotation record for sentence " + r.id);
  }
  if (sidecar.size() != sentences.size()) {
    // Report the first corpus sentence without a record, if any.
    for (const auto& s : sentences) {
      if (!by_id.count(s.sentence.id))
        throw AlignmentError("no annotation record for sentence " +
                             s.sentence.id);
    }
    throw AlignmentError("annotation sidecar has " +
                         std::to_string(sidecar.size()) + " records for " +
                         std::to_string(sentences.size()) + " sentences");
  }
  for (auto& s : sentences) {
    const std::string& id = s.sentence.id;
    auto it = by_id.find(id);
    if (it == by_id.end())
      throw AlignmentError("no annotation record for sentence " + id);
    const AnnotationRecord& r = *it->second;
    const size_t n = s.sentence.tokens.size();
    if (r.tokens.size() != n || r.pos.size() != n || r.heads.size() != n)
      throw AlignmentError("sentence " + id + ": annotation has " +
                           std::to_string(r.pos.size()) + " tags/" +
                           std::to_string(r.heads.size()) + " heads for " +
                           std::to_string(n) + " tokens");
    if (r.tokens != s.sentence.tokens)
      throw AlignmentError("sentence " + id +
                           ": annotation tokens differ from corpus tokens");
    validate_heads(r.heads, static_cast<int>(n), id);
    s.pos.clear();
    for (const auto& tag : r.pos) s.pos.push_back(map_pos_tag(tag));
    s.heads = r.heads;
  }
  return sentences;
}

DependencyGraph build_dependency_graph(const std::vector<int>& heads, int n,
                                       bool self_loops) {
  if (n <= 0) throw RangeError("dependency graph needs at least one word");
  validate_heads(heads, n, "<graph>");
  DependencyGraph g;
  g.n = n;
  g.adjacency = ag::Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    if (heads[i] >= 0) {
      g.adjacency(i, heads[i]) = 1.0;
      g.adjacency(heads[i], i) = 1.0;
    }
    if (self_loops) g.adjacency(i, i) = 1.0;
  }
  g.degree = ag::Matrix::Zero(n, n);
  Eigen::VectorXd inv_sqrt(n);
  for (int i = 0; i < n; ++i) {
    const double d = g.adjacency.row(i).sum();
    g.degree(i, i) = d;
    inv_sqrt(i) = d > 0 ? 1.0 / std::sqrt(d) : 0.0;
  }
  g.normalized = inv_sqrt.asDiagonal() * g.adjacency * inv_sqrt.asDiagonal();
  return g;
}

}  // namespace aste
