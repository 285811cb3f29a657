#include "annotator.hpp"

#include <array>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "error.hpp"

namespace aste {

namespace {

const std::unordered_map<std::string, std::string>& lexicon() {
  static const auto* table = [] {
    auto* m = new std::unordered_map<std::string, std::string>;
    auto put = [&](std::initializer_list<const char*> words, const char* tag) {
      for (const char* w : words) m->emplace(w, tag);
    };
    put({"the", "a", "an", "this", "that", "these", "those", "every", "each",
         "some", "any", "no", "all", "both"},
        "DET");
    put({"i", "you", "he", "she", "it", "we", "they", "me", "him", "her", "us",
         "them", "my", "your", "his", "its", "our", "their", "mine", "yours",
         "myself", "itself", "everything", "something", "nothing", "anything",
         "everyone", "one", "what", "who", "which", "whom", "whose"},
        "PRON");
    put({"in", "on", "at", "of", "for", "with", "to", "from", "by", "about",
         "than", "into", "over", "after", "before", "under", "during", "without",
         "through", "between", "like", "as", "near", "around"},
        "ADP");
    put({"and", "or", "but", "nor", "yet"}, "CCONJ");
    put({"if", "because", "while", "although", "though", "since", "unless",
         "whether"},
        "SCONJ");
    put({"is", "are", "was", "were", "be", "been", "being", "am", "has", "have",
         "had", "do", "does", "did", "will", "would", "can", "could", "should",
         "may", "might", "must", "shall", "'s", "'re", "'m", "'ve", "'ll", "'d",
         "ca", "wo"},
        "AUX");
    put({"not", "n't", "never", "very", "really", "too", "so", "quite",
         "just", "also", "always", "still", "even", "only", "well", "here",
         "there", "again", "already", "soon", "pretty", "extremely", "rather",
         "almost", "definitely", "highly", "more", "most", "less", "least",
         "then", "now", "when", "where", "how", "why", "ever"},
        "ADV");
    put({"good", "great", "bad", "nice", "excellent", "poor", "high", "low",
         "fresh", "delicious", "tasty", "friendly", "rude", "slow", "fast",
         "cheap", "expensive", "small", "large", "big", "little", "new", "old",
         "best", "worst", "better", "worse", "amazing", "awful", "terrible",
         "perfect", "fine", "clean", "dirty", "hot", "cold", "warm", "quick",
         "long", "short", "easy", "hard", "happy", "sad", "pleasant", "attentive",
         "decent", "mediocre", "reasonable", "overpriced", "wonderful",
         "fantastic", "horrible", "outstanding", "superb", "bland", "light",
         "heavy", "quiet", "loud", "strong", "weak", "beautiful", "ugly",
         "comfortable", "reliable", "responsive", "sturdy", "smooth", "sharp",
         "bright", "dim", "crisp", "fabulous", "incredible", "lovely", "tiny",
         "huge", "generous", "stale", "soggy", "crowded", "spacious", "cozy",
         "authentic", "favorite", "other", "same", "different", "many", "few",
         "much", "several"},
        "ADJ");
    put({"get", "got", "go", "went", "come", "came", "make", "made", "take",
         "took", "love", "loved", "like", "liked", "hate", "hated", "recommend",
         "say", "said", "eat", "ate", "order", "ordered", "try", "tried", "want",
         "need", "buy", "bought", "use", "used", "work", "works", "run", "runs",
         "came", "seems", "seem", "looks", "look", "feel", "feels", "keep",
         "enjoy", "enjoyed", "serve", "served", "wait", "waited", "know", "think",
         "thought", "give", "gave", "see", "saw", "find", "found"},
        "VERB");
    return m;
  }();
  return *table;
}

std::string ascii_lower(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() > suffix.size() + 1 &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool all_punct(const std::string& s) {
  for (char c : s)
    if (!std::ispunct(static_cast<unsigned char>(c))) return false;
  return !s.empty();
}

bool numeric(const std::string& s) {
  bool digit = false;
  for (char c : s) {
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digit = true;
    } else if (c != '.' && c != ',' && c != '$' && c != '%') {
      return false;
    }
  }
  return digit;
}

bool nominal(const std::string& tag) { return tag == "NOUN" || tag == "PROPN"; }

}  // namespace

std::string HeuristicAnnotator::tag_word(const std::string& word) {
  const std::string w = ascii_lower(word);
  if (all_punct(w)) return "PUNCT";
  if (numeric(w)) return "NUM";
  if (auto it = lexicon().find(w); it != lexicon().end()) return it->second;
  if (ends_with(w, "ly")) return "ADV";
  for (const char* suf : {"ous", "ful", "ive", "able", "ible", "less", "ic",
                          "ish", "est", "ary"})
    if (ends_with(w, suf)) return "ADJ";
  for (const char* suf : {"ing", "ed", "ize", "ise"})
    if (ends_with(w, suf)) return "VERB";
  if (!word.empty() && std::isupper(static_cast<unsigned char>(word[0])))
    return "PROPN";
  return "NOUN";
}

std::vector<int> HeuristicAnnotator::attach_heads(const std::vector<std::string>& tags) {
  const int n = static_cast<int>(tags.size());
  std::vector<int> heads(static_cast<size_t>(n), -1);
  if (n == 0) return heads;
  int root = -1;
  for (const char* want : {"VERB", "AUX", "ADJ", "NOUN", "PROPN"}) {
    for (int i = 0; i < n && root < 0; ++i)
      if (tags[static_cast<size_t>(i)] == want) root = i;
    if (root >= 0) break;
  }
  if (root < 0) root = 0;
  // Every non-root word attaches either to the root or to a nominal that
  // itself attaches to the root, so the result is always a tree.
  for (int i = 0; i < n; ++i) {
    if (i == root) continue;
    const std::string& t = tags[static_cast<size_t>(i)];
    int head = root;
    if (t == "DET" || t == "ADJ" || t == "NUM" || t == "PRON" || nominal(t)) {
      for (int j = i + 1; j < n; ++j) {
        const std::string& tj = tags[static_cast<size_t>(j)];
        if (nominal(tj)) {
          if (j != root && !(nominal(t))) head = j;
          break;
        }
        if (tj != "ADJ" && tj != "DET" && tj != "NUM" && tj != "ADV") break;
      }
    }
    heads[static_cast<size_t>(i)] = head;
  }
  heads[static_cast<size_t>(root)] = -1;
  return heads;
}

std::vector<AnnotationResult> HeuristicAnnotator::annotate(
    const std::vector<Sentence>& sentences) {
  std::vector<AnnotationResult> out;
  out.reserve(sentences.size());
  for (const Sentence& s : sentences) {
    AnnotationResult r;
    r.record.id = s.id;
    r.record.tokens = s.tokens;
    for (const auto& tok : s.tokens) r.record.pos.push_back(tag_word(tok));
    r.record.heads = attach_heads(r.record.pos);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<AnnotationResult> CommandAnnotator::annotate(
    const std::vector<Sentence>& sentences) {
  namespace fs = std::filesystem;
  std::random_device rd;
  const fs::path input =
      fs::temp_directory_path() / ("aste-annotate-" + std::to_string(rd()) + ".jsonl");
  {
    std::ofstream f(input);
    if (!f) throw IoError("cannot create " + input.string());
    for (const Sentence& s : sentences) {
      nlohmann::ordered_json j;
      j["id"] = s.id;
      j["tokens"] = s.tokens;
      f << j.dump() << '\n';
    }
  }
  const std::string cmd = command_ + " '" + input.string() + "'";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) {
    fs::remove(input);
    throw IoError("cannot start annotator: " + command_);
  }
  std::string output;
  std::array<char, 4096> buf{};
  size_t got = 0;
  while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) output.append(buf.data(), got);
  const int status = pclose(pipe);
  fs::remove(input);
  if (status != 0)
    throw IoError("annotator command exited with status " + std::to_string(status));

  std::unordered_map<std::string, AnnotationResult> by_id;
  std::istringstream lines(output);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    AnnotationResult r;
    try {
      const auto j = nlohmann::json::parse(line);
      r.record.id = j.at("id").get<std::string>();
      if (j.contains("error")) {
        r.error = j.at("error").get<std::string>();
      } else {
        r.record.tokens = j.at("tokens").get<std::vector<std::string>>();
        r.record.pos = j.at("pos").get<std::vector<std::string>>();
        r.record.heads = j.at("heads").get<std::vector<int>>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("annotator output: ") + e.what());
    }
    by_id[r.record.id] = std::move(r);
  }
  std::vector<AnnotationResult> out;
  for (const Sentence& s : sentences) {
    auto it = by_id.find(s.id);
    if (it == by_id.end()) {
      AnnotationResult missing;
      missing.record.id = s.id;
      missing.error = "annotator produced no record";
      out.push_back(std::move(missing));
    } else {
      out.push_back(std::move(it->second));
    }
  }
  return out;
}

std::unique_ptr<Annotator> make_annotator(const std::string& backend) {
  if (backend == "heuristic") return std::make_unique<HeuristicAnnotator>();
  if (backend.rfind("cmd:", 0) == 0 && backend.size() > 4)
    return std::make_unique<CommandAnnotator>(backend.substr(4));
  throw ConfigError("unknown annotator backend '" + backend +
                    "' (expected 'heuristic' or 'cmd:<command>')");
}

void check_annotation(const Sentence& s, const AnnotationRecord& r) {
  if (r.id != s.id)
    throw AlignmentError("annotation id " + r.id + " does not match sentence " + s.id);
  if (r.tokens != s.tokens)
    throw AlignmentError("sentence " + s.id + ": annotator retokenized the input");
  if (r.pos.size() != s.tokens.size() || r.heads.size() != s.tokens.size())
    throw AlignmentError("sentence " + s.id + ": annotation length mismatch");
  validate_heads(r.heads, s.size(), s.id);
}

std::vector<AnnotationRecord> annotate_corpus(const std::vector<Sentence>& sentences,
                                              Annotator& annotator) {
  for (const Sentence& s : sentences) {
    for (const auto& tok : s.tokens) {
      if (tok.empty() || tok.find_first_of(" \t\r\n") != std::string::npos)
        throw ParseError("sentence " + s.id + ": token '" + tok +
                         "' is empty or contains whitespace");
    }
  }
  auto results = annotator.annotate(sentences);
  if (results.size() != sentences.size())
    throw AlignmentError("annotator returned " + std::to_string(results.size()) +
                         " records for " + std::to_string(sentences.size()) +
                         " sentences");
  std::vector<AnnotationRecord> out;
  for (size_t i = 0; i < sentences.size(); ++i) {
    if (!results[i].ok())
      throw AlignmentError("sentence " + sentences[i].id + ": " + results[i].error);
    check_annotation(sentences[i], results[i].record);
    out.push_back(std::move(results[i].record));
  }
  return out;
}

}  // namespace aste
