#include <doctest.h>

#include <random>

#include "corpus.hpp"
#include "error.hpp"
#include "oracles.hpp"

using namespace aste;

TEST_CASE("parses a single-word aspect and opinion") {
  auto s = parse_aste_file("The keyboard is comfortable .####[([1], [3], 'POS')]\n");
  REQUIRE(s.size() == 1);
  CHECK(s[0].sentence.tokens ==
        std::vector<std::string>{"The", "keyboard", "is", "comfortable", "."});
  REQUIRE(s[0].gold.size() == 1);
  CHECK(s[0].gold[0].aspect == Span{1, 1});
  CHECK(s[0].gold[0].opinion == Span{3, 3});
  CHECK(s[0].gold[0].sentiment == Sentiment::kPos);
  CHECK(s[0].sentence.id == "s-0001");
}

TEST_CASE("parses multi-word spans") {
  auto s = parse_aste_file("The wine list is very good .####[([0,1,2], [4,5], 'POS')]");
  REQUIRE(s[0].gold.size() == 1);
  CHECK(s[0].gold[0].aspect == Span{0, 2});
  CHECK(s[0].gold[0].opinion == Span{4, 5});
}

TEST_CASE("empty triplet list and blank lines") {
  auto s = parse_aste_file("ok .####[]\n\n  \n");
  REQUIRE(s.size() == 1);
  CHECK(s[0].gold.empty());
}

TEST_CASE("double quotes and id prefixes") {
  ParseOptions opts;
  opts.id_prefix = "r14-";
  auto s = parse_aste_file("a b c####[([0], [2], \"NEG\")]\nd e####[([1], [0], 'NEU')]", opts);
  CHECK(s[1].sentence.id == "r14-0002");
  CHECK(s[0].gold[0].sentiment == Sentiment::kNeg);
  CHECK(s[1].gold[0].sentiment == Sentiment::kNeu);
}

TEST_CASE("malformed lines report their line number") {
  try {
    parse_aste_file("ok .####[]\nbroken line without separator\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_aste_file("a b####[([0], [1], 'POS')"), ParseError);
  CHECK_THROWS_AS(parse_aste_file("a b c####[([0, 2], [1], 'POS')]"), ParseError);
  CHECK_THROWS_AS(parse_aste_file("a b####[([0], [1], 'GREAT')]"), ParseError);
}

TEST_CASE("out-of-range and overlapping spans are rejected") {
  CHECK_THROWS_AS(parse_aste_file("a b####[([0], [2], 'POS')]"), RangeError);
  CHECK_THROWS_AS(parse_aste_file("a b c####[([0, 1], [1, 2], 'POS')]"), RangeError);
}

TEST_CASE("serialize then parse is the identity") {
  std::mt19937_64 rng(3);
  std::vector<AnnotatedSentence> corpus;
  for (int i = 0; i < 40; ++i) {
    AnnotatedSentence s;
    const int n = 1 + static_cast<int>(rng() % 8);
    s.sentence.id = make_sentence_id({}, static_cast<size_t>(i + 1));
    for (int t = 0; t < n; ++t) s.sentence.tokens.push_back("w" + std::to_string(rng() % 20));
    s.gold = testing::random_triplets(n, 3, rng);
    corpus.push_back(s);
  }
  const auto back = parse_aste_file(serialize_aste(corpus));
  REQUIRE(back.size() == corpus.size());
  for (size_t i = 0; i < corpus.size(); ++i) {
    CHECK(back[i].sentence.id == corpus[i].sentence.id);
    CHECK(back[i].sentence.tokens == corpus[i].sentence.tokens);
    CHECK(back[i].gold == corpus[i].gold);
  }
}

TEST_CASE("POS tags collapse to five classes") {
  CHECK(map_pos_tag("NOUN") == PosClass::kNoun);
  CHECK(map_pos_tag("PROPN") == PosClass::kNoun);
  CHECK(map_pos_tag("ADJ") == PosClass::kAdj);
  CHECK(map_pos_tag("AUX") == PosClass::kVerb);
  CHECK(map_pos_tag("ADV") == PosClass::kAdv);
  CHECK(map_pos_tag("PUNCT") == PosClass::kOther);
}

namespace {

std::vector<AnnotatedSentence> five_token(const std::string& id) {
  ParseOptions o;
  o.id_prefix = id;
  return parse_aste_file("The keyboard is comfortable .####[([1], [3], 'POS')]", o);
}

AnnotationRecord record_for(const AnnotatedSentence& s) {
  return AnnotationRecord{s.sentence.id, s.sentence.tokens,
                          {"DET", "NOUN", "AUX", "ADJ", "PUNCT"}, {1, 3, 3, -1, 3}};
}

}  // namespace

TEST_CASE("merging a matching sidecar populates tags and heads") {
  auto corpus = five_token("r14-");
  CHECK(corpus[0].sentence.id == "r14-0001");
  auto merged = merge_annotations(corpus, {record_for(corpus[0])});
  CHECK(merged[0].annotated());
  CHECK(merged[0].pos[1] == PosClass::kNoun);
  CHECK(merged[0].heads == std::vector<int>{1, 3, 3, -1, 3});
}

TEST_CASE("sidecar mismatches are alignment errors") {
  auto corpus = five_token("r14-");
  SUBCASE("too few tags") {
    auto r = record_for(corpus[0]);
    r.pos.pop_back();
    CHECK_THROWS_AS(merge_annotations(corpus, {r}), AlignmentError);
  }
  SUBCASE("missing id") {
    auto r = record_for(corpus[0]);
    r.id = "r14-0002";
    try {
      merge_annotations(corpus, {r});
      FAIL("expected AlignmentError");
    } catch (const AlignmentError& e) {
      CHECK(std::string(e.what()).find("r14-0001") != std::string::npos);
    }
  }
  SUBCASE("retokenized") {
    auto r = record_for(corpus[0]);
    r.tokens[0] = "the";
    CHECK_THROWS_AS(merge_annotations(corpus, {r}), AlignmentError);
  }
}

TEST_CASE("head lists must form a single tree") {
  CHECK_NOTHROW(validate_heads({1, -1, 1}, 3, "x"));
  CHECK_THROWS_AS(validate_heads({-1, -1, 1}, 3, "x"), GraphError);
  CHECK_THROWS_AS(validate_heads({1, 0, -1}, 3, "x"), GraphError);
  CHECK_THROWS_AS(validate_heads({1, -1, 5}, 3, "x"), RangeError);
}

TEST_CASE("sidecar JSON lines round-trip") {
  auto corpus = five_token("s-");
  const std::vector<AnnotationRecord> recs{record_for(corpus[0])};
  const auto back = parse_sidecar(serialize_sidecar(recs));
  REQUIRE(back.size() == 1);
  CHECK(back[0].id == recs[0].id);
  CHECK(back[0].pos == recs[0].pos);
  CHECK(back[0].heads == recs[0].heads);
  CHECK_THROWS_AS(parse_sidecar("{not json}\n"), ParseError);
}

TEST_CASE("two-node graph with self-loops") {
  const auto g = build_dependency_graph({-1, 0}, 2);
  CHECK(g.adjacency == ag::Matrix::Ones(2, 2));
  CHECK(g.degree(0, 0) == 2);
  CHECK(g.degree(1, 1) == 2);
  CHECK(g.normalized.isApprox(ag::Matrix::Constant(2, 2, 0.5)));
}

TEST_CASE("single node graph normalizes to one") {
  const auto g = build_dependency_graph({-1}, 1);
  CHECK(g.adjacency(0, 0) == 1);
  CHECK(g.normalized(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("three-node star has bounded spectrum") {
  const auto g = build_dependency_graph({1, -1, 1}, 3);
  const Eigen::VectorXd rows = g.adjacency.rowwise().sum();
  CHECK(rows(0) == 2);
  CHECK(rows(1) == 3);
  CHECK(rows(2) == 2);
  CHECK(g.normalized.isApprox(g.normalized.transpose()));
  CHECK(testing::spectral_radius(g.normalized) <= 1.0 + 1e-9);
}

TEST_CASE("without self-loops an isolated node normalizes to zero") {
  const auto g = build_dependency_graph({-1}, 1, false);
  CHECK(g.normalized(0, 0) == 0.0);
  const auto g2 = build_dependency_graph({-1, 0, 1}, 3, false);
  CHECK(g2.adjacency.diagonal().sum() == 0);
  CHECK(testing::spectral_radius(g2.normalized) <= 1.0 + 1e-9);
}
