#include <doctest.h>

#include "align.hpp"
#include "error.hpp"

using namespace aste;

namespace {

WordPieceTokenizer small_vocab(int max_length = 512) {
  return WordPieceTokenizer({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "good", "wine",
                             "list", "play", "##abi", "##lity", ",", "."},
                            true, max_length);
}

}  // namespace

TEST_CASE("one subword per word aligns one-to-one") {
  auto enc = tokenize_with_alignment({"wine", "list"}, small_vocab());
  REQUIRE(enc.alignment.spans.size() == 2);
  CHECK(enc.alignment.spans[0] == Span{0, 0});
  CHECK(enc.alignment.spans[1] == Span{1, 1});
  CHECK(enc.ids.front() == small_vocab().cls_id());
  CHECK(enc.ids.back() == small_vocab().sep_id());
}

TEST_CASE("a split word covers all of its pieces") {
  const auto tok = small_vocab();
  CHECK(tok.tokenize_word("playability").size() == 3);
  auto enc = tokenize_with_alignment({"playability"}, tok);
  CHECK(enc.alignment.spans[0] == Span{0, 2});
  CHECK(tok.detokenize(tok.tokenize_word("Playability")) == "playability");
  auto one = tokenize_with_alignment({"good"}, tok);
  CHECK(one.alignment.spans[0] == Span{0, 0});
}

TEST_CASE("unknown words map to the unknown piece") {
  const auto tok = small_vocab();
  CHECK(tok.tokenize_word("zzz") == std::vector<int>{tok.unk_id()});
  auto enc = tokenize_with_alignment({"good", "zzz", "."}, tok);
  CHECK(enc.alignment.spans[1] == Span{1, 1});
}

TEST_CASE("punctuation inside a word is split off") {
  const auto tok = small_vocab();
  CHECK(tok.tokenize_word("good,").size() == 2);
}

TEST_CASE("overlong sentences are rejected, not truncated") {
  const auto tok = small_vocab(4);
  CHECK_NOTHROW(tokenize_with_alignment({"good", "wine"}, tok));
  CHECK_THROWS_AS(tokenize_with_alignment({"good", "wine", "list"}, tok), RangeError);
}

TEST_CASE("pooling averages the subword states of each word") {
  AlignmentMap single{{Span{0, 0}}};
  ag::Matrix s1(3, 2);
  s1 << 9, 9, 1, 2, 9, 9;
  CHECK(pool_subwords(ag::constant(s1), single).value() == (ag::Matrix(1, 2) << 1, 2).finished());

  AlignmentMap pair{{Span{0, 1}}};
  ag::Matrix s2(4, 2);
  s2 << 0, 0, 1, 3, 3, 5, 0, 0;
  CHECK(pool_subwords(ag::constant(s2), pair).value() == (ag::Matrix(1, 2) << 2, 4).finished());
}

TEST_CASE("pooling five subwords into three words gives three rows") {
  AlignmentMap m{{Span{0, 1}, Span{2, 2}, Span{3, 4}}};
  ag::Matrix states = ag::Matrix::Random(7, 4);
  auto out = pool_subwords(ag::constant(states), m);
  CHECK(out.rows() == 3);
  CHECK(out.value().row(1).isApprox(states.row(3)));
  CHECK_THROWS_AS(pool_subwords(ag::constant(ag::Matrix::Zero(6, 4)), m), AlignmentError);
}

TEST_CASE("alignment must be contiguous and complete") {
  CHECK_NOTHROW(validate_alignment({{Span{0, 1}, Span{2, 2}}}, 3));
  CHECK_THROWS(validate_alignment({{Span{0, 1}, Span{3, 3}}}, 4));
  CHECK_THROWS(validate_alignment({{Span{0, 1}}}, 3));
}

TEST_CASE("corpus vocabulary covers every word it was built from") {
  const std::vector<std::vector<std::string>> corpus{{"The", "wine", "list"},
                                                     {"very", "good", "."}};
  const auto tok = WordPieceTokenizer::build_from_corpus(corpus);
  for (const auto& s : corpus)
    for (const auto& w : s) {
      const auto ids = tok.tokenize_word(w);
      CHECK(ids.size() == 1);
      CHECK(ids[0] != tok.unk_id());
    }
  CHECK(tok.tokenize_word("vine").size() > 1);
}
