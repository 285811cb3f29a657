#include <doctest.h>

#include <cmath>
#include <random>

#include "bdtf_head.hpp"
#include "error.hpp"
#include "oracles.hpp"

using namespace aste;
using aste::testing::random_matrix;

namespace {

double gelu(double x) { return 0.5 * x * (1 + std::erf(x / std::sqrt(2.0))); }

RelationTensor random_table(int n, int d, std::mt19937_64& rng) {
  RelationTensor r;
  r.n = n;
  r.d = d;
  r.values = ag::constant(random_matrix(n * n, d, rng));
  return r;
}

ConvLayer zero_conv(int d) {
  ConvLayer layer;
  for (auto& t : layer.taps) t = ag::constant(ag::Matrix::Zero(d, d));
  layer.bias = ag::constant(ag::Matrix::Zero(1, d));
  return layer;
}

CandidateRegion candidate(Cell s, Cell e, std::array<double, 4> dist) {
  return CandidateRegion{s, e, dist};
}

}  // namespace

TEST_CASE("relation of a single word is gelu of that row") {
  const ag::Matrix h = (ag::Matrix(2, 2) << 0.3, -1.2, 2.0, 0.1).finished();
  const ag::Var id = ag::constant(ag::Matrix::Identity(2, 2));
  const ag::Var zero = ag::constant(ag::Matrix::Zero(1, 2));
  const ag::Matrix r = relation_representation(ag::constant(h), 1, 1, id, zero).value();
  CHECK(r(0, 0) == doctest::Approx(gelu(2.0)));
  CHECK(r(0, 1) == doctest::Approx(gelu(0.1)));
}

TEST_CASE("constant rows give the same relation for any slice length") {
  std::mt19937_64 rng(1);
  const ag::Matrix h = ag::Matrix::Constant(5, 3, 0.7);
  const ag::Var w = ag::constant(random_matrix(3, 4, rng));
  const ag::Var b = ag::constant(random_matrix(1, 4, rng));
  const auto r02 = relation_representation(ag::constant(h), 0, 2, w, b).value();
  const auto r44 = relation_representation(ag::constant(h), 4, 4, w, b).value();
  CHECK(r02.isApprox(r44));
  const auto zero = relation_representation(ag::constant(ag::Matrix::Zero(3, 3)), 0, 2, w,
                                            ag::constant(ag::Matrix::Zero(1, 4)))
                        .value();
  CHECK(zero.isZero());
  CHECK_THROWS_AS(relation_representation(ag::constant(h), 0, 5, w, b), RangeError);
}

TEST_CASE("relation table is n x n and symmetric") {
  std::mt19937_64 rng(2);
  const ag::Var h = ag::constant(random_matrix(3, 4, rng));
  const ag::Var w = ag::constant(random_matrix(4, 5, rng));
  const ag::Var b = ag::constant(random_matrix(1, 5, rng));
  const auto t = build_relation_tensor(h, w, b);
  CHECK(t.values.rows() == 9);
  CHECK(t.d == 5);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      CHECK(t.cell(i, j).isApprox(t.cell(j, i)));
      CHECK(t.cell(i, j).isApprox(relation_representation(h, i, j, w, b).value()));
    }
  CHECK(build_relation_tensor(ag::constant(random_matrix(1, 4, rng)), w, b).values.rows() == 1);
}

TEST_CASE("zero kernels make the residual CNN the identity") {
  std::mt19937_64 rng(3);
  const auto r = random_table(4, 3, rng);
  const auto out = resnet_cnn(r, {zero_conv(3), zero_conv(3)});
  CHECK(out.values.value() == r.values.value());
}

TEST_CASE("single-cell convolution uses only the centre tap") {
  std::mt19937_64 rng(4);
  RelationTensor r;
  r.n = 1;
  r.d = 1;
  r.values = ag::constant((ag::Matrix(1, 1) << 0.8).finished());
  ConvLayer layer = zero_conv(1);
  for (int t = 0; t < 9; ++t) layer.taps[static_cast<size_t>(t)] = ag::constant(
      (ag::Matrix(1, 1) << (t == 4 ? 1.5 : 100.0)).finished());
  layer.bias = ag::constant((ag::Matrix(1, 1) << -0.2).finished());
  const double out = resnet_cnn(r, {layer}).values.scalar();
  CHECK(out == doctest::Approx(std::max(0.0, 1.5 * 0.8 - 0.2) + 0.8));
}

TEST_CASE("convolution matches a direct 3x3 loop") {
  std::mt19937_64 rng(5);
  const int n = 4, d = 2;
  const auto r = random_table(n, d, rng);
  ConvLayer layer;
  for (auto& t : layer.taps) t = ag::constant(random_matrix(d, d, rng));
  layer.bias = ag::constant(random_matrix(1, d, rng));
  const ag::Matrix got = conv3x3(r, layer).value();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Eigen::RowVectorXd acc = layer.bias.value().row(0);
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int si = i + dy, sj = j + dx;
          if (si < 0 || sj < 0 || si >= n || sj >= n) continue;
          acc += r.cell(si, sj) * layer.taps[static_cast<size_t>((dy + 1) * 3 + dx + 1)].value();
        }
      CHECK(got.row(i * n + j).isApprox(acc));
    }
}

TEST_CASE("top-k orders by probability with row-major ties") {
  const ag::Matrix g = (ag::Matrix(2, 2) << 0.9, 0.1, 0.2, 0.8).finished();
  auto cells = top_k_cells(g, 2);
  REQUIRE(cells.size() == 2);
  CHECK(cells[0] == Cell{0, 0});
  CHECK(cells[1] == Cell{1, 1});
  auto ties = top_k_cells(ag::Matrix::Constant(2, 2, 0.5), 2);
  CHECK(ties[0] == Cell{0, 0});
  CHECK(ties[1] == Cell{0, 1});
  CHECK(top_k_cells(g, 5).size() == 4);
  CHECK_THROWS_AS(top_k_cells(g, 0), RangeError);
}

TEST_CASE("candidate assembly keeps only above-left pairs") {
  auto one = assemble_candidates({Cell{0, 3}}, {Cell{2, 4}});
  REQUIRE(one.size() == 1);
  CHECK(one[0] == CellPair{Cell{0, 3}, Cell{2, 4}});
  CHECK(assemble_candidates({Cell{2, 2}}, {Cell{0, 0}}).empty());
  CHECK(assemble_candidates({Cell{0, 0}, Cell{1, 0}}, {Cell{2, 2}, Cell{1, 3}}).size() == 4);
}

TEST_CASE("region classification") {
  std::mt19937_64 rng(6);
  const auto r = random_table(3, 2, rng);
  ClassifierParams p{ag::constant(random_matrix(6, 4, rng)),
                     ag::constant(random_matrix(1, 4, rng))};
  const auto dist = classify_region(r, Cell{0, 1}, Cell{2, 2}, p);
  double s = 0;
  for (double v : dist) s += v;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));

  const ag::Matrix logits = region_logits(r, {{Cell{1, 2}, Cell{1, 2}}}, p).value();
  Eigen::RowVectorXd features(6);
  features << r.cell(1, 2), r.cell(1, 2), r.cell(1, 2);
  CHECK(logits.isApprox(features * p.w.value() + p.b.value()));

  ClassifierParams zero{ag::constant(ag::Matrix::Zero(6, 4)),
                        ag::constant(ag::Matrix::Zero(1, 4))};
  for (double v : classify_region(r, Cell{0, 0}, Cell{1, 1}, zero))
    CHECK(v == doctest::Approx(0.25));
  CHECK_THROWS_AS(classify_region(r, Cell{2, 0}, Cell{1, 1}, p), RangeError);
}

TEST_CASE("decoding maps corners to spans and drops INVALID") {
  auto t = decode_triplets({candidate(Cell{0, 3}, Cell{2, 4}, {0.7, 0.1, 0.1, 0.1})});
  REQUIRE(t.size() == 1);
  CHECK(t[0].aspect == Span{0, 2});
  CHECK(t[0].opinion == Span{3, 4});
  CHECK(t[0].sentiment == Sentiment::kPos);
  CHECK(decode_triplets({candidate(Cell{0, 0}, Cell{0, 0}, {0.1, 0.1, 0.1, 0.7})}).empty());
}

TEST_CASE("duplicate spans keep the most confident sentiment") {
  auto t = decode_triplets({candidate(Cell{0, 2}, Cell{0, 2}, {0.6, 0.2, 0.1, 0.1}),
                            candidate(Cell{0, 2}, Cell{0, 2}, {0.1, 0.1, 0.7, 0.1})});
  REQUIRE(t.size() == 1);
  CHECK(t[0].sentiment == Sentiment::kNeg);
}

TEST_CASE("gold grids mark one start and one end per triplet") {
  const std::vector<Triplet> gold{{Span{0, 2}, Span{4, 5}, Sentiment::kPos},
                                  {Span{9, 9}, Span{11, 11}, Sentiment::kNeg}};
  const auto g = encode_gold_grids(gold, 13);
  CHECK(g.start.sum() == 2);
  CHECK(g.end.sum() == 2);
  CHECK(g.start(0, 4) == 1);
  CHECK(g.end(2, 5) == 1);
  CHECK(g.regions.size() == 2);
  const auto empty = encode_gold_grids({}, 4);
  CHECK(empty.start.isZero());
  CHECK(empty.end.isZero());
  const std::vector<Triplet> conflict{{Span{0, 0}, Span{1, 1}, Sentiment::kPos},
                                      {Span{0, 0}, Span{1, 1}, Sentiment::kNeg}};
  CHECK_THROWS_AS(encode_gold_grids(conflict, 3), RangeError);
}

TEST_CASE("gold grids through a perfect oracle decode back to gold") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 8);
    const auto gold = testing::random_triplets(n, 4, rng);
    const auto g = encode_gold_grids(gold, n);
    std::vector<Cell> starts, ends;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (g.start(i, j) > 0) starts.push_back(Cell{i, j});
        if (g.end(i, j) > 0) ends.push_back(Cell{i, j});
      }
    std::vector<CandidateRegion> cands;
    for (const auto& pair : assemble_candidates(starts, ends)) {
      std::array<double, 4> dist{0, 0, 0, 1};
      if (auto it = g.regions.find(pair); it != g.regions.end()) {
        dist = {0, 0, 0, 0};
        dist[static_cast<size_t>(it->second)] = 1;
      }
      cands.push_back(candidate(pair.first, pair.second, dist));
    }
    CHECK(decode_triplets(cands) == testing::enumerate_regions(gold, n));
    CHECK(testing::enumerate_regions(gold, n) == gold);
  }
}

TEST_CASE("loss totals and the uniform-class value") {
  const int n = 3;
  const std::vector<Triplet> gold{{Span{0, 0}, Span{2, 2}, Sentiment::kNeu}};
  const auto g = encode_gold_grids(gold, n);
  const std::vector<CellPair> pairs{{Cell{0, 2}, Cell{0, 2}}, {Cell{0, 0}, Cell{1, 1}}};
  const auto loss = compute_loss(ag::constant(ag::Matrix::Zero(9, 1)),
                                 ag::constant(ag::Matrix::Zero(9, 1)),
                                 ag::constant(ag::Matrix::Zero(2, 4)), pairs, g);
  CHECK(loss.l_sentiment == doctest::Approx(std::log(4.0)));
  CHECK(loss.l_start == doctest::Approx(std::log(2.0)));
  CHECK(loss.total == loss.l_start + loss.l_end + loss.l_sentiment);
  CHECK(loss.objective.scalar() == doctest::Approx(loss.total));
}

TEST_CASE("loss vanishes as predictions approach gold") {
  const int n = 3;
  const std::vector<Triplet> gold{{Span{0, 0}, Span{2, 2}, Sentiment::kNeu}};
  const auto g = encode_gold_grids(gold, n);
  const std::vector<CellPair> pairs{{Cell{0, 2}, Cell{0, 2}}, {Cell{0, 0}, Cell{1, 1}}};
  double previous = 1e9;
  for (double eps : {1e-2, 1e-4, 1e-8}) {
    const double z = std::log((1 - eps) / eps);
    auto grid = [&](const ag::Matrix& gold_grid) {
      ag::Matrix m(9, 1);
      for (int k = 0; k < 9; ++k) m(k, 0) = gold_grid.data()[k] > 0 ? z : -z;
      return ag::constant(m);
    };
    ag::Matrix cls = ag::Matrix::Constant(2, 4, -z);
    cls(0, 1) = z;
    cls(1, 3) = z;
    const auto loss = compute_loss(grid(g.start), grid(g.end), ag::constant(cls), pairs, g);
    CHECK(loss.total >= 0);
    CHECK(loss.total < previous);
    previous = loss.total;
  }
  CHECK(previous < 1e-6);
}

TEST_CASE("no candidates contributes no sentiment loss") {
  const auto g = encode_gold_grids({}, 2);
  const auto loss = compute_loss(ag::constant(ag::Matrix::Zero(4, 1)),
                                 ag::constant(ag::Matrix::Zero(4, 1)), ag::Var(), {}, g);
  CHECK(loss.l_sentiment == 0.0);
}
