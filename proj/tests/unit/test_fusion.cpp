#include <doctest.h>

#include <cmath>
#include <random>

#include "config.hpp"
#include "fusion.hpp"
#include "oracles.hpp"

using namespace aste;
using aste::testing::random_matrix;

namespace {

ag::Matrix row_softmax(const ag::Matrix& z) {
  ag::Matrix out(z.rows(), z.cols());
  for (ag::Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    double s = 0;
    for (ag::Index j = 0; j < z.cols(); ++j) s += std::exp(z(i, j) - m);
    for (ag::Index j = 0; j < z.cols(); ++j) out(i, j) = std::exp(z(i, j) - m) / s;
  }
  return out;
}

ModelConfig small_config(int layers) {
  ModelConfig c;
  c.d_b = 6;
  c.lstm_hidden = 3;
  c.gcn_layers = 2;
  c.interaction_layers = layers;
  c.dropout = 0.0;
  return c;
}

}  // namespace

TEST_CASE("attention over equal rows is uniform") {
  const ag::Matrix a = attention_scores(ag::constant(ag::Matrix::Zero(2, 3))).value();
  CHECK(a.isApprox(ag::Matrix::Constant(2, 2, 0.5)));
  const ag::Matrix one = attention_scores(ag::constant(ag::Matrix::Ones(1, 4))).value();
  CHECK(one(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("orthonormal rows give e/(e+2) on the diagonal") {
  const ag::Matrix a = attention_scores(ag::constant(ag::Matrix::Identity(3, 3))).value();
  const double e = std::exp(1.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(a(i, j) == doctest::Approx(i == j ? e / (e + 2) : 1 / (e + 2)));
}

TEST_CASE("one interaction with uniform attention") {
  AttentionMaps maps{ag::constant(ag::Matrix::Identity(2, 2)),
                     ag::constant(ag::Matrix::Constant(2, 2, 0.5))};
  const ag::Matrix hb = (ag::Matrix(2, 1) << 2, 4).finished();
  const ag::Matrix hp = (ag::Matrix(2, 1) << 1, -3).finished();
  const auto f = interact_once(ag::constant(hb), ag::constant(hp), maps, 0.3, nullptr);
  CHECK(f.h_b.value() == (ag::Matrix(2, 1) << 5, 7).finished());
  CHECK(f.h_p.value() == 2 * hp);
  std::mt19937_64 rng(1);
  const auto z = interact_once(ag::constant(hb), ag::constant(hp), maps, 0.0, &rng);
  CHECK(z.h_b.value() == f.h_b.value());
}

TEST_CASE("a single round equals attention plus residual") {
  std::mt19937_64 rng(2);
  ParamStore store;
  const auto c = small_config(1);
  InteractionStack stack(store, "fusion", c, rng);
  CHECK(store.entries().empty());
  const ag::Matrix hb = random_matrix(4, 6, rng), hp = random_matrix(4, 6, rng);
  const auto g = build_dependency_graph({1, -1, 1, 2}, 4);
  InteractionStack::Refresh identity = [](const ag::Var& h, const DependencyGraph&, int) {
    return h;
  };
  const ag::Matrix out =
      stack.forward(ag::constant(hb), ag::constant(hp), g, nullptr, &identity).value();
  const ag::Matrix alpha_p = row_softmax(hp * hp.transpose());
  CHECK(out.isApprox(alpha_p * hb + hb, 1e-12));
}

TEST_CASE("two rounds equal a hand unroll with GCN and BiLSTM refresh") {
  std::mt19937_64 rng(3);
  ParamStore store;
  const auto c = small_config(2);
  InteractionStack stack(store, "fusion", c, rng);
  const ag::Matrix hb = random_matrix(5, 6, rng, 0.5), hp = random_matrix(5, 6, rng, 0.5);
  const std::vector<int> heads{1, -1, 1, 2, 1};
  const auto g = build_dependency_graph(heads, 5);
  const ag::Matrix out = stack.forward(ag::constant(hb), ag::constant(hp), g, nullptr).value();

  const ag::Matrix b1 = row_softmax(hp * hp.transpose()) * hb + hb;
  ag::Matrix p1 = row_softmax(hb * hb.transpose()) * hp + hp;
  const auto& r = stack.refresh_params(0);
  for (const auto& w : r.gcn) p1 = (g.normalized * p1 * w.value()).cwiseMax(0.0);
  const auto& f = r.lstm.fwd();
  const auto& b = r.lstm.bwd();
  ag::Matrix p_next(5, 6);
  p_next << testing::reference_lstm(p1, f.w_ih.value(), f.w_hh.value(), f.bias.value(), false),
      testing::reference_lstm(p1, b.w_ih.value(), b.w_hh.value(), b.bias.value(), true);
  const ag::Matrix b2 = row_softmax(p_next * p_next.transpose()) * b1 + b1;
  CHECK((out - b2).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(out.rows() == 5);
  CHECK(out.cols() == 6);
}

TEST_CASE("refresh parameters exist only between rounds") {
  std::mt19937_64 rng(4);
  for (int layers : {1, 2, 3}) {
    ParamStore store;
    InteractionStack stack(store, "fusion", small_config(layers), rng);
    int gcn = 0;
    for (const auto& [name, e] : store.entries())
      if (name.find(".gcn.") != std::string::npos) ++gcn;
    CHECK(gcn == 2 * (layers - 1));
  }
  ParamStore shared;
  auto c = small_config(3);
  c.share_interaction_params = true;
  InteractionStack stack(shared, "fusion", c, rng);
  CHECK(shared.contains("fusion.shared.gcn.0.w"));
  CHECK_FALSE(shared.contains("fusion.1.gcn.0.w"));
}

TEST_CASE("multi-head interaction splits columns") {
  std::mt19937_64 rng(5);
  const ag::Matrix hb = random_matrix(3, 4, rng), hp = random_matrix(3, 4, rng);
  const auto f = interact_heads(ag::constant(hb), ag::constant(hp), 2, 0.0, nullptr);
  for (int h = 0; h < 2; ++h) {
    const ag::Matrix bb = hb.middleCols(2 * h, 2), pp = hp.middleCols(2 * h, 2);
    CHECK(f.h_b.value().middleCols(2 * h, 2).isApprox(row_softmax(pp * pp.transpose()) * bb + bb));
  }
}
