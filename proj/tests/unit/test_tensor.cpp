#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "tensor.hpp"

using namespace aste;
using aste::testing::check_gradients;
using aste::testing::random_matrix;

namespace {

ag::Var param(ag::Matrix m) { return ag::Var(std::move(m), true); }

}  // namespace

TEST_CASE("softmax of [1, 0, 0] puts e/(e+2) on the first entry") {
  ag::Matrix x(1, 3);
  x << 1, 0, 0;
  const ag::Matrix p = ag::softmax_rows(ag::constant(x)).value();
  CHECK(p(0, 0) == doctest::Approx(std::exp(1.0) / (std::exp(1.0) + 2)).epsilon(1e-12));
  CHECK(p(0, 0) == doctest::Approx(0.5761).epsilon(1e-4));
  CHECK(p.sum() == doctest::Approx(1.0));
}

TEST_CASE("softmax is stable for large logits") {
  ag::Matrix x(1, 2);
  x << 1000, 999;
  const ag::Matrix p = ag::softmax_rows(ag::constant(x)).value();
  CHECK(std::isfinite(p(0, 0)));
  CHECK(p(0, 0) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
}

TEST_CASE("gelu uses the exact erf form") {
  ag::Matrix x(1, 3);
  x << -1, 0, 1.5;
  const ag::Matrix y = ag::gelu(ag::constant(x)).value();
  for (int k = 0; k < 3; ++k) {
    const double v = x(0, k);
    CHECK(y(0, k) == doctest::Approx(0.5 * v * (1 + std::erf(v / std::sqrt(2.0)))));
  }
}

TEST_CASE("bce with logits matches the textbook formula") {
  ag::Matrix z(3, 1), t(3, 1);
  z << 2.0, -1.0, 0.3;
  t << 1, 0, 1;
  const double pw = 2.5;
  double expect = 0;
  for (int i = 0; i < 3; ++i) {
    const double p = 1 / (1 + std::exp(-z(i, 0)));
    expect += -(pw * t(i, 0) * std::log(p) + (1 - t(i, 0)) * std::log(1 - p));
  }
  CHECK(ag::bce_with_logits_mean(ag::constant(z), t, pw).scalar() ==
        doctest::Approx(expect / 3));
}

TEST_CASE("uniform logits give ln 4 cross-entropy") {
  const std::vector<int> labels{0, 3, 2};
  CHECK(ag::cross_entropy_mean(ag::constant(ag::Matrix::Zero(3, 4)), labels).scalar() ==
        doctest::Approx(std::log(4.0)));
}

TEST_CASE("no-grad scope records nothing") {
  ag::Var a = param(ag::Matrix::Ones(2, 2));
  {
    ag::NoGradGuard guard;
    CHECK_FALSE(ag::grad_enabled());
    CHECK_FALSE(ag::matmul(a, a).requires_grad());
  }
  CHECK(ag::grad_enabled());
  CHECK(ag::matmul(a, a).requires_grad());
}

TEST_CASE("gradients of elementary ops agree with finite differences") {
  std::mt19937_64 rng(11);
  auto in = [&](int r, int c) { return param(random_matrix(r, c, rng)); };

  SUBCASE("matmul, add_row, tanh, sigmoid") {
    std::vector<ag::Var> v{in(3, 4), in(4, 2), in(1, 2)};
    auto g = check_gradients(v, [](std::vector<ag::Var>& x) {
      auto y = ag::add_row(ag::matmul(x[0], x[1]), x[2]);
      return ag::sum(ag::mul(ag::tanh(y), ag::sigmoid(y)));
    });
    CHECK(g.max_rel_error < 1e-6);
  }
  SUBCASE("softmax, log-softmax, transpose") {
    std::vector<ag::Var> v{in(3, 3), in(3, 3)};
    auto g = check_gradients(v, [](std::vector<ag::Var>& x) {
      auto s = ag::softmax_rows(ag::matmul(x[0], ag::transpose(x[0])));
      return ag::sum(ag::add(ag::mul(s, x[1]), ag::log_softmax_rows(x[1])));
    });
    CHECK(g.max_rel_error < 1e-6);
  }
  SUBCASE("layer norm and gelu") {
    std::vector<ag::Var> v{in(3, 5), in(1, 5), in(1, 5), in(3, 5)};
    auto g = check_gradients(v, [](std::vector<ag::Var>& x) {
      return ag::sum(ag::mul(ag::gelu(ag::layer_norm_rows(x[0], x[1], x[2], 1e-5)), x[3]));
    });
    CHECK(g.max_rel_error < 1e-5);
  }
  SUBCASE("concat, slice, gather, pooling") {
    std::vector<ag::Var> v{in(4, 3), in(4, 2), in(6, 5)};
    auto g = check_gradients(v, [](std::vector<ag::Var>& x) {
      const std::vector<ag::Var> parts{x[0], x[1]};
      auto c = ag::concat_cols(parts);
      const std::vector<ag::Var> rows{ag::slice_rows(c, 1, 2), ag::slice_cols(c, 0, 5)};
      auto r = ag::concat_rows(rows);
      const std::vector<int> idx{5, -1, 0, 0, 3, 2};
      auto gth = ag::gather_rows(r, idx);
      auto mp = ag::mean_pool_rows(gth, {{0, 1, 2}, {3, 4}, {5}});
      auto xp = ag::max_pool_rows(x[2], {{0, 1}, {2, 3, 4, 5}});
      return ag::add(ag::sum(ag::mul(mp, mp)), ag::sum(ag::mul(xp, xp)));
    });
    CHECK(g.max_rel_error < 1e-6);
  }
  SUBCASE("losses") {
    std::vector<ag::Var> v{in(6, 1), in(3, 4)};
    ag::Matrix t(6, 1);
    t << 1, 0, 0, 1, 0, 0;
    auto g = check_gradients(v, [&](std::vector<ag::Var>& x) {
      const std::vector<int> labels{3, 0, 2};
      return ag::add(ag::bce_with_logits_mean(x[0], t, 3.0),
                     ag::cross_entropy_mean(x[1], labels));
    });
    CHECK(g.max_rel_error < 1e-6);
  }
}

TEST_CASE("dropout keeps the expectation and is identity without rng") {
  ag::Var a(ag::Matrix::Ones(200, 50));
  CHECK(ag::dropout(a, 0.3, nullptr).value() == a.value());
  std::mt19937_64 rng(5);
  const double m = ag::dropout(a, 0.3, &rng).value().mean();
  CHECK(m == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("backward accumulates through shared subexpressions") {
  ag::Var x = param(ag::Matrix::Constant(1, 1, 3.0));
  ag::Var y = ag::mul(x, x);
  ag::backward(ag::sum(ag::add(y, y)));
  CHECK(x.grad()(0, 0) == doctest::Approx(12.0));
}
