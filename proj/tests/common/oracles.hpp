#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "bdtf_head.hpp"
#include "corpus.hpp"
#include "tensor.hpp"

namespace aste::testing {

inline ag::Matrix random_matrix(int rows, int cols, std::mt19937_64& rng,
                                double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  ag::Matrix m(rows, cols);
  for (ag::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

struct GradCheck {
  double max_rel_error = 0.0;
  int checked = 0;
};

// Five-point central differences over every entry of every input, against
// the tape gradient of the scalar f(inputs).
inline GradCheck check_gradients(std::vector<ag::Var>& inputs,
                                 const std::function<ag::Var(std::vector<ag::Var>&)>& f,
                                 double h = 1e-4) {
  for (auto& v : inputs) v.zero_grad();
  ag::backward(f(inputs));
  GradCheck out;
  for (auto& v : inputs) {
    const ag::Matrix analytic =
        v.grad().size() ? v.grad() : ag::Matrix::Zero(v.rows(), v.cols());
    for (ag::Index k = 0; k < v.value().size(); ++k) {
      double& x = v.mutable_value().data()[k];
      const double old = x;
      double at[4];
      {
        ag::NoGradGuard guard;
        const double offsets[4] = {-2 * h, -h, h, 2 * h};
        for (int s = 0; s < 4; ++s) {
          x = old + offsets[s];
          at[s] = f(inputs).scalar();
        }
      }
      x = old;
      const double numeric = (8 * (at[2] - at[1]) - (at[3] - at[0])) / (12 * h);
      const double a = analytic.data()[k];
      const double denom = std::max(std::abs(a) + std::abs(numeric), 1e-6);
      out.max_rel_error = std::max(out.max_rel_error, std::abs(a - numeric) / denom);
      ++out.checked;
    }
  }
  return out;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scalar-loop LSTM over rows of x in the given order.
inline ag::Matrix reference_lstm(const ag::Matrix& x, const ag::Matrix& w_ih, const ag::Matrix& w_hh,
                          const ag::Matrix& b, bool reverse) {
  const int n = static_cast<int>(x.rows());
  const int h = static_cast<int>(w_hh.rows());
  std::vector<double> hs(static_cast<size_t>(h), 0.0), cs(static_cast<size_t>(h), 0.0);
  ag::Matrix out(n, h);
  for (int step = 0; step < n; ++step) {
    const int t = reverse ? n - 1 - step : step;
    std::vector<double> z(static_cast<size_t>(4 * h));
    for (int g = 0; g < 4 * h; ++g) {
      double acc = b(0, g);
      for (int k = 0; k < x.cols(); ++k) acc += x(t, k) * w_ih(k, g);
      for (int k = 0; k < h; ++k) acc += hs[static_cast<size_t>(k)] * w_hh(k, g);
      z[static_cast<size_t>(g)] = acc;
    }
    for (int u = 0; u < h; ++u) {
      const double i = sigmoid(z[static_cast<size_t>(u)]);
      const double f = sigmoid(z[static_cast<size_t>(h + u)]);
      const double g = std::tanh(z[static_cast<size_t>(2 * h + u)]);
      const double o = sigmoid(z[static_cast<size_t>(3 * h + u)]);
      cs[static_cast<size_t>(u)] = f * cs[static_cast<size_t>(u)] + i * g;
      hs[static_cast<size_t>(u)] = o * std::tanh(cs[static_cast<size_t>(u)]);
    }
    for (int u = 0; u < h; ++u) out(t, u) = hs[static_cast<size_t>(u)];
  }
  return out;
}

// Random head/dependent tree over n words: word i > 0 attaches to an
// earlier word, then labels are shuffled.
inline std::vector<int> random_tree(int n, std::mt19937_64& rng) {
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> heads(static_cast<size_t>(n), -1);
  for (int i = 1; i < n; ++i) {
    std::uniform_int_distribution<int> pick(0, i - 1);
    heads[static_cast<size_t>(order[static_cast<size_t>(i)])] =
        order[static_cast<size_t>(pick(rng))];
  }
  return heads;
}

// Random triplet set with disjoint aspect/opinion spans and no two triplets
// sharing both spans.
inline std::vector<Triplet> random_triplets(int n, int max_count, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count_dist(0, max_count);
  std::uniform_int_distribution<int> pos(0, n - 1);
  std::uniform_int_distribution<int> senti(0, 2);
  std::vector<Triplet> out;
  std::set<std::pair<Span, Span>> used;
  const int want = count_dist(rng);
  for (int tries = 0; tries < 50 && static_cast<int>(out.size()) < want; ++tries) {
    int a0 = pos(rng), a1 = pos(rng), o0 = pos(rng), o1 = pos(rng);
    Span a{std::min(a0, a1), std::max(a0, a1)};
    Span o{std::min(o0, o1), std::max(o0, o1)};
    if (a.overlaps(o) || !used.insert({a, o}).second) continue;
    out.push_back(Triplet{a, o, static_cast<Sentiment>(senti(rng))});
  }
  std::sort(out.begin(), out.end());
  return out;
}

// All regions of an n x n grid, each scored by direct comparison with the
// gold list; no grids, no candidate assembly.
inline std::vector<Triplet> enumerate_regions(const std::vector<Triplet>& gold, int n) {
  std::vector<Triplet> out;
  for (int as = 0; as < n; ++as)
    for (int ae = as; ae < n; ++ae)
      for (int os = 0; os < n; ++os)
        for (int oe = os; oe < n; ++oe)
          for (const Triplet& t : gold)
            if (t.aspect == Span{as, ae} && t.opinion == Span{os, oe}) {
              out.push_back(t);
              break;
            }
  std::sort(out.begin(), out.end());
  return out;
}

// Multiset intersection size by explicit counting.
inline int64_t multiset_overlap(const std::vector<Triplet>& pred,
                                const std::vector<Triplet>& gold) {
  std::map<Triplet, int64_t> p, g;
  for (const auto& t : pred) ++p[t];
  for (const auto& t : gold) ++g[t];
  int64_t tp = 0;
  for (const auto& [t, c] : p)
    if (auto it = g.find(t); it != g.end()) tp += std::min(c, it->second);
  return tp;
}

// Largest |eigenvalue| of a symmetric matrix.
inline double spectral_radius(const ag::Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver{Eigen::MatrixXd(m)};
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace aste::testing
