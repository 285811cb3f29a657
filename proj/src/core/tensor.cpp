#include "tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <unordered_set>

#include "error.hpp"

namespace aste::ag {

namespace {

thread_local bool g_grad_enabled = true;

Var make_op(Matrix value, std::initializer_list<const Var*> inputs,
            std::function<void(Node&)> fn) {
  bool needs = false;
  if (g_grad_enabled) {
    for (const Var* v : inputs) needs = needs || v->requires_grad();
  }
  Var out(std::move(value), needs);
  if (needs) {
    auto& node = *out.node();
    for (const Var* v : inputs) node.inputs.push_back(v->node());
    node.backward_fn = std::move(fn);
  }
  return out;
}

Var make_op(Matrix value, std::span<const Var> inputs,
            std::function<void(Node&)> fn) {
  bool needs = false;
  if (g_grad_enabled) {
    for (const Var& v : inputs) needs = needs || v.requires_grad();
  }
  Var out(std::move(value), needs);
  if (needs) {
    auto& node = *out.node();
    for (const Var& v : inputs) node.inputs.push_back(v.node());
    node.backward_fn = std::move(fn);
  }
  return out;
}

void push(Node& self, size_t i, const Matrix& g) {
  Node& in = *self.inputs[i];
  if (in.requires_grad) in.accumulate(g);
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch (" +
                     std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()) + ")");
  }
}

double gelu_scalar(double x) {
  return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
}

double gelu_grad_scalar(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf =
      std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

void Node::accumulate(const Matrix& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Var::Var(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Var constant(Matrix value) { return Var(std::move(value), false); }

void backward(const Var& root) {
  if (root.rows() != 1 || root.cols() != 1) {
    throw ShapeError("backward: root must be a 1x1 value");
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS; deep recurrent graphs would overflow a
  // recursive walk.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && !child->inputs.empty() &&
          seen.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && node->grad.size() != 0) node->backward_fn(*node);
  }
  for (Node* node : order) {
    node->inputs.clear();
    node->backward_fn = nullptr;
    if (node != root.node().get()) node->grad.resize(0, 0);
  }
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ (" +
                     std::to_string(a.cols()) + " vs " +
                     std::to_string(b.rows()) + ")");
  }
  Matrix out = a.value() * b.value();
  return make_op(std::move(out), {&a, &b}, [](Node& self) {
    const Matrix& av = self.inputs[0]->value;
    const Matrix& bv = self.inputs[1]->value;
    if (self.inputs[0]->requires_grad)
      self.inputs[0]->accumulate(self.grad * bv.transpose());
    if (self.inputs[1]->requires_grad)
      self.inputs[1]->accumulate(av.transpose() * self.grad);
  });
}

Var transpose(const Var& a) {
  Matrix out = a.value().transpose();
  return make_op(std::move(out), {&a}, [](Node& self) {
    push(self, 0, self.grad.transpose());
  });
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Matrix out = a.value() + b.value();
  return make_op(std::move(out), {&a, &b}, [](Node& self) {
    push(self, 0, self.grad);
    push(self, 1, self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Matrix out = a.value() - b.value();
  return make_op(std::move(out), {&a, &b}, [](Node& self) {
    push(self, 0, self.grad);
    push(self, 1, -self.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Matrix out = a.value().cwiseProduct(b.value());
  return make_op(std::move(out), {&a, &b}, [](Node& self) {
    if (self.inputs[0]->requires_grad)
      self.inputs[0]->accumulate(self.grad.cwiseProduct(self.inputs[1]->value));
    if (self.inputs[1]->requires_grad)
      self.inputs[1]->accumulate(self.grad.cwiseProduct(self.inputs[0]->value));
  });
}

Var scale(const Var& a, double s) {
  Matrix out = a.value() * s;
  return make_op(std::move(out), {&a},
                 [s](Node& self) { push(self, 0, self.grad * s); });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("add_row: bias must be 1x" + std::to_string(a.cols()));
  }
  Matrix out = a.value().rowwise() + row.value().row(0);
  return make_op(std::move(out), {&a, &row}, [](Node& self) {
    push(self, 0, self.grad);
    push(self, 1, self.grad.colwise().sum());
  });
}

Var linear(const Var& x, const Var& w, const Var& bias) {
  return add_row(matmul(x, w), bias);
}

Var relu(const Var& a) {
  Matrix out = a.value().cwiseMax(0.0);
  return make_op(std::move(out), {&a}, [](Node& self) {
    const Matrix& x = self.inputs[0]->value;
    push(self, 0,
         self.grad.cwiseProduct(
             x.unaryExpr([](double v) { return v > 0 ? 1.0 : 0.0; })));
  });
}

Var gelu(const Var& a) {
  Matrix out = a.value().unaryExpr(&gelu_scalar);
  return make_op(std::move(out), {&a}, [](Node& self) {
    const Matrix& x = self.inputs[0]->value;
    push(self, 0, self.grad.cwiseProduct(x.unaryExpr(&gelu_grad_scalar)));
  });
}

Var sigmoid(const Var& a) {
  Matrix out = a.value().unaryExpr(&sigmoid_scalar);
  return make_op(out, {&a}, [out](Node& self) {
    push(self, 0,
         self.grad.cwiseProduct(
             out.unaryExpr([](double s) { return s * (1.0 - s); })));
  });
}

Var tanh(const Var& a) {
  Matrix out = a.value().array().tanh().matrix();
  return make_op(out, {&a}, [out](Node& self) {
    push(self, 0,
         self.grad.cwiseProduct(
             out.unaryExpr([](double t) { return 1.0 - t * t; })));
  });
}

Var softmax_rows(const Var& a) {
  Matrix out = a.value();
  for (Index r = 0; r < out.rows(); ++r) {
    const double m = out.row(r).maxCoeff();
    out.row(r) = (out.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return make_op(out, {&a}, [out](Node& self) {
    Matrix g(out.rows(), out.cols());
    for (Index r = 0; r < out.rows(); ++r) {
      const double dot = self.grad.row(r).dot(out.row(r));
      g.row(r) =
          out.row(r).cwiseProduct((self.grad.row(r).array() - dot).matrix());
    }
    push(self, 0, g);
  });
}

Var log_softmax_rows(const Var& a) {
  Matrix out = a.value();
  for (Index r = 0; r < out.rows(); ++r) {
    const double m = out.row(r).maxCoeff();
    const double lse =
        m + std::log((out.row(r).array() - m).exp().sum());
    out.row(r).array() -= lse;
  }
  return make_op(out, {&a}, [out](Node& self) {
    Matrix g(out.rows(), out.cols());
    for (Index r = 0; r < out.rows(); ++r) {
      const double total = self.grad.row(r).sum();
      g.row(r) = self.grad.row(r) -
                 (out.row(r).array().exp() * total).matrix();
    }
    push(self, 0, g);
  });
}

Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta,
                    double eps) {
  const Index n = x.rows(), d = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != d || beta.rows() != 1 ||
      beta.cols() != d) {
    throw ShapeError("layer_norm_rows: gamma/beta must be 1x" +
                     std::to_string(d));
  }
  Matrix normed(n, d);
  Eigen::VectorXd inv_std(n);
  for (Index r = 0; r < n; ++r) {
    const double mu = x.value().row(r).mean();
    const double var =
        (x.value().row(r).array() - mu).square().sum() / static_cast<double>(d);
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    normed.row(r) = ((x.value().row(r).array() - mu) * inv_std(r)).matrix();
  }
  Matrix out = (normed.array().rowwise() * gamma.value().row(0).array())
                   .rowwise() +
               beta.value().row(0).array();
  return make_op(std::move(out), {&x, &gamma, &beta},
                 [normed, inv_std](Node& self) {
                   const Matrix& g = self.grad;
                   const Matrix& gam = self.inputs[1]->value;
                   const Index rows = g.rows(), d = g.cols();
                   if (self.inputs[0]->requires_grad) {
                     Matrix gx(rows, d);
                     for (Index r = 0; r < rows; ++r) {
                       Eigen::RowVectorXd gn =
                           g.row(r).cwiseProduct(gam.row(0));
                       const double mean_gn = gn.mean();
                       const double mean_gn_x =
                           gn.cwiseProduct(normed.row(r)).mean();
                       gx.row(r) = inv_std(r) *
                                   (gn.array() - mean_gn -
                                    normed.row(r).array() * mean_gn_x)
                                       .matrix();
                     }
                     self.inputs[0]->accumulate(gx);
                   }
                   if (self.inputs[1]->requires_grad)
                     self.inputs[1]->accumulate(
                         g.cwiseProduct(normed).colwise().sum());
                   if (self.inputs[2]->requires_grad)
                     self.inputs[2]->accumulate(g.colwise().sum());
                 });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const Index rows = parts[0].rows();
  Index cols = 0;
  std::vector<Index> widths;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row counts differ");
    widths.push_back(p.cols());
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return make_op(std::move(out), parts, [widths](Node& self) {
    Index c = 0;
    for (size_t i = 0; i < widths.size(); ++i) {
      if (self.inputs[i]->requires_grad)
        self.inputs[i]->accumulate(self.grad.middleCols(c, widths[i]));
      c += widths[i];
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const Index cols = parts[0].cols();
  Index rows = 0;
  std::vector<Index> heights;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column counts differ");
    heights.push_back(p.rows());
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return make_op(std::move(out), parts, [heights](Node& self) {
    Index r = 0;
    for (size_t i = 0; i < heights.size(); ++i) {
      if (self.inputs[i]->requires_grad)
        self.inputs[i]->accumulate(self.grad.middleRows(r, heights[i]));
      r += heights[i];
    }
  });
}

Var slice_cols(const Var& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols())
    throw ShapeError("slice_cols: range out of bounds");
  Matrix out = a.value().middleCols(start, count);
  const Index rows = a.rows(), cols = a.cols();
  return make_op(std::move(out), {&a}, [=](Node& self) {
    Matrix g = Matrix::Zero(rows, cols);
    g.middleCols(start, count) = self.grad;
    push(self, 0, g);
  });
}

Var slice_rows(const Var& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows())
    throw ShapeError("slice_rows: range out of bounds");
  Matrix out = a.value().middleRows(start, count);
  const Index rows = a.rows(), cols = a.cols();
  return make_op(std::move(out), {&a}, [=](Node& self) {
    Matrix g = Matrix::Zero(rows, cols);
    g.middleRows(start, count) = self.grad;
    push(self, 0, g);
  });
}

Var gather_rows(const Var& a, std::span<const int> index) {
  const Index rows = static_cast<Index>(index.size());
  Matrix out = Matrix::Zero(rows, a.cols());
  for (Index r = 0; r < rows; ++r) {
    const int src = index[r];
    if (src < -1 || src >= a.rows())
      throw ShapeError("gather_rows: index out of bounds");
    if (src >= 0) out.row(r) = a.value().row(src);
  }
  std::vector<int> idx(index.begin(), index.end());
  const Index src_rows = a.rows();
  return make_op(std::move(out), {&a}, [idx, src_rows](Node& self) {
    if (!self.inputs[0]->requires_grad) return;
    Matrix g = Matrix::Zero(src_rows, self.grad.cols());
    for (size_t r = 0; r < idx.size(); ++r) {
      if (idx[r] >= 0) g.row(idx[r]) += self.grad.row(static_cast<Index>(r));
    }
    self.inputs[0]->accumulate(g);
  });
}

Var mean_pool_rows(const Var& a, const std::vector<std::vector<int>>& groups) {
  Matrix out = Matrix::Zero(static_cast<Index>(groups.size()), a.cols());
  for (size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw ShapeError("mean_pool_rows: empty group");
    for (int r : groups[g]) {
      if (r < 0 || r >= a.rows())
        throw ShapeError("mean_pool_rows: row index out of bounds");
      out.row(static_cast<Index>(g)) += a.value().row(r);
    }
    out.row(static_cast<Index>(g)) /= static_cast<double>(groups[g].size());
  }
  const Index src_rows = a.rows();
  return make_op(std::move(out), {&a}, [groups, src_rows](Node& self) {
    if (!self.inputs[0]->requires_grad) return;
    Matrix g = Matrix::Zero(src_rows, self.grad.cols());
    for (size_t k = 0; k < groups.size(); ++k) {
      const double w = 1.0 / static_cast<double>(groups[k].size());
      for (int r : groups[k]) g.row(r) += w * self.grad.row(static_cast<Index>(k));
    }
    self.inputs[0]->accumulate(g);
  });
}

Var max_pool_rows(const Var& a, const std::vector<std::vector<int>>& groups) {
  const Index cols = a.cols();
  Matrix out(static_cast<Index>(groups.size()), cols);
  std::vector<std::vector<int>> argmax(groups.size(), std::vector<int>(cols));
  for (size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw ShapeError("max_pool_rows: empty group");
    for (Index c = 0; c < cols; ++c) {
      int best = groups[g][0];
      for (int r : groups[g]) {
        if (r < 0 || r >= a.rows())
          throw ShapeError("max_pool_rows: row index out of bounds");
        if (a.value()(r, c) > a.value()(best, c)) best = r;
      }
      argmax[g][c] = best;
      out(static_cast<Index>(g), c) = a.value()(best, c);
    }
  }
  const Index src_rows = a.rows();
  return make_op(std::move(out), {&a}, [argmax, src_rows](Node& self) {
    if (!self.inputs[0]->requires_grad) return;
    Matrix g = Matrix::Zero(src_rows, self.grad.cols());
    for (size_t k = 0; k < argmax.size(); ++k)
      for (Index c = 0; c < g.cols(); ++c)
        g(argmax[k][c], c) += self.grad(static_cast<Index>(k), c);
    self.inputs[0]->accumulate(g);
  });
}

Var dropout(const Var& a, double rate, std::mt19937_64* rng) {
  if (rate <= 0.0 || rng == nullptr) return a;
  if (rate >= 1.0) return constant(Matrix::Zero(a.rows(), a.cols()));
  std::bernoulli_distribution keep(1.0 - rate);
  Matrix mask(a.rows(), a.cols());
  const double inv = 1.0 / (1.0 - rate);
  for (Index i = 0; i < mask.size(); ++i)
    mask.data()[i] = keep(*rng) ? inv : 0.0;
  Matrix out = a.value().cwiseProduct(mask);
  return make_op(std::move(out), {&a}, [mask](Node& self) {
    push(self, 0, self.grad.cwiseProduct(mask));
  });
}

Var sum(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  const Index rows = a.rows(), cols = a.cols();
  return make_op(std::move(out), {&a}, [rows, cols](Node& self) {
    push(self, 0, Matrix::Constant(rows, cols, self.grad(0, 0)));
  });
}

Var mean(const Var& a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var bce_with_logits_mean(const Var& logits, const Matrix& targets,
                         double pos_weight) {
  if (targets.rows() != logits.rows() || targets.cols() != logits.cols())
    throw ShapeError("bce_with_logits_mean: target shape mismatch");
  const double count = static_cast<double>(targets.size());
  double total = 0.0;
  const Matrix& z = logits.value();
  for (Index i = 0; i < z.size(); ++i) {
    const double y = targets.data()[i], x = z.data()[i];
    // -log(sigmoid(x)) = softplus(-x); -log(1 - sigmoid(x)) = softplus(x)
    total += pos_weight * y * softplus(-x) + (1.0 - y) * softplus(x);
  }
  Matrix out(1, 1);
  out(0, 0) = total / count;
  return make_op(std::move(out), {&logits},
                 [targets, pos_weight, count](Node& self) {
                   const Matrix& z = self.inputs[0]->value;
                   Matrix g(z.rows(), z.cols());
                   for (Index i = 0; i < z.size(); ++i) {
                     const double y = targets.data()[i];
                     const double p = sigmoid_scalar(z.data()[i]);
                     g.data()[i] = (pos_weight * y * (p - 1.0) + (1.0 - y) * p) /
                                   count;
                   }
                   push(self, 0, g * self.grad(0, 0));
                 });
}

Var cross_entropy_mean(const Var& logits, std::span<const int> labels) {
  if (static_cast<Index>(labels.size()) != logits.rows())
    throw ShapeError("cross_entropy_mean: label count mismatch");
  if (labels.empty()) return constant(Matrix::Zero(1, 1));
  Var logp = log_softmax_rows(logits);
  std::vector<int> lab(labels.begin(), labels.end());
  Matrix out(1, 1);
  double total = 0.0;
  for (size_t r = 0; r < lab.size(); ++r) {
    if (lab[r] < 0 || lab[r] >= logits.cols())
      throw ShapeError("cross_entropy_mean: label out of range");
    total -= logp.value()(static_cast<Index>(r), lab[r]);
  }
  const double count = static_cast<double>(lab.size());
  out(0, 0) = total / count;
  const Index rows = logits.rows(), cols = logits.cols();
  return make_op(std::move(out), {&logp}, [lab, count, rows, cols](Node& self) {
    Matrix g = Matrix::Zero(rows, cols);
    for (size_t r = 0; r < lab.size(); ++r)
      g(static_cast<Index>(r), lab[r]) = -self.grad(0, 0) / count;
    push(self, 0, g);
  });
}

}  // namespace aste::ag
