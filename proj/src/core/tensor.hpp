#pragma once

// Reverse-mode automatic differentiation over dense row-major matrices.
//
// A Var is a handle to a node in a dynamically built computation graph. Ops
// record a backward closure on their output node; backward() walks the graph
// in reverse topological order. Leaves created with requires_grad=true
// (model parameters) accumulate gradients across calls until zeroed.

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <random>
#include <span>
#include <vector>

namespace aste::ag {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  void accumulate(const Matrix& g);
};

class Var {
 public:
  Var() = default;
  explicit Var(Matrix value, bool requires_grad = false);

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  // Zero-sized when no gradient has reached this node.
  const Matrix& grad() const { return node_->grad; }
  void zero_grad() { node_->grad.resize(0, 0); }

  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }
  double scalar() const { return node_->value(0, 0); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

Var constant(Matrix value);

// Seeds d(root)/d(root) = 1 for a 1x1 root and propagates. The graph's
// internal edges are released afterwards.
void backward(const Var& root);

// Linear algebra.
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
// Adds a 1 x cols row vector to every row of a.
Var add_row(const Var& a, const Var& row);
// a * w + bias, with bias broadcast over rows.
Var linear(const Var& x, const Var& w, const Var& bias);

// Elementwise nonlinearities.
Var relu(const Var& a);
Var gelu(const Var& a);
Var sigmoid(const Var& a);
Var tanh(const Var& a);

Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);
Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta,
                    double eps = 1e-12);

// Structure.
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(const Var& a, Index start, Index count);
Var slice_rows(const Var& a, Index start, Index count);
// Row r of the output is row index[r] of a; index -1 yields a zero row.
Var gather_rows(const Var& a, std::span<const int> index);
// Row g of the output is the mean (or max) of the rows of a listed in
// groups[g]. Every group must be non-empty.
Var mean_pool_rows(const Var& a, const std::vector<std::vector<int>>& groups);
Var max_pool_rows(const Var& a, const std::vector<std::vector<int>>& groups);

// Inverted dropout; identity when rate == 0 or rng is null.
Var dropout(const Var& a, double rate, std::mt19937_64* rng);

// Reductions and losses, all returning 1x1.
Var sum(const Var& a);
Var mean(const Var& a);
// Mean binary cross-entropy of sigmoid(logits) against 0/1 targets, with
// positives weighted by pos_weight.
Var bce_with_logits_mean(const Var& logits, const Matrix& targets,
                         double pos_weight = 1.0);
// Mean categorical cross-entropy of softmax(logits) rows against labels.
Var cross_entropy_mean(const Var& logits, std::span<const int> labels);

}  // namespace aste::ag
