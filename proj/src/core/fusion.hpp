#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "config.hpp"
#include "corpus.hpp"
#include "encoders.hpp"
#include "params.hpp"
#include "tensor.hpp"

namespace aste {

struct AttentionMaps {
  ag::Var alpha_b;  // softmax(h_b h_b^T)
  ag::Var alpha_p;  // softmax(h_p h_p^T)
};

// Row-wise softmax of the Gram matrix h h^T (unscaled, single head).
ag::Var attention_scores(const ag::Var& h);
AttentionMaps attention_maps(const ag::Var& h_b, const ag::Var& h_p);

struct FusedPair {
  ag::Var h_b;
  ag::Var h_p;
};

// h_b' = Dropout(alpha_p h_b) + h_b and h_p' = Dropout(alpha_b h_p) + h_p.
// Each map acts on the opposite branch; rng == nullptr is evaluation mode.
FusedPair interact_once(const ag::Var& h_b, const ag::Var& h_p,
                        const AttentionMaps& maps, double dropout_rate,
                        std::mt19937_64* rng);

// Splits both branches into `heads` column blocks and interacts block-wise.
FusedPair interact_heads(const ag::Var& h_b, const ag::Var& h_p, int heads,
                         double dropout_rate, std::mt19937_64* rng);

// L rounds of interaction; between rounds the particular branch is
// refreshed as BiLSTM(GCN^k(h_p')). Returns the final basic branch.
class InteractionStack {
 public:
  using Refresh = std::function<ag::Var(const ag::Var& h_p_prime,
                                        const DependencyGraph& graph, int layer)>;

  InteractionStack() = default;
  InteractionStack(ParamStore& params, const std::string& prefix,
                   const ModelConfig& config, std::mt19937_64& rng);

  // `refresh` replaces the learned GCN + BiLSTM refresh when set (tests).
  ag::Var forward(const ag::Var& h_b0, const ag::Var& h_p0,
                  const DependencyGraph& graph, std::mt19937_64* rng,
                  const Refresh* refresh = nullptr) const;

  ag::Var refresh(const ag::Var& h_p_prime, const DependencyGraph& graph,
                  int layer) const;

  int layers() const { return layers_; }
  double dropout() const { return dropout_; }

  struct RefreshParams {
    std::vector<ag::Var> gcn;
    BiLstm lstm;
  };
  const RefreshParams& refresh_params(int layer) const;

 private:
  int layers_ = 0;
  int heads_ = 1;
  double dropout_ = 0.0;
  bool shared_ = false;
  std::vector<RefreshParams> rounds_;
};

}  // namespace aste
