#include "fusion.hpp"

#include <algorithm>

#include "error.hpp"

namespace aste {

ag::Var attention_scores(const ag::Var& h) {
  if (h.rows() == 0) throw ShapeError("attention_scores: empty input");
  return ag::softmax_rows(ag::matmul(h, ag::transpose(h)));
}

AttentionMaps attention_maps(const ag::Var& h_b, const ag::Var& h_p) {
  return AttentionMaps{attention_scores(h_b), attention_scores(h_p)};
}

FusedPair interact_once(const ag::Var& h_b, const ag::Var& h_p,
                        const AttentionMaps& maps, double dropout_rate,
                        std::mt19937_64* rng) {
  const auto n = h_b.rows();
  if (h_p.rows() != n || maps.alpha_b.rows() != n || maps.alpha_b.cols() != n ||
      maps.alpha_p.rows() != n || maps.alpha_p.cols() != n)
    throw ShapeError("interact_once: branches and maps must share n");
  FusedPair out;
  out.h_b = ag::add(ag::dropout(ag::matmul(maps.alpha_p, h_b), dropout_rate, rng), h_b);
  out.h_p = ag::add(ag::dropout(ag::matmul(maps.alpha_b, h_p), dropout_rate, rng), h_p);
  return out;
}

FusedPair interact_heads(const ag::Var& h_b, const ag::Var& h_p, int heads,
                         double dropout_rate, std::mt19937_64* rng) {
  if (heads == 1)
    return interact_once(h_b, h_p, attention_maps(h_b, h_p), dropout_rate, rng);
  if (h_b.cols() % heads != 0 || h_p.cols() % heads != 0)
    throw ShapeError("interact_heads: heads must divide both widths");
  const auto wb = h_b.cols() / heads, wp = h_p.cols() / heads;
  std::vector<ag::Var> bs, ps;
  for (int k = 0; k < heads; ++k) {
    const ag::Var b = ag::slice_cols(h_b, k * wb, wb);
    const ag::Var p = ag::slice_cols(h_p, k * wp, wp);
    FusedPair f = interact_once(b, p, attention_maps(b, p), dropout_rate, rng);
    bs.push_back(f.h_b);
    ps.push_back(f.h_p);
  }
  return FusedPair{ag::concat_cols(bs), ag::concat_cols(ps)};
}

InteractionStack::InteractionStack(ParamStore& params,
                                   const std::string& prefix,
                                   const ModelConfig& config,
                                   std::mt19937_64& rng)
    : layers_(config.interaction_layers),
      heads_(config.attention_heads),
      dropout_(config.dropout),
      shared_(config.share_interaction_params) {
  // h_p after the last round is never consumed, so that round has no
  // refresh parameters.
  const int needed = std::max(layers_ - 1, 0);
  const int distinct = shared_ ? std::min(needed, 1) : needed;
  for (int l = 0; l < distinct; ++l) {
    const std::string p =
        prefix + "." + (shared_ ? std::string("shared") : std::to_string(l));
    RefreshParams r;
    for (int k = 0; k < config.effective_gcn_layers(); ++k)
      r.gcn.push_back(params.add(p + ".gcn." + std::to_string(k) + ".w",
                                 xavier_uniform(config.d_l(), config.d_l(), rng)));
    r.lstm = BiLstm(params, p + ".lstm", config.d_l(), config.lstm_hidden, rng);
    rounds_.push_back(std::move(r));
  }
}

const InteractionStack::RefreshParams& InteractionStack::refresh_params(
    int layer) const {
  return rounds_.at(shared_ ? 0 : static_cast<size_t>(layer));
}

ag::Var InteractionStack::refresh(const ag::Var& h_p_prime,
                                  const DependencyGraph& graph,
                                  int layer) const {
  const RefreshParams& r = refresh_params(layer);
  return r.lstm.forward(gcn_stack(h_p_prime, graph, r.gcn));
}

ag::Var InteractionStack::forward(const ag::Var& h_b0, const ag::Var& h_p0,
                                  const DependencyGraph& graph,
                                  std::mt19937_64* rng,
                                  const Refresh* refresh_fn) const {
  ag::Var h_b = h_b0, h_p = h_p0;
  for (int l = 0; l < layers_; ++l) {
    FusedPair f = interact_heads(h_b, h_p, heads_, dropout_, rng);
    h_b = f.h_b;
    if (l + 1 == layers_) break;
    h_p = refresh_fn ? (*refresh_fn)(f.h_p, graph, l) : refresh(f.h_p, graph, l);
  }
  return h_b;
}

}  // namespace aste
