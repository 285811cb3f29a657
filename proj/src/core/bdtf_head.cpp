#include "bdtf_head.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "error.hpp"
#include "log.hpp"

namespace aste {

namespace {

ag::Var pool(const ag::Var& x, const std::vector<std::vector<int>>& groups,
             Pooling pooling) {
  return pooling == Pooling::kMean ? ag::mean_pool_rows(x, groups)
                                   : ag::max_pool_rows(x, groups);
}

std::vector<int> slice_group(int i, int j) {
  std::vector<int> rows;
  for (int t = std::min(i, j); t <= std::max(i, j); ++t) rows.push_back(t);
  return rows;
}

std::vector<int> region_group(const RelationTensor& r, Cell s, Cell e) {
  std::vector<int> rows;
  rows.reserve(static_cast<size_t>((e.a - s.a + 1) * (e.o - s.o + 1)));
  for (int a = s.a; a <= e.a; ++a)
    for (int o = s.o; o <= e.o; ++o) rows.push_back(r.index(a, o));
  return rows;
}

void check_cell(const RelationTensor& r, Cell c) {
  if (c.a < 0 || c.o < 0 || c.a >= r.n || c.o >= r.n)
    throw RangeError("cell (" + std::to_string(c.a) + "," + std::to_string(c.o) +
                     ") outside a " + std::to_string(r.n) + "x" +
                     std::to_string(r.n) + " table");
}

ag::Matrix as_grid(const ag::Matrix& column, int n) {
  ag::Matrix grid(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      grid(i, j) = 1.0 / (1.0 + std::exp(-column(i * n + j, 0)));
  return grid;
}

}  // namespace

Pooling parse_pooling(const std::string& name) {
  if (name == "mean") return Pooling::kMean;
  if (name == "max") return Pooling::kMax;
  throw ConfigError("unknown pooling '" + name + "'");
}

ag::Var relation_representation(const ag::Var& h, int i, int j,
                                const ag::Var& w, const ag::Var& b,
                                Pooling pooling) {
  const int n = static_cast<int>(h.rows());
  if (i < 0 || j < 0 || i >= n || j >= n)
    throw RangeError("relation index (" + std::to_string(i) + "," +
                     std::to_string(j) + ") outside sentence of " +
                     std::to_string(n) + " words");
  return ag::gelu(ag::linear(pool(h, {slice_group(i, j)}, pooling), w, b));
}

RelationTensor build_relation_tensor(const ag::Var& h, const ag::Var& w,
                                     const ag::Var& b, Pooling pooling) {
  const int n = static_cast<int>(h.rows());
  if (n < 1) throw ShapeError("build_relation_tensor: empty sentence");
  std::vector<std::vector<int>> groups;
  groups.reserve(static_cast<size_t>(n * n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) groups.push_back(slice_group(i, j));
  RelationTensor r;
  r.n = n;
  r.d = static_cast<int>(w.cols());
  r.values = ag::gelu(ag::linear(pool(h, groups, pooling), w, b));
  return r;
}

ag::Var conv3x3(const RelationTensor& r, const ConvLayer& layer) {
  const int n = r.n;
  ag::Var acc;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      std::vector<int> idx(static_cast<size_t>(n * n));
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          const int si = i + dy, sj = j + dx;
          idx[static_cast<size_t>(i * n + j)] =
              (si >= 0 && si < n && sj >= 0 && sj < n) ? si * n + sj : -1;
        }
      }
      const ag::Var& tap = layer.taps[static_cast<size_t>((dy + 1) * 3 + (dx + 1))];
      ag::Var term = ag::matmul(ag::gather_rows(r.values, idx), tap);
      acc = acc.defined() ? ag::add(acc, term) : term;
    }
  }
  return ag::add_row(acc, layer.bias);
}

RelationTensor resnet_cnn(const RelationTensor& r,
                          const std::vector<ConvLayer>& layers) {
  RelationTensor out = r;
  for (const ConvLayer& layer : layers)
    out.values = ag::add(ag::relu(conv3x3(out, layer)), out.values);
  return out;
}

std::vector<Cell> top_k_cells(const ag::Matrix& probs, int k) {
  const int rows = static_cast<int>(probs.rows());
  const int cols = static_cast<int>(probs.cols());
  const int cells = rows * cols;
  if (k < 1) throw RangeError("top-k needs k >= 1");
  if (k > cells) {
    log::warn("top-k: k=" + std::to_string(k) + " exceeds " +
              std::to_string(cells) + " cells; clamping");
    k = cells;
  }
  std::vector<int> order(static_cast<size_t>(cells));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    return probs(x / cols, x % cols) > probs(y / cols, y % cols);
  });
  std::vector<Cell> out;
  for (int t = 0; t < k; ++t)
    out.push_back(Cell{order[static_cast<size_t>(t)] / cols,
                       order[static_cast<size_t>(t)] % cols});
  return out;
}

BoundaryGrids score_boundaries(const RelationTensor& r, const BoundaryParams& p) {
  BoundaryGrids g;
  g.start_logits = ag::linear(r.values, p.w_start, p.b_start);
  g.end_logits = ag::linear(r.values, p.w_end, p.b_end);
  g.start = as_grid(g.start_logits.value(), r.n);
  g.end = as_grid(g.end_logits.value(), r.n);
  return g;
}

BoundaryDetection detect_boundaries(const RelationTensor& r,
                                    const BoundaryParams& p, int k) {
  BoundaryDetection det;
  det.grids = score_boundaries(r, p);
  det.starts = top_k_cells(det.grids.start, k);
  det.ends = top_k_cells(det.grids.end, k);
  return det;
}

std::vector<CellPair> assemble_candidates(const std::vector<Cell>& starts,
                                          const std::vector<Cell>& ends) {
  std::vector<Cell> s_sorted = starts, e_sorted = ends;
  std::sort(s_sorted.begin(), s_sorted.end());
  s_sorted.erase(std::unique(s_sorted.begin(), s_sorted.end()), s_sorted.end());
  std::sort(e_sorted.begin(), e_sorted.end());
  e_sorted.erase(std::unique(e_sorted.begin(), e_sorted.end()), e_sorted.end());
  std::vector<CellPair> out;
  for (const Cell& s : s_sorted)
    for (const Cell& e : e_sorted)
      if (s.a <= e.a && s.o <= e.o) out.emplace_back(s, e);
  return out;
}

ag::Var region_logits(const RelationTensor& r, const std::vector<CellPair>& pairs,
                      const ClassifierParams& p, Pooling pooling) {
  std::vector<int> start_rows, end_rows;
  std::vector<std::vector<int>> regions;
  for (const auto& [s, e] : pairs) {
    check_cell(r, s);
    check_cell(r, e);
    if (s.a > e.a || s.o > e.o)
      throw RangeError("invalid region: start cell is not above-left of end cell");
    start_rows.push_back(r.index(s.a, s.o));
    end_rows.push_back(r.index(e.a, e.o));
    regions.push_back(region_group(r, s, e));
  }
  const std::vector<ag::Var> parts{ag::gather_rows(r.values, start_rows),
                                   ag::gather_rows(r.values, end_rows),
                                   pool(r.values, regions, pooling)};
  return ag::linear(ag::concat_cols(parts), p.w, p.b);
}

std::array<double, kNumRegionClasses> classify_region(const RelationTensor& r,
                                                      Cell start, Cell end,
                                                      const ClassifierParams& p,
                                                      Pooling pooling) {
  const ag::Var probs =
      ag::softmax_rows(region_logits(r, {CellPair{start, end}}, p, pooling));
  std::array<double, kNumRegionClasses> out{};
  for (int c = 0; c < kNumRegionClasses; ++c) out[static_cast<size_t>(c)] = probs.value()(0, c);
  return out;
}

std::vector<Triplet> decode_triplets(const std::vector<CandidateRegion>& candidates) {
  std::map<std::pair<Span, Span>, std::pair<double, Sentiment>> best;
  for (const auto& c : candidates) {
    const auto arg = static_cast<int>(
        std::max_element(c.dist.begin(), c.dist.end()) - c.dist.begin());
    if (arg == kInvalidClass) continue;
    const double conf = c.dist[static_cast<size_t>(arg)];
    const std::pair<Span, Span> key{Span{c.start.a, c.end.a},
                                    Span{c.start.o, c.end.o}};
    auto it = best.find(key);
    if (it == best.end() || conf > it->second.first)
      best[key] = {conf, static_cast<Sentiment>(arg)};
  }
  std::vector<Triplet> out;
  for (const auto& [spans, v] : best)
    out.push_back(Triplet{spans.first, spans.second, v.second});
  return out;
}

CellPair region_of(const Triplet& t) {
  return {Cell{t.aspect.start, t.opinion.start}, Cell{t.aspect.end, t.opinion.end}};
}

GoldGrids encode_gold_grids(const std::vector<Triplet>& gold, int n) {
  GoldGrids g;
  g.start = ag::Matrix::Zero(n, n);
  g.end = ag::Matrix::Zero(n, n);
  for (const Triplet& t : gold) {
    const CellPair region = region_of(t);
    auto [it, inserted] = g.regions.emplace(region, t.sentiment);
    if (!inserted && it->second != t.sentiment)
      throw RangeError("conflicting sentiments for the same triplet region");
    g.start(region.first.a, region.first.o) = 1.0;
    g.end(region.second.a, region.second.o) = 1.0;
  }
  return g;
}

LossBreakdown compute_loss(const ag::Var& start_logits, const ag::Var& end_logits,
                           const ag::Var& class_logits,
                           const std::vector<CellPair>& pairs,
                           const GoldGrids& gold, double pos_weight) {
  const auto cells = gold.start.size();
  if (start_logits.rows() != cells || end_logits.rows() != cells)
    throw ShapeError("compute_loss: grid size mismatch");
  auto flat = [](const ag::Matrix& grid) {
    return ag::Matrix(Eigen::Map<const ag::Matrix>(grid.data(), grid.size(), 1));
  };
  LossBreakdown out;
  const ag::Var ls = ag::bce_with_logits_mean(start_logits, flat(gold.start), pos_weight);
  const ag::Var le = ag::bce_with_logits_mean(end_logits, flat(gold.end), pos_weight);
  ag::Var total = ag::add(ls, le);
  out.l_start = ls.scalar();
  out.l_end = le.scalar();
  if (!pairs.empty()) {
    std::vector<int> labels;
    labels.reserve(pairs.size());
    for (const CellPair& p : pairs) {
      auto it = gold.regions.find(p);
      labels.push_back(it == gold.regions.end() ? kInvalidClass
                                                : static_cast<int>(it->second));
    }
    const ag::Var lc = ag::cross_entropy_mean(class_logits, labels);
    out.l_sentiment = lc.scalar();
    total = ag::add(total, lc);
  }
  out.total = out.l_start + out.l_end + out.l_sentiment;
  out.objective = total;
  return out;
}

TableHead::TableHead(ParamStore& params, const std::string& prefix, int d_in,
                     const ModelConfig& config, std::mt19937_64& rng)
    : pooling_(parse_pooling(config.pooling)) {
  const int d = config.d_relation;
  rel_w_ = params.add(prefix + ".relation.w", xavier_uniform(d_in, d, rng));
  rel_b_ = params.add(prefix + ".relation.b", ag::Matrix::Zero(1, d));
  for (int l = 0; l < config.cnn_layers; ++l) {
    ConvLayer layer;
    const std::string p = prefix + ".cnn." + std::to_string(l);
    for (int t = 0; t < 9; ++t)
      layer.taps[static_cast<size_t>(t)] =
          params.add(p + ".tap" + std::to_string(t),
                     xavier_uniform(d, d, rng) * (1.0 / 3.0));
    layer.bias = params.add(p + ".bias", ag::Matrix::Zero(1, d));
    convs_.push_back(std::move(layer));
  }
  boundary_.w_start = params.add(prefix + ".start.w", xavier_uniform(d, 1, rng));
  boundary_.b_start = params.add(prefix + ".start.b", ag::Matrix::Zero(1, 1));
  boundary_.w_end = params.add(prefix + ".end.w", xavier_uniform(d, 1, rng));
  boundary_.b_end = params.add(prefix + ".end.b", ag::Matrix::Zero(1, 1));
  classifier_.w = params.add(prefix + ".classifier.w",
                             xavier_uniform(3 * d, kNumRegionClasses, rng));
  classifier_.b = params.add(prefix + ".classifier.b",
                             ag::Matrix::Zero(1, kNumRegionClasses));
}

RelationTensor TableHead::relations(const ag::Var& h) const {
  return resnet_cnn(build_relation_tensor(h, rel_w_, rel_b_, pooling_), convs_);
}

TableHead::Output TableHead::forward(const ag::Var& h, int k,
                                     const GoldGrids* gold_cells) const {
  Output out;
  out.table = relations(h);
  out.boundaries = detect_boundaries(out.table, boundary_, k);
  std::vector<Cell> starts = out.boundaries.starts, ends = out.boundaries.ends;
  if (gold_cells) {
    for (const auto& [region, _] : gold_cells->regions) {
      starts.push_back(region.first);
      ends.push_back(region.second);
    }
  }
  out.pairs = assemble_candidates(starts, ends);
  if (out.pairs.empty()) return out;
  out.class_logits = region_logits(out.table, out.pairs, classifier_, pooling_);
  const ag::Matrix probs = ag::softmax_rows(ag::constant(out.class_logits.value())).value();
  for (size_t i = 0; i < out.pairs.size(); ++i) {
    CandidateRegion c{out.pairs[i].first, out.pairs[i].second, {}};
    for (int k2 = 0; k2 < kNumRegionClasses; ++k2)
      c.dist[static_cast<size_t>(k2)] = probs(static_cast<ag::Index>(i), k2);
    out.candidates.push_back(c);
  }
  return out;
}

}  // namespace aste
