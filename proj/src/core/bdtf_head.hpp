#pragma once

// Boundary-driven table filling over an n x n (aspect, opinion) word grid.
// A triplet is the rectangle spanned by its start cell (a_s, o_s) and end
// cell (a_e, o_e); the head scores both corners and classifies each
// assembled rectangle into a sentiment or INVALID.

#include <array>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "config.hpp"
#include "corpus.hpp"
#include "params.hpp"
#include "tensor.hpp"

namespace aste {

inline constexpr int kNumRegionClasses = 4;
inline constexpr int kInvalidClass = 3;  // after POS, NEU, NEG

struct Cell {
  int a = 0;  // aspect word
  int o = 0;  // opinion word
  auto operator<=>(const Cell&) const = default;
};

using CellPair = std::pair<Cell, Cell>;

enum class Pooling { kMean, kMax };
Pooling parse_pooling(const std::string& name);

// n*n rows of width d; row i*n + j holds r_ij.
struct RelationTensor {
  ag::Var values;
  int n = 0;
  int d = 0;

  int index(int i, int j) const { return i * n + j; }
  ag::Matrix cell(int i, int j) const { return values.value().row(index(i, j)); }
};

// r_ij = gelu(pool(h[min(i,j)..max(i,j)]) w + b).
ag::Var relation_representation(const ag::Var& h, int i, int j,
                                const ag::Var& w, const ag::Var& b,
                                Pooling pooling = Pooling::kMean);
RelationTensor build_relation_tensor(const ag::Var& h, const ag::Var& w,
                                     const ag::Var& b,
                                     Pooling pooling = Pooling::kMean);

// 3x3, channel-preserving, zero padding. Kernel tap (dy+1)*3 + (dx+1) reads
// cell (i+dy, j+dx).
struct ConvLayer {
  std::array<ag::Var, 9> taps;
  ag::Var bias;
};
ag::Var conv3x3(const RelationTensor& r, const ConvLayer& layer);
// R <- relu(conv(R)) + R per layer.
RelationTensor resnet_cnn(const RelationTensor& r,
                          const std::vector<ConvLayer>& layers);

struct BoundaryGrids {
  ag::Var start_logits;  // n*n x 1
  ag::Var end_logits;
  ag::Matrix start;  // n x n sigmoid probabilities
  ag::Matrix end;
};

struct BoundaryDetection {
  BoundaryGrids grids;
  std::vector<Cell> starts;
  std::vector<Cell> ends;
};

// Highest-probability cells first; ties resolved row-major. k is clamped to
// the cell count with a warning.
std::vector<Cell> top_k_cells(const ag::Matrix& probs, int k);

struct BoundaryParams {
  ag::Var w_start, b_start, w_end, b_end;
};
BoundaryGrids score_boundaries(const RelationTensor& r, const BoundaryParams& p);
BoundaryDetection detect_boundaries(const RelationTensor& r,
                                    const BoundaryParams& p, int k);

// Start-major Cartesian product keeping pairs with a_s <= a_e and
// o_s <= o_e.
std::vector<CellPair> assemble_candidates(const std::vector<Cell>& starts,
                                          const std::vector<Cell>& ends);

struct ClassifierParams {
  ag::Var w;  // 3d x 4
  ag::Var b;
};
// One row of logits per pair over [r_start ; r_end ; pooled region].
ag::Var region_logits(const RelationTensor& r, const std::vector<CellPair>& pairs,
                      const ClassifierParams& p, Pooling pooling = Pooling::kMean);
// Softmax distribution over {POS, NEU, NEG, INVALID}; throws RangeError when
// the start cell is not above-left of the end cell.
std::array<double, kNumRegionClasses> classify_region(
    const RelationTensor& r, Cell start, Cell end, const ClassifierParams& p,
    Pooling pooling = Pooling::kMean);

struct CandidateRegion {
  Cell start;
  Cell end;
  std::array<double, kNumRegionClasses> dist{};
};

// Drops INVALID argmaxes, keeps the most confident sentiment per span pair,
// sorts by (aspect, opinion).
std::vector<Triplet> decode_triplets(const std::vector<CandidateRegion>& candidates);

struct GoldGrids {
  ag::Matrix start;  // n x n 0/1
  ag::Matrix end;
  std::map<CellPair, Sentiment> regions;
};
GoldGrids encode_gold_grids(const std::vector<Triplet>& gold, int n);
CellPair region_of(const Triplet& t);

struct LossBreakdown {
  double l_start = 0.0;
  double l_end = 0.0;
  double l_sentiment = 0.0;
  double total = 0.0;
  ag::Var objective;  // differentiable total
};

// Mean BCE over both boundary grids plus mean cross-entropy over candidates;
// candidates that are not gold regions are labelled INVALID.
LossBreakdown compute_loss(const ag::Var& start_logits, const ag::Var& end_logits,
                           const ag::Var& class_logits,
                           const std::vector<CellPair>& pairs,
                           const GoldGrids& gold, double pos_weight = 1.0);

class TableHead {
 public:
  TableHead() = default;
  TableHead(ParamStore& params, const std::string& prefix, int d_in,
            const ModelConfig& config, std::mt19937_64& rng);

  RelationTensor relations(const ag::Var& h) const;

  struct Output {
    RelationTensor table;
    BoundaryDetection boundaries;
    std::vector<CellPair> pairs;
    ag::Var class_logits;  // pairs.size() x 4; undefined when no pairs
    std::vector<CandidateRegion> candidates;
  };
  // gold_cells adds those start/end cells to the top-k pools.
  Output forward(const ag::Var& h, int k, const GoldGrids* gold_cells) const;

  const ConvLayer& conv(int l) const { return convs_.at(static_cast<size_t>(l)); }
  const BoundaryParams& boundary() const { return boundary_; }
  const ClassifierParams& classifier() const { return classifier_; }
  const ag::Var& relation_w() const { return rel_w_; }
  const ag::Var& relation_b() const { return rel_b_; }
  Pooling pooling() const { return pooling_; }

 private:
  ag::Var rel_w_, rel_b_;
  std::vector<ConvLayer> convs_;
  BoundaryParams boundary_;
  ClassifierParams classifier_;
  Pooling pooling_ = Pooling::kMean;
};

}  // namespace aste
