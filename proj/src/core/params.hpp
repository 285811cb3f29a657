#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace aste {

// Learning-rate group of a parameter.
enum class ParamGroup { kEncoder, kHead };

struct ParamEntry {
  ag::Var var;
  bool trainable = true;
  ParamGroup group = ParamGroup::kHead;
};

// Named parameter container. Names are hierarchical ("fusion.0.gcn.1.w") and
// iteration is in lexicographic name order, which fixes the on-disk layout.
class ParamStore {
 public:
  ag::Var& add(const std::string& name, ag::Matrix init, bool trainable = true,
               ParamGroup group = ParamGroup::kHead);
  const ag::Var& get(const std::string& name) const;
  ag::Var& get(const std::string& name);
  bool contains(const std::string& name) const;

  const std::map<std::string, ParamEntry>& entries() const { return entries_; }
  std::map<std::string, ParamEntry>& entries() { return entries_; }

  void zero_grad();
  // Trainable scalar count per top-level prefix plus "total".
  std::map<std::string, int64_t> census() const;
  int64_t trainable_count() const;

  // Binary payload: count, then (name, rows, cols, little-endian doubles) per
  // entry in name order. Trainability is not stored; read_into() overwrites
  // values of already-declared parameters and rejects unknown names or
  // shape changes.
  void write(std::ostream& out) const;
  void read_into(std::istream& in);

 private:
  std::map<std::string, ParamEntry> entries_;
};

// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
ag::Matrix xavier_uniform(int64_t rows, int64_t cols, std::mt19937_64& rng);
ag::Matrix normal_init(int64_t rows, int64_t cols, double stddev,
                       std::mt19937_64& rng);

// Raw tensor I/O shared by checkpoints and exported encoder weights.
void write_tensor(std::ostream& out, const std::string& name,
                  const ag::Matrix& m);
bool read_tensor(std::istream& in, std::string& name, ag::Matrix& m);
std::map<std::string, ag::Matrix> read_tensor_file(const std::string& path);

struct AdamOptions {
  double lr_encoder = 2e-5;
  double lr_head = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double clip_norm = 1.0;
};

class Adam {
 public:
  explicit Adam(AdamOptions options) : options_(options) {}
  // Clips the global gradient norm, applies one update to every trainable
  // parameter that received a gradient, and returns the pre-clip norm.
  double step(ParamStore& params);
  int64_t steps() const { return t_; }

 private:
  AdamOptions options_;
  int64_t t_ = 0;
  std::map<std::string, ag::Matrix> m_, v_;
};

}  // namespace aste
