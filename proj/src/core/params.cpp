#include "params.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "error.hpp"

namespace aste {

namespace {

static_assert(std::endian::native == std::endian::little,
              "tensor files are written in little-endian byte order");

void write_u64(std::ostream& out, uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

bool read_u64(std::istream& in, uint64_t& v) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof v));
}

}  // namespace

ag::Var& ParamStore::add(const std::string& name, ag::Matrix init,
                         bool trainable, ParamGroup group) {
  if (entries_.count(name)) throw InitError("duplicate parameter " + name);
  auto [it, _] = entries_.emplace(
      name, ParamEntry{ag::Var(std::move(init), trainable), trainable, group});
  return it->second.var;
}

const ag::Var& ParamStore::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw InitError("unknown parameter " + name);
  return it->second.var;
}

ag::Var& ParamStore::get(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw InitError("unknown parameter " + name);
  return it->second.var;
}

bool ParamStore::contains(const std::string& name) const {
  return entries_.count(name) > 0;
}

void ParamStore::zero_grad() {
  for (auto& [_, e] : entries_) e.var.zero_grad();
}

std::map<std::string, int64_t> ParamStore::census() const {
  std::map<std::string, int64_t> out;
  int64_t total = 0;
  for (const auto& [name, e] : entries_) {
    if (!e.trainable) continue;
    const auto n = static_cast<int64_t>(e.var.value().size());
    out[name.substr(0, name.find('.'))] += n;
    total += n;
  }
  out["total"] = total;
  return out;
}

int64_t ParamStore::trainable_count() const { return census().at("total"); }

void write_tensor(std::ostream& out, const std::string& name,
                  const ag::Matrix& m) {
  write_u64(out, name.size());
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_u64(out, static_cast<uint64_t>(m.rows()));
  write_u64(out, static_cast<uint64_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
}

bool read_tensor(std::istream& in, std::string& name, ag::Matrix& m) {
  uint64_t len = 0, rows = 0, cols = 0;
  if (!read_u64(in, len)) return false;
  if (len > (1u << 20)) throw IoError("corrupt tensor record (name length)");
  name.resize(len);
  if (!in.read(name.data(), static_cast<std::streamsize>(len)) ||
      !read_u64(in, rows) || !read_u64(in, cols)) {
    throw IoError("truncated tensor record");
  }
  if (rows > (1ull << 32) || cols > (1ull << 32))
    throw IoError("corrupt tensor record (shape) for " + name);
  m.resize(static_cast<ag::Index>(rows), static_cast<ag::Index>(cols));
  if (!in.read(reinterpret_cast<char*>(m.data()),
               static_cast<std::streamsize>(m.size() * sizeof(double)))) {
    throw IoError("truncated tensor payload for " + name);
  }
  return true;
}

std::map<std::string, ag::Matrix> read_tensor_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open tensor file " + path);
  uint64_t count = 0;
  if (!read_u64(in, count)) throw IoError("empty tensor file " + path);
  std::map<std::string, ag::Matrix> out;
  for (uint64_t i = 0; i < count; ++i) {
    std::string name;
    ag::Matrix m;
    if (!read_tensor(in, name, m)) throw IoError("truncated tensor file " + path);
    out.emplace(std::move(name), std::move(m));
  }
  return out;
}

void ParamStore::write(std::ostream& out) const {
  write_u64(out, entries_.size());
  for (const auto& [name, e] : entries_) write_tensor(out, name, e.var.value());
}

void ParamStore::read_into(std::istream& in) {
  uint64_t count = 0;
  if (!read_u64(in, count)) throw IoError("missing parameter block");
  if (count != entries_.size()) {
    throw IoError("parameter count mismatch: file has " +
                  std::to_string(count) + ", model declares " +
                  std::to_string(entries_.size()));
  }
  for (uint64_t i = 0; i < count; ++i) {
    std::string name;
    ag::Matrix m;
    if (!read_tensor(in, name, m)) throw IoError("truncated parameter block");
    auto it = entries_.find(name);
    if (it == entries_.end()) throw IoError("unexpected parameter " + name);
    auto& value = it->second.var.mutable_value();
    if (value.rows() != m.rows() || value.cols() != m.cols())
      throw IoError("shape mismatch for parameter " + name);
    value = std::move(m);
  }
}

ag::Matrix xavier_uniform(int64_t rows, int64_t cols, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-a, a);
  ag::Matrix m(rows, cols);
  for (ag::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

ag::Matrix normal_init(int64_t rows, int64_t cols, double stddev,
                       std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  ag::Matrix m(rows, cols);
  for (ag::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

double Adam::step(ParamStore& params) {
  double sq = 0.0;
  for (const auto& [_, e] : params.entries()) {
    if (e.trainable && e.var.grad().size() != 0)
      sq += e.var.grad().squaredNorm();
  }
  const double norm = std::sqrt(sq);
  const double clip = (options_.clip_norm > 0 && norm > options_.clip_norm)
                          ? options_.clip_norm / (norm + 1e-12)
                          : 1.0;
  ++t_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  for (auto& [name, e] : params.entries()) {
    if (!e.trainable || e.var.grad().size() == 0) continue;
    const double lr = e.group == ParamGroup::kEncoder ? options_.lr_encoder
                                                      : options_.lr_head;
    ag::Matrix g = e.var.grad() * clip;
    auto& m = m_[name];
    auto& v = v_[name];
    if (m.size() == 0) {
      m = ag::Matrix::Zero(g.rows(), g.cols());
      v = ag::Matrix::Zero(g.rows(), g.cols());
    }
    m = options_.beta1 * m + (1.0 - options_.beta1) * g;
    v = options_.beta2 * v + (1.0 - options_.beta2) * g.cwiseAbs2();
    ag::Matrix& w = e.var.mutable_value();
    if (options_.weight_decay > 0) w *= (1.0 - lr * options_.weight_decay);
    w.array() -= lr * (m.array() / bc1) /
                 ((v.array() / bc2).sqrt() + options_.eps);
  }
  return norm;
}

}  // namespace aste
