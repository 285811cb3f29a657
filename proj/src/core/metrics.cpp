#include "metrics.hpp"

#include <algorithm>
#include <unordered_map>

#include "error.hpp"

namespace aste {

void Metrics::finalize() {
  precision = n_pred > 0 ? static_cast<double>(tp) / static_cast<double>(n_pred) : 0.0;
  recall = n_gold > 0 ? static_cast<double>(tp) / static_cast<double>(n_gold) : 0.0;
  f1 = precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

Metrics& Metrics::operator+=(const Metrics& o) {
  tp += o.tp;
  n_pred += o.n_pred;
  n_gold += o.n_gold;
  finalize();
  return *this;
}

int64_t count_matches(const std::vector<Triplet>& pred,
                      const std::vector<Triplet>& gold) {
  std::vector<Triplet> remaining = gold;
  std::sort(remaining.begin(), remaining.end());
  std::vector<bool> used(remaining.size(), false);
  int64_t tp = 0;
  for (const Triplet& p : pred) {
    auto it = std::lower_bound(remaining.begin(), remaining.end(), p);
    for (; it != remaining.end() && *it == p; ++it) {
      const auto k = static_cast<size_t>(it - remaining.begin());
      if (!used[k]) {
        used[k] = true;
        ++tp;
        break;
      }
    }
  }
  return tp;
}

namespace {

template <typename Fn>
void paired(const std::vector<SentenceTriplets>& pred,
            const std::vector<SentenceTriplets>& gold, Fn&& fn) {
  if (pred.size() != gold.size())
    throw RangeError("prediction covers " + std::to_string(pred.size()) +
                     " sentences, gold has " + std::to_string(gold.size()));
  std::unordered_map<std::string, const SentenceTriplets*> by_id;
  for (const auto& g : gold) {
    if (!by_id.emplace(g.id, &g).second)
      throw RangeError("duplicate gold sentence id " + g.id);
  }
  for (const auto& p : pred) {
    auto it = by_id.find(p.id);
    if (it == by_id.end()) throw RangeError("no gold sentence with id " + p.id);
    fn(p, *it->second);
    by_id.erase(it);
  }
}

}  // namespace

Metrics score_corpus(const std::vector<SentenceTriplets>& pred,
                     const std::vector<SentenceTriplets>& gold) {
  Metrics m;
  paired(pred, gold, [&](const SentenceTriplets& p, const SentenceTriplets& g) {
    m.tp += count_matches(p.triplets, g.triplets);
    m.n_pred += static_cast<int64_t>(p.triplets.size());
    m.n_gold += static_cast<int64_t>(g.triplets.size());
  });
  m.finalize();
  return m;
}

Metrics score_corpus_macro(const std::vector<SentenceTriplets>& pred,
                           const std::vector<SentenceTriplets>& gold) {
  Metrics total;
  double p_sum = 0, r_sum = 0, f_sum = 0;
  int counted = 0;
  paired(pred, gold, [&](const SentenceTriplets& p, const SentenceTriplets& g) {
    Metrics s;
    s.tp = count_matches(p.triplets, g.triplets);
    s.n_pred = static_cast<int64_t>(p.triplets.size());
    s.n_gold = static_cast<int64_t>(g.triplets.size());
    s.finalize();
    total.tp += s.tp;
    total.n_pred += s.n_pred;
    total.n_gold += s.n_gold;
    if (s.n_pred == 0 && s.n_gold == 0) return;
    p_sum += s.precision;
    r_sum += s.recall;
    f_sum += s.f1;
    ++counted;
  });
  if (counted > 0) {
    total.precision = p_sum / counted;
    total.recall = r_sum / counted;
    total.f1 = f_sum / counted;
  }
  return total;
}

nlohmann::ordered_json to_json(const Metrics& m) {
  nlohmann::ordered_json j;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["tp"] = m.tp;
  j["n_pred"] = m.n_pred;
  j["n_gold"] = m.n_gold;
  return j;
}

Metrics metrics_from_json(const nlohmann::json& j) {
  Metrics m;
  m.tp = j.at("tp").get<int64_t>();
  m.n_pred = j.at("n_pred").get<int64_t>();
  m.n_gold = j.at("n_gold").get<int64_t>();
  m.precision = j.at("precision").get<double>();
  m.recall = j.at("recall").get<double>();
  m.f1 = j.at("f1").get<double>();
  return m;
}

}  // namespace aste
