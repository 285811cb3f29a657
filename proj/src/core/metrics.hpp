#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "corpus.hpp"

namespace aste {

struct Metrics {
  int64_t tp = 0;
  int64_t n_pred = 0;
  int64_t n_gold = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  // Recomputes P/R/F1 from the counts, with 0 for every empty denominator.
  void finalize();
  Metrics& operator+=(const Metrics& o);
};

// Exact-match true positives for one sentence; each gold triplet matches at
// most once, so duplicate predictions only count up to gold multiplicity.
int64_t count_matches(const std::vector<Triplet>& pred,
                      const std::vector<Triplet>& gold);

struct SentenceTriplets {
  std::string id;
  std::vector<Triplet> triplets;
};

// Micro-averaged over the corpus. Throws RangeError on id mismatch.
Metrics score_corpus(const std::vector<SentenceTriplets>& pred,
                     const std::vector<SentenceTriplets>& gold);
// Mean of per-sentence P/R/F1 (sentences with neither predictions nor gold
// are skipped); counts are the corpus totals.
Metrics score_corpus_macro(const std::vector<SentenceTriplets>& pred,
                           const std::vector<SentenceTriplets>& gold);

nlohmann::ordered_json to_json(const Metrics& m);
Metrics metrics_from_json(const nlohmann::json& j);

}  // namespace aste
