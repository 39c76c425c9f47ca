#pragma once

#include <map>
#include <string>
#include <vector>

#include "justgen/corpus.hpp"
#include "justgen/index.hpp"

namespace justgen {

// Okapi BM25 over lowercased whitespace tokens.
//   idf(t)   = max(1e-6, ln((N - df + 0.5) / (df + 0.5)))
//   w(t, d)  = idf(t) * (k1 + 1) * tf / (tf + k1 * (1 - b + b * len(d)/avg))
// Scores are therefore non-negative, and zero exactly when a chunk shares
// no term with the query.
class Bm25Index {
 public:
  static constexpr double kEpsilonIdf = 1e-6;

  static Bm25Index build(const Corpus& corpus, double k1 = 0.9, double b = 0.4);

  // Top-n by score; ties and zero-score fill ranked by ascending chunk_id.
  RetrievedSet retrieve(const std::string& query, int n) const;

  double score(const std::string& query, size_t chunk_index) const;
  size_t count() const { return chunk_ids_.size(); }

 private:
  double k1_ = 0.9;
  double b_ = 0.4;
  double avg_len_ = 0.0;
  std::vector<std::string> chunk_ids_;
  std::vector<int> lengths_;
  std::map<std::string, std::vector<std::pair<size_t, int>>> postings_;  // term -> (chunk, tf)

  std::vector<double> all_scores(const std::string& query) const;
};

}  // namespace justgen
