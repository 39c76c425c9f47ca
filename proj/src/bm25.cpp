#include "justgen/bm25.hpp"

#include <cmath>
#include <set>

#include "justgen/errors.hpp"
#include "justgen/kernels.hpp"
#include "justgen/text.hpp"

namespace justgen {

Bm25Index Bm25Index::build(const Corpus& corpus, double k1, double b) {
  if (corpus.chunks.empty()) fail(ErrorKind::EmptyCorpus, "cannot build BM25 over an empty corpus");
  Bm25Index idx;
  idx.k1_ = k1;
  idx.b_ = b;
  long total_len = 0;
  for (size_t i = 0; i < corpus.chunks.size(); ++i) {
    const Chunk& c = corpus.chunks[i];
    idx.chunk_ids_.push_back(c.chunk_id);
    const std::vector<std::string> words = normalized_words(c.text);
    idx.lengths_.push_back(static_cast<int>(words.size()));
    total_len += static_cast<long>(words.size());
    std::map<std::string, int> tf;
    for (const std::string& w : words) ++tf[w];
    for (const auto& [w, f] : tf) idx.postings_[w].emplace_back(i, f);
  }
  idx.avg_len_ = static_cast<double>(total_len) / static_cast<double>(corpus.chunks.size());
  return idx;
}

std::vector<double> Bm25Index::all_scores(const std::string& query) const {
  const std::vector<std::string> words = normalized_words(query);
  if (words.empty()) fail(ErrorKind::EmptyQuery, "BM25 query has no terms");
  const std::set<std::string> terms(words.begin(), words.end());
  std::vector<double> scores(chunk_ids_.size(), 0.0);
  const double n = static_cast<double>(chunk_ids_.size());
  for (const std::string& t : terms) {
    auto it = postings_.find(t);
    if (it == postings_.end()) continue;
    const double df = static_cast<double>(it->second.size());
    const double idf = std::max(kEpsilonIdf, std::log((n - df + 0.5) / (df + 0.5)));
    for (const auto& [chunk, tf] : it->second) {
      const double norm = tf + k1_ * (1.0 - b_ + b_ * lengths_[chunk] / avg_len_);
      scores[chunk] += idf * (k1_ + 1.0) * tf / norm;
    }
  }
  return scores;
}

double Bm25Index::score(const std::string& query, size_t chunk_index) const {
  if (chunk_index >= chunk_ids_.size()) fail(ErrorKind::DimensionMismatch, "BM25: chunk index out of range");
  return all_scores(query)[chunk_index];
}

RetrievedSet Bm25Index::retrieve(const std::string& query, int n) const {
  if (n < 1) fail(ErrorKind::InvalidConfig, "BM25 retrieve: n must be >= 1");
  if (static_cast<size_t>(n) > count())
    fail(ErrorKind::NTooLarge, "BM25 retrieve: n exceeds corpus size " + std::to_string(count()));
  const std::vector<double> scores = all_scores(query);
  const std::vector<size_t> top =
      kernels::top_k(scores, static_cast<size_t>(n), [&](size_t a, size_t b) { return chunk_ids_[a] < chunk_ids_[b]; });
  RetrievedSet out;
  out.row_indices = top;
  for (size_t i : top) {
    out.chunk_ids.push_back(chunk_ids_[i]);
    out.scores.push_back(scores[i]);
  }
  return out;
}

}  // namespace justgen
