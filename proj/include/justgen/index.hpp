#pragma once

#include <string>
#include <vector>

#include "justgen/corpus.hpp"
#include "justgen/matrix.hpp"
#include "justgen/model.hpp"

namespace justgen {

// Exact inner-product retrieval over frozen document-encoder embeddings.
// Rows are f32 (as on disk); scores accumulate in double.
struct EmbeddingIndex {
  int dim = 0;
  std::vector<float> rows;              // row-major [count, dim]
  std::vector<std::string> chunk_ids;   // aligned with rows

  size_t count() const { return chunk_ids.size(); }
  const float* row(size_t i) const { return rows.data() + i * static_cast<size_t>(dim); }
  Matrix row_matrix(size_t i) const;  // widened [1, dim]
};

struct RetrievedSet {
  std::vector<size_t> row_indices;
  std::vector<std::string> chunk_ids;
  std::vector<double> scores;  // ordered score desc, chunk_id asc on ties

  size_t size() const { return chunk_ids.size(); }
};

// Encodes every chunk with the document encoder (parallel across chunks,
// deterministic merge in corpus order).
EmbeddingIndex build_index(const Corpus& corpus, const Model& model);

// Exact top-n by inner product; ties broken by ascending chunk_id.
// query is [1, dim].  n must satisfy 1 <= n <= count.
RetrievedSet retrieve(const EmbeddingIndex& index, const Matrix& query, int n);

// Directory layout: meta.json {version, dim, count, dtype, tie_break},
// embeddings.bin (row-major little-endian f32), ids.txt (one id per line).
void save_index(const EmbeddingIndex& index, const std::string& dir);
EmbeddingIndex load_index(const std::string& dir);

}  // namespace justgen
