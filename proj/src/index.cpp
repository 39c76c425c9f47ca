#include "justgen/index.hpp"

#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "justgen/encoder.hpp"
#include "justgen/errors.hpp"
#include "justgen/kernels.hpp"
#include "justgen/text.hpp"

namespace justgen {

using nlohmann::json;

Matrix EmbeddingIndex::row_matrix(size_t i) const {
  Matrix m(1, dim);
  const float* r = row(i);
  for (int j = 0; j < dim; ++j) m.data[static_cast<size_t>(j)] = static_cast<double>(r[j]);
  return m;
}

EmbeddingIndex build_index(const Corpus& corpus, const Model& model) {
  if (corpus.chunks.empty()) fail(ErrorKind::EmptyCorpus, "cannot index an empty corpus");
  EmbeddingIndex index;
  index.dim = model.config.retriever.dim;
  index.chunk_ids.reserve(corpus.chunks.size());
  for (const Chunk& c : corpus.chunks) index.chunk_ids.push_back(c.chunk_id);
  index.rows.assign(corpus.chunks.size() * static_cast<size_t>(index.dim), 0.0f);
  // Each chunk's embedding is independent; rows land in corpus order no
  // matter how the loop is scheduled.
  kernels::parallel_for(corpus.chunks.size(), [&](size_t i) {
    const Matrix e = encode_document_value(model, corpus.chunks[i].text);
    float* out = index.rows.data() + i * static_cast<size_t>(index.dim);
    for (int j = 0; j < index.dim; ++j) out[j] = static_cast<float>(e.data[static_cast<size_t>(j)]);
  });
  return index;
}

RetrievedSet retrieve(const EmbeddingIndex& index, const Matrix& query, int n) {
  if (index.count() == 0) fail(ErrorKind::EmptyCorpus, "index has no rows");
  if (query.rows != 1 || query.cols != index.dim) fail(ErrorKind::DimensionMismatch, "query dimension mismatch");
  if (n < 1) fail(ErrorKind::InvalidConfig, "retrieve: n must be >= 1");
  if (static_cast<size_t>(n) > index.count())
    fail(ErrorKind::NTooLarge, "retrieve: n=" + std::to_string(n) + " exceeds index size " + std::to_string(index.count()));

  std::vector<double> scores(index.count());
  kernels::score_rows(index.rows.data(), index.count(), index.dim, query.data.data(), scores.data());
  const std::vector<size_t> top = kernels::top_k(
      scores, static_cast<size_t>(n), [&](size_t a, size_t b) { return index.chunk_ids[a] < index.chunk_ids[b]; });

  RetrievedSet out;
  out.row_indices = top;
  for (size_t i : top) {
    out.chunk_ids.push_back(index.chunk_ids[i]);
    out.scores.push_back(scores[i]);
  }
  return out;
}

void save_index(const EmbeddingIndex& index, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  json meta{{"version", 1},
            {"dim", index.dim},
            {"count", index.count()},
            {"dtype", "f32"},
            {"tie_break", "chunk_id_asc"}};
  write_file((fs::path(dir) / "meta.json").string(), meta.dump(2) + "\n");
  write_f32_file((fs::path(dir) / "embeddings.bin").string(), index.rows);
  std::string ids;
  for (const std::string& id : index.chunk_ids) {
    ids += id;
    ids += '\n';
  }
  write_file((fs::path(dir) / "ids.txt").string(), ids);
}

EmbeddingIndex load_index(const std::string& dir) {
  namespace fs = std::filesystem;
  const json meta = json::parse(read_file((fs::path(dir) / "meta.json").string()), nullptr, false);
  if (meta.is_discarded()) fail(ErrorKind::MalformedInput, dir + "/meta.json: corrupt");
  if (meta.at("version").get<int>() != 1) fail(ErrorKind::MalformedInput, dir + ": unsupported index version");
  if (meta.at("dtype").get<std::string>() != "f32") fail(ErrorKind::MalformedInput, dir + ": unsupported dtype");
  EmbeddingIndex index;
  index.dim = meta.at("dim").get<int>();
  index.rows = read_f32_file((fs::path(dir) / "embeddings.bin").string());
  const std::string ids = read_file((fs::path(dir) / "ids.txt").string());
  size_t start = 0;
  while (start < ids.size()) {
    size_t end = ids.find('\n', start);
    if (end == std::string::npos) end = ids.size();
    if (end > start) index.chunk_ids.push_back(ids.substr(start, end - start));
    start = end + 1;
  }
  const size_t count = meta.at("count").get<size_t>();
  if (index.chunk_ids.size() != count || index.rows.size() != count * static_cast<size_t>(index.dim))
    fail(ErrorKind::MalformedInput, dir + ": row/id/count mismatch");
  return index;
}

}  // namespace justgen
