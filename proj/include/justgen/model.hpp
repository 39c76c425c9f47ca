#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "justgen/matrix.hpp"
#include "justgen/tokenizer.hpp"

namespace justgen {

// Named dense tensors with stable integer ids (registration order).  The
// ids index GradVec slots; the names key the checkpoint tensor table.
class ParamStore {
 public:
  int add(const std::string& name, Matrix value);
  int id(const std::string& name) const;  // -1 when absent
  int count() const { return static_cast<int>(entries_.size()); }
  const std::string& name(int id) const { return entries_[static_cast<size_t>(id)].name; }
  Matrix& value(int id) { return entries_[static_cast<size_t>(id)].value; }
  const Matrix& value(int id) const { return entries_[static_cast<size_t>(id)].value; }
  Matrix& value(const std::string& name);
  const Matrix& value(const std::string& name) const;

 private:
  struct Entry {
    std::string name;
    Matrix value;
  };
  std::vector<Entry> entries_;
  std::map<std::string, int> by_name_;
};

// Pre-norm transformer encoder stack used by both retrieval encoders.
struct EncoderConfig {
  int dim = 64;
  int layers = 2;
  int heads = 2;
  int ff = 128;
  int max_len = 512;
};

// Encoder-decoder used for generation; every context is encoded separately
// (claim prepended) and the decoder cross-attends over the concatenation.
struct SeqModelConfig {
  int d_model = 64;
  int enc_layers = 2;
  int dec_layers = 2;
  int heads = 2;
  int ff = 128;
  int max_src_len = 256;  // per-context limit, claim + sep + context
  int max_tgt_len = 256;
};

struct ModelConfig {
  EncoderConfig retriever;
  SeqModelConfig lm;
  int max_vocab = 32768;
  uint64_t init_seed = 13;
};

// Which parameters a training phase updates.
enum class ParamGroup { Query, Doc, Lm };

struct Model {
  ModelConfig config;
  Tokenizer tokenizer;
  ParamStore params;
  std::map<ParamGroup, std::vector<int>> groups;

  int vocab_size() const { return tokenizer.vocab_size(); }
  const std::vector<int>& group(ParamGroup g) const { return groups.at(g); }
};

// Fresh model: tokenizer built from `texts`, weights from a seeded normal
// init.  The document encoder starts as an exact copy of the query encoder
// (a shared starting point; only the query side ever trains).
Model init_model(const ModelConfig& config, const std::vector<std::string>& texts);

// Versioned tensor container: an 8-byte magic, a JSON header (config, vocab
// hash, tokenizer file reference, tensor table), then row-major
// little-endian f32 tensor data.  The tokenizer itself lives in a vocab
// file next to the checkpoint.
void save_checkpoint(const Model& model, const std::string& path, const std::string& tokenizer_file = "vocab.txt");
Model load_checkpoint(const std::string& path);

}  // namespace justgen
