#include "justgen/model.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "justgen/errors.hpp"
#include "justgen/rng.hpp"
#include "justgen/text.hpp"

namespace justgen {

using nlohmann::json;

namespace {
constexpr char kMagic[8] = {'J', 'G', 'C', 'K', 'P', 'T', '0', '1'};
constexpr double kInitStd = 0.02;
}  // namespace

int ParamStore::add(const std::string& name, Matrix value) {
  if (by_name_.count(name)) fail(ErrorKind::Internal, "duplicate parameter name: " + name);
  const int id = static_cast<int>(entries_.size());
  entries_.push_back({name, std::move(value)});
  by_name_.emplace(name, id);
  return id;
}

int ParamStore::id(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? -1 : it->second;
}

Matrix& ParamStore::value(const std::string& name) {
  const int i = id(name);
  if (i < 0) fail(ErrorKind::Internal, "unknown parameter: " + name);
  return value(i);
}

const Matrix& ParamStore::value(const std::string& name) const {
  const int i = id(name);
  if (i < 0) fail(ErrorKind::Internal, "unknown parameter: " + name);
  return value(i);
}

namespace {

// Registers one pre-norm encoder block's tensors under `prefix`.
void add_encoder_block(ParamStore& ps, std::vector<int>& ids, const std::string& prefix, int dim, int ff, Rng& rng) {
  for (const char* w : {"att.wq", "att.wk", "att.wv", "att.wo"})
    ids.push_back(ps.add(prefix + w, Matrix::randn(dim, dim, kInitStd, rng)));
  ids.push_back(ps.add(prefix + "att_norm.g", Matrix::full(1, dim, 1.0)));
  ids.push_back(ps.add(prefix + "ff.w1", Matrix::randn(dim, ff, kInitStd, rng)));
  ids.push_back(ps.add(prefix + "ff.w2", Matrix::randn(ff, dim, kInitStd, rng)));
  ids.push_back(ps.add(prefix + "ff_norm.g", Matrix::full(1, dim, 1.0)));
}

void add_text_encoder(ParamStore& ps, std::vector<int>& ids, const std::string& prefix, const EncoderConfig& cfg,
                      int vocab, Rng& rng) {
  ids.push_back(ps.add(prefix + "tok_emb", Matrix::randn(vocab, cfg.dim, kInitStd, rng)));
  ids.push_back(ps.add(prefix + "pos_emb", Matrix::randn(cfg.max_len, cfg.dim, kInitStd, rng)));
  for (int l = 0; l < cfg.layers; ++l)
    add_encoder_block(ps, ids, prefix + "L" + std::to_string(l) + ".", cfg.dim, cfg.ff, rng);
  ids.push_back(ps.add(prefix + "final_norm.g", Matrix::full(1, cfg.dim, 1.0)));
}

void validate_config(const ModelConfig& c) {
  if (c.retriever.dim < 1 || c.lm.d_model < 1) fail(ErrorKind::InvalidConfig, "model dims must be positive");
  if (c.retriever.dim % c.retriever.heads != 0) fail(ErrorKind::InvalidConfig, "retriever dim must divide by heads");
  if (c.lm.d_model % c.lm.heads != 0) fail(ErrorKind::InvalidConfig, "lm d_model must divide by heads");
  if (c.retriever.layers < 1 || c.lm.enc_layers < 1 || c.lm.dec_layers < 1)
    fail(ErrorKind::InvalidConfig, "layer counts must be >= 1");
  if (c.retriever.max_len < 2 || c.lm.max_src_len < 2 || c.lm.max_tgt_len < 2)
    fail(ErrorKind::InvalidConfig, "sequence limits too small");
}

}  // namespace

Model init_model(const ModelConfig& config, const std::vector<std::string>& texts) {
  validate_config(config);
  Model m;
  m.config = config;
  m.tokenizer = Tokenizer::build(texts, config.max_vocab);
  const int vocab = m.tokenizer.vocab_size();
  Rng rng(config.init_seed);

  auto& query_ids = m.groups[ParamGroup::Query];
  auto& doc_ids = m.groups[ParamGroup::Doc];
  auto& lm_ids = m.groups[ParamGroup::Lm];

  add_text_encoder(m.params, query_ids, "query.", config.retriever, vocab, rng);

  // Document encoder: same shapes, same initial values as the query side.
  for (int qid : query_ids) {
    const std::string doc_name = "doc." + m.params.name(qid).substr(6);
    doc_ids.push_back(m.params.add(doc_name, m.params.value(qid)));
  }

  const SeqModelConfig& lm = config.lm;
  lm_ids.push_back(m.params.add("lm.tok_emb", Matrix::randn(vocab, lm.d_model, kInitStd, rng)));
  lm_ids.push_back(m.params.add("lm.enc_pos", Matrix::randn(lm.max_src_len, lm.d_model, kInitStd, rng)));
  lm_ids.push_back(m.params.add("lm.dec_pos", Matrix::randn(lm.max_tgt_len, lm.d_model, kInitStd, rng)));
  for (int l = 0; l < lm.enc_layers; ++l)
    add_encoder_block(m.params, lm_ids, "lm.encL" + std::to_string(l) + ".", lm.d_model, lm.ff, rng);
  for (int l = 0; l < lm.dec_layers; ++l) {
    const std::string p = "lm.decL" + std::to_string(l) + ".";
    for (const char* w : {"self.wq", "self.wk", "self.wv", "self.wo"})
      lm_ids.push_back(m.params.add(p + w, Matrix::randn(lm.d_model, lm.d_model, kInitStd, rng)));
    lm_ids.push_back(m.params.add(p + "self_norm.g", Matrix::full(1, lm.d_model, 1.0)));
    for (const char* w : {"cross.wq", "cross.wk", "cross.wv", "cross.wo"})
      lm_ids.push_back(m.params.add(p + w, Matrix::randn(lm.d_model, lm.d_model, kInitStd, rng)));
    lm_ids.push_back(m.params.add(p + "cross_norm.g", Matrix::full(1, lm.d_model, 1.0)));
    lm_ids.push_back(m.params.add(p + "ff.w1", Matrix::randn(lm.d_model, lm.ff, kInitStd, rng)));
    lm_ids.push_back(m.params.add(p + "ff.w2", Matrix::randn(lm.ff, lm.d_model, kInitStd, rng)));
    lm_ids.push_back(m.params.add(p + "ff_norm.g", Matrix::full(1, lm.d_model, 1.0)));
  }
  lm_ids.push_back(m.params.add("lm.enc_final_norm.g", Matrix::full(1, lm.d_model, 1.0)));
  lm_ids.push_back(m.params.add("lm.dec_final_norm.g", Matrix::full(1, lm.d_model, 1.0)));
  lm_ids.push_back(m.params.add("lm.out_proj", Matrix::randn(lm.d_model, vocab, kInitStd, rng)));
  return m;
}

namespace {

json encoder_config_json(const EncoderConfig& c) {
  return json{{"dim", c.dim}, {"layers", c.layers}, {"heads", c.heads}, {"ff", c.ff}, {"max_len", c.max_len}};
}

EncoderConfig encoder_config_from_json(const json& j) {
  EncoderConfig c;
  c.dim = j.at("dim");
  c.layers = j.at("layers");
  c.heads = j.at("heads");
  c.ff = j.at("ff");
  c.max_len = j.at("max_len");
  return c;
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path, const std::string& tokenizer_file) {
  namespace fs = std::filesystem;
  const fs::path ckpt(path);
  const fs::path dir = ckpt.parent_path().empty() ? fs::path(".") : ckpt.parent_path();
  model.tokenizer.save((dir / tokenizer_file).string());

  const SeqModelConfig& lm = model.config.lm;
  json header;
  header["version"] = 1;
  header["config"] = {
      {"retriever", encoder_config_json(model.config.retriever)},
      {"lm",
       {{"d_model", lm.d_model},
        {"enc_layers", lm.enc_layers},
        {"dec_layers", lm.dec_layers},
        {"heads", lm.heads},
        {"ff", lm.ff},
        {"max_src_len", lm.max_src_len},
        {"max_tgt_len", lm.max_tgt_len}}},
      {"max_vocab", model.config.max_vocab},
      {"init_seed", model.config.init_seed},
      {"vocab", model.tokenizer.vocab_size()},
      {"vocab_hash", hex64(model.tokenizer.vocab_hash())},
      {"tokenizer_file", tokenizer_file},
  };
  json tensors = json::array();
  size_t offset = 0;
  for (int i = 0; i < model.params.count(); ++i) {
    const Matrix& v = model.params.value(i);
    tensors.push_back({{"name", model.params.name(i)}, {"rows", v.rows}, {"cols", v.cols}, {"offset", offset}});
    offset += v.size();
  }
  header["tensors"] = std::move(tensors);
  const std::string header_str = header.dump();

  // Atomic: write to a temp file in the same directory, then rename.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoError, "cannot open for writing: " + tmp);
    out.write(kMagic, sizeof(kMagic));
    const uint64_t len = header_str.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (int i = 0; i < model.params.count(); ++i) {
      const std::vector<float> f = to_f32(model.params.value(i).data);
      out.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(float)));
    }
    if (!out.flush()) fail(ErrorKind::IoError, "short write: " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::IoError, "cannot move " + tmp + " into place: " + ec.message());
}

Model load_checkpoint(const std::string& path) {
  namespace fs = std::filesystem;
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    fail(ErrorKind::MalformedInput, path + ": not a checkpoint file");
  uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len == 0 || len > (1ULL << 30)) fail(ErrorKind::MalformedInput, path + ": corrupt header length");
  std::string header_str(len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(len));
  if (!in) fail(ErrorKind::MalformedInput, path + ": truncated header");
  json header = json::parse(header_str, nullptr, false);
  if (header.is_discarded()) fail(ErrorKind::MalformedInput, path + ": corrupt header JSON");
  if (header.at("version").get<int>() != 1) fail(ErrorKind::MalformedInput, path + ": unsupported version");

  Model m;
  const json& cfg = header.at("config");
  m.config.retriever = encoder_config_from_json(cfg.at("retriever"));
  const json& lmj = cfg.at("lm");
  m.config.lm.d_model = lmj.at("d_model");
  m.config.lm.enc_layers = lmj.at("enc_layers");
  m.config.lm.dec_layers = lmj.at("dec_layers");
  m.config.lm.heads = lmj.at("heads");
  m.config.lm.ff = lmj.at("ff");
  m.config.lm.max_src_len = lmj.at("max_src_len");
  m.config.lm.max_tgt_len = lmj.at("max_tgt_len");
  m.config.max_vocab = cfg.at("max_vocab");
  m.config.init_seed = cfg.at("init_seed");

  const fs::path dir = fs::path(path).parent_path().empty() ? fs::path(".") : fs::path(path).parent_path();
  m.tokenizer = Tokenizer::load((dir / cfg.at("tokenizer_file").get<std::string>()).string());
  if (hex64(m.tokenizer.vocab_hash()) != cfg.at("vocab_hash").get<std::string>())
    fail(ErrorKind::MalformedInput, path + ": vocabulary hash mismatch with tokenizer file");
  if (m.tokenizer.vocab_size() != cfg.at("vocab").get<int>())
    fail(ErrorKind::MalformedInput, path + ": vocabulary size mismatch");

  for (const json& t : header.at("tensors")) {
    Matrix v(t.at("rows").get<int>(), t.at("cols").get<int>());
    std::vector<float> f(v.size());
    in.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(float)));
    if (!in) fail(ErrorKind::MalformedInput, path + ": truncated tensor data");
    v.data = from_f32(f);
    const int id = m.params.add(t.at("name").get<std::string>(), std::move(v));
    const std::string& name = m.params.name(id);
    ParamGroup g = ParamGroup::Lm;
    if (name.rfind("query.", 0) == 0) g = ParamGroup::Query;
    else if (name.rfind("doc.", 0) == 0) g = ParamGroup::Doc;
    m.groups[g].push_back(id);
  }
  for (ParamGroup g : {ParamGroup::Query, ParamGroup::Doc, ParamGroup::Lm})
    if (!m.groups.count(g)) fail(ErrorKind::MalformedInput, path + ": checkpoint is missing a parameter group");
  return m;
}

}  // namespace justgen
