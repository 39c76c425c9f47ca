#include "justgen/encoder.hpp"

#include <cmath>

#include "justgen/errors.hpp"

namespace justgen {

using ad::Tape;
using ad::Var;

Var ParamBinder::operator()(const std::string& name) {
  const int id = params_->id(name);
  if (id < 0) fail(ErrorKind::Internal, "unbound parameter: " + name);
  auto it = cache_.find(id);
  if (it != cache_.end()) return it->second;
  const Var v = tape_->param(id, &params_->value(id));
  cache_.emplace(id, v);
  return v;
}

Var attention(Tape& tape, ParamBinder& bind, const std::string& prefix, Var q_in, Var kv_in, int heads,
              const Matrix* mask, std::vector<ad::Var>* record_probs) {
  const Var q = tape.matmul(q_in, false, bind(prefix + "wq"), false);
  const Var k = tape.matmul(kv_in, false, bind(prefix + "wk"), false);
  const Var v = tape.matmul(kv_in, false, bind(prefix + "wv"), false);
  const int d = tape.val(q).cols;
  if (d % heads != 0) fail(ErrorKind::InvalidConfig, "attention width must divide by heads");
  const int hd = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));

  Var mask_var;
  // Copied, not viewed: callers build masks as locals that die before the
  // tape's backward pass runs.
  if (mask) mask_var = tape.constant(*mask);

  std::vector<Var> head_outs;
  head_outs.reserve(static_cast<size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const Var qh = tape.slice_cols(q, h * hd, (h + 1) * hd);
    const Var kh = tape.slice_cols(k, h * hd, (h + 1) * hd);
    const Var vh = tape.slice_cols(v, h * hd, (h + 1) * hd);
    Var scores = tape.scale(tape.matmul(qh, false, kh, true), inv_sqrt);
    if (mask) scores = tape.add(scores, mask_var);
    const Var probs = tape.softmax_rows(scores);
    if (record_probs) record_probs->push_back(probs);
    head_outs.push_back(tape.matmul(probs, false, vh, false));
  }
  const Var merged = heads == 1 ? head_outs[0] : tape.concat_cols(head_outs);
  return tape.matmul(merged, false, bind(prefix + "wo"), false);
}

Var transformer_encoder(Tape& tape, ParamBinder& bind, const StackNames& names, const TokenSeq& ids) {
  if (ids.empty()) fail(ErrorKind::EmptyText, "encoder input has no tokens");
  const int t = static_cast<int>(ids.size());
  Var h = tape.add(tape.embed(bind(names.tok_emb), ids), tape.slice_rows(bind(names.pos_emb), 0, t));
  for (const std::string& p : names.block_prefixes) {
    Var x = tape.rmsnorm(h, bind(p + "att_norm.g"));
    h = tape.add(h, attention(tape, bind, p + "att.", x, x, names.heads, nullptr, nullptr));
    x = tape.rmsnorm(h, bind(p + "ff_norm.g"));
    const Var ff = tape.matmul(tape.gelu(tape.matmul(x, false, bind(p + "ff.w1"), false)), false, bind(p + "ff.w2"), false);
    h = tape.add(h, ff);
  }
  return tape.rmsnorm(h, bind(names.final_norm));
}

namespace {

StackNames retrieval_stack_names(const std::string& side, const EncoderConfig& cfg) {
  StackNames n;
  n.tok_emb = side + ".tok_emb";
  n.pos_emb = side + ".pos_emb";
  for (int l = 0; l < cfg.layers; ++l) n.block_prefixes.push_back(side + ".L" + std::to_string(l) + ".");
  n.final_norm = side + ".final_norm.g";
  n.heads = cfg.heads;
  return n;
}

Var encode_pooled(Tape& tape, const Model& model, const std::string& side, const std::string& text) {
  TokenSeq ids = model.tokenizer.encode(text);
  if (ids.empty()) fail(ErrorKind::EmptyText, "cannot encode empty text");
  const EncoderConfig& cfg = model.config.retriever;
  if (static_cast<int>(ids.size()) > cfg.max_len) ids.resize(static_cast<size_t>(cfg.max_len));
  ParamBinder bind(tape, model.params);
  return tape.mean_rows(transformer_encoder(tape, bind, retrieval_stack_names(side, cfg), ids));
}

}  // namespace

Var encode_query(Tape& tape, const Model& model, const std::string& text) {
  return encode_pooled(tape, model, "query", text);
}

Matrix encode_query_value(const Model& model, const std::string& text) {
  Tape tape;
  return tape.val(encode_pooled(tape, model, "query", text));
}

Matrix encode_document_value(const Model& model, const std::string& text) {
  Tape tape;
  return tape.val(encode_pooled(tape, model, "doc", text));
}

Var article_embedding(Tape& tape, const Model& model, const std::vector<std::string>& chunks) {
  if (chunks.empty()) fail(ErrorKind::EmptyArticle, "article produced no chunks");
  std::vector<Var> embs;
  embs.reserve(chunks.size());
  for (const std::string& c : chunks) embs.push_back(encode_query(tape, model, c));
  return chunks.size() == 1 ? embs[0] : tape.mean_rows(tape.concat_rows(embs));
}

}  // namespace justgen
