#pragma once

#include <map>
#include <string>
#include <vector>

#include "justgen/autograd.hpp"
#include "justgen/model.hpp"

namespace justgen {

// Binds named parameters to tape leaves, one leaf per parameter per tape.
class ParamBinder {
 public:
  ParamBinder(ad::Tape& tape, const ParamStore& params) : tape_(&tape), params_(&params) {}
  ad::Var operator()(const std::string& name);

 private:
  ad::Tape* tape_;
  const ParamStore* params_;
  std::map<int, ad::Var> cache_;
};

// Multi-head scaled dot-product attention reading its projections from
// `prefix` + {wq,wk,wv,wo}.  `mask` is added to every head's logits;
// `record_probs` receives each head's post-softmax weights when non-null.
ad::Var attention(ad::Tape& tape, ParamBinder& bind, const std::string& prefix, ad::Var q_in, ad::Var kv_in,
                  int heads, const Matrix* mask, std::vector<ad::Var>* record_probs);

// Names of the tensors a pre-norm encoder stack reads.
struct StackNames {
  std::string tok_emb;
  std::string pos_emb;
  std::vector<std::string> block_prefixes;  // one per layer
  std::string final_norm;
  int heads = 1;
};

// Embedding + position + `layers` pre-norm blocks + final norm: [T, dim].
ad::Var transformer_encoder(ad::Tape& tape, ParamBinder& bind, const StackNames& names, const TokenSeq& ids);

// --- retrieval encoders -----------------------------------------------------

// Mean-pooled query-side embedding, on tape (gradients flow to query.*).
// Text beyond the encoder's max_len tokens is truncated.
ad::Var encode_query(ad::Tape& tape, const Model& model, const std::string& text);

// Value-only variants (scratch tape inside).
Matrix encode_query_value(const Model& model, const std::string& text);
Matrix encode_document_value(const Model& model, const std::string& text);

// Mean of the per-chunk query-side embeddings, on tape.
ad::Var article_embedding(ad::Tape& tape, const Model& model, const std::vector<std::string>& chunks);

}  // namespace justgen
