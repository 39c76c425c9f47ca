#pragma once

#include <map>
#include <string>
#include <vector>

#include "justgen/autograd.hpp"
#include "justgen/corpus.hpp"
#include "justgen/index.hpp"
#include "justgen/model.hpp"

namespace justgen {

// The six training objectives.  ret_* train the query encoder only; lm_*
// and base_lm train the generator only; document embeddings are always
// frozen index rows.
enum class LossName {
  BaseLm,             // negative mean per-token log-likelihood
  PerplexityDistill,  // retrieval softmax -> per-doc likelihood softmax
  RetG,               // article embedding vs retrieved embeddings (MSE)
  LmG,                // retrieved-context dists vs article-context dists (MSE)
  RetC,               // per-doc chunk alignment KL (retriever side)
  LmC,                // cross-attention score KL (generator side)
};

const char* loss_name(LossName name);
LossName parse_loss_name(const std::string& name);  // InvalidConfig on unknown

struct LossConfig {
  std::vector<LossName> active{LossName::BaseLm};
  std::map<LossName, double> weights;  // absent entry = 1.0

  // Teacher branches enter the graph as frozen constants by default;
  // clearing a flag routes gradients through that branch instead.
  bool stop_retrieval_teacher = true;           // per-doc target likelihoods
  bool stop_article_generation_teacher = true;  // article-conditioned dists
  bool stop_chunk_alignment_teacher = true;     // per-doc chunk likelihoods
  bool stop_attention_teacher = true;           // article-side attention

  int article_chunk_words = 100;

  bool is_active(LossName name) const;
  double weight(LossName name) const;
  void validate() const;

  // base_lm + perplexity_distill + one retriever-side and one
  // generator-side distillation term, all at unit weight.
  static LossConfig combo(LossName retrieval_loss, LossName generation_loss);
};

// Top-N retrieved chunks with their frozen index embeddings ([N, dim]).
// For article-as-input training the embeddings matrix may be empty; only
// the retrieval-side losses require it.
struct RetrievedContexts {
  std::vector<std::string> chunk_ids;
  std::vector<std::string> texts;
  Matrix embeddings;

  int count() const { return static_cast<int>(texts.size()); }
};

RetrievedContexts gather_contexts(const EmbeddingIndex& index, const Corpus& corpus, const RetrievedSet& retrieved);

// Per retrieved doc: the article chunk most similar under the current query
// encoder (score = query embedding of the chunk dotted with the doc's
// frozen embedding), ties to the lowest chunk position.
struct ChunkAssignment {
  std::vector<int> best_chunk;
  std::vector<double> best_score;
};

ChunkAssignment chunk_assign(const Model& model, const std::vector<std::string>& article_chunks,
                             const RetrievedContexts& contexts);

// One instance's loss-ready views: tokenized target and article chunks
// (empty unless an article-dependent loss is active).
struct LossInputs {
  std::string claim;
  TokenSeq target;
  std::vector<std::string> article_chunks;
};

LossInputs make_loss_inputs(const Model& model, const Instance& instance, const LossConfig& config);

// Frozen teacher-side quantities, evaluated once per step at the current
// parameters.  Finite-difference checks hold these fixed while probing, so
// analytic and numeric gradients agree under the stop-gradient semantics.
struct Teachers {
  std::vector<double> retrieval_target;        // softmax_j log p(y | x, d_j)
  Matrix article_dists;                        // [|y|, vocab]
  ChunkAssignment assignment;                  // doc -> article chunk
  std::vector<double> chunk_alignment_target;  // per-doc alignment weight
  std::vector<double> attention_target;        // per-doc attention target
};

Teachers compute_teachers(const Model& model, const LossInputs& in, const RetrievedContexts& contexts,
                          const LossConfig& config);

struct LossBreakdown {
  std::vector<std::pair<LossName, double>> values;  // unweighted terms
  double total = 0.0;                               // weighted sum

  double value(LossName name) const;  // InactiveLossRequested when absent
};

// Weighted sum of the active losses, on the tape (call backward on the
// result to get gradients).  `teachers` must cover every active loss whose
// stop flag is set.
ad::Var total_loss(ad::Tape& tape, const Model& model, const LossInputs& in, const RetrievedContexts& contexts,
                   const LossConfig& config, const Teachers& teachers, LossBreakdown* breakdown = nullptr);

// Value-only convenience: computes teachers and evaluates on a fresh tape.
double total_loss_value(const Model& model, const LossInputs& in, const RetrievedContexts& contexts,
                        const LossConfig& config, LossBreakdown* breakdown = nullptr);

// Shared numeric helpers.
std::vector<double> softmax_values(const std::vector<double>& v);
double kl_divergence(const std::vector<double>& q, const std::vector<double>& p);

// Value-level loss cores over the intermediate quantities each objective is
// defined on.  The tape-side assembly in total_loss must agree with these on
// the same intermediates (asserted by the consistency tests), which makes
// the cores the reference semantics of the objectives.
namespace losscore {

// KL(softmax(per_doc_loglik) || softmax(scores)).
double perplexity_alignment(const std::vector<double>& scores, const std::vector<double>& per_doc_loglik);

// (1 / (N*d)) sum_j ||pooled - docs[j]||^2; pooled is [1,d], docs [N,d].
double article_retrieval(const Matrix& pooled, const Matrix& docs);

// Mean over all entries of (student - teacher)^2; both [|y|, vocab].
double article_generation(const Matrix& student, const Matrix& teacher);

// sum_j q_selected[j] * ln(q_selected[j] / p_selected[j]), the per-doc
// alignment terms already evaluated at each doc's assigned article chunk.
double chunk_retrieval(const std::vector<double>& q_selected, const std::vector<double>& p_selected);

// KL(p_prime || p_doc) over the retrieved docs.
double chunk_generation(const std::vector<double>& p_prime, const std::vector<double>& p_doc);

}  // namespace losscore

}  // namespace justgen
