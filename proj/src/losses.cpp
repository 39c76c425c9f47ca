#include "justgen/losses.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "justgen/encoder.hpp"
#include "justgen/errors.hpp"
#include "justgen/kernels.hpp"
#include "justgen/seqmodel.hpp"

namespace justgen {

using ad::Tape;
using ad::Var;

const char* loss_name(LossName name) {
  switch (name) {
    case LossName::BaseLm: return "base_lm";
    case LossName::PerplexityDistill: return "perplexity_distill";
    case LossName::RetG: return "ret_g";
    case LossName::LmG: return "lm_g";
    case LossName::RetC: return "ret_c";
    case LossName::LmC: return "lm_c";
  }
  fail(ErrorKind::Internal, "unhandled loss name");
}

LossName parse_loss_name(const std::string& name) {
  for (LossName l : {LossName::BaseLm, LossName::PerplexityDistill, LossName::RetG, LossName::LmG, LossName::RetC,
                     LossName::LmC})
    if (name == loss_name(l)) return l;
  fail(ErrorKind::InvalidConfig, "unknown loss name: " + name);
}

bool LossConfig::is_active(LossName name) const {
  return std::find(active.begin(), active.end(), name) != active.end();
}

double LossConfig::weight(LossName name) const {
  const auto it = weights.find(name);
  return it == weights.end() ? 1.0 : it->second;
}

void LossConfig::validate() const {
  if (active.empty()) fail(ErrorKind::InvalidConfig, "at least one loss must be active");
  std::set<LossName> seen;
  for (LossName l : active)
    if (!seen.insert(l).second) fail(ErrorKind::InvalidConfig, std::string("duplicate loss: ") + loss_name(l));
  for (const auto& [name, w] : weights) {
    if (!seen.count(name))
      fail(ErrorKind::InactiveLossRequested, std::string("weight given for inactive loss: ") + loss_name(name));
    if (!std::isfinite(w)) fail(ErrorKind::InvalidConfig, "loss weights must be finite");
  }
  if (article_chunk_words < 1) fail(ErrorKind::InvalidConfig, "article_chunk_words must be >= 1");
}

LossConfig LossConfig::combo(LossName retrieval_loss, LossName generation_loss) {
  if (retrieval_loss != LossName::RetG && retrieval_loss != LossName::RetC)
    fail(ErrorKind::InvalidConfig, "combo: first element must be a retriever-side loss");
  if (generation_loss != LossName::LmG && generation_loss != LossName::LmC)
    fail(ErrorKind::InvalidConfig, "combo: second element must be a generator-side loss");
  LossConfig cfg;
  cfg.active = {LossName::BaseLm, LossName::PerplexityDistill, retrieval_loss, generation_loss};
  return cfg;
}

RetrievedContexts gather_contexts(const EmbeddingIndex& index, const Corpus& corpus, const RetrievedSet& retrieved) {
  RetrievedContexts out;
  const int n = static_cast<int>(retrieved.size());
  out.embeddings = Matrix(n, index.dim);
  const auto by_id = corpus.id_index();
  for (int j = 0; j < n; ++j) {
    const size_t row = retrieved.row_indices[static_cast<size_t>(j)];
    out.chunk_ids.push_back(retrieved.chunk_ids[static_cast<size_t>(j)]);
    const auto it = by_id.find(retrieved.chunk_ids[static_cast<size_t>(j)]);
    if (it == by_id.end()) fail(ErrorKind::Internal, "retrieved chunk missing from corpus: " + out.chunk_ids.back());
    out.texts.push_back(corpus.chunks[it->second].text);
    const float* r = index.row(row);
    for (int c = 0; c < index.dim; ++c) out.embeddings.at(j, c) = static_cast<double>(r[c]);
  }
  return out;
}

ChunkAssignment chunk_assign(const Model& model, const std::vector<std::string>& article_chunks,
                             const RetrievedContexts& contexts) {
  if (article_chunks.empty()) fail(ErrorKind::EmptyArticle, "chunk_assign: no article chunks");
  const int m = static_cast<int>(article_chunks.size());
  const int n = contexts.count();
  const int dim = contexts.embeddings.cols;
  if (contexts.embeddings.rows != n) fail(ErrorKind::DimensionMismatch, "contexts carry no embeddings");

  std::vector<Matrix> chunk_emb(static_cast<size_t>(m));
  kernels::parallel_for(m, [&](int i) { chunk_emb[static_cast<size_t>(i)] = encode_query_value(model, article_chunks[static_cast<size_t>(i)]); });
  for (const Matrix& e : chunk_emb)
    if (e.cols != dim) fail(ErrorKind::DimensionMismatch, "chunk embedding width differs from index width");

  ChunkAssignment out;
  out.best_chunk.resize(static_cast<size_t>(n));
  out.best_score.resize(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j) {
    int best = 0;
    double best_s = 0.0;
    for (int i = 0; i < m; ++i) {
      double s = 0.0;
      for (int c = 0; c < dim; ++c) s += chunk_emb[static_cast<size_t>(i)].at(0, c) * contexts.embeddings.at(j, c);
      if (i == 0 || s > best_s) {  // strict: ties keep the lowest chunk
        best = i;
        best_s = s;
      }
    }
    out.best_chunk[static_cast<size_t>(j)] = best;
    out.best_score[static_cast<size_t>(j)] = best_s;
  }
  return out;
}

LossInputs make_loss_inputs(const Model& model, const Instance& instance, const LossConfig& config) {
  config.validate();
  LossInputs in;
  in.claim = instance.claim;
  if (instance.justification.empty()) fail(ErrorKind::EmptyText, "instance has no target justification");
  in.target = model.tokenizer.encode_target(instance.justification, model.config.lm.max_tgt_len);
  const bool needs_article = config.is_active(LossName::RetG) || config.is_active(LossName::LmG) ||
                             config.is_active(LossName::RetC) || config.is_active(LossName::LmC);
  if (needs_article) {
    if (instance.article.empty())
      fail(ErrorKind::MissingArticle, "instance " + instance.id + " lacks the article an active loss requires");
    in.article_chunks = chunk_text(instance.article, config.article_chunk_words);
  }
  return in;
}

std::vector<double> softmax_values(const std::vector<double>& v) {
  if (v.empty()) fail(ErrorKind::EmptyText, "softmax of an empty vector");
  const double mx = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double z = 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    z += out[i];
  }
  for (double& x : out) x /= z;
  return out;
}

double kl_divergence(const std::vector<double>& q, const std::vector<double>& p) {
  if (q.size() != p.size()) fail(ErrorKind::LengthMismatch, "kl_divergence: size mismatch");
  double kl = 0.0;
  for (size_t i = 0; i < q.size(); ++i)
    if (q[i] > 0.0) kl += q[i] * (std::log(q[i]) - std::log(p[i]));
  return kl;
}

Teachers compute_teachers(const Model& model, const LossInputs& in, const RetrievedContexts& contexts,
                          const LossConfig& config) {
  config.validate();
  Teachers t;
  const int n = contexts.count();
  if (n < 1) fail(ErrorKind::NoContexts, "teacher evaluation needs at least one context");

  if (config.is_active(LossName::PerplexityDistill) && config.stop_retrieval_teacher) {
    std::vector<double> ll(static_cast<size_t>(n));
    kernels::parallel_for(n, [&](int j) {
      ll[static_cast<size_t>(j)] = lm_logprob(model, in.claim, {contexts.texts[static_cast<size_t>(j)]}, in.target).total;
    });
    t.retrieval_target = softmax_values(ll);
  }

  if (config.is_active(LossName::LmG) && config.stop_article_generation_teacher)
    t.article_dists = token_distributions(model, in.claim, in.article_chunks, in.target);

  const bool chunk_level = config.is_active(LossName::RetC) || config.is_active(LossName::LmC);
  if (chunk_level) t.assignment = chunk_assign(model, in.article_chunks, contexts);

  if (config.is_active(LossName::RetC) && config.stop_chunk_alignment_teacher) {
    t.chunk_alignment_target.assign(static_cast<size_t>(n), 0.0);
    std::set<int> distinct(t.assignment.best_chunk.begin(), t.assignment.best_chunk.end());
    for (int i : distinct) {
      const TokenSeq chunk_target =
          model.tokenizer.encode_target(in.article_chunks[static_cast<size_t>(i)], model.config.lm.max_tgt_len);
      std::vector<double> ll(static_cast<size_t>(n));
      kernels::parallel_for(n, [&](int k) {
        ll[static_cast<size_t>(k)] =
            lm_logprob(model, in.claim, {contexts.texts[static_cast<size_t>(k)]}, chunk_target).total;
      });
      const std::vector<double> q = softmax_values(ll);
      for (int j = 0; j < n; ++j)
        if (t.assignment.best_chunk[static_cast<size_t>(j)] == i)
          t.chunk_alignment_target[static_cast<size_t>(j)] = q[static_cast<size_t>(j)];
    }
  }

  if (config.is_active(LossName::LmC) && config.stop_attention_teacher) {
    const std::vector<double> a_z = cross_attention_doc_scores(model, in.claim, in.article_chunks, in.target);
    const std::vector<double> p_z = softmax_values(a_z);
    std::vector<double> picked(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) picked[static_cast<size_t>(j)] = p_z[static_cast<size_t>(t.assignment.best_chunk[static_cast<size_t>(j)])];
    t.attention_target = softmax_values(picked);
  }
  return t;
}

double LossBreakdown::value(LossName name) const {
  for (const auto& [l, v] : values)
    if (l == name) return v;
  fail(ErrorKind::InactiveLossRequested, std::string("loss not in breakdown: ") + loss_name(name));
}

namespace {

// sum_j q_j * (log q_j - logp[j]) with q a frozen distribution.
Var kl_against_frozen(Tape& tape, const std::vector<double>& q, Var logp) {
  const Matrix& lp = tape.val(logp);
  if (lp.rows != 1 || static_cast<size_t>(lp.cols) != q.size())
    fail(ErrorKind::LengthMismatch, "frozen teacher size differs from the score row");
  double q_log_q = 0.0;
  Matrix q_row(1, lp.cols);
  for (size_t j = 0; j < q.size(); ++j) {
    q_row.at(0, static_cast<int>(j)) = q[j];
    if (q[j] > 0.0) q_log_q += q[j] * std::log(q[j]);
  }
  const Var cross = tape.sum_all(tape.mul(tape.constant(std::move(q_row)), logp));
  return tape.add(tape.scalar_const(q_log_q), tape.neg(cross));
}

// sum over the row of q * (log q - logp) with q on the tape (ablation path).
Var kl_on_tape(Tape& tape, Var log_q, Var logp) {
  const Var kl_terms = tape.mul(tape.exp_elem(log_q), tape.sub(log_q, logp));
  return tape.sum_all(kl_terms);
}

}  // namespace

Var total_loss(Tape& tape, const Model& model, const LossInputs& in, const RetrievedContexts& contexts,
               const LossConfig& config, const Teachers& teachers, LossBreakdown* breakdown) {
  config.validate();
  const int n = contexts.count();
  if (n < 1) fail(ErrorKind::NoContexts, "loss evaluation needs at least one context");
  if (in.target.empty()) fail(ErrorKind::EmptyText, "loss evaluation needs a target sequence");

  const bool needs_article = config.is_active(LossName::RetG) || config.is_active(LossName::LmG) ||
                             config.is_active(LossName::RetC) || config.is_active(LossName::LmC);
  if (needs_article && in.article_chunks.empty())
    fail(ErrorKind::MissingArticle, "an active loss requires article chunks");

  const bool retrieval_side = config.is_active(LossName::PerplexityDistill) || config.is_active(LossName::RetG) ||
                              config.is_active(LossName::RetC);
  if (retrieval_side &&
      (contexts.embeddings.rows != n || contexts.embeddings.cols != model.config.retriever.dim))
    fail(ErrorKind::DimensionMismatch, "retrieval losses need [N, dim] frozen context embeddings");

  std::vector<std::pair<LossName, Var>> terms;

  // Generator pass over the retrieved contexts (student side).
  DecodeResult student;
  if (config.is_active(LossName::BaseLm) || config.is_active(LossName::LmG) || config.is_active(LossName::LmC)) {
    const FidEncoding enc = encode_fid(tape, model, in.claim, contexts.texts);
    DecodeOptions opts;
    opts.want_dists = config.is_active(LossName::LmG);
    opts.want_doc_scores = config.is_active(LossName::LmC);
    student = decode_teacher_forced(tape, model, enc, in.target, opts);
    if (config.is_active(LossName::BaseLm))
      terms.emplace_back(LossName::BaseLm, tape.neg(tape.mean_all(student.per_token_logprob)));
  }

  // Article-conditioned generator pass, only when an unfrozen teacher needs
  // gradients through it.
  DecodeResult article_branch;
  const bool unfrozen_lm_g = config.is_active(LossName::LmG) && !config.stop_article_generation_teacher;
  const bool unfrozen_lm_c = config.is_active(LossName::LmC) && !config.stop_attention_teacher;
  if (unfrozen_lm_g || unfrozen_lm_c) {
    const FidEncoding enc = encode_fid(tape, model, in.claim, in.article_chunks);
    DecodeOptions opts;
    opts.want_dists = unfrozen_lm_g;
    opts.want_doc_scores = unfrozen_lm_c;
    article_branch = decode_teacher_forced(tape, model, enc, in.target, opts);
  }

  Var frozen_emb;
  if (retrieval_side) frozen_emb = tape.constant(contexts.embeddings);

  if (config.is_active(LossName::PerplexityDistill)) {
    const Var query_emb = encode_query(tape, model, in.claim);
    const Var scores = tape.matmul(query_emb, false, frozen_emb, true);
    const Var logp = tape.log_softmax_rows(scores);
    Var term;
    if (config.stop_retrieval_teacher) {
      if (teachers.retrieval_target.size() != static_cast<size_t>(n))
        fail(ErrorKind::LengthMismatch, "teacher retrieval target missing or mis-sized");
      term = kl_against_frozen(tape, teachers.retrieval_target, logp);
    } else {
      std::vector<Var> per_doc;
      per_doc.reserve(static_cast<size_t>(n));
      for (int j = 0; j < n; ++j) {
        const FidEncoding enc = encode_fid(tape, model, in.claim, {contexts.texts[static_cast<size_t>(j)]});
        per_doc.push_back(decode_teacher_forced(tape, model, enc, in.target).total_logprob);
      }
      const Var log_q = tape.log_softmax_rows(tape.concat_cols(per_doc));
      term = kl_on_tape(tape, log_q, logp);
    }
    terms.emplace_back(LossName::PerplexityDistill, term);
  }

  if (config.is_active(LossName::RetG)) {
    const Var article_emb = article_embedding(tape, model, in.article_chunks);
    const std::vector<Var> copies(static_cast<size_t>(n), article_emb);
    const Var broadcast = n == 1 ? article_emb : tape.concat_rows(copies);
    const Var diff = tape.sub(broadcast, frozen_emb);
    terms.emplace_back(LossName::RetG, tape.mean_all(tape.mul(diff, diff)));
  }

  if (config.is_active(LossName::LmG)) {
    Var teacher;
    if (config.stop_article_generation_teacher) {
      const Matrix& stu = tape.val(student.dists);
      if (teachers.article_dists.rows != stu.rows || teachers.article_dists.cols != stu.cols)
        fail(ErrorKind::LengthMismatch, "teacher distribution shape differs from the student's");
      teacher = tape.constant(teachers.article_dists);
    } else {
      teacher = article_branch.dists;
    }
    const Var diff = tape.sub(student.dists, teacher);
    terms.emplace_back(LossName::LmG, tape.mean_all(tape.mul(diff, diff)));
  }

  if (config.is_active(LossName::RetC)) {
    const auto& best = teachers.assignment.best_chunk;
    if (best.size() != static_cast<size_t>(n))
      fail(ErrorKind::LengthMismatch, "chunk assignment missing or mis-sized");
    const std::set<int> distinct(best.begin(), best.end());
    Var term;
    bool have_term = false;
    if (config.stop_chunk_alignment_teacher) {
      const auto& q = teachers.chunk_alignment_target;
      if (q.size() != static_cast<size_t>(n))
        fail(ErrorKind::LengthMismatch, "chunk alignment target missing or mis-sized");
      double q_log_q = 0.0;
      for (double qj : q)
        if (qj > 0.0) q_log_q += qj * std::log(qj);
      Var cross;
      bool have_cross = false;
      for (int i : distinct) {
        const Var chunk_emb = encode_query(tape, model, in.article_chunks[static_cast<size_t>(i)]);
        const Var logp = tape.log_softmax_rows(tape.matmul(chunk_emb, false, frozen_emb, true));
        Matrix weights = Matrix::zeros(1, n);
        for (int j = 0; j < n; ++j)
          if (best[static_cast<size_t>(j)] == i) weights.at(0, j) = q[static_cast<size_t>(j)];
        const Var piece = tape.sum_all(tape.mul(tape.constant(std::move(weights)), logp));
        cross = have_cross ? tape.add(cross, piece) : piece;
        have_cross = true;
      }
      term = tape.add(tape.scalar_const(q_log_q), tape.neg(cross));
      have_term = true;
    } else {
      for (int i : distinct) {
        const TokenSeq chunk_target =
            model.tokenizer.encode_target(in.article_chunks[static_cast<size_t>(i)], model.config.lm.max_tgt_len);
        std::vector<Var> per_doc;
        per_doc.reserve(static_cast<size_t>(n));
        for (int k = 0; k < n; ++k) {
          const FidEncoding enc = encode_fid(tape, model, in.claim, {contexts.texts[static_cast<size_t>(k)]});
          per_doc.push_back(decode_teacher_forced(tape, model, enc, chunk_target).total_logprob);
        }
        const Var log_q = tape.log_softmax_rows(tape.concat_cols(per_doc));
        const Var q_row = tape.exp_elem(log_q);
        const Var chunk_emb = encode_query(tape, model, in.article_chunks[static_cast<size_t>(i)]);
        const Var logp = tape.log_softmax_rows(tape.matmul(chunk_emb, false, frozen_emb, true));
        for (int j = 0; j < n; ++j) {
          if (best[static_cast<size_t>(j)] != i) continue;
          const Var qj = tape.slice_cols(q_row, j, j + 1);
          const Var gap = tape.sub(tape.slice_cols(log_q, j, j + 1), tape.slice_cols(logp, j, j + 1));
          const Var piece = tape.sum_all(tape.mul(qj, gap));
          term = have_term ? tape.add(term, piece) : piece;
          have_term = true;
        }
      }
    }
    if (!have_term) fail(ErrorKind::Internal, "chunk alignment produced no terms");
    terms.emplace_back(LossName::RetC, term);
  }

  if (config.is_active(LossName::LmC)) {
    const Var score_row = tape.concat_cols(student.doc_scores);
    const Var logp = tape.log_softmax_rows(score_row);
    Var term;
    if (config.stop_attention_teacher) {
      if (teachers.attention_target.size() != static_cast<size_t>(n))
        fail(ErrorKind::LengthMismatch, "attention target missing or mis-sized");
      term = kl_against_frozen(tape, teachers.attention_target, logp);
    } else {
      const auto& best = teachers.assignment.best_chunk;
      if (best.size() != static_cast<size_t>(n))
        fail(ErrorKind::LengthMismatch, "chunk assignment missing or mis-sized");
      const Var chunk_probs = tape.softmax_rows(tape.concat_cols(article_branch.doc_scores));
      std::vector<Var> picked;
      picked.reserve(static_cast<size_t>(n));
      for (int j = 0; j < n; ++j) {
        const int i = best[static_cast<size_t>(j)];
        picked.push_back(tape.slice_cols(chunk_probs, i, i + 1));
      }
      const Var target_row = tape.concat_cols(picked);
      term = kl_on_tape(tape, tape.log_softmax_rows(target_row), logp);
    }
    terms.emplace_back(LossName::LmC, term);
  }

  Var total;
  bool first = true;
  for (const auto& [name, v] : terms) {
    const Var weighted = tape.scale(v, config.weight(name));
    total = first ? weighted : tape.add(total, weighted);
    first = false;
  }
  if (breakdown) {
    breakdown->values.clear();
    for (const auto& [name, v] : terms) breakdown->values.emplace_back(name, tape.scalar(v));
    breakdown->total = tape.scalar(total);
  }
  return total;
}

double total_loss_value(const Model& model, const LossInputs& in, const RetrievedContexts& contexts,
                        const LossConfig& config, LossBreakdown* breakdown) {
  const Teachers teachers = compute_teachers(model, in, contexts, config);
  Tape tape;
  LossBreakdown local;
  const Var v = total_loss(tape, model, in, contexts, config, teachers, breakdown ? breakdown : &local);
  return tape.scalar(v);
}

namespace losscore {

double perplexity_alignment(const std::vector<double>& scores, const std::vector<double>& per_doc_loglik) {
  return kl_divergence(softmax_values(per_doc_loglik), softmax_values(scores));
}

double article_retrieval(const Matrix& pooled, const Matrix& docs) {
  if (pooled.rows != 1 || pooled.cols != docs.cols)
    fail(ErrorKind::DimensionMismatch, "article_retrieval: pooled must be [1, d] matching docs");
  double acc = 0.0;
  for (int j = 0; j < docs.rows; ++j)
    for (int c = 0; c < docs.cols; ++c) {
      const double diff = pooled.at(0, c) - docs.at(j, c);
      acc += diff * diff;
    }
  return acc / (static_cast<double>(docs.rows) * static_cast<double>(docs.cols));
}

double article_generation(const Matrix& student, const Matrix& teacher) {
  if (!student.same_shape(teacher)) fail(ErrorKind::DimensionMismatch, "article_generation: shape mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < student.data.size(); ++i) {
    const double diff = student.data[i] - teacher.data[i];
    acc += diff * diff;
  }
  return acc / static_cast<double>(student.data.size());
}

double chunk_retrieval(const std::vector<double>& q_selected, const std::vector<double>& p_selected) {
  if (q_selected.size() != p_selected.size()) fail(ErrorKind::LengthMismatch, "chunk_retrieval: size mismatch");
  double acc = 0.0;
  for (size_t j = 0; j < q_selected.size(); ++j)
    if (q_selected[j] > 0.0) acc += q_selected[j] * (std::log(q_selected[j]) - std::log(p_selected[j]));
  return acc;
}

double chunk_generation(const std::vector<double>& p_prime, const std::vector<double>& p_doc) {
  return kl_divergence(p_prime, p_doc);
}

}  // namespace losscore

}  // namespace justgen
