#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "gradcheck.hpp"
#include "justgen/encoder.hpp"
#include "justgen/errors.hpp"
#include "justgen/losses.hpp"
#include "justgen/seqmodel.hpp"

using namespace justgen;
using namespace justgen::testing;

namespace {

double dot_row(const Matrix& a, const Matrix& rows, int j) {
  double s = 0.0;
  for (int c = 0; c < rows.cols; ++c) s += a.at(0, c) * rows.at(j, c);
  return s;
}

}  // namespace

TEST_CASE("loss cores reproduce hand-derived values") {
  SUBCASE("article retrieval: pooled (0.5,0.5) against doc (1,0)") {
    Matrix pooled(1, 2), docs(1, 2);
    pooled.data = {0.5, 0.5};
    docs.data = {1.0, 0.0};
    CHECK(std::fabs(losscore::article_retrieval(pooled, docs) - 0.25) <= 1e-8);
  }
  SUBCASE("article generation: student (0.6,0.4) against teacher (0.5,0.5)") {
    Matrix student(1, 2), teacher(1, 2);
    student.data = {0.6, 0.4};
    teacher.data = {0.5, 0.5};
    CHECK(std::fabs(losscore::article_generation(student, teacher) - 0.009999999999999995) <= 1e-8);
  }
  SUBCASE("chunk retrieval: mirrored two-doc alignment") {
    CHECK(std::fabs(losscore::chunk_retrieval({0.73, 0.73}, {0.5, 0.5}) - 0.5525171961515577) <= 1e-8);
  }
  SUBCASE("chunk generation: (0.7,0.3) against uniform") {
    CHECK(std::fabs(losscore::chunk_generation({0.7, 0.3}, {0.5, 0.5}) - 0.082282878505051782) <= 1e-8);
  }
  SUBCASE("perplexity alignment is shift-invariant") {
    // softmax(-1,-2) == softmax(1,0), so the KL collapses to zero.
    CHECK(std::fabs(losscore::perplexity_alignment({1.0, 0.0}, {-1.0, -2.0})) <= 1e-8);
  }
  SUBCASE("shape and length guards") {
    Matrix pooled(2, 2), docs(1, 2);
    CHECK_THROWS_AS(losscore::article_retrieval(pooled, docs), Error);
    CHECK_THROWS_AS(losscore::chunk_retrieval({0.5}, {0.5, 0.5}), Error);
  }
}

TEST_CASE("tape assembly agrees with the value cores on a live instance") {
  LossFixture fx = make_loss_fixture();
  LossConfig cfg;
  cfg.active = {LossName::BaseLm, LossName::PerplexityDistill, LossName::RetG,
                LossName::LmG,    LossName::RetC,              LossName::LmC};
  cfg.article_chunk_words = 6;
  const LossInputs in = make_loss_inputs(fx.model, fx.instance, cfg);
  REQUIRE(in.article_chunks.size() == 2);
  const int n = fx.contexts.count();

  LossBreakdown bd;
  const double total = total_loss_value(fx.model, in, fx.contexts, cfg, &bd);

  // base_lm: negative mean per-token log-likelihood.
  const LogProb lp = lm_logprob(fx.model, in.claim, fx.contexts.texts, in.target);
  CHECK(std::fabs(bd.value(LossName::BaseLm) - (-lp.total / static_cast<double>(in.target.size()))) <= 1e-10);

  // perplexity_distill over raw scores and per-doc likelihoods.
  const Matrix query = encode_query_value(fx.model, in.claim);
  std::vector<double> scores(static_cast<size_t>(n)), loglik(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j) {
    scores[static_cast<size_t>(j)] = dot_row(query, fx.contexts.embeddings, j);
    loglik[static_cast<size_t>(j)] =
        lm_logprob(fx.model, in.claim, {fx.contexts.texts[static_cast<size_t>(j)]}, in.target).total;
  }
  CHECK(std::fabs(bd.value(LossName::PerplexityDistill) - losscore::perplexity_alignment(scores, loglik)) <= 1e-10);

  // ret_g over the pooled article embedding.
  ad::Tape scratch;
  const Matrix pooled = scratch.val(article_embedding(scratch, fx.model, in.article_chunks));
  CHECK(std::fabs(bd.value(LossName::RetG) - losscore::article_retrieval(pooled, fx.contexts.embeddings)) <= 1e-10);

  // lm_g over full next-token distributions.
  const Matrix student = token_distributions(fx.model, in.claim, fx.contexts.texts, in.target);
  const Matrix teacher = token_distributions(fx.model, in.claim, in.article_chunks, in.target);
  CHECK(std::fabs(bd.value(LossName::LmG) - losscore::article_generation(student, teacher)) <= 1e-10);

  // ret_c over per-doc selected alignment weights.
  const ChunkAssignment asg = chunk_assign(fx.model, in.article_chunks, fx.contexts);
  std::vector<Matrix> chunk_emb;
  for (const auto& z : in.article_chunks) chunk_emb.push_back(encode_query_value(fx.model, z));
  std::vector<double> q_sel(static_cast<size_t>(n)), p_sel(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j) {
    const int star = asg.best_chunk[static_cast<size_t>(j)];
    std::vector<double> s_row(static_cast<size_t>(n)), ll_row(static_cast<size_t>(n));
    const TokenSeq z_target =
        fx.model.tokenizer.encode_target(in.article_chunks[static_cast<size_t>(star)], fx.model.config.lm.max_tgt_len);
    for (int k = 0; k < n; ++k) {
      s_row[static_cast<size_t>(k)] = dot_row(chunk_emb[static_cast<size_t>(star)], fx.contexts.embeddings, k);
      ll_row[static_cast<size_t>(k)] =
          lm_logprob(fx.model, in.claim, {fx.contexts.texts[static_cast<size_t>(k)]}, z_target).total;
    }
    p_sel[static_cast<size_t>(j)] = softmax_values(s_row)[static_cast<size_t>(j)];
    q_sel[static_cast<size_t>(j)] = softmax_values(ll_row)[static_cast<size_t>(j)];
  }
  CHECK(std::fabs(bd.value(LossName::RetC) - losscore::chunk_retrieval(q_sel, p_sel)) <= 1e-10);

  // lm_c over per-doc attention mass.
  const std::vector<double> att_docs = cross_attention_doc_scores(fx.model, in.claim, fx.contexts.texts, in.target);
  const std::vector<double> p_doc = softmax_values(att_docs);
  const std::vector<double> att_chunks =
      cross_attention_doc_scores(fx.model, in.claim, in.article_chunks, in.target);
  const std::vector<double> p_z = softmax_values(att_chunks);
  std::vector<double> picked(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j) picked[static_cast<size_t>(j)] = p_z[static_cast<size_t>(asg.best_chunk[static_cast<size_t>(j)])];
  const std::vector<double> p_prime = softmax_values(picked);
  CHECK(std::fabs(bd.value(LossName::LmC) - losscore::chunk_generation(p_prime, p_doc)) <= 1e-10);

  // Unit weights: the total is the plain sum.
  double sum = 0.0;
  for (const auto& [name, v] : bd.values) sum += v;
  CHECK(std::fabs(total - sum) <= 1e-12);
}

TEST_CASE("degenerate constructions drive each distillation loss to zero") {
  LossFixture fx = make_loss_fixture();

  SUBCASE("article embedding equal to every retrieved embedding") {
    const LossConfig cfg = single_loss_config(LossName::RetG);
    const LossInputs in = make_loss_inputs(fx.model, fx.instance, cfg);
    ad::Tape scratch;
    const Matrix pooled = scratch.val(article_embedding(scratch, fx.model, in.article_chunks));
    RetrievedContexts ctx = fx.contexts;
    for (int j = 0; j < ctx.embeddings.rows; ++j)
      for (int c = 0; c < ctx.embeddings.cols; ++c) ctx.embeddings.at(j, c) = pooled.at(0, c);
    CHECK(std::fabs(total_loss_value(fx.model, in, ctx, cfg)) <= 1e-8);
  }

  SUBCASE("retrieved texts identical to the article chunks") {
    const LossConfig cfg = single_loss_config(LossName::LmG);
    const LossInputs in = make_loss_inputs(fx.model, fx.instance, cfg);
    RetrievedContexts ctx = fx.contexts;
    ctx.texts = in.article_chunks;
    ctx.chunk_ids.assign(in.article_chunks.size(), "z");
    ctx.embeddings = Matrix(static_cast<int>(ctx.texts.size()), fx.model.config.retriever.dim);
    CHECK(std::fabs(total_loss_value(fx.model, in, ctx, cfg)) <= 1e-8);
  }

  SUBCASE("single retrieved doc collapses the alignment KL") {
    LossFixture one = make_loss_fixture(1);
    const LossConfig cfg = single_loss_config(LossName::RetC);
    const LossInputs in = make_loss_inputs(one.model, one.instance, cfg);
    CHECK(std::fabs(total_loss_value(one.model, in, one.contexts, cfg)) <= 1e-8);
  }

  SUBCASE("identical retrieved docs collapse the alignment KL") {
    const LossConfig cfg = single_loss_config(LossName::RetC);
    const LossInputs in = make_loss_inputs(fx.model, fx.instance, cfg);
    RetrievedContexts ctx = fx.contexts;
    for (int j = 0; j < ctx.count(); ++j) {
      ctx.texts[static_cast<size_t>(j)] = fx.contexts.texts[0];
      ctx.chunk_ids[static_cast<size_t>(j)] = fx.contexts.chunk_ids[0];
      for (int c = 0; c < ctx.embeddings.cols; ++c) ctx.embeddings.at(j, c) = fx.contexts.embeddings.at(0, c);
    }
    CHECK(std::fabs(total_loss_value(fx.model, in, ctx, cfg)) <= 1e-8);
  }

  SUBCASE("uniform cross-attention collapses the attention KL") {
    for (int l = 0; l < fx.model.config.lm.dec_layers; ++l) {
      Matrix& wq = fx.model.params.value("lm.decL" + std::to_string(l) + ".cross.wq");
      for (double& v : wq.data) v = 0.0;
    }
    const LossConfig cfg = single_loss_config(LossName::LmC);
    const LossInputs in = make_loss_inputs(fx.model, fx.instance, cfg);
    CHECK(std::fabs(total_loss_value(fx.model, in, fx.contexts, cfg)) <= 1e-8);
  }
}

TEST_CASE("gradients stay inside each loss's trainable group") {
  LossFixture fx = make_loss_fixture();
  const auto& query_ids = fx.model.group(ParamGroup::Query);
  const auto& doc_ids = fx.model.group(ParamGroup::Doc);
  const auto& lm_ids = fx.model.group(ParamGroup::Lm);

  const auto grads_for = [&](LossName name) {
    const LossConfig cfg = single_loss_config(name);
    const LossInputs in = make_loss_inputs(fx.model, fx.instance, cfg);
    const Teachers teachers = compute_teachers(fx.model, in, fx.contexts, cfg);
    return loss_gradient(fx.model, in, fx.contexts, cfg, teachers);
  };
  const auto max_over = [](const ad::GradVec& g, const std::vector<int>& ids) {
    double m = 0.0;
    for (int id : ids) m = std::max(m, g.max_abs(id));
    return m;
  };

  for (const LossName retriever_side : {LossName::PerplexityDistill, LossName::RetG, LossName::RetC}) {
    const ad::GradVec g = grads_for(retriever_side);
    CHECK(max_over(g, lm_ids) == 0.0);
    CHECK(max_over(g, doc_ids) == 0.0);
    CHECK(max_over(g, query_ids) > 0.0);
  }
  for (const LossName generator_side : {LossName::BaseLm, LossName::LmG, LossName::LmC}) {
    const ad::GradVec g = grads_for(generator_side);
    CHECK(max_over(g, query_ids) == 0.0);
    CHECK(max_over(g, doc_ids) == 0.0);
    CHECK(max_over(g, lm_ids) > 0.0);
  }
}

TEST_CASE("weights scale terms linearly and configs validate") {
  LossFixture fx = make_loss_fixture();
  LossConfig cfg = LossConfig::combo(LossName::RetG, LossName::LmG);
  cfg.article_chunk_words = 6;
  CHECK(cfg.active.size() == 4);
  const LossInputs in = make_loss_inputs(fx.model, fx.instance, cfg);

  LossBreakdown unit;
  total_loss_value(fx.model, in, fx.contexts, cfg, &unit);

  cfg.weights = {{LossName::BaseLm, 2.5},
                 {LossName::PerplexityDistill, 0.5},
                 {LossName::RetG, 3.0},
                 {LossName::LmG, 0.0}};
  LossBreakdown weighted;
  const double total = total_loss_value(fx.model, in, fx.contexts, cfg, &weighted);
  double expect = 0.0;
  for (const auto& [name, v] : weighted.values) {
    CHECK(std::fabs(v - unit.value(name)) <= 1e-12);  // breakdown stays unweighted
    expect += cfg.weight(name) * v;
  }
  CHECK(std::fabs(total - expect) <= 1e-12);

  SUBCASE("validation failures") {
    LossConfig bad;
    bad.active = {};
    CHECK_THROWS_AS(bad.validate(), Error);
    bad.active = {LossName::BaseLm, LossName::BaseLm};
    CHECK_THROWS_AS(bad.validate(), Error);
    bad.active = {LossName::BaseLm};
    bad.weights = {{LossName::RetG, 1.0}};
    try {
      bad.validate();
      FAIL("expected inactive-loss error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::InactiveLossRequested);
    }
    CHECK_THROWS_AS(LossConfig::combo(LossName::BaseLm, LossName::LmG), Error);
    CHECK_THROWS_AS(LossConfig::combo(LossName::RetG, LossName::RetC), Error);
    CHECK_THROWS_AS(unit.value(LossName::RetC), Error);
  }
}

TEST_CASE("analytic gradients match finite differences on the retriever-side losses") {
  LossFixture fx = make_loss_fixture();
  for (const LossName name : {LossName::RetG, LossName::RetC}) {
    const LossConfig cfg = single_loss_config(name);
    const LossInputs in = make_loss_inputs(fx.model, fx.instance, cfg);
    const Teachers teachers = compute_teachers(fx.model, in, fx.contexts, cfg);
    const ad::GradVec grads = loss_gradient(fx.model, in, fx.contexts, cfg, teachers);
    const GradCheckReport rep = finite_difference_check(
        fx.model, fx.model.group(ParamGroup::Query), grads,
        [&] { return loss_value_frozen(fx.model, in, fx.contexts, cfg, teachers); });
    INFO("loss ", loss_name(name), " worst tensor ", rep.worst_tensor, " rel ", rep.max_rel);
    CHECK(rep.max_rel <= 1e-4);
    CHECK(rep.entries > 0);
  }
}

TEST_CASE("analytic gradients match finite differences on a generator-side subset") {
  LossFixture fx = make_loss_fixture();
  const LossConfig cfg = single_loss_config(LossName::LmC);
  const LossInputs in = make_loss_inputs(fx.model, fx.instance, cfg);
  const Teachers teachers = compute_teachers(fx.model, in, fx.contexts, cfg);
  const ad::GradVec grads = loss_gradient(fx.model, in, fx.contexts, cfg, teachers);
  // Spot tensors from distinct decoder roles; the acceptance gate sweeps all.
  std::vector<int> ids;
  for (const char* name : {"lm.out_proj", "lm.decL0.cross.wq", "lm.decL0.self.wv", "lm.encL0.ff.w1"})
    ids.push_back(fx.model.params.id(name));
  const GradCheckReport rep = finite_difference_check(
      fx.model, ids, grads, [&] { return loss_value_frozen(fx.model, in, fx.contexts, cfg, teachers); });
  INFO("worst tensor ", rep.worst_tensor, " rel ", rep.max_rel);
  CHECK(rep.max_rel <= 1e-4);
}

TEST_CASE("unfrozen teacher branches carry gradients that match finite differences") {
  LossFixture fx = make_loss_fixture();
  LossConfig cfg = single_loss_config(LossName::PerplexityDistill);
  cfg.stop_retrieval_teacher = false;  // likelihood teacher now trains the generator
  const LossInputs in = make_loss_inputs(fx.model, fx.instance, cfg);
  const Teachers teachers = compute_teachers(fx.model, in, fx.contexts, cfg);
  const ad::GradVec grads = loss_gradient(fx.model, in, fx.contexts, cfg, teachers);

  double lm_mass = 0.0;
  for (int id : fx.model.group(ParamGroup::Lm)) lm_mass = std::max(lm_mass, grads.max_abs(id));
  CHECK(lm_mass > 0.0);

  const std::vector<int> ids = {fx.model.params.id("lm.out_proj")};
  const GradCheckReport rep = finite_difference_check(
      fx.model, ids, grads, [&] { return total_loss_value(fx.model, in, fx.contexts, cfg); });
  INFO("worst rel ", rep.max_rel);
  CHECK(rep.max_rel <= 1e-4);
}
