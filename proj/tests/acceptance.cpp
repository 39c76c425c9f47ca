// Release gate: runs the ten acceptance checks in order and prints one
// PASS/FAIL line per criterion.  Exits nonzero if any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "justgen/bm25.hpp"
#include "justgen/corpus.hpp"
#include "justgen/encoder.hpp"
#include "justgen/errors.hpp"
#include "justgen/index.hpp"
#include "justgen/losses.hpp"
#include "justgen/metrics.hpp"
#include "justgen/model.hpp"
#include "justgen/rng.hpp"
#include "justgen/seqmodel.hpp"
#include "justgen/synthetic.hpp"
#include "justgen/text.hpp"
#include "justgen/trainer.hpp"

using namespace justgen;
using justgen::testing::finite_difference_check;
using justgen::testing::loss_gradient;
using justgen::testing::loss_value_frozen;
using justgen::testing::LossFixture;
using justgen::testing::make_loss_fixture;
using justgen::testing::single_loss_config;

namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<int> all_param_ids(const Model& model) {
  std::vector<int> ids;
  for (ParamGroup g : {ParamGroup::Query, ParamGroup::Doc, ParamGroup::Lm})
    for (int id : model.group(g)) ids.push_back(id);
  return ids;
}

std::vector<std::string> vocab_texts(const std::vector<Instance>& train, const std::vector<Instance>& test,
                                     const Corpus& corpus) {
  std::vector<std::string> texts;
  for (const auto* set : {&train, &test})
    for (const Instance& inst : *set) {
      texts.push_back(inst.claim);
      texts.push_back(inst.justification);
      if (!inst.article.empty()) texts.push_back(inst.article);
    }
  for (const Chunk& c : corpus.chunks) texts.push_back(c.text);
  return texts;
}

// --- criterion 1: gradient correctness -------------------------------------

Outcome criterion1() {
  const auto t0 = Clock::now();
  LossFixture fx = make_loss_fixture(3);  // width-8 model, N=3 contexts, M=2 article chunks
  const std::vector<int> ids = all_param_ids(fx.model);

  const LossName order[] = {LossName::BaseLm, LossName::PerplexityDistill, LossName::RetG,
                            LossName::LmG,    LossName::RetC,              LossName::LmC};
  double worst = 0.0;
  std::string worst_loss;
  size_t entries = 0;
  for (LossName name : order) {
    const LossConfig cfg = single_loss_config(name);
    const LossInputs in = make_loss_inputs(fx.model, fx.instance, cfg);
    const Teachers teachers = compute_teachers(fx.model, in, fx.contexts, cfg);
    const ad::GradVec grads = loss_gradient(fx.model, in, fx.contexts, cfg, teachers);
    const auto rep = finite_difference_check(
        fx.model, ids, grads, [&] { return loss_value_frozen(fx.model, in, fx.contexts, cfg, teachers); });
    entries += rep.entries;
    if (rep.max_rel > worst) {
      worst = rep.max_rel;
      worst_loss = loss_name(name);
    }
  }
  const double secs = seconds_since(t0);
  Outcome out;
  out.ok = worst <= 1e-4 && secs < 120.0;
  out.detail = "max rel err " + fmt(worst, 3) + " (" + worst_loss + "), " + std::to_string(entries) +
               " probed entries over 6 losses, " + fmt(secs, 3) + "s";
  return out;
}

// --- criterion 2: gradient-flow contracts -----------------------------------

Outcome criterion2() {
  LossFixture fx = make_loss_fixture(3);

  // chunk-alignment loss: no gradient may reach the generator
  double lm_leak = 0.0;
  {
    const LossConfig cfg = single_loss_config(LossName::RetC);
    const LossInputs in = make_loss_inputs(fx.model, fx.instance, cfg);
    const Teachers teachers = compute_teachers(fx.model, in, fx.contexts, cfg);
    const ad::GradVec grads = loss_gradient(fx.model, in, fx.contexts, cfg, teachers);
    for (int id : fx.model.group(ParamGroup::Lm)) lm_leak = std::max(lm_leak, grads.max_abs(id));
  }

  // article-embedding loss: nothing may reach the generator or doc encoder
  double ret_g_leak = 0.0;
  {
    const LossConfig cfg = single_loss_config(LossName::RetG);
    const LossInputs in = make_loss_inputs(fx.model, fx.instance, cfg);
    const Teachers teachers = compute_teachers(fx.model, in, fx.contexts, cfg);
    const ad::GradVec grads = loss_gradient(fx.model, in, fx.contexts, cfg, teachers);
    for (ParamGroup g : {ParamGroup::Lm, ParamGroup::Doc})
      for (int id : fx.model.group(g)) ret_g_leak = std::max(ret_g_leak, grads.max_abs(id));
  }

  // a 100-step training run leaves doc tensors and index bytes untouched
  SyntheticOptions so;
  so.train_claims = 6;
  so.test_claims = 2;
  so.evidence_per_claim = 2;
  so.total_chunks = 60;
  so.seed = 5;
  const SyntheticData data = make_synthetic(so);

  ModelConfig mc;
  mc.retriever = {16, 1, 2, 32, 32};
  mc.lm = {16, 1, 1, 2, 32, 32, 16};
  mc.init_seed = 3;
  Model model = init_model(mc, vocab_texts(data.dataset.train, data.dataset.test, data.dataset.corpus));
  const EmbeddingIndex index = build_index(data.dataset.corpus, model);

  std::vector<Matrix> doc_before;
  for (int id : model.group(ParamGroup::Doc)) doc_before.push_back(model.params.value(id));
  const std::vector<float> index_rows_before = index.rows;
  const std::vector<std::string> index_ids_before = index.chunk_ids;

  TrainConfig tc;
  tc.shots = 6;
  tc.top_n = 3;
  tc.steps = 100;
  tc.batch_size = 2;
  tc.learning_rate = 1e-3;
  tc.lr_warmup_steps = 10;
  tc.warmup_finetune_steps = 5;
  tc.seed = 13;
  tc.losses.active = {LossName::BaseLm, LossName::PerplexityDistill, LossName::RetC};
  train(model, data.dataset.train, data.dataset.corpus, &index, tc);

  bool doc_unchanged = true;
  const auto& doc_ids = model.group(ParamGroup::Doc);
  for (size_t i = 0; i < doc_ids.size(); ++i)
    doc_unchanged = doc_unchanged && bitwise_equal(doc_before[i], model.params.value(doc_ids[i]));
  const bool index_unchanged =
      index.chunk_ids == index_ids_before && index.rows.size() == index_rows_before.size() &&
      std::memcmp(index.rows.data(), index_rows_before.data(), index.rows.size() * sizeof(float)) == 0;

  Outcome out;
  out.ok = lm_leak == 0.0 && ret_g_leak == 0.0 && doc_unchanged && index_unchanged;
  out.detail = "chunk-alignment grad on generator " + fmt(lm_leak) + ", article-embedding grad on generator+doc " +
               fmt(ret_g_leak) + ", doc tensors " + (doc_unchanged ? "bitwise stable" : "CHANGED") +
               ", index bytes " + (index_unchanged ? "bitwise stable" : "CHANGED") + " over 100 steps";
  return out;
}

// --- criterion 3: degenerate-case loss values --------------------------------

Outcome criterion3() {
  double worst = 0.0;
  std::string notes;

  {  // article embedding equal to every retrieved embedding
    LossFixture fx = make_loss_fixture(3);
    const LossConfig cfg = single_loss_config(LossName::RetG);
    const LossInputs in = make_loss_inputs(fx.model, fx.instance, cfg);
    ad::Tape scratch;
    const Matrix pooled = scratch.val(article_embedding(scratch, fx.model, in.article_chunks));
    RetrievedContexts ctx = fx.contexts;
    for (int j = 0; j < ctx.embeddings.rows; ++j)
      for (int c = 0; c < ctx.embeddings.cols; ++c) ctx.embeddings.at(j, c) = pooled.at(0, c);
    worst = std::max(worst, std::fabs(total_loss_value(fx.model, in, ctx, cfg)));
  }
  {  // retrieved texts identical to the article chunks, in order
    LossFixture fx = make_loss_fixture(3);
    const LossConfig cfg = single_loss_config(LossName::LmG);
    const LossInputs in = make_loss_inputs(fx.model, fx.instance, cfg);
    RetrievedContexts ctx = fx.contexts;
    ctx.texts = in.article_chunks;
    ctx.chunk_ids.assign(in.article_chunks.size(), "z");
    ctx.embeddings = Matrix(static_cast<int>(ctx.texts.size()), fx.model.config.retriever.dim);
    worst = std::max(worst, std::fabs(total_loss_value(fx.model, in, ctx, cfg)));
  }
  {  // single retrieved doc collapses the alignment KL
    LossFixture one = make_loss_fixture(1);
    const LossConfig cfg = single_loss_config(LossName::RetC);
    const LossInputs in = make_loss_inputs(one.model, one.instance, cfg);
    worst = std::max(worst, std::fabs(total_loss_value(one.model, in, one.contexts, cfg)));
  }
  {  // fully symmetric doc set collapses the alignment KL
    LossFixture fx = make_loss_fixture(3);
    const LossConfig cfg = single_loss_config(LossName::RetC);
    const LossInputs in = make_loss_inputs(fx.model, fx.instance, cfg);
    RetrievedContexts ctx = fx.contexts;
    for (int j = 0; j < ctx.count(); ++j) {
      ctx.texts[static_cast<size_t>(j)] = fx.contexts.texts[0];
      ctx.chunk_ids[static_cast<size_t>(j)] = fx.contexts.chunk_ids[0];
      for (int c = 0; c < ctx.embeddings.cols; ++c) ctx.embeddings.at(j, c) = fx.contexts.embeddings.at(0, c);
    }
    worst = std::max(worst, std::fabs(total_loss_value(fx.model, in, ctx, cfg)));
  }
  {  // uniform cross-attention collapses the attention KL
    LossFixture fx = make_loss_fixture(3);
    for (int l = 0; l < fx.model.config.lm.dec_layers; ++l) {
      Matrix& wq = fx.model.params.value("lm.decL" + std::to_string(l) + ".cross.wq");
      for (double& v : wq.data) v = 0.0;
    }
    const LossConfig cfg = single_loss_config(LossName::LmC);
    const LossInputs in = make_loss_inputs(fx.model, fx.instance, cfg);
    worst = std::max(worst, std::fabs(total_loss_value(fx.model, in, fx.contexts, cfg)));
  }

  Outcome out;
  out.ok = worst <= 1e-8;
  out.detail = "max |loss| over the four degenerate constructions " + fmt(worst, 3);
  return out;
}

// --- criterion 4: hand-evaluated loss oracles --------------------------------

Outcome criterion4() {
  double worst = 0.0;
  {
    Matrix pooled(1, 2), docs(1, 2);
    pooled.data = {0.5, 0.5};
    docs.data = {1.0, 0.0};
    worst = std::max(worst, std::fabs(losscore::article_retrieval(pooled, docs) - 0.25));
  }
  {
    Matrix student(1, 2), teacher(1, 2);
    student.data = {0.6, 0.4};
    teacher.data = {0.5, 0.5};
    worst = std::max(worst, std::fabs(losscore::article_generation(student, teacher) - 0.009999999999999995));
  }
  worst = std::max(worst, std::fabs(losscore::chunk_retrieval({0.73, 0.73}, {0.5, 0.5}) - 0.5525171961515577));
  worst = std::max(worst, std::fabs(losscore::chunk_generation({0.7, 0.3}, {0.5, 0.5}) - 0.082282878505051782));
  worst = std::max(worst, std::fabs(losscore::perplexity_alignment({1.0, 0.0}, {-1.0, -2.0}) - 0.0));

  Outcome out;
  out.ok = worst <= 1e-8;
  out.detail = "max |deviation| from the five precomputed values " + fmt(worst, 3);
  return out;
}

// --- criterion 5: retrieval exactness ---------------------------------------

Outcome criterion5() {
  Rng rng(2024);
  int rank_mismatches = 0;
  double worst_score = 0.0;
  for (int t = 0; t < 200; ++t) {
    const int count = 1 + static_cast<int>(rng.uniform(1000));
    const int dim = 2 + static_cast<int>(rng.uniform(31));
    const int n = 1 + static_cast<int>(rng.uniform(std::min<uint64_t>(50, static_cast<uint64_t>(count))));

    EmbeddingIndex index;
    index.dim = dim;
    index.rows.resize(static_cast<size_t>(count) * dim);
    for (float& v : index.rows) v = static_cast<float>(rng.uniform_real() * 2.0 - 1.0);
    index.chunk_ids.reserve(count);
    for (int i = 0; i < count; ++i) index.chunk_ids.push_back("c" + std::to_string(i));

    Matrix query(1, dim);
    for (double& v : query.data) v = rng.uniform_real() * 2.0 - 1.0;

    // brute-force oracle: double accumulation over the f32 rows
    std::vector<std::pair<double, std::string>> oracle(count);
    for (int i = 0; i < count; ++i) {
      double s = 0.0;
      const float* row = index.row(static_cast<size_t>(i));
      for (int k = 0; k < dim; ++k) s += query.at(0, k) * static_cast<double>(row[k]);
      oracle[static_cast<size_t>(i)] = {s, index.chunk_ids[static_cast<size_t>(i)]};
    }
    std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });

    const RetrievedSet got = retrieve(index, query, n);
    for (int i = 0; i < n; ++i) {
      if (got.chunk_ids[static_cast<size_t>(i)] != oracle[static_cast<size_t>(i)].second) ++rank_mismatches;
      worst_score = std::max(
          worst_score, std::fabs(got.scores[static_cast<size_t>(i)] - oracle[static_cast<size_t>(i)].first));
    }
  }

  // Okapi scoring against the precomputed five-chunk worked example
  const std::vector<std::string> texts = {
      "the gun lawsuit was dismissed by the court",
      "manufacturers are protected from some lawsuits",
      "the court heard a lawsuit about vaccines",
      "apples and oranges are fruit",
      "the state settled the famous court case last year",
  };
  Corpus corpus;
  for (size_t i = 0; i < texts.size(); ++i) {
    Chunk c;
    c.source_doc_id = "lex" + std::to_string(i);
    c.position = 0;
    c.chunk_id = c.source_doc_id + "#0";
    c.text = texts[i];
    corpus.chunks.push_back(std::move(c));
  }
  const Bm25Index bm25 = Bm25Index::build(corpus);
  const std::vector<double> expected = {1.3972638496594427, 0.0, 0.33647223662121289, 0.0, 0.0};
  double worst_bm25 = 0.0;
  for (size_t i = 0; i < expected.size(); ++i)
    worst_bm25 = std::max(worst_bm25, std::fabs(bm25.score("gun lawsuit", i) - expected[i]));

  Outcome out;
  out.ok = rank_mismatches == 0 && worst_score <= 1e-6 && worst_bm25 <= 1e-6;
  out.detail = std::to_string(rank_mismatches) + " rank mismatches over 200 cases, max score dev " +
               fmt(worst_score, 3) + ", max bm25 dev " + fmt(worst_bm25, 3);
  return out;
}

// --- criterion 6: corpus construction ---------------------------------------

Outcome criterion6() {
  Rng rng(77);
  int count_errors = 0;
  int reconstruction_errors = 0;
  for (int t = 0; t < 1000; ++t) {
    const int words = 1 + static_cast<int>(rng.uniform(2500));
    std::string text;
    for (int w = 0; w < words; ++w) {
      if (w) text += ' ';
      text += "w" + std::to_string(rng.uniform(500));
    }
    const std::vector<std::string> chunks = chunk_text(text, 100);
    if (static_cast<int>(chunks.size()) != (words + 99) / 100) ++count_errors;
    std::string joined;
    for (size_t i = 0; i < chunks.size(); ++i) {
      if (i) joined += ' ';
      joined += chunks[i];
    }
    if (joined != text) ++reconstruction_errors;
  }

  // the three cue-phrase behaviors
  bool cues_ok = true;
  {
    const auto s = extract_justification("A B. Our ruling C D.");
    cues_ok = cues_ok && s.has_value() && s->justification == "Our ruling C D." && s->remainder == "A B.";
  }
  {
    const auto s = extract_justification("A B. our RATING C.");
    cues_ok = cues_ok && s.has_value() && s->justification == "our RATING C." && s->remainder == "A B.";
  }
  {
    const auto s = extract_justification("A B C.");
    cues_ok = cues_ok && !s.has_value();
  }

  Outcome out;
  out.ok = count_errors == 0 && reconstruction_errors == 0 && cues_ok;
  out.detail = std::to_string(count_errors) + " chunk-count errors, " + std::to_string(reconstruction_errors) +
               " reconstruction errors over 1000 random documents, cue cases " + (cues_ok ? "exact" : "WRONG");
  return out;
}

// --- criterion 7: metric oracles ---------------------------------------------

Outcome criterion7() {
  struct FixedScorer final : EntailmentScorer {
    double score(const std::string&, const std::string& hypothesis) const override {
      if (hypothesis.find("R one") != std::string::npos) return 1.0;
      if (hypothesis.find("R two") != std::string::npos) return 0.5;
      return 0.8;
    }
    std::string name() const override { return "fixed"; }
  };

  const double r1 = rouge_n("the cat sat", "the cat", 1);
  const double rl = rouge_l("a b c", "a x c");
  const FixedScorer fixed;
  const double sc = summacc("C sentence here.", "R one today. R two today.", fixed, SummaccMode::Mean).value;

  std::vector<VeracityLabel> gold, pred;
  for (int i = 0; i < 388; ++i) gold.push_back(VeracityLabel::False);
  for (int i = 0; i < 532; ++i) gold.push_back(VeracityLabel::Mixture);
  for (int i = 0; i < 67; ++i) gold.push_back(VeracityLabel::True);
  pred.assign(gold.size(), VeracityLabel::Mixture);
  const double f1_percent = 100.0 * macro_f1(pred, gold);

  const double d1 = std::fabs(r1 - 0.8);
  const double dl = std::fabs(rl - 2.0 / 3.0);
  const double ds = std::fabs(sc - 0.775);
  const double df = std::fabs(f1_percent - 23.34);

  Outcome out;
  out.ok = d1 <= 1e-6 && dl <= 1e-6 && ds <= 1e-6 && df <= 0.01;
  out.detail = "rouge1 " + fmt(r1, 6) + ", rougeL " + fmt(rl, 6) + ", summacc " + fmt(sc, 6) + ", majority f1 " +
               fmt(f1_percent, 6) + "%";
  return out;
}

// --- shared synthetic benchmark fixture (criteria 8-10) ----------------------

struct BenchFixture {
  SyntheticData data;
  Model init;
  EmbeddingIndex index;
};

ModelConfig bench_model_config() {
  ModelConfig mc;
  mc.retriever = {16, 1, 2, 32, 32};
  mc.lm = {24, 1, 1, 2, 48, 48, 16};
  mc.init_seed = 7;
  return mc;
}

const BenchFixture& bench_fixture() {
  static const BenchFixture fx = [] {
    BenchFixture f;
    f.data = make_synthetic();  // 30 train claims, 10 test, 2 planted each, 500 chunks
    f.init = init_model(bench_model_config(),
                        vocab_texts(f.data.dataset.train, f.data.dataset.test, f.data.dataset.corpus));
    f.index = build_index(f.data.dataset.corpus, f.init);
    return f;
  }();
  return fx;
}

TrainConfig bench_train_config() {
  TrainConfig tc;
  tc.shots = 30;
  tc.top_n = 4;
  tc.steps = 100;
  tc.batch_size = 4;
  tc.learning_rate = 1e-4;
  tc.lr_warmup_steps = 10;
  tc.warmup_finetune_steps = 10;
  tc.losses.active = {LossName::BaseLm, LossName::PerplexityDistill, LossName::RetC};
  return tc;
}

// --- criterion 8: end-to-end synthetic distillation benefit ------------------

Outcome criterion8() {
  const auto t0 = Clock::now();
  const BenchFixture& fx = bench_fixture();
  const double untrained = probe_recall_at_k(fx.init, fx.index, fx.data.probe, 5);

  int held_or_improved = 0;
  bool loss_drop_all = true;
  std::string per_seed;
  for (uint64_t seed : {13ull, 42ull, 7ull}) {
    Model model = fx.init;
    TrainConfig tc = bench_train_config();
    tc.seed = seed;
    const TrainResult result = train(model, fx.data.dataset.train, fx.data.dataset.corpus, &fx.index, tc);
    const double trained = probe_recall_at_k(model, fx.index, fx.data.probe, 5);
    if (trained >= untrained) ++held_or_improved;

    double first10 = 0.0, last10 = 0.0;
    for (int i = 0; i < 10; ++i) first10 += result.steps[static_cast<size_t>(i)].total;
    for (size_t i = result.steps.size() - 10; i < result.steps.size(); ++i) last10 += result.steps[i].total;
    first10 /= 10.0;
    last10 /= 10.0;
    if (!(last10 < first10)) loss_drop_all = false;

    per_seed += " seed " + std::to_string(seed) + ": recall@5 " + fmt(untrained, 3) + "->" + fmt(trained, 3) +
                ", loss " + fmt(first10, 4) + "->" + fmt(last10, 4) + ";";
  }
  const double secs = seconds_since(t0);

  Outcome out;
  out.ok = held_or_improved >= 2 && loss_drop_all && secs < 900.0;
  out.detail = std::to_string(held_or_improved) + "/3 seeds hold or improve recall@5, loss falls in " +
               std::string(loss_drop_all ? "3/3" : "<3/3") + ";" + per_seed + " " + fmt(secs, 3) + "s";
  return out;
}

// --- criterion 9: determinism and reproducibility -----------------------------

Outcome criterion9() {
  const BenchFixture& fx = bench_fixture();
  const fs::path dir = fs::temp_directory_path() / "justgen_acceptance_det";
  fs::remove_all(dir);
  fs::create_directories(dir / "a");
  fs::create_directories(dir / "b");

  TrainConfig tc = bench_train_config();
  tc.steps = 12;
  tc.lr_warmup_steps = 3;
  tc.warmup_finetune_steps = 3;
  tc.seed = 42;

  GenerateOptions gen;
  gen.max_len = 16;

  std::string report_json[2];
  for (int run = 0; run < 2; ++run) {
    const fs::path out = dir / (run == 0 ? "a" : "b");
    Model model = fx.init;
    train(model, fx.data.dataset.train, fx.data.dataset.corpus, &fx.index, tc,
          (out / "train_log.jsonl").string(), &fx.data.probe);
    save_checkpoint(model, (out / "model.ckpt").string());

    std::vector<Prediction> preds;
    for (const Instance& inst : fx.data.dataset.test) {
      const Matrix q = encode_query_value(model, inst.claim);
      const RetrievedSet hits = retrieve(fx.index, q, 4);
      std::vector<std::string> contexts;
      const auto by_id = fx.data.dataset.corpus.id_index();
      for (const std::string& cid : hits.chunk_ids)
        contexts.push_back(fx.data.dataset.corpus.chunks[by_id.at(cid)].text);
      Prediction p;
      p.id = inst.id;
      p.justification = generate(model, inst.claim, contexts, gen).text;
      p.label = predict_veracity(model, inst.claim, contexts);
      preds.push_back(std::move(p));
    }
    save_predictions(preds, (out / "predictions.jsonl").string());

    const LexicalOverlapScorer scorer;
    const MetricReport report =
        evaluate_run({preds}, fx.data.dataset.test, scorer, SummaccMode::Mean, {"seed42"});
    report_json[run] = report_to_json(report);
  }

  bool files_equal = true;
  std::string diverged;
  for (const char* name : {"model.ckpt", "vocab.txt", "predictions.jsonl", "train_log.jsonl"}) {
    if (read_bytes((dir / "a" / name).string()) != read_bytes((dir / "b" / name).string())) {
      files_equal = false;
      diverged += std::string(" ") + name;
    }
  }
  const bool reports_equal = report_json[0] == report_json[1];
  fs::remove_all(dir);

  Outcome out;
  out.ok = files_equal && reports_equal;
  out.detail = files_equal && reports_equal
                   ? "checkpoint, vocab, predictions, train log, and report bytes identical across two runs"
                   : "diverged:" + diverged + (reports_equal ? "" : " report");
  return out;
}

// --- criterion 10: article-input mode scores drop under retrieval -------------

Outcome criterion10() {
  const BenchFixture& fx = bench_fixture();

  TrainConfig tc;
  tc.mode = TrainMode::ArticleInput;
  tc.losses.active = {LossName::BaseLm};
  tc.shots = 30;
  tc.steps = 300;
  tc.batch_size = 4;
  tc.learning_rate = 4e-3;
  tc.lr_warmup_steps = 10;
  tc.warmup_finetune_steps = 0;

  GenerateOptions gen;
  gen.max_len = 16;
  const auto by_id = fx.data.dataset.corpus.id_index();

  bool all_lower = true;
  std::string per_seed;
  for (uint64_t seed : {13ull, 42ull, 7ull}) {
    Model model = fx.init;
    tc.seed = seed;
    train(model, fx.data.dataset.train, fx.data.dataset.corpus, nullptr, tc);

    double sum_article = 0.0, sum_retrieved = 0.0;
    for (const Instance& inst : fx.data.dataset.test) {
      const std::vector<std::string> article_ctx = chunk_text(inst.article, 100);
      const std::string with_article = generate(model, inst.claim, article_ctx, gen).text;

      const Matrix q = encode_query_value(model, inst.claim);
      const RetrievedSet hits = retrieve(fx.index, q, 4);
      std::vector<std::string> retrieved_ctx;
      for (const std::string& cid : hits.chunk_ids)
        retrieved_ctx.push_back(fx.data.dataset.corpus.chunks[by_id.at(cid)].text);
      const std::string with_retrieved = generate(model, inst.claim, retrieved_ctx, gen).text;

      sum_article += normalized_words(with_article).empty() ? 0.0 : rouge_n(with_article, inst.justification, 1);
      sum_retrieved +=
          normalized_words(with_retrieved).empty() ? 0.0 : rouge_n(with_retrieved, inst.justification, 1);
    }
    const double n = static_cast<double>(fx.data.dataset.test.size());
    const double mean_article = sum_article / n;
    const double mean_retrieved = sum_retrieved / n;
    if (!(mean_retrieved < mean_article)) all_lower = false;
    per_seed += " seed " + std::to_string(seed) + ": rouge1 article " + fmt(mean_article, 3) + " vs retrieved " +
                fmt(mean_retrieved, 3) + ";";
  }

  Outcome out;
  out.ok = all_lower;
  out.detail = std::string(all_lower ? "retrieved-context mean rouge1 strictly lower in 3/3 seeds;"
                                     : "retrieved-context mean rouge1 NOT lower in some seed;") +
               per_seed;
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  struct Entry {
    int number;
    const char* title;
    std::function<Outcome()> run;
  };
  std::vector<int> only;  // optional criterion numbers to run, e.g. "./acceptance 8 10"
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  const std::vector<Entry> entries = {
      {1, "analytic gradients match finite differences for all six losses", criterion1},
      {2, "gradient-flow contracts and frozen document side hold", criterion2},
      {3, "degenerate constructions drive each distillation loss to zero", criterion3},
      {4, "loss cores match the precomputed hand oracles", criterion4},
      {5, "dense retrieval and bm25 match brute-force oracles", criterion5},
      {6, "chunking, reconstruction, and cue extraction behave exactly", criterion6},
      {7, "metric values match the precomputed oracles", criterion7},
      {8, "synthetic distillation run preserves recall and lowers loss", criterion8},
      {9, "identical seeds reproduce bitwise-identical artifacts", criterion9},
      {10, "article-trained model degrades under retrieved contexts", criterion10},
  };

  bool all_ok = true;
  for (const Entry& e : entries) {
    if (!only.empty() && std::find(only.begin(), only.end(), e.number) == only.end()) continue;
    Outcome o;
    try {
      o = e.run();
    } catch (const std::exception& ex) {
      o.ok = false;
      o.detail = std::string("exception: ") + ex.what();
    }
    std::cout << (o.ok ? "PASS" : "FAIL") << " criterion " << e.number << ": " << e.title;
    if (!o.detail.empty()) std::cout << " (" << o.detail << ")";
    std::cout << std::endl;
    all_ok = all_ok && o.ok;
  }
  if (!all_ok) {
    std::cout << "acceptance: FAILURES PRESENT" << std::endl;
    return 1;
  }
  std::cout << "acceptance: all criteria hold" << std::endl;
  return 0;
}
