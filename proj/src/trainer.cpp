#include "justgen/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "json.hpp"

#include "justgen/encoder.hpp"
#include "justgen/errors.hpp"
#include "justgen/kernels.hpp"
#include "justgen/rng.hpp"
#include "justgen/seqmodel.hpp"

namespace justgen {

using ad::GradVec;
using ad::Tape;
using ad::Var;
using nlohmann::json;

const char* train_mode_name(TrainMode mode) {
  return mode == TrainMode::Retrieval ? "retrieval" : "article_input";
}

TrainMode parse_train_mode(const std::string& name) {
  if (name == "retrieval") return TrainMode::Retrieval;
  if (name == "article_input") return TrainMode::ArticleInput;
  fail(ErrorKind::InvalidConfig, "unknown train mode: " + name);
}

void TrainConfig::validate() const {
  if (shots < 1) fail(ErrorKind::InvalidConfig, "shots must be >= 1");
  if (top_n < 1) fail(ErrorKind::InvalidConfig, "top_n must be >= 1");
  if (steps < 1) fail(ErrorKind::InvalidConfig, "steps must be >= 1");
  if (batch_size < 1) fail(ErrorKind::InvalidConfig, "batch_size must be >= 1");
  if (!(learning_rate > 0.0)) fail(ErrorKind::InvalidConfig, "learning_rate must be positive");
  if (lr_warmup_steps < 1 || lr_warmup_steps >= steps)
    fail(ErrorKind::InvalidConfig, "lr warmup must satisfy 1 <= warmup < steps");
  if (warmup_finetune_steps < 0) fail(ErrorKind::InvalidConfig, "warmup_finetune_steps must be >= 0");
  if (balanced_shots && shots % 3 != 0)
    fail(ErrorKind::InvalidConfig, "balanced sampling needs shots divisible by the class count");
  losses.validate();
  if (mode == TrainMode::ArticleInput) {
    for (LossName l : {LossName::PerplexityDistill, LossName::RetG, LossName::RetC})
      if (losses.is_active(l))
        fail(ErrorKind::InvalidConfig,
             std::string("article-input training fixes the retriever; loss not available: ") + loss_name(l));
  }
}

double learning_rate_at(const TrainConfig& config, int step) {
  config.validate();
  const int s = std::clamp(step, 0, config.steps);
  const int w = config.lr_warmup_steps;
  if (s <= w) return config.learning_rate * static_cast<double>(s) / static_cast<double>(w);
  return config.learning_rate * static_cast<double>(config.steps - s) / static_cast<double>(config.steps - w);
}

FewShotSample sample_few_shot(const std::vector<Instance>& train_set, int k, uint64_t seed, bool balanced) {
  if (k < 1) fail(ErrorKind::InvalidConfig, "sample size must be >= 1");
  if (static_cast<size_t>(k) > train_set.size())
    fail(ErrorKind::InsufficientInstances, "sample size exceeds the training set");
  FewShotSample out;
  out.seed = seed;
  Rng rng(seed);
  if (balanced) {
    if (k % 3 != 0) fail(ErrorKind::InvalidConfig, "balanced sampling needs a size divisible by 3");
    const int per = k / 3;
    for (VeracityLabel cls : {VeracityLabel::False, VeracityLabel::Mixture, VeracityLabel::True}) {
      std::vector<size_t> idx;
      for (size_t i = 0; i < train_set.size(); ++i)
        if (train_set[i].label == cls) idx.push_back(i);
      if (idx.size() < static_cast<size_t>(per))
        fail(ErrorKind::InsufficientInstances,
             std::string("class ") + label_name(cls) + " has fewer than " + std::to_string(per) + " instances");
      rng.shuffle(idx);
      for (int j = 0; j < per; ++j) out.ids.push_back(train_set[idx[static_cast<size_t>(j)]].id);
    }
  } else {
    std::vector<size_t> idx(train_set.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    rng.shuffle(idx);
    for (int j = 0; j < k; ++j) out.ids.push_back(train_set[idx[static_cast<size_t>(j)]].id);
  }
  return out;
}

Adam::Adam(double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(ParamStore& params, const std::vector<int>& ids, const GradVec& grads, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (int id : ids) {
    Matrix& p = params.value(id);
    auto [it, fresh] = state_.try_emplace(id, std::pair<Matrix, Matrix>{});
    Matrix& m = it->second.first;
    Matrix& v = it->second.second;
    if (fresh) {
      m = Matrix::zeros(p.rows, p.cols);
      v = Matrix::zeros(p.rows, p.cols);
    }
    const bool has_grad = static_cast<size_t>(id) < grads.g.size() && grads.g[static_cast<size_t>(id)].size() > 0;
    const Matrix* g = has_grad ? &grads.g[static_cast<size_t>(id)] : nullptr;
    if (g && !g->same_shape(p)) fail(ErrorKind::DimensionMismatch, "gradient shape differs from parameter");
    for (size_t i = 0; i < p.data.size(); ++i) {
      const double gi = g ? g->data[i] : 0.0;
      m.data[i] = beta1_ * m.data[i] + (1.0 - beta1_) * gi;
      v.data[i] = beta2_ * v.data[i] + (1.0 - beta2_) * gi * gi;
      const double mhat = m.data[i] / bc1;
      const double vhat = v.data[i] / bc2;
      p.data[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

namespace {

std::vector<std::string> article_chunks_of(const Instance& inst, int chunk_words) {
  if (inst.article.empty())
    fail(ErrorKind::MissingArticle, "instance " + inst.id + " has no article text");
  return chunk_text(inst.article, chunk_words);
}

// Deterministic batch cycling: a seeded shuffle of the sample order,
// reshuffled whenever a pass completes.
class BatchCycler {
 public:
  BatchCycler(size_t n, uint64_t seed) : order_(n), rng_(seed ^ 0x5851f42d4c957f2dULL), pos_(n) {
    std::iota(order_.begin(), order_.end(), size_t{0});
  }

  std::vector<size_t> next(size_t batch) {
    std::vector<size_t> out;
    out.reserve(batch);
    for (size_t b = 0; b < batch; ++b) {
      if (pos_ == order_.size()) {
        rng_.shuffle(order_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  std::vector<size_t> order_;
  Rng rng_;
  size_t pos_;
};

std::vector<const Instance*> resolve_sample(const std::vector<Instance>& train_set, const FewShotSample& sample) {
  std::map<std::string, const Instance*> by_id;
  for (const Instance& inst : train_set) by_id[inst.id] = &inst;
  std::vector<const Instance*> out;
  out.reserve(sample.ids.size());
  for (const std::string& id : sample.ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) fail(ErrorKind::Internal, "sampled id missing from the training set: " + id);
    out.push_back(it->second);
  }
  return out;
}

}  // namespace

std::vector<double> warmup_finetune(Model& model, const std::vector<Instance>& sample, const TrainConfig& config) {
  config.validate();
  if (config.warmup_finetune_steps == 0) return {};
  if (sample.empty()) fail(ErrorKind::InsufficientInstances, "warmup needs at least one instance");

  LossConfig base_only;
  base_only.active = {LossName::BaseLm};
  base_only.article_chunk_words = config.losses.article_chunk_words;

  struct Prepared {
    LossInputs in;
    RetrievedContexts ctx;
  };
  std::vector<Prepared> prepared;
  prepared.reserve(sample.size());
  for (const Instance& inst : sample) {
    Prepared p;
    p.ctx.texts = article_chunks_of(inst, base_only.article_chunk_words);
    for (size_t c = 0; c < p.ctx.texts.size(); ++c) p.ctx.chunk_ids.push_back(inst.id + "#a" + std::to_string(c));
    p.in = make_loss_inputs(model, inst, base_only);
    prepared.push_back(std::move(p));
  }

  Adam opt;
  const std::vector<int>& lm_ids = model.group(ParamGroup::Lm);
  const Teachers no_teachers;
  std::vector<double> losses;
  size_t cursor = 0;
  for (int step = 0; step < config.warmup_finetune_steps; ++step) {
    const size_t batch_n = std::min(static_cast<size_t>(config.batch_size), prepared.size());
    std::vector<size_t> batch(batch_n);
    for (size_t b = 0; b < batch_n; ++b) batch[b] = (cursor + b) % prepared.size();
    cursor = (cursor + batch_n) % prepared.size();

    std::vector<GradVec> slots(batch_n);
    std::vector<double> totals(batch_n, 0.0);
    kernels::parallel_for(batch_n, [&](size_t b) {
      const Prepared& p = prepared[batch[b]];
      Tape tape;
      LossBreakdown bd;
      const Var loss = total_loss(tape, model, p.in, p.ctx, base_only, no_teachers, &bd);
      totals[b] = bd.total;
      tape.backward(loss, slots[b]);
    });

    GradVec merged;
    for (size_t b = 0; b < batch_n; ++b) merged.accumulate(slots[b], 1.0 / static_cast<double>(batch_n));
    opt.step(model.params, lm_ids, merged, config.learning_rate);
    losses.push_back(std::accumulate(totals.begin(), totals.end(), 0.0) / static_cast<double>(batch_n));
  }
  return losses;
}

double probe_recall_at_k(const Model& model, const EmbeddingIndex& index, const ProbeSet& probe, int k) {
  if (probe.empty()) fail(ErrorKind::InvalidConfig, "probe set is empty");
  if (k < 1) fail(ErrorKind::InvalidConfig, "probe depth must be >= 1");
  std::vector<double> recall(probe.size(), 0.0);
  kernels::parallel_for(probe.size(), [&](size_t i) {
    const Probe& p = probe[i];
    if (p.planted_chunk_ids.empty()) fail(ErrorKind::InvalidConfig, "probe " + p.instance_id + " has no planted ids");
    const Matrix q = encode_query_value(model, p.claim);
    const int n = std::min<int>(k, static_cast<int>(index.count()));
    const RetrievedSet r = retrieve(index, q, n);
    const std::set<std::string> got(r.chunk_ids.begin(), r.chunk_ids.end());
    size_t hits = 0;
    for (const std::string& id : p.planted_chunk_ids) hits += got.count(id);
    recall[i] = static_cast<double>(hits) / static_cast<double>(p.planted_chunk_ids.size());
  });
  return std::accumulate(recall.begin(), recall.end(), 0.0) / static_cast<double>(recall.size());
}

TrainResult train(Model& model, const std::vector<Instance>& train_set, const Corpus& corpus,
                  const EmbeddingIndex* index, const TrainConfig& config, const std::string& log_path,
                  const ProbeSet* probe) {
  config.validate();
  if (config.mode == TrainMode::Retrieval && !index)
    fail(ErrorKind::InvalidConfig, "retrieval-mode training needs an index");
  if (probe && !index) fail(ErrorKind::InvalidConfig, "the retrieval probe needs an index");
  if (index && index->dim != model.config.retriever.dim)
    fail(ErrorKind::DimensionMismatch, "index width differs from the model's retriever");

  TrainResult result;
  result.sample = sample_few_shot(train_set, config.shots, config.seed, config.balanced_shots);
  const std::vector<const Instance*> selected = resolve_sample(train_set, result.sample);

  if (config.mode == TrainMode::Retrieval && config.warmup_finetune_steps > 0) {
    std::vector<Instance> warm;
    warm.reserve(selected.size());
    for (const Instance* p : selected) warm.push_back(*p);
    result.warmup_losses = warmup_finetune(model, warm, config);
  }

  std::vector<int> trainable = model.group(ParamGroup::Lm);
  if (config.mode == TrainMode::Retrieval) {
    const std::vector<int>& q = model.group(ParamGroup::Query);
    trainable.insert(trainable.end(), q.begin(), q.end());
    std::sort(trainable.begin(), trainable.end());
  }

  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path, std::ios::trunc);
    if (!log) fail(ErrorKind::IoError, "cannot open training log: " + log_path);
  }

  Adam opt;
  BatchCycler cycler(selected.size(), config.seed);
  for (int step = 0; step < config.steps; ++step) {
    const double lr = learning_rate_at(config, step);
    const std::vector<size_t> batch = cycler.next(static_cast<size_t>(config.batch_size));
    const size_t batch_n = batch.size();

    std::vector<GradVec> slots(batch_n);
    std::vector<LossBreakdown> breakdowns(batch_n);
    std::vector<double> ce(batch_n, 0.0);
    kernels::parallel_for(batch_n, [&](size_t b) {
      const Instance& inst = *selected[batch[b]];
      RetrievedContexts ctx;
      if (config.mode == TrainMode::Retrieval) {
        const Matrix q = encode_query_value(model, inst.claim);
        const int n = std::min<int>(config.top_n, static_cast<int>(index->count()));
        ctx = gather_contexts(*index, corpus, retrieve(*index, q, n));
      } else {
        ctx.texts = article_chunks_of(inst, config.losses.article_chunk_words);
        for (size_t c = 0; c < ctx.texts.size(); ++c) ctx.chunk_ids.push_back(inst.id + "#a" + std::to_string(c));
      }
      const LossInputs in = make_loss_inputs(model, inst, config.losses);
      const Teachers teachers = compute_teachers(model, in, ctx, config.losses);
      Tape tape;
      Var loss;
      if (config.joint_veracity) {
        JointBreakdown jb;
        loss = joint_loss(tape, model, in, ctx, config.losses, teachers, inst.label, &jb);
        breakdowns[b] = jb.task;
        ce[b] = jb.cross_entropy;
      } else {
        loss = total_loss(tape, model, in, ctx, config.losses, teachers, &breakdowns[b]);
      }
      tape.backward(loss, slots[b]);
    });

    GradVec merged;
    for (size_t b = 0; b < batch_n; ++b) merged.accumulate(slots[b], 1.0 / static_cast<double>(batch_n));
    opt.step(model.params, trainable, merged, lr);

    StepLog entry;
    entry.step = step;
    entry.lr = lr;
    for (LossName name : config.losses.active) {
      double sum = 0.0;
      for (const LossBreakdown& bd : breakdowns) sum += bd.value(name);
      entry.losses.emplace_back(name, sum / static_cast<double>(batch_n));
    }
    double total = 0.0;
    for (const LossBreakdown& bd : breakdowns) total += bd.total;
    total /= static_cast<double>(batch_n);
    if (config.joint_veracity) {
      entry.cross_entropy = std::accumulate(ce.begin(), ce.end(), 0.0) / static_cast<double>(batch_n);
      total += entry.cross_entropy;
    }
    entry.total = total;
    if (probe && index) entry.probe_recall_at_5 = probe_recall_at_k(model, *index, *probe, 5);

    if (log) {
      json line{{"step", entry.step}, {"lr", entry.lr}, {"total", entry.total}};
      json per;
      for (const auto& [name, v] : entry.losses) per[loss_name(name)] = v;
      line["losses"] = per;
      if (config.joint_veracity) line["cross_entropy"] = entry.cross_entropy;
      if (entry.probe_recall_at_5 >= 0.0) line["probe_recall_at_5"] = entry.probe_recall_at_5;
      log << line.dump() << "\n";
    }
    result.steps.push_back(std::move(entry));
  }
  return result;
}

double veracity_score(const Model& model, VeracityLabel label, const std::string& claim,
                      const std::vector<std::string>& contexts) {
  const TokenSeq word = model.tokenizer.encode(label_name(label), false);
  TokenSeq target = word;
  target.push_back(Tokenizer::kEos);
  const LogProb lp = lm_logprob(model, claim, contexts, target);
  return lp.total / static_cast<double>(target.size());
}

VeracityLabel predict_veracity(const Model& model, const std::string& claim,
                               const std::vector<std::string>& contexts) {
  VeracityLabel best = VeracityLabel::False;
  double best_score = 0.0;
  bool first = true;
  for (VeracityLabel l : {VeracityLabel::False, VeracityLabel::Mixture, VeracityLabel::True}) {
    const double s = veracity_score(model, l, claim, contexts);
    if (first || s > best_score) {  // strict: ties keep the earlier class
      best = l;
      best_score = s;
      first = false;
    }
  }
  return best;
}

Var joint_loss(Tape& tape, const Model& model, const LossInputs& in, const RetrievedContexts& contexts,
               const LossConfig& config, const Teachers& teachers, VeracityLabel gold, JointBreakdown* breakdown) {
  LossBreakdown task;
  const Var task_total = total_loss(tape, model, in, contexts, config, teachers, &task);

  const FidEncoding enc = encode_fid(tape, model, in.claim, contexts.texts);
  std::vector<Var> betas;
  for (VeracityLabel l : {VeracityLabel::False, VeracityLabel::Mixture, VeracityLabel::True}) {
    TokenSeq target = model.tokenizer.encode(label_name(l), false);
    target.push_back(Tokenizer::kEos);
    const DecodeResult r = decode_teacher_forced(tape, model, enc, target);
    betas.push_back(tape.scale(r.total_logprob, 1.0 / static_cast<double>(target.size())));
  }
  const Var log_probs = tape.log_softmax_rows(tape.concat_cols(betas));
  const int g = static_cast<int>(gold);
  const Var ce = tape.neg(tape.slice_cols(log_probs, g, g + 1));
  const Var total = tape.add(task_total, ce);
  if (breakdown) {
    breakdown->task = task;
    breakdown->cross_entropy = tape.scalar(ce);
    breakdown->total = tape.scalar(total);
  }
  return total;
}

double joint_loss_value(const Model& model, const LossInputs& in, const RetrievedContexts& contexts,
                        const LossConfig& config, VeracityLabel gold, JointBreakdown* breakdown) {
  const Teachers teachers = compute_teachers(model, in, contexts, config);
  Tape tape;
  JointBreakdown local;
  const Var v = joint_loss(tape, model, in, contexts, config, teachers, gold, breakdown ? breakdown : &local);
  return tape.scalar(v);
}

}  // namespace justgen
