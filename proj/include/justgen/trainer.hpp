#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "justgen/corpus.hpp"
#include "justgen/index.hpp"
#include "justgen/losses.hpp"
#include "justgen/model.hpp"

namespace justgen {

enum class TrainMode { Retrieval, ArticleInput };

const char* train_mode_name(TrainMode mode);
TrainMode parse_train_mode(const std::string& name);  // InvalidConfig on unknown

struct TrainConfig {
  int shots = 30;
  bool balanced_shots = true;
  int top_n = 20;
  int steps = 100;
  int batch_size = 8;
  double learning_rate = 4e-5;
  int lr_warmup_steps = 5;         // linear ramp, then linear decay to zero
  int warmup_finetune_steps = 20;  // generator-only pass on article chunks
  uint64_t seed = 13;
  LossConfig losses;
  TrainMode mode = TrainMode::Retrieval;
  bool joint_veracity = false;  // adds label cross-entropy to each step

  void validate() const;
};

// Ramp to learning_rate over lr_warmup_steps, linear decay to zero at
// `steps`; exact at the endpoints (0 at step 0, max at warmup, 0 at steps).
double learning_rate_at(const TrainConfig& config, int step);

struct FewShotSample {
  uint64_t seed = 0;
  std::vector<std::string> ids;
};

// Without replacement, reproducible per seed; balanced draws take
// k / class-count from each veracity class.
FewShotSample sample_few_shot(const std::vector<Instance>& train_set, int k, uint64_t seed, bool balanced);

// Adaptive-moment optimizer over ParamStore entries; missing gradient
// slots are treated as zero.
class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(ParamStore& params, const std::vector<int>& ids, const ad::GradVec& grads, double lr);

 private:
  double beta1_, beta2_, eps_;
  int t_ = 0;
  std::map<int, std::pair<Matrix, Matrix>> state_;  // first/second moments
};

// Fine-tunes only the generator on (claim, article chunks) -> justification
// at a constant learning rate; the retriever is untouched.  Returns the
// per-step losses (step 0 first).
std::vector<double> warmup_finetune(Model& model, const std::vector<Instance>& sample, const TrainConfig& config);

// Planted-evidence probe: for each claim, which chunk ids count as hits.
struct Probe {
  std::string instance_id;
  std::string claim;
  std::vector<std::string> planted_chunk_ids;
};
using ProbeSet = std::vector<Probe>;

// Mean over probes of |top-k ∩ planted| / |planted| under the current
// query encoder against the frozen index.
double probe_recall_at_k(const Model& model, const EmbeddingIndex& index, const ProbeSet& probe, int k);

struct StepLog {
  int step = 0;
  double lr = 0.0;
  double total = 0.0;
  std::vector<std::pair<LossName, double>> losses;  // batch means, unweighted
  double cross_entropy = -1.0;                      // joint mode only, else -1
  double probe_recall_at_5 = -1.0;                  // -1 when no probe given
};

struct TrainResult {
  FewShotSample sample;
  std::vector<double> warmup_losses;
  std::vector<StepLog> steps;
};

// Few-shot loop: each step retrieves fresh top-N contexts with the current
// query encoder (mode Retrieval) or uses the instance's article chunks
// (mode ArticleInput, generator-only updates), evaluates the configured
// losses, and applies one optimizer update over the batch-mean gradient.
// `index` may be null only in ArticleInput mode without a probe.  When
// `log_path` is non-empty a JSON-lines log is written, one line per step.
TrainResult train(Model& model, const std::vector<Instance>& train_set, const Corpus& corpus,
                  const EmbeddingIndex* index, const TrainConfig& config, const std::string& log_path = "",
                  const ProbeSet* probe = nullptr);

// --- veracity -----------------------------------------------------------

// Length-normalized conditional log-probability of the label verbalization
// (label word + end token) given claim and contexts.
double veracity_score(const Model& model, VeracityLabel label, const std::string& claim,
                      const std::vector<std::string>& contexts);

// Argmax over the three label scores; ties resolve false < mixture < true.
VeracityLabel predict_veracity(const Model& model, const std::string& claim,
                               const std::vector<std::string>& contexts);

struct JointBreakdown {
  LossBreakdown task;
  double cross_entropy = 0.0;
  double total = 0.0;
};

// total_loss plus unit-weight cross-entropy of softmax over the three
// veracity scores against the gold label, on one tape.
ad::Var joint_loss(ad::Tape& tape, const Model& model, const LossInputs& in, const RetrievedContexts& contexts,
                   const LossConfig& config, const Teachers& teachers, VeracityLabel gold,
                   JointBreakdown* breakdown = nullptr);

double joint_loss_value(const Model& model, const LossInputs& in, const RetrievedContexts& contexts,
                        const LossConfig& config, VeracityLabel gold, JointBreakdown* breakdown = nullptr);

}  // namespace justgen
