#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "justgen/bm25.hpp"
#include "justgen/corpus.hpp"

namespace justgen {

// Clipped n-gram overlap F1 over lowercased whitespace tokens; n in {1, 2}.
double rouge_n(const std::string& candidate, const std::string& reference, int n);

// Longest-common-subsequence F1 over the same tokenization.
double rouge_l(const std::string& candidate, const std::string& reference);

// premise/hypothesis -> probability the premise entails the hypothesis.
class EntailmentScorer {
 public:
  virtual ~EntailmentScorer() = default;
  virtual double score(const std::string& premise, const std::string& hypothesis) const = 0;
  virtual std::string name() const = 0;
};

// Desk-scale default: the fraction of the hypothesis's distinct words that
// appear in the premise.  A transparent proxy, labeled as such in reports;
// swap in an external scorer through the interface for model-based runs.
class LexicalOverlapScorer : public EntailmentScorer {
 public:
  double score(const std::string& premise, const std::string& hypothesis) const override;
  std::string name() const override { return "lexical_overlap"; }
};

enum class SummaccMode { Mean, Sum };

const char* summacc_mode_name(SummaccMode mode);
SummaccMode parse_summacc_mode(const std::string& name);

struct SummaccResult {
  double coverage = 0.0;     // candidate entails each reference sentence
  double consistency = 0.0;  // reference entails each candidate sentence
  double value = 0.0;        // mean of the two components
};

SummaccResult summacc(const std::string& candidate, const std::string& reference, const EntailmentScorer& scorer,
                      SummaccMode mode = SummaccMode::Mean);

// First sentence of each of the top-4 chunks under BM25, in rank order.
std::string lead4(const Bm25Index& bm25, const Corpus& corpus, const std::string& claim);

// Unweighted mean of per-class F1 over {false, mixture, true}; a class
// absent from both lists contributes 0.
double macro_f1(const std::vector<VeracityLabel>& predictions, const std::vector<VeracityLabel>& gold);

// --- run-level evaluation -------------------------------------------------

struct Prediction {
  std::string id;
  std::string justification;
  std::optional<VeracityLabel> label;
};

std::vector<Prediction> load_predictions(const std::string& path);
void save_predictions(const std::vector<Prediction>& predictions, const std::string& path);

struct SeedMetrics {
  std::string source;  // prediction file or run label
  int instances = 0;
  double rouge1 = 0.0;
  double rouge2 = 0.0;
  double rougeL = 0.0;
  double summacc = 0.0;
  std::optional<double> macro_f1;  // present when every prediction has a label
};

struct MetricAggregate {
  double mean = 0.0;
  std::optional<double> std_dev;  // sample standard deviation; absent for one seed
};

struct MetricReport {
  std::vector<SeedMetrics> per_seed;
  std::map<std::string, MetricAggregate> aggregate;  // rouge1/rouge2/rougeL/summacc[/macro_f1]
  std::string scorer;
  std::string summacc_aggregation;
};

// Scores every prediction set against the references (all reference ids
// must be covered), aggregates per seed, then reports cross-seed mean and
// sample standard deviation.  Values stay in [0, 1]; rendering scales to
// percent.
MetricReport evaluate_run(const std::vector<std::vector<Prediction>>& per_seed_predictions,
                          const std::vector<Instance>& references, const EntailmentScorer& scorer,
                          SummaccMode mode = SummaccMode::Mean,
                          const std::vector<std::string>& sources = {});

std::string render_report_table(const MetricReport& report);
std::string report_to_json(const MetricReport& report);

}  // namespace justgen
