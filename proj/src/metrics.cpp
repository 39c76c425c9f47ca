#include "justgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"

#include "justgen/errors.hpp"
#include "justgen/text.hpp"

namespace justgen {

using nlohmann::json;

namespace {

double f1_of(double overlap, double cand_total, double ref_total) {
  if (cand_total <= 0.0 || ref_total <= 0.0) return 0.0;
  const double p = overlap / cand_total;
  const double r = overlap / ref_total;
  if (p + r <= 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

std::map<std::string, int> ngram_counts(const std::vector<std::string>& words, int n) {
  std::map<std::string, int> counts;
  if (static_cast<int>(words.size()) < n) return counts;
  for (size_t i = 0; i + static_cast<size_t>(n) <= words.size(); ++i) {
    std::string g = words[i];
    for (int j = 1; j < n; ++j) {
      g += ' ';
      g += words[i + static_cast<size_t>(j)];
    }
    ++counts[g];
  }
  return counts;
}

}  // namespace

double rouge_n(const std::string& candidate, const std::string& reference, int n) {
  if (n != 1 && n != 2) fail(ErrorKind::InvalidConfig, "rouge_n supports n in {1, 2}");
  const std::vector<std::string> ref_words = normalized_words(reference);
  if (ref_words.empty()) fail(ErrorKind::EmptyReference, "reference has no words");
  const std::vector<std::string> cand_words = normalized_words(candidate);
  const auto ref_grams = ngram_counts(ref_words, n);
  const auto cand_grams = ngram_counts(cand_words, n);
  double overlap = 0.0, cand_total = 0.0, ref_total = 0.0;
  for (const auto& [g, c] : cand_grams) {
    cand_total += c;
    const auto it = ref_grams.find(g);
    if (it != ref_grams.end()) overlap += std::min(c, it->second);  // clipped
  }
  for (const auto& [g, c] : ref_grams) ref_total += c;
  return f1_of(overlap, cand_total, ref_total);
}

double rouge_l(const std::string& candidate, const std::string& reference) {
  const std::vector<std::string> ref_words = normalized_words(reference);
  if (ref_words.empty()) fail(ErrorKind::EmptyReference, "reference has no words");
  const std::vector<std::string> cand_words = normalized_words(candidate);
  const size_t a = cand_words.size(), b = ref_words.size();
  if (a == 0) return 0.0;
  std::vector<int> prev(b + 1, 0), cur(b + 1, 0);
  for (size_t i = 1; i <= a; ++i) {
    for (size_t j = 1; j <= b; ++j) {
      if (cand_words[i - 1] == ref_words[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  const double lcs = prev[b];
  return f1_of(lcs, static_cast<double>(a), static_cast<double>(b));
}

double LexicalOverlapScorer::score(const std::string& premise, const std::string& hypothesis) const {
  const std::vector<std::string> hyp = normalized_words(hypothesis);
  if (hyp.empty()) return 0.0;
  const std::vector<std::string> prem = normalized_words(premise);
  const std::set<std::string> prem_set(prem.begin(), prem.end());
  const std::set<std::string> hyp_set(hyp.begin(), hyp.end());
  size_t hits = 0;
  for (const std::string& w : hyp_set) hits += prem_set.count(w);
  return static_cast<double>(hits) / static_cast<double>(hyp_set.size());
}

const char* summacc_mode_name(SummaccMode mode) { return mode == SummaccMode::Mean ? "mean" : "sum"; }

SummaccMode parse_summacc_mode(const std::string& name) {
  if (name == "mean") return SummaccMode::Mean;
  if (name == "sum") return SummaccMode::Sum;
  fail(ErrorKind::InvalidConfig, "unknown aggregation mode: " + name);
}

SummaccResult summacc(const std::string& candidate, const std::string& reference, const EntailmentScorer& scorer,
                      SummaccMode mode) {
  const std::vector<std::string> ref_sents = sentence_split(reference);
  const std::vector<std::string> cand_sents = sentence_split(candidate);
  if (ref_sents.empty()) fail(ErrorKind::EmptyText, "reference has no sentences");
  if (cand_sents.empty()) fail(ErrorKind::EmptyText, "candidate has no sentences");

  const auto aggregate = [mode](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return mode == SummaccMode::Mean ? s / static_cast<double>(v.size()) : s;
  };

  std::vector<double> cover, consist;
  cover.reserve(ref_sents.size());
  for (const std::string& s : ref_sents) cover.push_back(scorer.score(candidate, s));
  consist.reserve(cand_sents.size());
  for (const std::string& s : cand_sents) consist.push_back(scorer.score(reference, s));

  SummaccResult out;
  out.coverage = aggregate(cover);
  out.consistency = aggregate(consist);
  out.value = 0.5 * (out.coverage + out.consistency);
  return out;
}

std::string lead4(const Bm25Index& bm25, const Corpus& corpus, const std::string& claim) {
  if (corpus.chunks.empty()) fail(ErrorKind::EmptyCorpus, "lead-4 needs a non-empty corpus");
  const int n = std::min<int>(4, static_cast<int>(bm25.count()));
  const RetrievedSet top = bm25.retrieve(claim, n);
  const auto by_id = corpus.id_index();
  std::vector<std::string> sentences;
  for (const std::string& id : top.chunk_ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) fail(ErrorKind::Internal, "ranked chunk missing from corpus: " + id);
    const std::vector<std::string> sents = sentence_split(corpus.chunks[it->second].text);
    if (!sents.empty()) sentences.push_back(sents.front());
  }
  std::string out;
  for (size_t i = 0; i < sentences.size(); ++i) {
    if (i) out += ' ';
    out += sentences[i];
  }
  return out;
}

double macro_f1(const std::vector<VeracityLabel>& predictions, const std::vector<VeracityLabel>& gold) {
  if (predictions.size() != gold.size()) fail(ErrorKind::LengthMismatch, "prediction/gold size mismatch");
  if (predictions.empty()) fail(ErrorKind::LengthMismatch, "no labels to score");
  double sum = 0.0;
  for (VeracityLabel cls : {VeracityLabel::False, VeracityLabel::Mixture, VeracityLabel::True}) {
    double tp = 0.0, fp = 0.0, fn = 0.0;
    for (size_t i = 0; i < gold.size(); ++i) {
      const bool p = predictions[i] == cls, g = gold[i] == cls;
      tp += (p && g) ? 1.0 : 0.0;
      fp += (p && !g) ? 1.0 : 0.0;
      fn += (!p && g) ? 1.0 : 0.0;
    }
    const double prec = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
    const double rec = tp + fn > 0.0 ? tp / (tp + fn) : 0.0;
    sum += prec + rec > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
  }
  return sum / 3.0;
}

std::vector<Prediction> load_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot open predictions: " + path);
  std::vector<Prediction> out;
  std::string line;
  int line_no = 0;
  std::vector<std::string> bad;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      Prediction p;
      p.id = j.at("id").get<std::string>();
      p.justification = j.at("justification").get<std::string>();
      if (j.contains("label")) {
        const auto l = label_from_name(j.at("label").get<std::string>());
        if (!l) throw std::runtime_error("unknown label");
        p.label = *l;
      }
      out.push_back(std::move(p));
    } catch (const std::exception&) {
      bad.push_back(std::to_string(line_no));
    }
  }
  if (!bad.empty())
    fail(ErrorKind::MalformedInput, path + ": malformed prediction lines: " + join_words(bad));
  if (out.empty()) fail(ErrorKind::MissingPredictions, path + " holds no predictions");
  return out;
}

void save_predictions(const std::vector<Prediction>& predictions, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot write predictions: " + path);
  for (const Prediction& p : predictions) {
    json j{{"id", p.id}, {"justification", p.justification}};
    if (p.label) j["label"] = label_name(*p.label);
    out << j.dump() << "\n";
  }
}

namespace {

MetricAggregate aggregate_of(const std::vector<double>& values) {
  MetricAggregate agg;
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  agg.mean = sum / n;
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - agg.mean) * (v - agg.mean);
    agg.std_dev = std::sqrt(ss / (n - 1.0));  // sample standard deviation
  }
  return agg;
}

}  // namespace

MetricReport evaluate_run(const std::vector<std::vector<Prediction>>& per_seed_predictions,
                          const std::vector<Instance>& references, const EntailmentScorer& scorer,
                          SummaccMode mode, const std::vector<std::string>& sources) {
  if (per_seed_predictions.empty()) fail(ErrorKind::MissingPredictions, "no prediction sets given");
  if (references.empty()) fail(ErrorKind::EmptyReference, "no reference instances given");

  std::map<std::string, const Instance*> refs;
  for (const Instance& inst : references) refs[inst.id] = &inst;

  MetricReport report;
  report.scorer = scorer.name();
  report.summacc_aggregation = summacc_mode_name(mode);

  for (size_t s = 0; s < per_seed_predictions.size(); ++s) {
    const auto& preds = per_seed_predictions[s];
    std::set<std::string> seen;
    for (const Prediction& p : preds) seen.insert(p.id);
    std::vector<std::string> missing;
    for (const Instance& inst : references)
      if (!seen.count(inst.id)) missing.push_back(inst.id);
    if (!missing.empty())
      fail(ErrorKind::MissingPredictions, "prediction set " + std::to_string(s) +
                                              " misses reference ids: " + join_words(missing));

    SeedMetrics sm;
    sm.source = s < sources.size() ? sources[s] : "run" + std::to_string(s);
    std::vector<VeracityLabel> pred_labels, gold_labels;
    bool all_labeled = true;
    for (const Prediction& p : preds) {
      const auto it = refs.find(p.id);
      if (it == refs.end()) fail(ErrorKind::MissingPredictions, "prediction for unknown id: " + p.id);
      const Instance& ref = *it->second;
      ++sm.instances;
      const bool empty_candidate = normalized_words(p.justification).empty();
      sm.rouge1 += empty_candidate ? 0.0 : rouge_n(p.justification, ref.justification, 1);
      sm.rouge2 += empty_candidate ? 0.0 : rouge_n(p.justification, ref.justification, 2);
      sm.rougeL += empty_candidate ? 0.0 : rouge_l(p.justification, ref.justification);
      sm.summacc += empty_candidate ? 0.0 : summacc(p.justification, ref.justification, scorer, mode).value;
      if (p.label) {
        pred_labels.push_back(*p.label);
        gold_labels.push_back(ref.label);
      } else {
        all_labeled = false;
      }
    }
    const double n = static_cast<double>(sm.instances);
    sm.rouge1 /= n;
    sm.rouge2 /= n;
    sm.rougeL /= n;
    sm.summacc /= n;
    if (all_labeled && !pred_labels.empty()) sm.macro_f1 = macro_f1(pred_labels, gold_labels);
    report.per_seed.push_back(std::move(sm));
  }

  const auto collect = [&](auto getter) {
    std::vector<double> v;
    for (const SeedMetrics& sm : report.per_seed) v.push_back(getter(sm));
    return aggregate_of(v);
  };
  report.aggregate["rouge1"] = collect([](const SeedMetrics& m) { return m.rouge1; });
  report.aggregate["rouge2"] = collect([](const SeedMetrics& m) { return m.rouge2; });
  report.aggregate["rougeL"] = collect([](const SeedMetrics& m) { return m.rougeL; });
  report.aggregate["summacc"] = collect([](const SeedMetrics& m) { return m.summacc; });
  const bool f1_everywhere = std::all_of(report.per_seed.begin(), report.per_seed.end(),
                                         [](const SeedMetrics& m) { return m.macro_f1.has_value(); });
  if (f1_everywhere)
    report.aggregate["macro_f1"] = collect([](const SeedMetrics& m) { return *m.macro_f1; });
  return report;
}

std::string render_report_table(const MetricReport& report) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << "scores x100, scorer=" << report.scorer << ", summacc_aggregation=" << report.summacc_aggregation << "\n";
  size_t width = 4;  // "run"
  for (const SeedMetrics& m : report.per_seed) width = std::max(width, m.source.size() + 2);
  os << "run";
  for (size_t i = 3; i < width; ++i) os << ' ';
  os << " rouge1  rouge2  rougeL  summacc  macro_f1  n\n";
  for (const SeedMetrics& m : report.per_seed) {
    os << m.source;
    for (size_t i = m.source.size(); i < width; ++i) os << ' ';
    os << std::setw(6) << 100.0 * m.rouge1 << "  " << std::setw(6) << 100.0 * m.rouge2 << "  " << std::setw(6)
       << 100.0 * m.rougeL << "  " << std::setw(7) << 100.0 * m.summacc << "  " << std::setw(8);
    if (m.macro_f1)
      os << 100.0 * *m.macro_f1;
    else
      os << "-";
    os << "  " << m.instances << "\n";
  }
  os << "aggregate (mean, std over " << report.per_seed.size() << " runs):\n";
  for (const auto& [name, agg] : report.aggregate) {
    os << "  " << name << ": " << 100.0 * agg.mean;
    if (agg.std_dev)
      os << " (" << 100.0 * *agg.std_dev << ")";
    else
      os << " (std n/a)";
    os << "\n";
  }
  return os.str();
}

std::string report_to_json(const MetricReport& report) {
  json j;
  j["scorer"] = report.scorer;
  j["summacc_aggregation"] = report.summacc_aggregation;
  j["per_seed"] = json::array();
  for (const SeedMetrics& m : report.per_seed) {
    json e{{"source", m.source}, {"instances", m.instances}, {"rouge1", m.rouge1},
           {"rouge2", m.rouge2},  {"rougeL", m.rougeL},      {"summacc", m.summacc}};
    if (m.macro_f1) e["macro_f1"] = *m.macro_f1;
    j["per_seed"].push_back(std::move(e));
  }
  json agg;
  for (const auto& [name, a] : report.aggregate) {
    json e{{"mean", a.mean}};
    if (a.std_dev) e["std_dev"] = *a.std_dev;
    agg[name] = std::move(e);
  }
  j["aggregate"] = std::move(agg);
  return j.dump(2);
}

}  // namespace justgen
