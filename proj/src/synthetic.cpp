#include "justgen/synthetic.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "justgen/errors.hpp"
#include "justgen/rng.hpp"

namespace justgen {
namespace {

const char* kLabelCycle[3] = {"false", "mixture", "true"};

std::string topic_a(int i) { return "t" + std::to_string(i) + "a"; }
std::string topic_b(int i) { return "t" + std::to_string(i) + "b"; }
std::string gist(int i, char tag) { return std::string("g") + std::to_string(i) + tag; }

std::string pick_filler(Rng& rng) { return "f" + std::to_string(rng.uniform(80)); }
std::string pick_source(Rng& rng) { return "s" + std::to_string(rng.uniform(12)); }
std::string pick_year(Rng& rng) { return "y" + std::to_string(rng.uniform(8)); }

}  // namespace

SyntheticData make_synthetic(const SyntheticOptions& options) {
  if (options.train_claims < 1 || options.test_claims < 0)
    fail(ErrorKind::InvalidConfig, "synthetic: need at least one training claim");
  if (options.evidence_per_claim < 1) fail(ErrorKind::InvalidConfig, "synthetic: evidence_per_claim must be >= 1");
  if (options.chunk_words < 1) fail(ErrorKind::InvalidConfig, "synthetic: chunk_words must be >= 1");
  const int claims = options.train_claims + options.test_claims;
  const int planted = claims * options.evidence_per_claim;
  if (options.total_chunks < planted)
    fail(ErrorKind::InvalidConfig, "synthetic: total_chunks " + std::to_string(options.total_chunks) +
                                       " cannot hold " + std::to_string(planted) + " evidence documents");

  Rng rng(options.seed);
  SyntheticData out;
  out.records.resize(claims);

  for (int i = 0; i < claims; ++i) {
    RawRecord& rec = out.records[i];
    const std::string ta = topic_a(i), tb = topic_b(i);
    const std::string gx = gist(i, 'x'), gy = gist(i, 'y');
    const std::string label = kLabelCycle[i % 3];
    const std::string year_claim = pick_year(rng);
    const std::string year_ev = pick_year(rng);

    rec.id = "c" + std::to_string(i);
    rec.split = i < options.train_claims ? "train" : "test";
    rec.label = label;
    rec.claim = "did " + ta + " move with " + tb + " in " + year_claim;

    // Evidence documents: share the claim's topic tokens, never its gists.
    for (int e = 0; e < options.evidence_per_claim; ++e) {
      const std::string doc_id = "e" + std::to_string(i) + "_" + std::to_string(e);
      std::string text;
      if (e % 2 == 0)
        text = "records from " + pick_source(rng) + " show " + ta + " moved with " + tb + " during " + year_ev +
               " season " + pick_filler(rng) + " " + pick_filler(rng);
      else
        text = "analysts at " + pick_source(rng) + " measured " + ta + " against " + tb + " and noted shifts in " +
               year_ev + " " + pick_filler(rng);
      rec.reference_docs.emplace_back(doc_id, text);
    }

    // Article = body (kept as the instance article) + ruling (extracted as
    // the justification).  The gist words and the label word appear in both
    // parts but nowhere in the retrieval corpus.
    const std::string body = "Reviewers examined whether " + ta + " moved with " + tb + " during " + year_ev +
                             ". Checkers say the " + gx + " " + gy + " pattern holds for " + ta + " and " + tb +
                             ", a finding rated " + label + " overall. Analysts measured " + ta + " against " + tb +
                             " and noted shifts.";
    const std::string ruling =
        "Our ruling the verdict " + gx + " " + gy + " on " + ta + " and " + tb + " is " + label + ".";
    rec.article = body + " " + ruling;
  }

  // Distractors round-robin across records so every record cites some.
  const int distractors = options.total_chunks - planted;
  for (int k = 0; k < distractors; ++k) {
    std::string text = pick_source(rng) + " reported " + pick_filler(rng) + " " + pick_filler(rng) + " totals for " +
                       pick_year(rng) + " including " + pick_filler(rng) + " " + pick_filler(rng) + " and " +
                       pick_filler(rng);
    out.records[k % claims].reference_docs.emplace_back("d" + std::to_string(k), std::move(text));
  }

  DatasetOptions ds_opts;
  ds_opts.chunk_words = options.chunk_words;
  out.dataset = build_dataset(out.records, default_label_map(), ds_opts);

  for (int i = 0; i < options.train_claims; ++i) {
    Probe p;
    p.instance_id = out.records[i].id;
    p.claim = out.records[i].claim;
    for (int e = 0; e < options.evidence_per_claim; ++e)
      p.planted_chunk_ids.push_back("e" + std::to_string(i) + "_" + std::to_string(e) + "#0");
    out.probe.push_back(std::move(p));
  }
  return out;
}

void save_probe(const ProbeSet& probe, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) fail(ErrorKind::IoError, "cannot open for writing: " + path);
  nlohmann::json arr = nlohmann::json::array();
  for (const Probe& p : probe)
    arr.push_back({{"instance_id", p.instance_id}, {"claim", p.claim}, {"planted_chunk_ids", p.planted_chunk_ids}});
  f << arr.dump(2) << "\n";
  if (!f) fail(ErrorKind::IoError, "write failed: " + path);
}

ProbeSet load_probe(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::IoError, "cannot open: " + path);
  nlohmann::json arr = nlohmann::json::parse(f, nullptr, false);
  if (arr.is_discarded() || !arr.is_array()) fail(ErrorKind::MalformedInput, path + ": expected a JSON array");
  ProbeSet probe;
  for (const auto& item : arr) {
    if (!item.is_object() || !item.contains("instance_id") || !item.contains("claim") ||
        !item.contains("planted_chunk_ids"))
      fail(ErrorKind::MalformedInput, path + ": probe entries need instance_id, claim, planted_chunk_ids");
    Probe p;
    p.instance_id = item.at("instance_id").get<std::string>();
    p.claim = item.at("claim").get<std::string>();
    p.planted_chunk_ids = item.at("planted_chunk_ids").get<std::vector<std::string>>();
    probe.push_back(std::move(p));
  }
  if (probe.empty()) fail(ErrorKind::MalformedInput, path + ": empty probe set");
  return probe;
}

}  // namespace justgen
