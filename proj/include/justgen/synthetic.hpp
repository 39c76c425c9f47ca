#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "justgen/corpus.hpp"
#include "justgen/trainer.hpp"

namespace justgen {

// Deterministic micro-benchmark dataset: every claim gets two planted
// evidence chunks whose content its synthetic fact-check article
// paraphrases, padded with distractor chunks to the requested corpus size.
// Each claim also owns two "gist" words that appear only in its article
// body and justification — never in the evidence or distractors — so
// article-conditioned generation has signal retrieval cannot supply.
struct SyntheticOptions {
  int train_claims = 30;
  int test_claims = 10;
  int evidence_per_claim = 2;
  int total_chunks = 500;
  uint64_t seed = 1234;
  int chunk_words = 100;  // documents stay shorter than one chunk
};

struct SyntheticData {
  std::vector<RawRecord> records;  // pre-ingestion view
  Dataset dataset;                 // instances + corpus after ingestion
  ProbeSet probe;                  // planted evidence per training claim
};

SyntheticData make_synthetic(const SyntheticOptions& options = {});

// probe.json: [{instance_id, claim, planted_chunk_ids: [...]}, ...]
void save_probe(const ProbeSet& probe, const std::string& path);
ProbeSet load_probe(const std::string& path);

}  // namespace justgen
