#pragma once

#include <string>
#include <vector>

#include "justgen/autograd.hpp"
#include "justgen/model.hpp"

namespace justgen {

// Concatenated encoder states over independently encoded contexts.  Each
// context sequence is claim + <sep> + context words, truncated to the
// per-context limit; blocks records the row span each context occupies.
struct FidEncoding {
  ad::Var states;
  std::vector<std::pair<int, int>> blocks;
};

FidEncoding encode_fid(ad::Tape& tape, const Model& model, const std::string& claim,
                       const std::vector<std::string>& contexts);

struct DecodeOptions {
  bool want_dists = false;        // per-step next-token distributions
  bool want_doc_scores = false;   // per-context cross-attention averages
  // Raw post-softmax cross-attention weights, one matrix per (layer, head),
  // appended in layer-major order; for oracle tests.
  std::vector<Matrix>* raw_cross_attention = nullptr;
};

struct DecodeResult {
  ad::Var per_token_logprob;        // [|target|, 1]
  ad::Var total_logprob;            // [1,1]
  ad::Var dists;                    // [|target|, vocab] when requested
  std::vector<ad::Var> doc_scores;  // one scalar per context when requested
};

// Teacher-forced pass over `target` (must be non-empty and end with eos):
// log-probabilities, optional distributions, optional per-context attention
// averages (mean over layers, heads, target positions, and the key
// positions of each context block; sequences carry no padding here, so
// every key position is real).
DecodeResult decode_teacher_forced(ad::Tape& tape, const Model& model, const FidEncoding& enc,
                                   const TokenSeq& target, const DecodeOptions& options = {});

// Convenience value-level wrappers (fresh tape inside).
struct LogProb {
  double total = 0.0;
  std::vector<double> per_token;
};
LogProb lm_logprob(const Model& model, const std::string& claim, const std::vector<std::string>& contexts,
                   const TokenSeq& target);

Matrix token_distributions(const Model& model, const std::string& claim, const std::vector<std::string>& contexts,
                           const TokenSeq& target);

std::vector<double> cross_attention_doc_scores(const Model& model, const std::string& claim,
                                               const std::vector<std::string>& contexts, const TokenSeq& target);

struct GenerateOptions {
  int max_len = 128;
  int beam_width = 1;  // 1 = greedy
};

struct Generated {
  TokenSeq tokens;  // without bos/eos
  std::string text;
};

// Deterministic decoding: greedy argmax (ties to the lowest token id) or
// fixed-width beam search ranked by total log-probability.
Generated generate(const Model& model, const std::string& claim, const std::vector<std::string>& contexts,
                   const GenerateOptions& options = {});

}  // namespace justgen
