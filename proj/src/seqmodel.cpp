#include "justgen/seqmodel.hpp"

#include <algorithm>
#include <cmath>

#include "justgen/encoder.hpp"
#include "justgen/errors.hpp"

namespace justgen {

using ad::Tape;
using ad::Var;

namespace {

StackNames lm_encoder_names(const SeqModelConfig& cfg) {
  StackNames n;
  n.tok_emb = "lm.tok_emb";
  n.pos_emb = "lm.enc_pos";
  for (int l = 0; l < cfg.enc_layers; ++l) n.block_prefixes.push_back("lm.encL" + std::to_string(l) + ".");
  n.final_norm = "lm.enc_final_norm.g";
  n.heads = cfg.heads;
  return n;
}

Matrix causal_mask(int t) {
  Matrix m(t, t);
  for (int i = 0; i < t; ++i)
    for (int j = i + 1; j < t; ++j) m.at(i, j) = -1e30;
  return m;
}

void check_target(const Model& model, const TokenSeq& target) {
  if (target.empty()) fail(ErrorKind::EmptyText, "target sequence is empty");
  if (target.back() != Tokenizer::kEos) fail(ErrorKind::MalformedInput, "target must end with eos");
  if (static_cast<int>(target.size()) > model.config.lm.max_tgt_len)
    fail(ErrorKind::LengthMismatch, "target exceeds the decoder length limit");
  for (int id : target)
    if (id < 0 || id >= model.vocab_size()) fail(ErrorKind::UnknownToken, "target token id out of range");
}

}  // namespace

FidEncoding encode_fid(Tape& tape, const Model& model, const std::string& claim,
                       const std::vector<std::string>& contexts) {
  if (contexts.empty()) fail(ErrorKind::NoContexts, "at least one context is required");
  const SeqModelConfig& cfg = model.config.lm;
  const TokenSeq claim_ids = model.tokenizer.encode(claim);
  ParamBinder bind(tape, model.params);
  const StackNames names = lm_encoder_names(cfg);

  FidEncoding out;
  std::vector<Var> parts;
  parts.reserve(contexts.size());
  int row = 0;
  for (const std::string& ctx : contexts) {
    TokenSeq ids = claim_ids;
    ids.push_back(Tokenizer::kSep);
    const TokenSeq ctx_ids = model.tokenizer.encode(ctx);
    if (ctx_ids.empty()) fail(ErrorKind::EmptyText, "context has no tokens");
    ids.insert(ids.end(), ctx_ids.begin(), ctx_ids.end());
    if (static_cast<int>(ids.size()) > cfg.max_src_len) ids.resize(static_cast<size_t>(cfg.max_src_len));
    const Var states = transformer_encoder(tape, bind, names, ids);
    parts.push_back(states);
    const int t = tape.val(states).rows;
    out.blocks.emplace_back(row, row + t);
    row += t;
  }
  out.states = parts.size() == 1 ? parts[0] : tape.concat_rows(parts);
  return out;
}

DecodeResult decode_teacher_forced(Tape& tape, const Model& model, const FidEncoding& enc, const TokenSeq& target,
                                   const DecodeOptions& options) {
  check_target(model, target);
  const SeqModelConfig& cfg = model.config.lm;
  ParamBinder bind(tape, model.params);

  // Decoder input: bos followed by all but the last target token.
  TokenSeq input(1, Tokenizer::kBos);
  input.insert(input.end(), target.begin(), target.end() - 1);
  const int t = static_cast<int>(input.size());

  Var h = tape.add(tape.embed(bind("lm.tok_emb"), input), tape.slice_rows(bind("lm.dec_pos"), 0, t));
  const Matrix mask = causal_mask(t);

  std::vector<Var> cross_probs;  // layer-major, heads within a layer
  for (int l = 0; l < cfg.dec_layers; ++l) {
    const std::string p = "lm.decL" + std::to_string(l) + ".";
    Var x = tape.rmsnorm(h, bind(p + "self_norm.g"));
    h = tape.add(h, attention(tape, bind, p + "self.", x, x, cfg.heads, &mask, nullptr));
    x = tape.rmsnorm(h, bind(p + "cross_norm.g"));
    const bool record = options.want_doc_scores || options.raw_cross_attention;
    h = tape.add(h, attention(tape, bind, p + "cross.", x, enc.states, cfg.heads, nullptr,
                              record ? &cross_probs : nullptr));
    x = tape.rmsnorm(h, bind(p + "ff_norm.g"));
    const Var ff = tape.matmul(tape.gelu(tape.matmul(x, false, bind(p + "ff.w1"), false)), false, bind(p + "ff.w2"), false);
    h = tape.add(h, ff);
  }
  h = tape.rmsnorm(h, bind("lm.dec_final_norm.g"));
  const Var logits = tape.matmul(h, false, bind("lm.out_proj"), false);
  const Var logp = tape.log_softmax_rows(logits);

  DecodeResult out;
  out.per_token_logprob = tape.pick_entries(logp, target);
  out.total_logprob = tape.sum_all(out.per_token_logprob);
  if (options.want_dists) out.dists = tape.softmax_rows(logits);
  if (options.raw_cross_attention)
    for (const Var& p : cross_probs) options.raw_cross_attention->push_back(tape.val(p));
  if (options.want_doc_scores) {
    // Score per context: attention mass averaged over layers, heads, target
    // positions, and the context's key positions.
    const double inv = 1.0 / static_cast<double>(cross_probs.size());
    for (const auto& [b0, b1] : enc.blocks) {
      std::vector<Var> pieces;
      pieces.reserve(cross_probs.size());
      for (const Var& p : cross_probs) pieces.push_back(tape.mean_all(tape.slice_cols(p, b0, b1)));
      Var acc = pieces[0];
      for (size_t i = 1; i < pieces.size(); ++i) acc = tape.add(acc, pieces[i]);
      out.doc_scores.push_back(tape.scale(acc, inv));
    }
  }
  return out;
}

LogProb lm_logprob(const Model& model, const std::string& claim, const std::vector<std::string>& contexts,
                   const TokenSeq& target) {
  Tape tape;
  const FidEncoding enc = encode_fid(tape, model, claim, contexts);
  const DecodeResult r = decode_teacher_forced(tape, model, enc, target);
  LogProb out;
  out.total = tape.scalar(r.total_logprob);
  out.per_token = tape.val(r.per_token_logprob).data;
  return out;
}

Matrix token_distributions(const Model& model, const std::string& claim, const std::vector<std::string>& contexts,
                           const TokenSeq& target) {
  Tape tape;
  const FidEncoding enc = encode_fid(tape, model, claim, contexts);
  DecodeOptions opts;
  opts.want_dists = true;
  const DecodeResult r = decode_teacher_forced(tape, model, enc, target, opts);
  return tape.val(r.dists);
}

std::vector<double> cross_attention_doc_scores(const Model& model, const std::string& claim,
                                               const std::vector<std::string>& contexts, const TokenSeq& target) {
  Tape tape;
  const FidEncoding enc = encode_fid(tape, model, claim, contexts);
  DecodeOptions opts;
  opts.want_doc_scores = true;
  const DecodeResult r = decode_teacher_forced(tape, model, enc, target, opts);
  std::vector<double> out;
  out.reserve(r.doc_scores.size());
  for (const Var& v : r.doc_scores) out.push_back(tape.scalar(v));
  return out;
}

namespace {

bool emittable(int id) {
  // Structural tokens are never proposed; eos is handled separately.
  return id != Tokenizer::kPad && id != Tokenizer::kBos && id != Tokenizer::kUnk && id != Tokenizer::kSep;
}

}  // namespace

Generated generate(const Model& model, const std::string& claim, const std::vector<std::string>& contexts,
                   const GenerateOptions& options) {
  if (options.max_len < 1) fail(ErrorKind::InvalidConfig, "generate: max_len must be >= 1");
  if (options.beam_width < 1) fail(ErrorKind::InvalidConfig, "generate: beam_width must be >= 1");
  const int max_len = std::min(options.max_len, model.config.lm.max_tgt_len - 1);

  // Contexts are encoded once; each decode step replays only the decoder.
  Tape tape;
  const FidEncoding enc = encode_fid(tape, model, claim, contexts);

  // Log-distribution over the next token after an emitted prefix, via a
  // teacher-forced pass whose input half is bos + prefix.
  const auto next_logp = [&](const TokenSeq& emitted) {
    TokenSeq target = emitted;
    target.push_back(Tokenizer::kEos);
    DecodeOptions opts;
    opts.want_dists = true;
    const DecodeResult r = decode_teacher_forced(tape, model, enc, target, opts);
    const Matrix& dists = tape.val(r.dists);
    std::vector<double> out(static_cast<size_t>(dists.cols));
    for (int j = 0; j < dists.cols; ++j) out[static_cast<size_t>(j)] = std::log(dists.at(dists.rows - 1, j));
    return out;
  };

  struct Beam {
    TokenSeq tokens;
    double logprob = 0.0;
    bool done = false;
  };
  std::vector<Beam> beams{Beam{}};

  for (int step = 0; step < max_len; ++step) {
    std::vector<Beam> candidates;
    for (const Beam& beam : beams) {
      if (beam.done) {
        candidates.push_back(beam);
        continue;
      }
      const std::vector<double> logp = next_logp(beam.tokens);
      if (options.beam_width == 1) {
        // Greedy: argmax over emittable tokens, ties to the lowest id.
        int best = Tokenizer::kEos;
        for (int j = 0; j < static_cast<int>(logp.size()); ++j)
          if (emittable(j) && logp[static_cast<size_t>(j)] > logp[static_cast<size_t>(best)]) best = j;
        Beam next = beam;
        next.logprob += logp[static_cast<size_t>(best)];
        if (best == Tokenizer::kEos) {
          next.done = true;
        } else {
          next.tokens.push_back(best);
        }
        candidates.push_back(std::move(next));
      } else {
        for (int j = 0; j < static_cast<int>(logp.size()); ++j) {
          if (!emittable(j)) continue;
          Beam next = beam;
          next.logprob += logp[static_cast<size_t>(j)];
          if (j == Tokenizer::kEos) {
            next.done = true;
          } else {
            next.tokens.push_back(j);
          }
          candidates.push_back(std::move(next));
        }
      }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Beam& a, const Beam& b) {
      if (a.logprob != b.logprob) return a.logprob > b.logprob;
      return a.tokens < b.tokens;  // deterministic tie order
    });
    if (candidates.size() > static_cast<size_t>(options.beam_width))
      candidates.resize(static_cast<size_t>(options.beam_width));
    beams = std::move(candidates);
    bool all_done = true;
    for (const Beam& b : beams) all_done = all_done && b.done;
    if (all_done) break;
  }

  Generated out;
  out.tokens = beams[0].tokens;
  out.text = model.tokenizer.decode(out.tokens);
  return out;
}

}  // namespace justgen
