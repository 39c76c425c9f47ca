#include "justgen/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "justgen/bm25.hpp"
#include "justgen/corpus.hpp"
#include "justgen/encoder.hpp"
#include "justgen/errors.hpp"
#include "justgen/index.hpp"
#include "justgen/losses.hpp"
#include "justgen/manifest.hpp"
#include "justgen/metrics.hpp"
#include "justgen/model.hpp"
#include "justgen/seqmodel.hpp"
#include "justgen/synthetic.hpp"
#include "justgen/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace justgen {
namespace {

// Relative paths resolve against $JUSTGEN_DATA_ROOT when it is set.
std::string resolve(const std::string& path) {
  if (path.empty()) return path;
  const char* root = std::getenv("JUSTGEN_DATA_ROOT");
  if (!root || !*root) return path;
  fs::path p(path);
  if (p.is_absolute()) return path;
  return (fs::path(root) / p).string();
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<uint64_t> parse_seeds(const std::string& s) {
  std::vector<uint64_t> out;
  for (const std::string& part : split_csv(s)) {
    try {
      size_t used = 0;
      const uint64_t v = std::stoull(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
      out.push_back(v);
    } catch (const std::exception&) {
      fail(ErrorKind::InvalidConfig, "bad seed value: " + part);
    }
  }
  if (out.empty()) fail(ErrorKind::InvalidConfig, "at least one seed is required");
  return out;
}

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::IoError, "cannot open: " + path);
  json j = json::parse(f, nullptr, false);
  if (j.is_discarded()) fail(ErrorKind::MalformedInput, path + ": invalid JSON");
  return j;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::IoError, "cannot create directory " + dir + ": " + ec.message());
}

// --- config (de)serialization --------------------------------------------

json loss_config_to_json(const LossConfig& c) {
  json j;
  json active = json::array();
  for (LossName l : c.active) active.push_back(loss_name(l));
  j["active"] = active;
  json weights = json::object();
  for (const auto& [name, w] : c.weights) weights[loss_name(name)] = w;
  j["weights"] = weights;
  j["stop_retrieval_teacher"] = c.stop_retrieval_teacher;
  j["stop_article_generation_teacher"] = c.stop_article_generation_teacher;
  j["stop_chunk_alignment_teacher"] = c.stop_chunk_alignment_teacher;
  j["stop_attention_teacher"] = c.stop_attention_teacher;
  j["article_chunk_words"] = c.article_chunk_words;
  return j;
}

void loss_config_from_json(const json& j, LossConfig& c) {
  if (j.contains("active")) {
    c.active.clear();
    for (const auto& name : j.at("active")) c.active.push_back(parse_loss_name(name.get<std::string>()));
  }
  if (j.contains("weights")) {
    c.weights.clear();
    for (const auto& [name, w] : j.at("weights").items()) c.weights[parse_loss_name(name)] = w.get<double>();
  }
  if (j.contains("stop_retrieval_teacher")) c.stop_retrieval_teacher = j.at("stop_retrieval_teacher").get<bool>();
  if (j.contains("stop_article_generation_teacher"))
    c.stop_article_generation_teacher = j.at("stop_article_generation_teacher").get<bool>();
  if (j.contains("stop_chunk_alignment_teacher"))
    c.stop_chunk_alignment_teacher = j.at("stop_chunk_alignment_teacher").get<bool>();
  if (j.contains("stop_attention_teacher")) c.stop_attention_teacher = j.at("stop_attention_teacher").get<bool>();
  if (j.contains("article_chunk_words")) c.article_chunk_words = j.at("article_chunk_words").get<int>();
}

json train_config_to_json(const TrainConfig& c) {
  json j;
  j["shots"] = c.shots;
  j["balanced_shots"] = c.balanced_shots;
  j["top_n"] = c.top_n;
  j["steps"] = c.steps;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["lr_warmup_steps"] = c.lr_warmup_steps;
  j["warmup_finetune_steps"] = c.warmup_finetune_steps;
  j["losses"] = loss_config_to_json(c.losses);
  j["mode"] = train_mode_name(c.mode);
  j["joint_veracity"] = c.joint_veracity;
  return j;
}

void train_config_from_json(const json& j, TrainConfig& c) {
  if (j.contains("shots")) c.shots = j.at("shots").get<int>();
  if (j.contains("balanced_shots")) c.balanced_shots = j.at("balanced_shots").get<bool>();
  if (j.contains("top_n")) c.top_n = j.at("top_n").get<int>();
  if (j.contains("steps")) c.steps = j.at("steps").get<int>();
  if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
  if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("lr_warmup_steps")) c.lr_warmup_steps = j.at("lr_warmup_steps").get<int>();
  if (j.contains("warmup_finetune_steps")) c.warmup_finetune_steps = j.at("warmup_finetune_steps").get<int>();
  if (j.contains("losses")) loss_config_from_json(j.at("losses"), c.losses);
  if (j.contains("mode")) c.mode = parse_train_mode(j.at("mode").get<std::string>());
  if (j.contains("joint_veracity")) c.joint_veracity = j.at("joint_veracity").get<bool>();
}

json model_config_to_json(const ModelConfig& c) {
  json j;
  j["retriever"] = {{"dim", c.retriever.dim},
                    {"layers", c.retriever.layers},
                    {"heads", c.retriever.heads},
                    {"ff", c.retriever.ff},
                    {"max_len", c.retriever.max_len}};
  j["lm"] = {{"d_model", c.lm.d_model},     {"enc_layers", c.lm.enc_layers},
             {"dec_layers", c.lm.dec_layers}, {"heads", c.lm.heads},
             {"ff", c.lm.ff},               {"max_src_len", c.lm.max_src_len},
             {"max_tgt_len", c.lm.max_tgt_len}};
  j["max_vocab"] = c.max_vocab;
  j["init_seed"] = c.init_seed;
  return j;
}

void model_config_from_json(const json& j, ModelConfig& c) {
  if (j.contains("retriever")) {
    const json& r = j.at("retriever");
    if (r.contains("dim")) c.retriever.dim = r.at("dim").get<int>();
    if (r.contains("layers")) c.retriever.layers = r.at("layers").get<int>();
    if (r.contains("heads")) c.retriever.heads = r.at("heads").get<int>();
    if (r.contains("ff")) c.retriever.ff = r.at("ff").get<int>();
    if (r.contains("max_len")) c.retriever.max_len = r.at("max_len").get<int>();
  }
  if (j.contains("lm")) {
    const json& m = j.at("lm");
    if (m.contains("d_model")) c.lm.d_model = m.at("d_model").get<int>();
    if (m.contains("enc_layers")) c.lm.enc_layers = m.at("enc_layers").get<int>();
    if (m.contains("dec_layers")) c.lm.dec_layers = m.at("dec_layers").get<int>();
    if (m.contains("heads")) c.lm.heads = m.at("heads").get<int>();
    if (m.contains("ff")) c.lm.ff = m.at("ff").get<int>();
    if (m.contains("max_src_len")) c.lm.max_src_len = m.at("max_src_len").get<int>();
    if (m.contains("max_tgt_len")) c.lm.max_tgt_len = m.at("max_tgt_len").get<int>();
  }
  if (j.contains("max_vocab")) c.max_vocab = j.at("max_vocab").get<int>();
  if (j.contains("init_seed")) c.init_seed = j.at("init_seed").get<uint64_t>();
}

// --- shared option bags ----------------------------------------------------

struct SynthArgs {
  std::string out_dir;
  SyntheticOptions opts;
};

struct IngestArgs {
  std::string input, out_dir;
  int chunk_words = 100;
};

struct InitArgs {
  std::string train_file, corpus_file, test_file, config_file, out;
};

struct IndexArgs {
  std::string corpus_file, checkpoint, out_dir;
};

struct TrainArgs {
  std::string train_file, corpus_file, checkpoint, index_dir, out_dir, config_file, probe_file;
  std::string seeds = "13,42,7";
  std::string losses_csv, weights_csv, mode;
  bool unbalanced = false;
  bool joint_veracity = false;
  TrainConfig cfg;  // flag storage for numeric options
};

struct GenerateArgs {
  std::string checkpoint, test_file, out, index_dir, corpus_file, baseline;
  std::string context = "retrieved";
  int top_n = 20;
  int max_len = 64;
  int beam = 1;
  int article_chunk_words = 100;
  bool with_veracity = false;
};

struct EvaluateArgs {
  std::string preds_csv, refs_file, out_dir, metric;
  std::string scorer = "lexical_overlap";
  std::string summacc_mode = "mean";
};

void write_instances_bundle(const Dataset& ds, const std::string& dir, RunManifest& man) {
  const std::string train_path = (fs::path(dir) / "train.jsonl").string();
  const std::string test_path = (fs::path(dir) / "test.jsonl").string();
  const std::string corpus_path = (fs::path(dir) / "corpus.jsonl").string();
  save_instances(train_path, ds.train);
  save_instances(test_path, ds.test);
  save_corpus(corpus_path, ds.corpus);
  man.outputs.insert(man.outputs.end(), {train_path, test_path, corpus_path});
  std::cout << "train instances: " << ds.train.size() << "\n"
            << "test instances:  " << ds.test.size() << "\n"
            << "corpus chunks:   " << ds.corpus.chunks.size() << "\n"
            << "dropped (no justification cue): " << ds.dropped_no_justification << "\n";
}

int cmd_synth(const SynthArgs& a) {
  RunManifest man;
  man.command = "synth";
  man.started_at = iso8601_utc_now();
  man.seeds = {a.opts.seed};
  man.config = {{"train_claims", a.opts.train_claims}, {"test_claims", a.opts.test_claims},
                {"evidence_per_claim", a.opts.evidence_per_claim}, {"total_chunks", a.opts.total_chunks},
                {"seed", a.opts.seed}, {"chunk_words", a.opts.chunk_words}};
  const std::string dir = resolve(a.out_dir);
  ensure_dir(dir);

  SyntheticData data = make_synthetic(a.opts);
  const std::string raw_path = (fs::path(dir) / "raw.jsonl").string();
  std::ostringstream raw;
  for (const RawRecord& r : data.records) {
    json docs = json::array();
    for (const auto& [doc_id, text] : r.reference_docs) docs.push_back({{"doc_id", doc_id}, {"text", text}});
    raw << json{{"id", r.id},       {"claim", r.claim}, {"article", r.article},
                {"label", r.label}, {"split", r.split}, {"reference_docs", docs}}
               .dump()
        << "\n";
  }
  std::ofstream rf(raw_path, std::ios::trunc);
  if (!rf) fail(ErrorKind::IoError, "cannot open for writing: " + raw_path);
  rf << raw.str();
  if (!rf.flush()) fail(ErrorKind::IoError, "write failed: " + raw_path);
  rf.close();
  man.outputs.push_back(raw_path);

  write_instances_bundle(data.dataset, dir, man);
  const std::string probe_path = (fs::path(dir) / "probe.json").string();
  save_probe(data.probe, probe_path);
  man.outputs.push_back(probe_path);
  man.write(dir);
  return 0;
}

int cmd_ingest(const IngestArgs& a) {
  RunManifest man;
  man.command = "ingest";
  man.started_at = iso8601_utc_now();
  man.config = {{"chunk_words", a.chunk_words}};
  const std::string input = resolve(a.input);
  const std::string dir = resolve(a.out_dir);
  man.inputs.push_back(input);
  ensure_dir(dir);

  const std::vector<RawRecord> records = load_raw_records(input);
  DatasetOptions opts;
  opts.chunk_words = a.chunk_words;
  const Dataset ds = build_dataset(records, default_label_map(), opts);
  write_instances_bundle(ds, dir, man);
  man.write(dir);
  return 0;
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

int cmd_init(const InitArgs& a) {
  RunManifest man;
  man.command = "init";
  man.started_at = iso8601_utc_now();
  ModelConfig cfg;
  if (!a.config_file.empty()) model_config_from_json(read_json_file(resolve(a.config_file)), cfg);
  man.config = model_config_to_json(cfg);
  man.seeds = {cfg.init_seed};

  const std::string train_file = resolve(a.train_file);
  const std::string corpus_file = resolve(a.corpus_file);
  man.inputs = {train_file, corpus_file};
  const std::vector<Instance> train = load_instances(train_file);
  std::vector<Instance> test;
  if (!a.test_file.empty()) {
    const std::string test_file = resolve(a.test_file);
    man.inputs.push_back(test_file);
    test = load_instances(test_file);
  }
  const Corpus corpus = load_corpus(corpus_file);

  const Model model = init_model(cfg, vocab_texts(train, test, corpus));
  const std::string out = resolve(a.out);
  if (out.empty()) fail(ErrorKind::InvalidConfig, "--out is required");
  if (fs::path(out).has_parent_path()) ensure_dir(fs::path(out).parent_path().string());
  save_checkpoint(model, out);
  man.outputs = {out, (fs::path(out).parent_path() / "vocab.txt").string()};
  man.write(fs::path(out).has_parent_path() ? fs::path(out).parent_path().string() : ".");
  std::cout << "vocab size: " << model.vocab_size() << "\n"
            << "parameters: " << model.params.count() << " tensors\n"
            << "checkpoint: " << out << "\n";
  return 0;
}

int cmd_index(const IndexArgs& a) {
  RunManifest man;
  man.command = "index";
  man.started_at = iso8601_utc_now();
  const std::string corpus_file = resolve(a.corpus_file);
  const std::string checkpoint = resolve(a.checkpoint);
  const std::string dir = resolve(a.out_dir);
  man.inputs = {corpus_file, checkpoint};
  ensure_dir(dir);

  const Corpus corpus = load_corpus(corpus_file);
  const Model model = load_checkpoint(checkpoint);
  const EmbeddingIndex index = build_index(corpus, model);
  save_index(index, dir);
  for (const char* name : {"meta.json", "embeddings.bin", "ids.txt"})
    man.outputs.push_back((fs::path(dir) / name).string());
  man.config = {{"dim", index.dim}, {"count", index.count()}};
  man.write(dir);
  std::cout << "indexed " << index.count() << " chunks at dim " << index.dim << "\n";
  return 0;
}

int cmd_train(const TrainArgs& a, const CLI::App* sub) {
  TrainConfig cfg;
  if (!a.config_file.empty()) train_config_from_json(read_json_file(resolve(a.config_file)), cfg);
  // Flags win over the config file.
  auto flag_given = [&](const std::string& name) { return sub->count(name) > 0; };
  if (flag_given("--shots")) cfg.shots = a.cfg.shots;
  if (flag_given("--top-n")) cfg.top_n = a.cfg.top_n;
  if (flag_given("--steps")) cfg.steps = a.cfg.steps;
  if (flag_given("--batch-size")) cfg.batch_size = a.cfg.batch_size;
  if (flag_given("--lr")) cfg.learning_rate = a.cfg.learning_rate;
  if (flag_given("--lr-warmup")) cfg.lr_warmup_steps = a.cfg.lr_warmup_steps;
  if (flag_given("--warmup-finetune")) cfg.warmup_finetune_steps = a.cfg.warmup_finetune_steps;
  if (flag_given("--unbalanced")) cfg.balanced_shots = false;
  if (flag_given("--joint-veracity")) cfg.joint_veracity = true;
  if (flag_given("--mode")) cfg.mode = parse_train_mode(a.mode);
  if (flag_given("--losses")) {
    cfg.losses.active.clear();
    for (const std::string& name : split_csv(a.losses_csv)) cfg.losses.active.push_back(parse_loss_name(name));
  }
  if (flag_given("--weights")) {
    cfg.losses.weights.clear();
    for (const std::string& pair : split_csv(a.weights_csv)) {
      const size_t eq = pair.find('=');
      if (eq == std::string::npos) fail(ErrorKind::InvalidConfig, "weights need name=value: " + pair);
      try {
        cfg.losses.weights[parse_loss_name(pair.substr(0, eq))] = std::stod(pair.substr(eq + 1));
      } catch (const Error&) {
        throw;
      } catch (const std::exception&) {
        fail(ErrorKind::InvalidConfig, "bad weight value: " + pair);
      }
    }
  }
  const std::vector<uint64_t> seeds = parse_seeds(a.seeds);

  RunManifest man;
  man.command = "train";
  man.started_at = iso8601_utc_now();
  man.seeds = seeds;
  man.config = train_config_to_json(cfg);

  const std::string train_file = resolve(a.train_file);
  const std::string corpus_file = resolve(a.corpus_file);
  const std::string checkpoint = resolve(a.checkpoint);
  const std::string dir = resolve(a.out_dir);
  man.inputs = {train_file, corpus_file, checkpoint};
  ensure_dir(dir);

  const std::vector<Instance> train_set = load_instances(train_file);
  const Corpus corpus = load_corpus(corpus_file);

  EmbeddingIndex index;
  bool have_index = false;
  if (!a.index_dir.empty()) {
    const std::string index_dir = resolve(a.index_dir);
    for (const char* name : {"meta.json", "embeddings.bin", "ids.txt"})
      man.inputs.push_back((fs::path(index_dir) / name).string());
    index = load_index(index_dir);
    have_index = true;
  }
  ProbeSet probe;
  if (!a.probe_file.empty()) {
    const std::string probe_file = resolve(a.probe_file);
    man.inputs.push_back(probe_file);
    probe = load_probe(probe_file);
  }

  for (const uint64_t seed : seeds) {
    Model model = load_checkpoint(checkpoint);
    TrainConfig seed_cfg = cfg;
    seed_cfg.seed = seed;
    const std::string seed_dir = (fs::path(dir) / ("seed_" + std::to_string(seed))).string();
    ensure_dir(seed_dir);
    const std::string log_path = (fs::path(seed_dir) / "train_log.jsonl").string();
    const std::string ckpt_path = (fs::path(seed_dir) / "model.ckpt").string();
    const TrainResult result = train(model, train_set, corpus, have_index ? &index : nullptr, seed_cfg, log_path,
                                     probe.empty() ? nullptr : &probe);
    save_checkpoint(model, ckpt_path);
    man.outputs.insert(man.outputs.end(),
                       {log_path, ckpt_path, (fs::path(seed_dir) / "vocab.txt").string()});
    const StepLog& last = result.steps.back();
    std::cout << "seed " << seed << ": final total loss " << last.total;
    if (last.probe_recall_at_5 >= 0.0) std::cout << ", probe recall@5 " << last.probe_recall_at_5;
    std::cout << "\n";
  }
  man.write(dir);
  return 0;
}

int cmd_generate(const GenerateArgs& a) {
  RunManifest man;
  man.command = "generate";
  man.started_at = iso8601_utc_now();
  man.config = {{"context", a.context},       {"top_n", a.top_n},
                {"max_len", a.max_len},       {"beam", a.beam},
                {"with_veracity", a.with_veracity}, {"baseline", a.baseline},
                {"article_chunk_words", a.article_chunk_words}};

  const bool lead4_baseline = !a.baseline.empty();
  if (lead4_baseline && a.baseline != "lead4")
    fail(ErrorKind::InvalidConfig, "unknown baseline: " + a.baseline);
  if (lead4_baseline && a.with_veracity)
    fail(ErrorKind::InvalidConfig, "--with-veracity does not apply to the lead4 baseline");
  if (a.top_n < 1) fail(ErrorKind::InvalidConfig, "--top-n must be >= 1");
  if (a.max_len < 1) fail(ErrorKind::InvalidConfig, "--max-len must be >= 1");
  if (a.beam < 1) fail(ErrorKind::InvalidConfig, "--beam must be >= 1");

  const std::string test_file = resolve(a.test_file);
  man.inputs = {test_file};
  const std::vector<Instance> tests = load_instances(test_file);

  const bool retrieved = a.context == "retrieved";
  if (!retrieved && a.context != "article")
    fail(ErrorKind::InvalidConfig, "--context must be retrieved or article");

  Corpus corpus;
  std::map<std::string, size_t> corpus_ids;
  if (!a.corpus_file.empty()) {
    const std::string corpus_file = resolve(a.corpus_file);
    man.inputs.push_back(corpus_file);
    corpus = load_corpus(corpus_file);
    corpus_ids = corpus.id_index();
  }

  std::vector<Prediction> predictions;
  predictions.reserve(tests.size());

  if (lead4_baseline) {
    if (corpus.chunks.empty()) fail(ErrorKind::InvalidConfig, "--baseline lead4 needs --corpus");
    const Bm25Index bm25 = Bm25Index::build(corpus);
    for (const Instance& inst : tests) predictions.push_back({inst.id, lead4(bm25, corpus, inst.claim), {}});
  } else {
    const std::string checkpoint = resolve(a.checkpoint);
    if (checkpoint.empty()) fail(ErrorKind::InvalidConfig, "--checkpoint is required unless --baseline is given");
    man.inputs.push_back(checkpoint);
    const Model model = load_checkpoint(checkpoint);

    EmbeddingIndex index;
    if (retrieved) {
      if (a.index_dir.empty() || corpus.chunks.empty())
        fail(ErrorKind::InvalidConfig, "--context retrieved needs --index and --corpus");
      const std::string index_dir = resolve(a.index_dir);
      for (const char* name : {"meta.json", "embeddings.bin", "ids.txt"})
        man.inputs.push_back((fs::path(index_dir) / name).string());
      index = load_index(index_dir);
      if (index.dim != model.config.retriever.dim)
        fail(ErrorKind::DimensionMismatch, "index dim does not match the checkpoint's retriever");
    }

    GenerateOptions gen;
    gen.max_len = a.max_len;
    gen.beam_width = a.beam;
    for (const Instance& inst : tests) {
      std::vector<std::string> contexts;
      if (retrieved) {
        const Matrix q = encode_query_value(model, inst.claim);
        const int n = static_cast<int>(std::min<size_t>(static_cast<size_t>(a.top_n), index.count()));
        const RetrievedSet hits = retrieve(index, q, n);
        for (const std::string& cid : hits.chunk_ids) {
          const auto it = corpus_ids.find(cid);
          if (it == corpus_ids.end()) fail(ErrorKind::MalformedInput, "index id missing from corpus: " + cid);
          contexts.push_back(corpus.chunks[it->second].text);
        }
      } else {
        if (inst.article.empty())
          fail(ErrorKind::MissingArticle, "instance " + inst.id + " has no article text for --context article");
        contexts = chunk_text(inst.article, a.article_chunk_words);
      }
      Prediction p;
      p.id = inst.id;
      p.justification = generate(model, inst.claim, contexts, gen).text;
      if (a.with_veracity) p.label = predict_veracity(model, inst.claim, contexts);
      predictions.push_back(std::move(p));
    }
  }

  const std::string out = resolve(a.out);
  if (fs::path(out).has_parent_path()) ensure_dir(fs::path(out).parent_path().string());
  save_predictions(predictions, out);
  man.outputs = {out};
  man.write(fs::path(out).has_parent_path() ? fs::path(out).parent_path().string() : ".");
  std::cout << "wrote " << predictions.size() << " predictions to " << out << "\n";
  return 0;
}

int cmd_evaluate(const EvaluateArgs& a) {
  RunManifest man;
  man.command = "evaluate";
  man.started_at = iso8601_utc_now();
  man.config = {{"scorer", a.scorer}, {"summacc_mode", a.summacc_mode}, {"metric", a.metric}};

  if (a.scorer != "lexical_overlap")
    fail(ErrorKind::InvalidConfig, "unknown scorer: " + a.scorer + " (available: lexical_overlap)");
  const SummaccMode mode = parse_summacc_mode(a.summacc_mode);
  if (!a.metric.empty()) {
    static const std::vector<std::string> known = {"rouge1", "rouge2", "rougeL", "summacc", "macro_f1"};
    if (std::find(known.begin(), known.end(), a.metric) == known.end())
      fail(ErrorKind::InvalidConfig, "unknown metric: " + a.metric);
  }

  const std::vector<std::string> pred_files = split_csv(a.preds_csv);
  if (pred_files.empty()) fail(ErrorKind::InvalidConfig, "--pred needs at least one file");
  std::vector<std::vector<Prediction>> per_seed;
  std::vector<std::string> sources;
  for (const std::string& file : pred_files) {
    const std::string path = resolve(file);
    man.inputs.push_back(path);
    per_seed.push_back(load_predictions(path));
    sources.push_back(file);
  }
  const std::string refs_file = resolve(a.refs_file);
  man.inputs.push_back(refs_file);
  const std::vector<Instance> refs = load_instances(refs_file);

  const LexicalOverlapScorer scorer;
  const MetricReport report = evaluate_run(per_seed, refs, scorer, mode, sources);

  if (a.metric.empty()) {
    std::cout << render_report_table(report);
  } else {
    const auto it = report.aggregate.find(a.metric);
    if (it == report.aggregate.end()) {
      std::cout << a.metric << ": not available (predictions lack labels)\n";
    } else {
      std::cout << a.metric << ": mean " << it->second.mean * 100.0;
      if (it->second.std_dev) std::cout << " std " << *it->second.std_dev * 100.0;
      std::cout << "\n";
    }
  }

  const std::string dir = resolve(a.out_dir);
  ensure_dir(dir);
  const std::string report_path = (fs::path(dir) / "report.json").string();
  std::ofstream rf(report_path, std::ios::trunc);
  if (!rf) fail(ErrorKind::IoError, "cannot open for writing: " + report_path);
  rf << report_to_json(report) << "\n";
  if (!rf.flush()) fail(ErrorKind::IoError, "write failed: " + report_path);
  rf.close();
  man.outputs = {report_path};
  man.write(dir);
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Few-shot retrieval-augmented justification generation for fact checking"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "Generate the deterministic synthetic benchmark dataset");
  synth->add_option("--out-dir", synth_args.out_dir, "Output directory")->required();
  synth->add_option("--seed", synth_args.opts.seed, "Generator seed");
  synth->add_option("--train-claims", synth_args.opts.train_claims, "Training claims");
  synth->add_option("--test-claims", synth_args.opts.test_claims, "Test claims");
  synth->add_option("--evidence-per-claim", synth_args.opts.evidence_per_claim, "Planted evidence docs per claim");
  synth->add_option("--total-chunks", synth_args.opts.total_chunks, "Total corpus chunks");
  synth->add_option("--chunk-words", synth_args.opts.chunk_words, "Chunk size in words");

  IngestArgs ingest_args;
  CLI::App* ingest = app.add_subcommand("ingest", "Split raw records into instances and a chunked corpus");
  ingest->add_option("--input", ingest_args.input, "raw.jsonl")->required();
  ingest->add_option("--out-dir", ingest_args.out_dir, "Output directory")->required();
  ingest->add_option("--chunk-words", ingest_args.chunk_words, "Chunk size in words");

  InitArgs init_args;
  CLI::App* init = app.add_subcommand("init", "Create a fresh model checkpoint (vocabulary from the data)");
  init->add_option("--train", init_args.train_file, "train.jsonl")->required();
  init->add_option("--corpus", init_args.corpus_file, "corpus.jsonl")->required();
  init->add_option("--test", init_args.test_file, "test.jsonl (optional, widens the vocabulary)");
  init->add_option("--config", init_args.config_file, "Model config JSON");
  init->add_option("--out", init_args.out, "Checkpoint path")->required();

  IndexArgs index_args;
  CLI::App* index = app.add_subcommand("index", "Embed the corpus with the document encoder");
  index->add_option("--corpus", index_args.corpus_file, "corpus.jsonl")->required();
  index->add_option("--checkpoint", index_args.checkpoint, "Model checkpoint")->required();
  index->add_option("--out-dir", index_args.out_dir, "Index directory")->required();

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Few-shot training, one run per seed");
  train->add_option("--train", train_args.train_file, "train.jsonl")->required();
  train->add_option("--corpus", train_args.corpus_file, "corpus.jsonl")->required();
  train->add_option("--checkpoint", train_args.checkpoint, "Initial checkpoint")->required();
  train->add_option("--index", train_args.index_dir, "Frozen embedding index directory");
  train->add_option("--out-dir", train_args.out_dir, "Output directory")->required();
  train->add_option("--config", train_args.config_file, "Train config JSON (flags win)");
  train->add_option("--seeds", train_args.seeds, "Comma-separated seed list (default 13,42,7)");
  train->add_option("--losses", train_args.losses_csv, "Active losses, e.g. base_lm,perplexity_distill,ret_c");
  train->add_option("--weights", train_args.weights_csv, "Loss weights, e.g. ret_c=0.5,lm_c=2");
  train->add_option("--mode", train_args.mode, "retrieval | article_input");
  train->add_option("--shots", train_args.cfg.shots, "Few-shot sample size");
  train->add_flag("--unbalanced", train_args.unbalanced, "Sample without class balancing");
  train->add_option("--top-n", train_args.cfg.top_n, "Contexts retrieved per step");
  train->add_option("--steps", train_args.cfg.steps, "Training steps");
  train->add_option("--batch-size", train_args.cfg.batch_size, "Batch size");
  train->add_option("--lr", train_args.cfg.learning_rate, "Peak learning rate");
  train->add_option("--lr-warmup", train_args.cfg.lr_warmup_steps, "Linear warmup steps");
  train->add_option("--warmup-finetune", train_args.cfg.warmup_finetune_steps,
                    "Generator-only warmup steps on article chunks");
  train->add_flag("--joint-veracity", train_args.joint_veracity, "Add veracity cross-entropy each step");
  train->add_option("--probe", train_args.probe_file, "probe.json for recall@5 logging");

  GenerateArgs gen_args;
  CLI::App* gen = app.add_subcommand("generate", "Generate justifications for a test set");
  gen->add_option("--checkpoint", gen_args.checkpoint, "Model checkpoint");
  gen->add_option("--test", gen_args.test_file, "test.jsonl")->required();
  gen->add_option("--out", gen_args.out, "predictions.jsonl")->required();
  gen->add_option("--index", gen_args.index_dir, "Embedding index directory");
  gen->add_option("--corpus", gen_args.corpus_file, "corpus.jsonl");
  gen->add_option("--context", gen_args.context, "retrieved | article");
  gen->add_option("--top-n", gen_args.top_n, "Contexts per claim");
  gen->add_option("--max-len", gen_args.max_len, "Maximum generated tokens");
  gen->add_option("--beam", gen_args.beam, "Beam width (1 = greedy)");
  gen->add_option("--article-chunk-words", gen_args.article_chunk_words, "Chunk size for --context article");
  gen->add_flag("--with-veracity", gen_args.with_veracity, "Also predict veracity labels");
  gen->add_option("--baseline", gen_args.baseline, "lead4: emit the retrieval baseline instead");

  EvaluateArgs eval_args;
  CLI::App* eval = app.add_subcommand("evaluate", "Score prediction files against references");
  eval->add_option("--pred", eval_args.preds_csv, "Comma-separated prediction files, one per seed")->required();
  eval->add_option("--refs", eval_args.refs_file, "Reference instances (test.jsonl)")->required();
  eval->add_option("--out-dir", eval_args.out_dir, "Report directory")->required();
  eval->add_option("--scorer", eval_args.scorer, "Entailment scorer (lexical_overlap)");
  eval->add_option("--summacc-mode", eval_args.summacc_mode, "mean | sum");
  eval->add_option("--metric", eval_args.metric, "Restrict console output to one metric");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_args);
    if (ingest->parsed()) return cmd_ingest(ingest_args);
    if (init->parsed()) return cmd_init(init_args);
    if (index->parsed()) return cmd_index(index_args);
    if (train->parsed()) return cmd_train(train_args, train);
    if (gen->parsed()) return cmd_generate(gen_args);
    if (eval->parsed()) return cmd_evaluate(eval_args);
    std::cerr << "error: no command\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::Internal ? 3 : 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace justgen
