#include "justgen/corpus.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "justgen/errors.hpp"
#include "justgen/text.hpp"

namespace justgen {

using nlohmann::json;

const char* label_name(VeracityLabel l) {
  switch (l) {
    case VeracityLabel::False: return "false";
    case VeracityLabel::Mixture: return "mixture";
    case VeracityLabel::True: return "true";
  }
  return "false";
}

std::optional<VeracityLabel> label_from_name(const std::string& name) {
  if (name == "false") return VeracityLabel::False;
  if (name == "mixture") return VeracityLabel::Mixture;
  if (name == "true") return VeracityLabel::True;
  return std::nullopt;
}

std::map<std::string, size_t> Corpus::id_index() const {
  std::map<std::string, size_t> m;
  for (size_t i = 0; i < chunks.size(); ++i) m[chunks[i].chunk_id] = i;
  return m;
}

std::vector<std::string> chunk_text(const std::string& text, int chunk_words) {
  if (chunk_words < 1) fail(ErrorKind::InvalidConfig, "chunk_words must be >= 1");
  const std::vector<std::string> words = split_words(text);
  if (words.empty()) fail(ErrorKind::EmptyDocument, "document has no words");
  std::vector<std::string> out;
  for (size_t start = 0; start < words.size(); start += static_cast<size_t>(chunk_words)) {
    const size_t end = std::min(words.size(), start + static_cast<size_t>(chunk_words));
    std::string piece;
    for (size_t i = start; i < end; ++i) {
      if (i > start) piece += ' ';
      piece += words[i];
    }
    out.push_back(std::move(piece));
  }
  return out;
}

std::vector<Chunk> chunk_document(const std::string& doc_id, const std::string& text, int chunk_words) {
  const std::vector<std::string> pieces = chunk_text(text, chunk_words);
  std::vector<Chunk> out;
  out.reserve(pieces.size());
  for (size_t i = 0; i < pieces.size(); ++i) {
    Chunk c;
    c.source_doc_id = doc_id;
    c.position = static_cast<int>(i);
    c.chunk_id = doc_id + "#" + std::to_string(i);
    c.text = pieces[i];
    out.push_back(std::move(c));
  }
  return out;
}

std::optional<JustificationSplit> extract_justification(const std::string& article,
                                                        const std::vector<std::string>& cues) {
  size_t best = std::string::npos;
  for (const std::string& cue : cues) {
    const size_t pos = ifind(article, cue);
    if (pos != std::string::npos && (best == std::string::npos || pos < best)) best = pos;
  }
  if (best == std::string::npos) return std::nullopt;
  JustificationSplit s;
  s.justification = article.substr(best);
  s.remainder = article.substr(0, best);
  while (!s.remainder.empty() && std::isspace(static_cast<unsigned char>(s.remainder.back()))) s.remainder.pop_back();
  return s;
}

LabelMap default_label_map() {
  return {{"false", "false"}, {"mixture", "mixture"}, {"true", "true"}};
}

Dataset build_dataset(const std::vector<RawRecord>& records, const LabelMap& label_map,
                      const DatasetOptions& options) {
  Dataset ds;
  std::map<std::string, std::string> seen_docs;  // doc_id -> text, for dedup
  auto add_refs = [&](const RawRecord& rec) {
    for (const auto& [doc_id, text] : rec.reference_docs) {
      auto it = seen_docs.find(doc_id);
      if (it != seen_docs.end()) {
        if (it->second != text)
          fail(ErrorKind::MalformedInput, "reference doc '" + doc_id + "' repeats with different text");
        continue;
      }
      seen_docs.emplace(doc_id, text);
      std::vector<Chunk> chunks = chunk_document(doc_id, text, options.chunk_words);
      for (Chunk& c : chunks) ds.corpus.chunks.push_back(std::move(c));
    }
  };

  for (const RawRecord& rec : records) {
    auto mapped = label_map.find(rec.label);
    if (mapped == label_map.end()) fail(ErrorKind::UnknownLabel, "record '" + rec.id + "': unknown label '" + rec.label + "'");
    auto label = label_from_name(mapped->second);
    if (!label)
      fail(ErrorKind::UnknownLabel,
           "record '" + rec.id + "': label '" + rec.label + "' maps to unrecognized class '" + mapped->second + "'");
    if (rec.split != "train" && rec.split != "test")
      fail(ErrorKind::MalformedInput, "record '" + rec.id + "': split must be 'train' or 'test'");

    auto split = extract_justification(rec.article);
    if (!split) {
      ++ds.dropped_no_justification;
      if (options.keep_dropped_record_refs) add_refs(rec);
      continue;
    }
    Instance inst;
    inst.id = rec.id;
    inst.claim = rec.claim;
    inst.justification = split->justification;
    inst.article = split->remainder;
    inst.label = *label;
    for (const auto& [doc_id, _] : rec.reference_docs) inst.reference_doc_ids.push_back(doc_id);
    add_refs(rec);
    (rec.split == "train" ? ds.train : ds.test).push_back(std::move(inst));
  }
  return ds;
}

namespace {

// Shared JSONL reader: parses every line, collects malformed line numbers
// into one error message.
std::vector<json> load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot open: " + path);
  std::vector<json> out;
  std::vector<int> bad_lines;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      bad_lines.push_back(lineno);
      continue;
    }
    out.push_back(std::move(j));
  }
  if (!bad_lines.empty()) {
    std::string msg = path + ": malformed JSON on line(s)";
    for (int n : bad_lines) msg += " " + std::to_string(n);
    fail(ErrorKind::MalformedInput, msg);
  }
  if (out.empty()) fail(ErrorKind::MalformedInput, path + ": no records");
  return out;
}

std::string require_string(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_string())
    fail(ErrorKind::MalformedInput, where + ": missing or non-string field '" + key + "'");
  return j[key].get<std::string>();
}

}  // namespace

std::vector<RawRecord> load_raw_records(const std::string& path) {
  std::vector<RawRecord> out;
  int lineno = 0;
  for (const json& j : load_jsonl(path)) {
    ++lineno;
    const std::string where = path + " record " + std::to_string(lineno);
    RawRecord r;
    r.id = require_string(j, "id", where);
    r.claim = require_string(j, "claim", where);
    r.article = require_string(j, "article", where);
    r.label = require_string(j, "label", where);
    r.split = require_string(j, "split", where);
    if (!j.contains("reference_docs") || !j["reference_docs"].is_array())
      fail(ErrorKind::MalformedInput, where + ": missing 'reference_docs' array");
    for (const json& d : j["reference_docs"])
      r.reference_docs.emplace_back(require_string(d, "doc_id", where), require_string(d, "text", where));
    out.push_back(std::move(r));
  }
  return out;
}

void save_instances(const std::string& path, const std::vector<Instance>& instances) {
  std::ostringstream ss;
  for (const Instance& i : instances) {
    json j{{"id", i.id},
           {"claim", i.claim},
           {"justification", i.justification},
           {"article", i.article},
           {"label", label_name(i.label)},
           {"reference_doc_ids", i.reference_doc_ids}};
    ss << j.dump() << "\n";
  }
  write_file(path, ss.str());
}

std::vector<Instance> load_instances(const std::string& path) {
  std::vector<Instance> out;
  int lineno = 0;
  for (const json& j : load_jsonl(path)) {
    ++lineno;
    const std::string where = path + " record " + std::to_string(lineno);
    Instance i;
    i.id = require_string(j, "id", where);
    i.claim = require_string(j, "claim", where);
    i.justification = require_string(j, "justification", where);
    i.article = require_string(j, "article", where);
    auto label = label_from_name(require_string(j, "label", where));
    if (!label) fail(ErrorKind::UnknownLabel, where + ": unrecognized label");
    i.label = *label;
    if (j.contains("reference_doc_ids"))
      for (const json& d : j["reference_doc_ids"]) i.reference_doc_ids.push_back(d.get<std::string>());
    out.push_back(std::move(i));
  }
  return out;
}

void save_corpus(const std::string& path, const Corpus& corpus) {
  std::ostringstream ss;
  for (const Chunk& c : corpus.chunks) {
    json j{{"chunk_id", c.chunk_id}, {"source_doc_id", c.source_doc_id}, {"position", c.position}, {"text", c.text}};
    ss << j.dump() << "\n";
  }
  write_file(path, ss.str());
}

Corpus load_corpus(const std::string& path) {
  Corpus corpus;
  int lineno = 0;
  for (const json& j : load_jsonl(path)) {
    ++lineno;
    const std::string where = path + " record " + std::to_string(lineno);
    Chunk c;
    c.chunk_id = require_string(j, "chunk_id", where);
    c.source_doc_id = require_string(j, "source_doc_id", where);
    if (!j.contains("position") || !j["position"].is_number_integer())
      fail(ErrorKind::MalformedInput, where + ": missing integer 'position'");
    c.position = j["position"].get<int>();
    c.text = require_string(j, "text", where);
    corpus.chunks.push_back(std::move(c));
  }
  return corpus;
}

}  // namespace justgen
