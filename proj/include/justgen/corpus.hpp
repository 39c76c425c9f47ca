#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace justgen {

enum class VeracityLabel { False = 0, Mixture = 1, True = 2 };

const char* label_name(VeracityLabel l);
std::optional<VeracityLabel> label_from_name(const std::string& name);

// One line of the raw input file: a claim, its fact-check article, and the
// cited reference documents that seed the retrieval corpus.
struct RawRecord {
  std::string id;
  std::string claim;
  std::string article;
  std::string label;
  std::string split;  // "train" | "test"
  std::vector<std::pair<std::string, std::string>> reference_docs;  // (doc_id, text)
};

// A training/evaluation instance after justification extraction: `article`
// is the remainder with the justification section removed.
struct Instance {
  std::string id;
  std::string claim;
  std::string justification;
  std::string article;
  VeracityLabel label = VeracityLabel::False;
  std::vector<std::string> reference_doc_ids;
};

struct Chunk {
  std::string chunk_id;       // source_doc_id + "#" + position
  std::string source_doc_id;
  int position = 0;           // 0-based chunk index within the source doc
  std::string text;           // words joined by single spaces
};

struct Corpus {
  std::vector<Chunk> chunks;

  // chunk_id -> index; built lazily by callers that need lookups.
  std::map<std::string, size_t> id_index() const;
};

// Fixed-size word windows: ceil(words/chunk_words) chunks, all but the last
// exactly chunk_words words, concatenation reproducing the word sequence.
std::vector<std::string> chunk_text(const std::string& text, int chunk_words);
std::vector<Chunk> chunk_document(const std::string& doc_id, const std::string& text, int chunk_words = 100);

struct JustificationSplit {
  std::string justification;  // from the earliest cue phrase to the end, cue retained
  std::string remainder;      // text before the cue
};

// Case-insensitive search for the earliest of the cue phrases ("Our ruling",
// "Our rating"); nullopt when no cue occurs.
std::optional<JustificationSplit> extract_justification(const std::string& article,
                                                        const std::vector<std::string>& cues = {"Our ruling",
                                                                                                "Our rating"});

struct DatasetOptions {
  int chunk_words = 100;
  // Reference docs of records without a cue phrase still enter the corpus
  // unless this is false.
  bool keep_dropped_record_refs = true;
};

struct Dataset {
  std::vector<Instance> train;
  std::vector<Instance> test;
  Corpus corpus;
  int dropped_no_justification = 0;
};

using LabelMap = std::map<std::string, std::string>;
LabelMap default_label_map();

// Splits records by their split field, extracts justifications (records
// without a cue are dropped), chunks every reference document once (repeated
// doc_ids are deduplicated; same id with different text is malformed input).
Dataset build_dataset(const std::vector<RawRecord>& records, const LabelMap& label_map = default_label_map(),
                      const DatasetOptions& options = {});

// JSON Lines I/O.  Loaders report malformed lines by line number and fail
// on empty files.
std::vector<RawRecord> load_raw_records(const std::string& path);
void save_instances(const std::string& path, const std::vector<Instance>& instances);
std::vector<Instance> load_instances(const std::string& path);
void save_corpus(const std::string& path, const Corpus& corpus);
Corpus load_corpus(const std::string& path);

}  // namespace justgen
