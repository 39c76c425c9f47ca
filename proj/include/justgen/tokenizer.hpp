#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace justgen {

using TokenSeq = std::vector<int>;

// Word-level tokenizer: lowercased whitespace words mapped to dense ids.
// Ids 0..4 are the specials; the three veracity verbalizations are always
// present so label scoring never needs unk.
class Tokenizer {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kSep = 4;

  // Builds a vocabulary from the given texts: specials, then label words,
  // then corpus words by descending frequency (ties lexicographic), capped
  // at max_vocab entries total.
  static Tokenizer build(const std::vector<std::string>& texts, int max_vocab = 32768);

  static Tokenizer load(const std::string& path);
  void save(const std::string& path) const;

  int vocab_size() const { return static_cast<int>(id_to_word_.size()); }

  // allow_unk=false raises UnknownToken on out-of-vocabulary words.
  TokenSeq encode(const std::string& text, bool allow_unk = true) const;

  // With append_eos, the sequence ends with eos; text is lowercased words.
  TokenSeq encode_target(const std::string& text, int max_len, bool allow_unk = true) const;

  // Drops specials; joins words with single spaces.
  std::string decode(const TokenSeq& ids) const;

  const std::string& word(int id) const { return id_to_word_[static_cast<size_t>(id)]; }

  // FNV-1a over the serialized vocabulary; stored in checkpoints so a model
  // is never run against the wrong vocabulary.
  uint64_t vocab_hash() const;

 private:
  std::vector<std::string> id_to_word_;
  std::map<std::string, int> word_to_id_;

  void finish_init();
};

}  // namespace justgen
