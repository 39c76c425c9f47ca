#include "justgen/tokenizer.hpp"

#include <algorithm>

#include "justgen/errors.hpp"
#include "justgen/text.hpp"

namespace justgen {

namespace {
const char* kSpecials[] = {"<pad>", "<bos>", "<eos>", "<unk>", "<sep>"};
const char* kLabelWords[] = {"false", "mixture", "true"};
}  // namespace

void Tokenizer::finish_init() {
  word_to_id_.clear();
  for (size_t i = 0; i < id_to_word_.size(); ++i) word_to_id_.emplace(id_to_word_[i], static_cast<int>(i));
}

Tokenizer Tokenizer::build(const std::vector<std::string>& texts, int max_vocab) {
  if (max_vocab < 16) fail(ErrorKind::InvalidConfig, "max_vocab too small");
  std::map<std::string, long> freq;
  for (const std::string& t : texts)
    for (const std::string& w : normalized_words(t)) ++freq[w];

  Tokenizer tok;
  for (const char* s : kSpecials) tok.id_to_word_.push_back(s);
  for (const char* s : kLabelWords) {
    tok.id_to_word_.push_back(s);
    freq.erase(s);
  }
  for (const char* s : kSpecials) freq.erase(s);

  std::vector<std::pair<std::string, long>> by_freq(freq.begin(), freq.end());
  std::sort(by_freq.begin(), by_freq.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (const auto& [w, _] : by_freq) {
    if (static_cast<int>(tok.id_to_word_.size()) >= max_vocab) break;
    tok.id_to_word_.push_back(w);
  }
  tok.finish_init();
  return tok;
}

Tokenizer Tokenizer::load(const std::string& path) {
  const std::string content = read_file(path);
  Tokenizer tok;
  size_t start = 0;
  while (start < content.size()) {
    size_t end = content.find('\n', start);
    if (end == std::string::npos) end = content.size();
    if (end > start) tok.id_to_word_.push_back(content.substr(start, end - start));
    start = end + 1;
  }
  if (tok.id_to_word_.size() < 8) fail(ErrorKind::MalformedInput, path + ": vocabulary too short");
  for (size_t i = 0; i < 5; ++i)
    if (tok.id_to_word_[i] != kSpecials[i]) fail(ErrorKind::MalformedInput, path + ": special tokens corrupted");
  tok.finish_init();
  return tok;
}

void Tokenizer::save(const std::string& path) const {
  std::string out;
  for (const std::string& w : id_to_word_) {
    out += w;
    out += '\n';
  }
  write_file(path, out);
}

TokenSeq Tokenizer::encode(const std::string& text, bool allow_unk) const {
  TokenSeq ids;
  for (const std::string& w : normalized_words(text)) {
    auto it = word_to_id_.find(w);
    if (it == word_to_id_.end()) {
      if (!allow_unk) fail(ErrorKind::UnknownToken, "out-of-vocabulary word '" + w + "'");
      ids.push_back(kUnk);
    } else {
      ids.push_back(it->second);
    }
  }
  return ids;
}

TokenSeq Tokenizer::encode_target(const std::string& text, int max_len, bool allow_unk) const {
  TokenSeq ids = encode(text, allow_unk);
  if (max_len > 0 && static_cast<int>(ids.size()) > max_len - 1) ids.resize(static_cast<size_t>(max_len - 1));
  ids.push_back(kEos);
  return ids;
}

std::string Tokenizer::decode(const TokenSeq& ids) const {
  std::vector<std::string> words;
  for (int id : ids) {
    if (id < 0 || id >= vocab_size()) fail(ErrorKind::UnknownToken, "token id out of range");
    if (id <= kSep) continue;
    words.push_back(id_to_word_[static_cast<size_t>(id)]);
  }
  return join_words(words);
}

uint64_t Tokenizer::vocab_hash() const {
  std::string all;
  for (const std::string& w : id_to_word_) {
    all += w;
    all += '\n';
  }
  return fnv1a64(all);
}

}  // namespace justgen
