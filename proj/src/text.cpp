#include "justgen/text.hpp"

#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

#include "justgen/errors.hpp"

namespace justgen {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

// Token endings that suppress a sentence break at a trailing '.'.
const std::array<const char*, 14> kAbbrev = {
    "dr.", "mr.", "mrs.", "ms.", "prof.", "st.", "jr.", "sr.", "vs.", "etc.", "e.g.", "i.e.", "u.s.", "no.",
};

}  // namespace

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    while (i < n && is_space(text[i])) ++i;
    size_t j = i;
    while (j < n && !is_space(text[j])) ++j;
    if (j > i) out.push_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

std::string to_lower(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> normalized_words(const std::string& text) {
  std::vector<std::string> words = split_words(text);
  for (std::string& w : words) w = to_lower(w);
  return words;
}

std::vector<std::string> sentence_split(const std::string& text) {
  std::vector<std::string> out;
  const size_t n = text.size();
  size_t start = 0;
  auto flush = [&](size_t end) {
    size_t a = start;
    while (a < end && is_space(text[a])) ++a;
    size_t b = end;
    while (b > a && is_space(text[b - 1])) --b;
    if (b > a) out.push_back(text.substr(a, b - a));
    start = end;
  };
  for (size_t i = 0; i < n; ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    if (i + 1 < n && !is_space(text[i + 1])) continue;
    if (c == '.') {
      // Trailing token including the dot, lowercased, e.g. "dr." or "e.g.".
      size_t t = i + 1;
      while (t > start && !is_space(text[t - 1])) --t;
      const std::string token = to_lower(text.substr(t, i + 1 - t));
      bool abbrev = false;
      for (const char* a : kAbbrev)
        if (token == a) abbrev = true;
      if (abbrev) continue;
    }
    flush(i + 1);
  }
  flush(n);
  return out;
}

uint64_t fnv1a64(const std::string& bytes) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

uint64_t fnv1a64_file(const std::string& path) { return fnv1a64(read_file(path)); }

std::string hex64(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

size_t ifind(const std::string& haystack, const std::string& needle) {
  if (needle.empty() || needle.size() > haystack.size()) return std::string::npos;
  const std::string h = to_lower(haystack);
  const std::string nd = to_lower(needle);
  return h.find(nd);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot open for writing: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) fail(ErrorKind::IoError, "short write: " + path);
}

}  // namespace justgen
