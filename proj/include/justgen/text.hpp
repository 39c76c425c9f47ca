#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace justgen {

// Whitespace word split (spaces, tabs, newlines); no empty tokens.
std::vector<std::string> split_words(const std::string& text);

std::string join_words(const std::vector<std::string>& words);

std::string to_lower(const std::string& s);

// Lowercased whitespace tokens; the shared normalization for BM25, the
// lexical metrics, and the model tokenizer.
std::vector<std::string> normalized_words(const std::string& text);

// Sentence boundaries at '.', '!' or '?' followed by whitespace or end of
// text, with a small abbreviation list preventing splits after e.g. "Dr.".
// Returned sentences are trimmed and never empty.
std::vector<std::string> sentence_split(const std::string& text);

// FNV-1a over a byte string; used for artifact/content hashes in manifests
// and checkpoint vocabulary hashes.
uint64_t fnv1a64(const std::string& bytes);
uint64_t fnv1a64_file(const std::string& path);
std::string hex64(uint64_t v);

// Case-insensitive search for `needle` in `haystack`; npos when absent.
size_t ifind(const std::string& haystack, const std::string& needle);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace justgen
