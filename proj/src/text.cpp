#include "semret/text.hpp"

#include <stdexcept>

namespace semret {

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

bool is_alnum(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

TokenSequence hash_tokens(const std::vector<std::string>& tokens, std::size_t original_length,
                          std::uint32_t vocab) {
  if (vocab < 2) throw std::invalid_argument("vocab must be at least 2");
  TokenSequence seq;
  seq.original_length = original_length;
  if (tokens.empty()) {
    seq.buckets.push_back(0);
    return seq;
  }
  seq.buckets.reserve(tokens.size());
  for (const auto& t : tokens) seq.buckets.push_back(token_bucket(t, vocab));
  return seq;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = kFnvOffset;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

std::string ascii_lower(std::string_view text) {
  std::string out(text);
  for (auto& c : out) c = lower(c);
  return out;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char c : text) {
    if (is_alnum(c)) {
      current.push_back(lower(c));
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

std::uint32_t token_bucket(std::string_view token, std::uint32_t vocab) {
  return 1 + static_cast<std::uint32_t>(fnv1a64(token) % (vocab - 1));
}

TokenSequence tokenize(std::string_view text, std::uint32_t vocab) {
  auto words = split_words(text);
  const auto n = words.size();
  return hash_tokens(words, n, vocab);
}

std::vector<std::string> letter_trigrams(std::string_view text) {
  std::vector<std::string> grams;
  for (const auto& w : split_words(text)) {
    const std::string marked = "#" + w + "#";
    for (std::size_t i = 0; i + 3 <= marked.size(); ++i) grams.push_back(marked.substr(i, 3));
  }
  return grams;
}

TokenSequence tokenize_trigrams(std::string_view text, std::uint32_t vocab) {
  auto grams = letter_trigrams(text);
  const auto n = grams.size();
  return hash_tokens(grams, n, vocab);
}

}  // namespace semret
