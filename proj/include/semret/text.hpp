#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace semret {

/// 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// ASCII-lowercases and splits on runs of non-alphanumeric characters.
std::vector<std::string> split_words(std::string_view text);

std::string ascii_lower(std::string_view text);

/// Hashed token buckets for one piece of text.
///
/// Every bucket lies in [0, vocab). Bucket 0 is reserved for the empty input;
/// real tokens land in [1, vocab).
struct TokenSequence {
  std::vector<std::uint32_t> buckets;
  std::size_t original_length = 0;

  bool operator==(const TokenSequence&) const = default;
};

/// Maps a token to its bucket: 1 + fnv1a64(token) mod (vocab - 1).
std::uint32_t token_bucket(std::string_view token, std::uint32_t vocab);

/// Word-level hashing tokenizer used by the Siamese encoder.
TokenSequence tokenize(std::string_view text, std::uint32_t vocab);

/// Letter trigrams of every word with '#' boundary marks ("cat" -> #ca cat at#).
std::vector<std::string> letter_trigrams(std::string_view text);

/// Letter-trigram hashing tokenizer used by the DSSM baseline.
TokenSequence tokenize_trigrams(std::string_view text, std::uint32_t vocab);

}  // namespace semret
