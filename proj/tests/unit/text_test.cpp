#include <gtest/gtest.h>

#include <fstream>
#include <json.hpp>

#include "semret/text.hpp"

using namespace semret;

namespace {

nlohmann::json golden() {
  std::ifstream in(SEMRET_TEST_DATA "/tokenizer_golden.json");
  EXPECT_TRUE(in.good());
  return nlohmann::json::parse(in);
}

}  // namespace

TEST(Tokenizer, MatchesReferenceHashes) {
  for (const auto& h : golden()["hashes"])
    EXPECT_EQ(fnv1a64(h["text"].get<std::string>()), std::stoull(h["fnv1a64"].get<std::string>()))
        << h["text"];
}

TEST(Tokenizer, MatchesGoldenBuckets) {
  const auto g = golden();
  ASSERT_GT(g["cases"].size(), 100u);
  for (const auto& c : g["cases"]) {
    const auto text = c["text"].get<std::string>();
    const auto vocab = c["vocab"].get<std::uint32_t>();
    const auto seq = c["kind"] == "word" ? tokenize(text, vocab) : tokenize_trigrams(text, vocab);
    EXPECT_EQ(seq.buckets, c["buckets"].get<std::vector<std::uint32_t>>()) << c["kind"] << " '" << text << "' " << vocab;
  }
}

TEST(Tokenizer, EmptyInputUsesReservedBucket) {
  for (const char* t : {"", "   ", "?!,"}) {
    const auto seq = tokenize(t, 16384);
    EXPECT_EQ(seq.buckets, std::vector<std::uint32_t>{0});
    EXPECT_EQ(seq.original_length, 0u);
  }
}

TEST(Tokenizer, RealTokensNeverUseBucketZero) {
  for (std::uint32_t vocab : {2u, 5u, 1000u}) {
    for (int i = 0; i < 500; ++i) {
      const auto b = token_bucket("tok" + std::to_string(i), vocab);
      EXPECT_GE(b, 1u);
      EXPECT_LT(b, vocab);
    }
  }
}

TEST(Tokenizer, CaseAndPunctuationInsensitive) {
  EXPECT_EQ(tokenize("Cat-Litter, 40LB", 97), tokenize("cat litter 40lb", 97));
}

TEST(Tokenizer, RejectsTinyVocab) { EXPECT_THROW(tokenize("a", 1), std::invalid_argument); }

TEST(Tokenizer, LetterTrigramsMarkBoundaries) {
  EXPECT_EQ(letter_trigrams("cat"), (std::vector<std::string>{"#ca", "cat", "at#"}));
  EXPECT_EQ(letter_trigrams("a"), (std::vector<std::string>{"#a#"}));
}
