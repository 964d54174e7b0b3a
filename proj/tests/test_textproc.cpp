#include <gtest/gtest.h>

#include <random>

#include "steval/error.hpp"
#include "steval/textproc.hpp"

using namespace steval;
using text::TokenizationLevel;

TEST(Utf8, RoundTrip) {
  const std::string s = "a\xC3\xA9\xE4\xB8\xAD\xF0\x9F\x98\x80";  // a é 中 😀
  auto cps = text::decode_utf8(s);
  ASSERT_EQ(cps.size(), 4u);
  EXPECT_EQ(cps[2], U'中');
  EXPECT_EQ(cps[3], U'\U0001F600');
  EXPECT_EQ(text::encode_utf8(cps), s);
}

TEST(Utf8, RejectsMalformed) {
  EXPECT_THROW(text::decode_utf8("\xC3"), ValidationError);          // truncated
  EXPECT_THROW(text::decode_utf8("\xC0\xAF"), ValidationError);      // overlong
  EXPECT_THROW(text::decode_utf8("\xED\xA0\x80"), ValidationError);  // surrogate
  EXPECT_THROW(text::decode_utf8("\xFF"), ValidationError);
  EXPECT_THROW(text::normalize_nfc("ok\x80"), ValidationError);
}

TEST(Nfc, ComposesCombiningMarks) {
  EXPECT_EQ(text::normalize_nfc("e\xCC\x81"), "\xC3\xA9");
  EXPECT_EQ(text::normalize_nfc("plain"), "plain");
}

TEST(Tokenize, WordSplitsOnWhitespaceRuns) {
  auto t = text::tokenize("  hello \t world\xE3\x80\x80" "again ", TokenizationLevel::Word);  // ideographic space
  EXPECT_EQ(t.tokens, (std::vector<std::string>{"hello", "world", "again"}));
  EXPECT_EQ(text::join_tokens(t), "hello world again");
  EXPECT_TRUE(text::tokenize(" \t ", TokenizationLevel::Word).empty());
}

TEST(Tokenize, CharacterDropsWhitespace) {
  auto t = text::tokenize("\xE4\xBD\xA0\xE5\xA5\xBD a", TokenizationLevel::Character);
  EXPECT_EQ(t.tokens, (std::vector<std::string>{"\xE4\xBD\xA0", "\xE5\xA5\xBD", "a"}));
  EXPECT_EQ(text::join_tokens(t), "\xE4\xBD\xA0\xE5\xA5\xBD" "a");
}

TEST(Tokenize, TokensNeverEmptyOrBlank) {
  std::mt19937_64 rng(3);
  const char* pieces[] = {" ", "a", "bc", "\t", "\xC3\xA9", "\xE3\x80\x80", "\n", "x y"};
  for (int iter = 0; iter < 200; ++iter) {
    std::string s;
    for (int i = 0; i < 12; ++i) s += pieces[rng() % 8];
    for (auto level : {TokenizationLevel::Word, TokenizationLevel::Character}) {
      for (const auto& tok : text::tokenize(s, level).tokens) {
        ASSERT_FALSE(tok.empty());
        for (char32_t c : text::decode_utf8(tok)) ASSERT_FALSE(text::is_whitespace(c));
      }
    }
  }
}

TEST(Tokenize, LevelNames) {
  EXPECT_EQ(text::parse_level("word"), TokenizationLevel::Word);
  EXPECT_EQ(text::parse_level("char"), TokenizationLevel::Character);
  EXPECT_EQ(text::to_string(TokenizationLevel::Character), "char");
  EXPECT_THROW(text::parse_level("byte"), ValidationError);
}

TEST(Concat, OffsetsMarkStreamStarts) {
  std::vector<text::TokenStream> parts = {text::tokenize("a b", TokenizationLevel::Word),
                                          text::tokenize("", TokenizationLevel::Word),
                                          text::tokenize("c", TokenizationLevel::Word)};
  auto r = text::concat_streams(parts);
  EXPECT_EQ(r.stream.tokens, (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(r.offsets, (std::vector<std::size_t>{0, 2, 2, 3}));
}

TEST(Concat, MixedLevelsRejected) {
  std::vector<text::TokenStream> parts = {text::tokenize("ab", TokenizationLevel::Word),
                                          text::tokenize("ab", TokenizationLevel::Character)};
  EXPECT_THROW(text::concat_streams(parts), ValidationError);
}
