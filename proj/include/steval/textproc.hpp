#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace steval::text {

/// Granularity of resegmentation candidate boundaries. Word splits on
/// Unicode whitespace runs; Character yields one token per non-whitespace
/// Unicode scalar value.
enum class TokenizationLevel { Word, Character };

std::string_view to_string(TokenizationLevel level);
TokenizationLevel parse_level(std::string_view name);  // "word" | "char"

/// Tokens are never empty and never contain whitespace.
struct TokenStream {
  std::vector<std::string> tokens;
  TokenizationLevel level = TokenizationLevel::Word;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
  bool operator==(const TokenStream&) const = default;
};

struct ConcatResult {
  TokenStream stream;
  /// offsets[i] is where input stream i starts; offsets.back() == stream.size().
  std::vector<std::size_t> offsets;
};

/// Decodes UTF-8 into scalar values. Throws ValidationError on malformed input.
std::u32string decode_utf8(std::string_view text);
std::string encode_utf8(std::u32string_view text);
bool is_whitespace(char32_t c);

/// NFC normalization, applied to all text on ingestion.
std::string normalize_nfc(std::string_view text);

TokenStream tokenize(std::string_view text, TokenizationLevel level);
std::string join_tokens(const TokenStream& tokens);

/// Throws ValidationError if the streams do not share one level.
ConcatResult concat_streams(std::span<const TokenStream> streams);

}  // namespace steval::text
