#include "steval/textproc.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "steval/error.hpp"

namespace steval::text {

namespace {

[[noreturn]] void fail(std::size_t at) {
  throw ValidationError("malformed UTF-8 at byte " + std::to_string(at));
}

}  // namespace

std::string_view to_string(TokenizationLevel level) {
  return level == TokenizationLevel::Word ? "word" : "char";
}

TokenizationLevel parse_level(std::string_view name) {
  if (name == "word") return TokenizationLevel::Word;
  if (name == "char" || name == "character") return TokenizationLevel::Character;
  throw ValidationError("unknown tokenization level '" + std::string(name) + "' (expected word|char)");
}

std::u32string decode_utf8(std::string_view text) {
  std::u32string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    auto b0 = static_cast<unsigned char>(text[i]);
    char32_t cp;
    std::size_t len;
    if (b0 < 0x80) {
      cp = b0;
      len = 1;
    } else if ((b0 & 0xE0) == 0xC0) {
      cp = b0 & 0x1F;
      len = 2;
    } else if ((b0 & 0xF0) == 0xE0) {
      cp = b0 & 0x0F;
      len = 3;
    } else if ((b0 & 0xF8) == 0xF0) {
      cp = b0 & 0x07;
      len = 4;
    } else {
      fail(i);
    }
    if (i + len > text.size()) fail(i);
    for (std::size_t k = 1; k < len; ++k) {
      auto b = static_cast<unsigned char>(text[i + k]);
      if ((b & 0xC0) != 0x80) fail(i + k);
      cp = (cp << 6) | (b & 0x3F);
    }
    // overlong forms, surrogates, out of range
    static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) fail(i);
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string encode_utf8(std::u32string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char32_t cp : text) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }
  return out;
}

bool is_whitespace(char32_t c) { return u_isUWhiteSpace(static_cast<UChar32>(c)) != 0; }

std::string normalize_nfc(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");
  // validates UTF-8 before ICU silently substitutes U+FFFD
  decode_utf8(text);
  icu::UnicodeString src = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  if (nfc->isNormalized(src, status) && U_SUCCESS(status)) return std::string(text);
  status = U_ZERO_ERROR;
  icu::UnicodeString normalized = nfc->normalize(src, status);
  if (U_FAILURE(status)) throw ValidationError("NFC normalization failed");
  std::string out;
  normalized.toUTF8String(out);
  return out;
}

TokenStream tokenize(std::string_view text, TokenizationLevel level) {
  TokenStream stream{{}, level};
  std::u32string decoded = decode_utf8(text);
  if (level == TokenizationLevel::Character) {
    for (char32_t c : decoded) {
      if (!is_whitespace(c)) stream.tokens.push_back(encode_utf8(std::u32string_view(&c, 1)));
    }
    return stream;
  }
  std::u32string current;
  for (char32_t c : decoded) {
    if (is_whitespace(c)) {
      if (!current.empty()) {
        stream.tokens.push_back(encode_utf8(current));
        current.clear();
      }
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) stream.tokens.push_back(encode_utf8(current));
  return stream;
}

std::string join_tokens(const TokenStream& tokens) {
  std::string out;
  const bool spaced = tokens.level == TokenizationLevel::Word;
  for (std::size_t i = 0; i < tokens.tokens.size(); ++i) {
    if (spaced && i) out.push_back(' ');
    out += tokens.tokens[i];
  }
  return out;
}

ConcatResult concat_streams(std::span<const TokenStream> streams) {
  ConcatResult result;
  if (!streams.empty()) result.stream.level = streams.front().level;
  std::size_t total = 0;
  for (const auto& s : streams) {
    if (s.level != result.stream.level) throw ValidationError("concat_streams: mixed tokenization levels");
    total += s.size();
  }
  result.stream.tokens.reserve(total);
  result.offsets.reserve(streams.size() + 1);
  for (const auto& s : streams) {
    result.offsets.push_back(result.stream.tokens.size());
    result.stream.tokens.insert(result.stream.tokens.end(), s.tokens.begin(), s.tokens.end());
  }
  result.offsets.push_back(result.stream.tokens.size());
  return result;
}

}  // namespace steval::text
