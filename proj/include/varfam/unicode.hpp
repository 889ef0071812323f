#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

namespace varfam::unicode {

/// Decodes UTF-8 into code points. Ill-formed sequences become U+FFFD.
inline std::u32string decode(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  const auto* bytes = reinterpret_cast<const uint8_t*>(s.data());
  const auto length = static_cast<int32_t>(s.size());
  int32_t i = 0;
  while (i < length) {
    UChar32 c;
    U8_NEXT(bytes, i, length, c);
    out.push_back(c < 0 ? U'\uFFFD' : static_cast<char32_t>(c));
  }
  return out;
}

inline void append(std::string& out, char32_t c) {
  uint8_t buf[U8_MAX_LENGTH];
  int32_t n = 0;
  UBool error = false;
  U8_APPEND(buf, n, U8_MAX_LENGTH, static_cast<UChar32>(c), error);
  if (error) {
    // Not a scalar value; emit U+FFFD.
    out.append("\xEF\xBF\xBD");
    return;
  }
  out.append(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(n));
}

inline std::string encode(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t c : s) append(out, c);
  return out;
}

/// Number of code points in a UTF-8 string.
inline std::size_t length(std::string_view s) {
  const auto* bytes = reinterpret_cast<const uint8_t*>(s.data());
  const auto n = static_cast<int32_t>(s.size());
  std::size_t count = 0;
  int32_t i = 0;
  while (i < n) {
    U8_FWD_1(bytes, i, n);
    ++count;
  }
  return count;
}

inline bool is_space(char32_t c) { return u_isUWhiteSpace(static_cast<UChar32>(c)); }

inline bool is_letter_or_digit(char32_t c) { return u_isalnum(static_cast<UChar32>(c)); }

/// Letters, digits and combining marks: the characters a token may begin or
/// end with.
inline bool is_word_char(char32_t c) {
  const auto uc = static_cast<UChar32>(c);
  return u_isalnum(uc) || (U_GET_GC_MASK(uc) & U_GC_M_MASK) != 0;
}

/// NFC-normalizes and optionally lowercases (root locale) a UTF-8 string.
inline std::string normalize(std::string_view s, bool lowercase) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  icu::UnicodeString text = icu::UnicodeString::fromUTF8(
      icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  if (U_SUCCESS(status) && !nfc->isNormalized(text, status)) {
    status = U_ZERO_ERROR;
    icu::UnicodeString normalized = nfc->normalize(text, status);
    if (U_SUCCESS(status)) text = std::move(normalized);
  }
  if (lowercase) text.toLower(icu::Locale::getRoot());
  std::string out;
  text.toUTF8String(out);
  return out;
}

}  // namespace varfam::unicode
