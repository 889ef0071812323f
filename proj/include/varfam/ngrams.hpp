#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "varfam/unicode.hpp"

namespace varfam {

inline constexpr char32_t kBeginOfWord = U'<';
inline constexpr char32_t kEndOfWord = U'>';

/// Character n-grams of `<token>` for lengths min_n..max_n (in code points),
/// ordered by length, then position. Duplicates are kept.
inline std::vector<std::string> extract_ngrams(std::string_view token, int min_n, int max_n) {
  std::vector<std::string> out;
  if (token.empty() || min_n < 1 || max_n < min_n) return out;
  std::u32string wrapped;
  wrapped.push_back(kBeginOfWord);
  wrapped += unicode::decode(token);
  wrapped.push_back(kEndOfWord);

  const auto len = static_cast<int>(wrapped.size());
  const std::u32string_view view(wrapped);
  for (int n = min_n; n <= max_n && n <= len; ++n) {
    for (int start = 0; start + n <= len; ++start) {
      out.push_back(unicode::encode(view.substr(static_cast<std::size_t>(start), static_cast<std::size_t>(n))));
    }
  }
  return out;
}

/// The n-gram set G(token).
inline std::set<std::string> ngram_set(std::string_view token, int min_n, int max_n) {
  auto grams = extract_ngrams(token, min_n, max_n);
  return {std::make_move_iterator(grams.begin()), std::make_move_iterator(grams.end())};
}

/// 32-bit FNV-1a over the UTF-8 bytes.
constexpr std::uint32_t fnv1a32(std::string_view bytes) {
  std::uint32_t h = 2166136261u;
  for (char c : bytes) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 16777619u;
  }
  return h;
}

inline std::uint32_t hash_ngram(std::string_view ngram, std::uint32_t bucket_count) {
  return bucket_count <= 1 ? 0u : fnv1a32(ngram) % bucket_count;
}

/// Bucket index of every n-gram of `token`, in extraction order.
inline std::vector<std::uint32_t> ngram_buckets(std::string_view token, int min_n, int max_n,
                                                std::uint32_t bucket_count) {
  std::vector<std::uint32_t> out;
  for (const auto& g : extract_ngrams(token, min_n, max_n)) out.push_back(hash_ngram(g, bucket_count));
  return out;
}

}  // namespace varfam
