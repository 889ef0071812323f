#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>

#include "varfam/error.hpp"

namespace varfam {

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw DataError("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

/// First 16 hex digits of SHA-256 over the sorted members joined by '\n'.
/// Open-mode stars prefix the seed ("seed:<token>\n") so that two stars
/// with equal member sets keep distinct ids.
inline std::string make_family_id(std::span<const std::string> sorted_members,
                                  const std::optional<std::string>& seed = std::nullopt) {
  std::string payload;
  if (seed) payload += "seed:" + *seed + "\n";
  for (std::size_t i = 0; i < sorted_members.size(); ++i) {
    if (i) payload.push_back('\n');
    payload += sorted_members[i];
  }
  return sha256_hex(payload).substr(0, 16);
}

}  // namespace varfam
