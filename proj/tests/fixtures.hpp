#pragma once

// Three hand-built families behind the golden output files in tests/data.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "varfam/scoring.hpp"

namespace fixture {

inline constexpr const char* kEcho = "0123456789abcdef";

struct Member {
  std::string token;
  std::uint64_t frequency;
  std::map<std::string, std::uint64_t> dims;
};

inline varfam::CorpusStats stats() {
  const std::vector<Member> members = {
      {"mat", 900, {{"u1", 300}, {"u2", 400}, {"u3", 200}}},
      {"matt", 150, {{"u1", 90}, {"u4", 30}, {"u5", 30}}},
      {"maat", 60, {{"u2", 20}, {"u3", 20}, {"u6", 20}}},
      {"muer", 6577, {{"u1", 3000}, {"u2", 2000}, {"u7", 1577}}},
      {"muar", 604, {{"u3", 500}, {"u8", 100}, {"u9", 4}}},
      {"moar", 338, {{"u4", 300}, {"u5", 30}, {"u6", 8}}},
      {"zäit", 400, {{"u1", 100}, {"u2", 100}, {"u3", 200}}},
      {"zeit", 120, {{"u4", 100}, {"u5", 10}, {"u6", 10}}},
      {"zait", 45, {{"u7", 40}, {"u8", 4}, {"u9", 1}}},
      {"fillen", 2600, {{"u1", 1300}, {"u2", 1300}, {"u3", 0}, {"u4", 0}, {"u5", 0}, {"u6", 1}}},
      {"fille", 100, {{"u1", 50}, {"u2", 25}, {"u3", 25}}},
  };
  varfam::CorpusStats s;
  s.has_dimension = true;
  for (const auto& m : members) s.tokens[m.token] = varfam::TokenStats{m.token, m.frequency, m.frequency, m.dims};
  return s;
}

inline varfam::RawFamily raw(std::vector<std::string> members, std::vector<varfam::VariantPair> pairs,
                             varfam::Mode mode = varfam::Mode::kStrict, std::optional<std::string> seed = {}) {
  varfam::RawFamily f;
  f.members = std::move(members);
  f.pairs = std::move(pairs);
  f.mode = mode;
  f.seed = std::move(seed);
  f.family_id = varfam::make_family_id(f.members, f.seed);
  return f;
}

/// mat/matt/maat and muer/muar/moar in strict mode, an open-mode star around
/// zäit, and fillen/fille which the frequency ratio prunes (26 > 25).
inline std::vector<varfam::RawFamily> raw_families() {
  return {
      raw({"maat", "mat", "matt"},
          {{"maat", "mat", 0.81, 0.3, true}, {"maat", "matt", 0.64, 0.1875, false}, {"mat", "matt", 0.77, 3.0 / 13.0, true}}),
      raw({"moar", "muar", "muer"},
          {{"moar", "muar", 0.88, 0.25, true}, {"moar", "muer", 0.7, 0.05, false}, {"muar", "muer", 0.9, 1.0 / 19.0, true}}),
      raw({"zait", "zeit", "zäit"},
          {{"zait", "zeit", 0.75, 0.125, false}, {"zait", "zäit", 0.8, 0.125, true}, {"zeit", "zäit", 0.76, 0.125, true}},
          varfam::Mode::kOpen, "zäit"),
      raw({"fille", "fillen"}, {{"fille", "fillen", 0.92, 0.5, true}}),
  };
}

inline std::vector<varfam::ScoredFamily> scored() {
  return varfam::score_families(raw_families(), stats(), varfam::ScoringConfig{});
}

}  // namespace fixture
