#pragma once

// Family scoring (cohesion), member-level dimension filtering and
// family-level pruning.
//
// Filter order is fixed: (1) drop members seen in fewer than MIN_USERS
// dimensions, (2) re-check SNN_MIN, (3) MAX_FREQ_RATIO, (4) score. Scoring
// has no side effects, so (3) and (4) commute.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "varfam/corpus.hpp"
#include "varfam/error.hpp"
#include "varfam/family_id.hpp"
#include "varfam/induction.hpp"

namespace varfam {

struct FamilyScore {
  std::size_t size = 0;
  double mean_cosine = 0.0;
  double mean_jaccard = 0.0;
  double cohesion = 0.0;

  bool operator==(const FamilyScore&) const = default;
};

/// 2ab / (a + b), or 0 when a + b == 0.
inline double harmonic_mean(double a, double b) {
  const double s = a + b;
  return s == 0.0 ? 0.0 : 2.0 * a * b / s;
}

/// Means over every stored member pair; cohesion is their harmonic mean.
inline FamilyScore score_family(const RawFamily& family) {
  FamilyScore score;
  score.size = family.members.size();
  if (family.pairs.empty()) return score;
  double cos_sum = 0.0;
  double jac_sum = 0.0;
  for (const auto& p : family.pairs) {
    cos_sum += p.cosine;
    jac_sum += p.jaccard;
  }
  const auto n = static_cast<double>(family.pairs.size());
  score.mean_cosine = cos_sum / n;
  score.mean_jaccard = jac_sum / n;
  score.cohesion = harmonic_mean(score.mean_cosine, score.mean_jaccard);
  return score;
}

struct VariantDimensionStats {
  std::string variant;
  std::uint64_t coverage = 0;
  std::optional<std::string> top_dimension;
  std::uint64_t top_count = 0;
  double top_share = 0.0;  // top_count / total_frequency
  std::uint64_t total_frequency = 0;

  bool operator==(const VariantDimensionStats&) const = default;
};

/// Coverage, most frequent dimension (ties: smallest label) and its share of
/// the variant's corpus frequency.
inline VariantDimensionStats dimension_stats(const TokenStats& s) {
  VariantDimensionStats d;
  d.variant = s.token;
  d.total_frequency = s.corpus_frequency;
  for (const auto& [label, count] : s.dimension_counts) {
    if (count == 0) continue;
    ++d.coverage;
    if (count > d.top_count) {
      d.top_count = count;
      d.top_dimension = label;
    }
  }
  d.top_share = d.total_frequency == 0 ? 0.0 : static_cast<double>(d.top_count) / static_cast<double>(d.total_frequency);
  return d;
}

struct MemberInfo {
  std::string token;
  std::uint64_t frequency = 0;
  std::optional<VariantDimensionStats> dimensions;  // absent without a dimension field

  bool operator==(const MemberInfo&) const = default;
};

inline constexpr std::string_view kReasonMinSize = "min_size";
inline constexpr std::string_view kReasonFreqRatio = "freq_ratio";

struct Verdict {
  bool pruned = false;
  std::optional<double> freq_ratio;
};

struct ScoredFamily {
  RawFamily family;                  // members and pairs after member-level removal
  std::vector<MemberInfo> members;   // parallel to family.members
  bool has_dimension_stats = false;
  std::vector<std::string> removed;  // dropped by MIN_USERS
  FamilyScore score;
  std::optional<double> freq_ratio;
  std::vector<std::string> prune_reasons;

  bool pruned() const { return !prune_reasons.empty(); }
};

struct ScoringConfig {
  int snn_min = 2;
  int min_users = 3;
  double max_freq_ratio = 25.0;

  void validate() const {
    if (snn_min < 2) throw ConfigError("SNN_MIN: must be >= 2");
    if (min_users < 0) throw ConfigError("MIN_USERS: must be >= 0");
    if (!(max_freq_ratio >= 1.0)) throw ConfigError("MAX_FREQ_RATIO: must be >= 1");
  }
};

/// max/min member corpus frequency; pruned when strictly above the bound.
inline Verdict prune_by_frequency_ratio(const ScoredFamily& family, double max_freq_ratio) {
  Verdict v;
  if (family.members.empty()) return v;
  auto [lo, hi] = std::minmax_element(family.members.begin(), family.members.end(),
                                      [](const MemberInfo& a, const MemberInfo& b) { return a.frequency < b.frequency; });
  if (lo->frequency == 0) throw DataError("family member '" + lo->token + "' has zero corpus frequency");
  v.freq_ratio = static_cast<double>(hi->frequency) / static_cast<double>(lo->frequency);
  v.pruned = *v.freq_ratio > max_freq_ratio;
  return v;
}

inline Verdict prune_by_min_size(const ScoredFamily& family, int snn_min) {
  return {family.members.size() < static_cast<std::size_t>(snn_min), std::nullopt};
}

/// Attaches member frequencies and dimension statistics, and removes members
/// seen in fewer than `min_users` dimensions. Without a dimension field the
/// family passes through with statistics marked unavailable.
inline ScoredFamily aggregate_dimensions(const RawFamily& raw, const CorpusStats& stats, int min_users) {
  ScoredFamily out;
  out.family = raw;
  out.has_dimension_stats = stats.has_dimension;
  std::vector<std::string> kept;
  for (const auto& token : raw.members) {
    const TokenStats* s = stats.find(token);
    if (s == nullptr) throw DataError("family member '" + token + "' missing from token statistics");
    MemberInfo info{token, s->corpus_frequency, std::nullopt};
    if (stats.has_dimension) {
      info.dimensions = dimension_stats(*s);
      if (info.dimensions->coverage < static_cast<std::uint64_t>(std::max(min_users, 0))) {
        out.removed.push_back(token);
        continue;
      }
    }
    kept.push_back(token);
    out.members.push_back(std::move(info));
  }
  if (!out.removed.empty()) {
    out.family.members = kept;
    std::erase_if(out.family.pairs, [&](const VariantPair& p) {
      return !std::binary_search(kept.begin(), kept.end(), p.w) || !std::binary_search(kept.begin(), kept.end(), p.v);
    });
    out.family.family_id = make_family_id(out.family.members, out.family.seed);
  }
  return out;
}

/// Runs the full filter pipeline on one family.
inline ScoredFamily score_and_prune(const RawFamily& raw, const CorpusStats& stats, const ScoringConfig& cfg) {
  ScoredFamily f = aggregate_dimensions(raw, stats, cfg.min_users);
  if (prune_by_min_size(f, cfg.snn_min).pruned) f.prune_reasons.emplace_back(kReasonMinSize);
  const Verdict ratio = prune_by_frequency_ratio(f, cfg.max_freq_ratio);
  f.freq_ratio = ratio.freq_ratio;
  if (ratio.pruned) f.prune_reasons.emplace_back(kReasonFreqRatio);
  f.score = score_family(f.family);
  return f;
}

/// Scores every family and orders the result by (family_id, seed).
inline std::vector<ScoredFamily> score_families(const std::vector<RawFamily>& raw, const CorpusStats& stats,
                                                const ScoringConfig& cfg) {
  cfg.validate();
  std::vector<ScoredFamily> out;
  out.reserve(raw.size());
  for (const auto& f : raw) out.push_back(score_and_prune(f, stats, cfg));
  std::stable_sort(out.begin(), out.end(), [](const ScoredFamily& a, const ScoredFamily& b) {
    if (a.family.family_id != b.family.family_id) return a.family.family_id < b.family.family_id;
    return a.family.seed < b.family.seed;
  });
  return out;
}

}  // namespace varfam
