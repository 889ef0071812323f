#pragma once

// Families JSONL and summary CSV.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "varfam/error.hpp"
#include "varfam/fs.hpp"
#include "varfam/induction.hpp"
#include "varfam/scoring.hpp"

namespace varfam {

/// Fixed 6-decimal rendering; negative zero prints as 0.000000.
inline std::string format_real(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

inline std::string json_string(std::string_view s) { return nlohmann::json(std::string(s)).dump(); }

namespace detail {

inline void sort_for_output(std::vector<const ScoredFamily*>& families) {
  std::stable_sort(families.begin(), families.end(), [](const ScoredFamily* a, const ScoredFamily* b) {
    if (a->family.family_id != b->family.family_id) return a->family.family_id < b->family.family_id;
    return a->family.seed < b->family.seed;
  });
}

}  // namespace detail

/// One line for a family: keys family_id, mode, seed, members, pairs, score,
/// config_echo in that order.
inline std::string family_to_jsonl(const ScoredFamily& f, std::string_view config_echo) {
  std::string s;
  s += "{\"family_id\":" + json_string(f.family.family_id);
  s += ",\"mode\":" + json_string(to_string(f.family.mode));
  s += ",\"seed\":" + (f.family.seed ? json_string(*f.family.seed) : std::string("null"));
  s += ",\"members\":[";
  for (std::size_t i = 0; i < f.members.size(); ++i) {
    const auto& m = f.members[i];
    if (i) s += ',';
    s += "{\"token\":" + json_string(m.token);
    s += ",\"frequency\":" + std::to_string(m.frequency);
    if (m.dimensions) {
      s += ",\"coverage\":" + std::to_string(m.dimensions->coverage);
      s += ",\"top_dimension\":" +
           (m.dimensions->top_dimension ? json_string(*m.dimensions->top_dimension) : std::string("null"));
      s += ",\"top_share\":" + format_real(m.dimensions->top_share);
    } else {
      s += ",\"coverage\":null,\"top_dimension\":null,\"top_share\":null";
    }
    s += '}';
  }
  s += "],\"pairs\":[";
  for (std::size_t i = 0; i < f.family.pairs.size(); ++i) {
    const auto& p = f.family.pairs[i];
    if (i) s += ',';
    s += "{\"w\":" + json_string(p.w) + ",\"v\":" + json_string(p.v);
    s += ",\"cosine\":" + format_real(p.cosine) + ",\"jaccard\":" + format_real(p.jaccard);
    s += std::string(",\"is_edge\":") + (p.is_edge ? "true" : "false") + '}';
  }
  s += "],\"score\":{\"size\":" + std::to_string(f.score.size);
  s += ",\"mean_cosine\":" + format_real(f.score.mean_cosine);
  s += ",\"mean_jaccard\":" + format_real(f.score.mean_jaccard);
  s += ",\"cohesion\":" + format_real(f.score.cohesion) + '}';
  s += ",\"config_echo\":" + json_string(config_echo) + '}';
  return s;
}

/// Writes surviving families, sorted by family_id. Returns the line count.
inline std::size_t write_families_jsonl(std::ostream& out, const std::vector<ScoredFamily>& families,
                                        std::string_view config_echo) {
  std::vector<const ScoredFamily*> kept;
  for (const auto& f : families) {
    if (!f.pruned()) kept.push_back(&f);
  }
  detail::sort_for_output(kept);
  for (const auto* f : kept) out << family_to_jsonl(*f, config_echo) << '\n';
  return kept.size();
}

inline std::size_t write_families_jsonl(const std::filesystem::path& path, const std::vector<ScoredFamily>& families,
                                        std::string_view config_echo) {
  std::size_t n = 0;
  write_atomically(path, [&](std::ostream& out) { n = write_families_jsonl(out, families, config_echo); });
  return n;
}

struct LoadedFamily {
  ScoredFamily family;
  std::string config_echo;
};

inline LoadedFamily family_from_json(const nlohmann::json& j) {
  LoadedFamily out;
  auto& f = out.family;
  f.family.family_id = j.at("family_id").get<std::string>();
  f.family.mode = parse_mode(j.at("mode").get<std::string>());
  if (j.contains("seed") && !j.at("seed").is_null()) f.family.seed = j.at("seed").get<std::string>();
  bool any_dims = false;
  for (const auto& m : j.at("members")) {
    MemberInfo info;
    info.token = m.at("token").get<std::string>();
    info.frequency = m.at("frequency").get<std::uint64_t>();
    if (!m.at("coverage").is_null()) {
      any_dims = true;
      VariantDimensionStats d;
      d.variant = info.token;
      d.coverage = m.at("coverage").get<std::uint64_t>();
      if (!m.at("top_dimension").is_null()) d.top_dimension = m.at("top_dimension").get<std::string>();
      d.top_share = m.at("top_share").get<double>();
      d.total_frequency = info.frequency;
      d.top_count = static_cast<std::uint64_t>(std::llround(d.top_share * static_cast<double>(info.frequency)));
      info.dimensions = d;
    }
    f.family.members.push_back(info.token);
    f.members.push_back(std::move(info));
  }
  f.has_dimension_stats = any_dims;
  for (const auto& p : j.at("pairs")) {
    f.family.pairs.push_back({p.at("w").get<std::string>(), p.at("v").get<std::string>(), p.at("cosine").get<double>(),
                              p.at("jaccard").get<double>(), p.at("is_edge").get<bool>()});
  }
  const auto& s = j.at("score");
  f.score = {s.at("size").get<std::size_t>(), s.at("mean_cosine").get<double>(), s.at("mean_jaccard").get<double>(),
             s.at("cohesion").get<double>()};
  out.config_echo = j.at("config_echo").get<std::string>();
  return out;
}

/// Parses a families file; errors name the offending line.
inline std::vector<LoadedFamily> read_families_jsonl(std::istream& in) {
  std::vector<LoadedFamily> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(family_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw DataError("families file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<LoadedFamily> read_families_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open families file: " + path.string());
  return read_families_jsonl(in);
}

/// RFC 4180 field quoting.
inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  q += '"';
  return q;
}

inline constexpr std::string_view kSummaryHeader =
    "family_id,size,mean_cosine,mean_jaccard,cohesion,members,min_freq,max_freq,freq_ratio,min_coverage,"
    "top_dimension_mode,pruned,prune_reason";

inline std::string summary_row(const ScoredFamily& f) {
  std::string members;
  for (std::size_t i = 0; i < f.family.members.size(); ++i) {
    if (i) members += '|';
    members += f.family.members[i];
  }
  std::string min_freq, max_freq, min_coverage, top_mode;
  if (!f.members.empty()) {
    auto [lo, hi] = std::minmax_element(f.members.begin(), f.members.end(),
                                        [](const auto& a, const auto& b) { return a.frequency < b.frequency; });
    min_freq = std::to_string(lo->frequency);
    max_freq = std::to_string(hi->frequency);
  }
  if (f.has_dimension_stats && !f.members.empty()) {
    std::uint64_t cov = std::numeric_limits<std::uint64_t>::max();
    std::map<std::string, int> votes;
    for (const auto& m : f.members) {
      if (!m.dimensions) continue;
      cov = std::min(cov, m.dimensions->coverage);
      if (m.dimensions->top_dimension) ++votes[*m.dimensions->top_dimension];
    }
    if (cov != std::numeric_limits<std::uint64_t>::max()) min_coverage = std::to_string(cov);
    int best = 0;
    for (const auto& [label, n] : votes) {
      if (n > best) {
        best = n;
        top_mode = label;
      }
    }
  }
  std::string reasons;
  for (std::size_t i = 0; i < f.prune_reasons.size(); ++i) {
    if (i) reasons += '|';
    reasons += f.prune_reasons[i];
  }
  std::string row;
  row += csv_field(f.family.family_id) + ',';
  row += std::to_string(f.score.size) + ',';
  row += format_real(f.score.mean_cosine) + ',';
  row += format_real(f.score.mean_jaccard) + ',';
  row += format_real(f.score.cohesion) + ',';
  row += csv_field(members) + ',';
  row += min_freq + ',' + max_freq + ',';
  row += (f.freq_ratio ? format_real(*f.freq_ratio) : std::string()) + ',';
  row += min_coverage + ',';
  row += csv_field(top_mode) + ',';
  row += std::string(f.pruned() ? "true" : "false") + ',';
  row += csv_field(reasons);
  return row;
}

/// Header plus one row per family, pruned ones included. Returns the row
/// count.
inline std::size_t write_summary_csv(std::ostream& out, const std::vector<ScoredFamily>& families) {
  std::vector<const ScoredFamily*> all;
  for (const auto& f : families) all.push_back(&f);
  detail::sort_for_output(all);
  out << kSummaryHeader << '\n';
  for (const auto* f : all) out << summary_row(*f) << '\n';
  return all.size();
}

inline std::size_t write_summary_csv(const std::filesystem::path& path, const std::vector<ScoredFamily>& families) {
  std::size_t n = 0;
  write_atomically(path, [&](std::ostream& out) { n = write_summary_csv(out, families); });
  return n;
}

}  // namespace varfam
