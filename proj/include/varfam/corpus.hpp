#pragma once

// Streaming JSONL ingestion, minimal cleaning, tokenization and token
// statistics.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "varfam/error.hpp"
#include "varfam/unicode.hpp"

namespace varfam {

struct CorpusRecord {
  std::string text;
  std::optional<std::string> dimension;
  std::uint64_t record_id = 0;
};

struct IngestConfig {
  std::string text_field = "text";
  std::optional<std::string> dimension_field = "user_id";
  bool lowercase = true;
};

struct IngestCounters {
  std::uint64_t lines = 0;
  std::uint64_t records = 0;
  std::uint64_t skipped_malformed = 0;
  std::uint64_t skipped_missing_text = 0;
  std::uint64_t missing_dimension = 0;
  std::uint64_t tokens = 0;
  std::uint64_t dropped_mentions = 0;
  std::uint64_t dropped_non_word = 0;

  std::uint64_t skipped() const { return skipped_malformed + skipped_missing_text; }
};

/// Reads a JSONL corpus one line at a time. Lines that are not JSON objects
/// or lack the text field are skipped and tallied.
class RecordReader {
 public:
  RecordReader(const std::filesystem::path& path, std::string text_field,
               std::optional<std::string> dimension_field)
      : in_(path, std::ios::binary),
        text_field_(std::move(text_field)),
        dimension_field_(std::move(dimension_field)) {
    if (!in_) throw DataError("cannot open corpus file: " + path.string());
  }

  std::optional<CorpusRecord> next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++counters_.lines;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;

      auto obj = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
      if (obj.is_discarded() || !obj.is_object()) {
        ++counters_.skipped_malformed;
        continue;
      }
      auto text = obj.find(text_field_);
      if (text == obj.end() || !text->is_string()) {
        ++counters_.skipped_missing_text;
        continue;
      }
      CorpusRecord record;
      record.text = text->get<std::string>();
      record.record_id = next_id_++;
      if (dimension_field_) {
        auto dim = obj.find(*dimension_field_);
        if (dim == obj.end() || dim->is_null()) {
          ++counters_.missing_dimension;
        } else {
          record.dimension = dim->is_string() ? dim->get<std::string>() : dim->dump();
        }
      }
      ++counters_.records;
      return record;
    }
    if (in_.bad()) throw DataError("read error while streaming corpus");
    return std::nullopt;
  }

  const IngestCounters& counters() const { return counters_; }

 private:
  std::ifstream in_;
  std::string text_field_;
  std::optional<std::string> dimension_field_;
  IngestCounters counters_;
  std::uint64_t next_id_ = 0;
};

/// Streams every record of `path` through `fn(const CorpusRecord&)`.
template <class Fn>
IngestCounters for_each_record(const std::filesystem::path& path, const IngestConfig& cfg, Fn&& fn) {
  RecordReader reader(path, cfg.text_field, cfg.dimension_field);
  while (auto record = reader.next()) fn(*record);
  return reader.counters();
}

struct TokenizeCounters {
  std::uint64_t dropped_mentions = 0;
  std::uint64_t dropped_non_word = 0;
};

/// Splits on Unicode whitespace, drops chunks starting with '@', strips
/// leading and trailing characters that are not letters, digits or combining
/// marks, and drops chunks with no letter or digit. Word-internal characters
/// (apostrophes, hyphens) survive, so "d'Zukunft" stays one token. Text is
/// NFC-normalized first.
inline std::vector<std::string> clean_and_tokenize(std::string_view text, bool lowercase,
                                                   TokenizeCounters* counters = nullptr) {
  std::vector<std::string> tokens;
  if (text.empty()) return tokens;
  const std::u32string chars = unicode::decode(unicode::normalize(text, lowercase));

  std::size_t i = 0;
  const std::size_t n = chars.size();
  while (i < n) {
    while (i < n && unicode::is_space(chars[i])) ++i;
    if (i == n) break;
    std::size_t end = i;
    while (end < n && !unicode::is_space(chars[end])) ++end;

    if (chars[i] == U'@') {
      if (counters) ++counters->dropped_mentions;
      i = end;
      continue;
    }
    std::size_t first = i;
    std::size_t last = end;
    while (first < last && !unicode::is_word_char(chars[first])) ++first;
    while (last > first && !unicode::is_word_char(chars[last - 1])) --last;

    bool has_alnum = false;
    for (std::size_t k = first; k < last && !has_alnum; ++k) {
      has_alnum = unicode::is_letter_or_digit(chars[k]);
    }
    if (has_alnum) {
      tokens.push_back(unicode::encode(std::u32string_view(chars).substr(first, last - first)));
    } else if (counters) {
      ++counters->dropped_non_word;
    }
    i = end;
  }
  return tokens;
}

struct TokenStats {
  std::string token;
  std::uint64_t corpus_frequency = 0;
  std::uint64_t document_frequency = 0;
  std::map<std::string, std::uint64_t> dimension_counts;
};

/// Immutable token statistics for a corpus. Tokens are kept in sorted order.
struct CorpusStats {
  bool has_dimension = false;
  std::map<std::string, TokenStats, std::less<>> tokens;
  IngestCounters counters;

  const TokenStats* find(std::string_view token) const {
    auto it = tokens.find(token);
    return it == tokens.end() ? nullptr : &it->second;
  }
};

/// Accumulates exact per-token counts. Memory grows with the vocabulary and
/// the number of distinct (token, dimension) pairs, not with record count.
class StatsCollector {
 public:
  explicit StatsCollector(bool has_dimension) { stats_.has_dimension = has_dimension; }

  void add(const CorpusRecord& record, const std::vector<std::string>& tokens) {
    seen_.clear();
    for (const auto& token : tokens) {
      auto it = stats_.tokens.find(token);
      if (it == stats_.tokens.end()) {
        it = stats_.tokens.emplace(token, TokenStats{token, 0, 0, {}}).first;
      }
      auto& s = it->second;
      ++s.corpus_frequency;
      if (seen_.insert(&s).second) ++s.document_frequency;
      if (stats_.has_dimension && record.dimension) ++s.dimension_counts[*record.dimension];
    }
    stats_.counters.tokens += tokens.size();
  }

  CorpusStats finish(const IngestCounters& counters) && {
    const auto tokens = stats_.counters.tokens;
    stats_.counters = counters;
    stats_.counters.tokens = tokens;
    return std::move(stats_);
  }

 private:
  CorpusStats stats_;
  std::set<const TokenStats*> seen_;
};

/// Counts tokens over an in-memory record sequence.
template <class Records>
CorpusStats collect_stats(const Records& records, const IngestConfig& cfg) {
  StatsCollector collector(cfg.dimension_field.has_value());
  IngestCounters counters;
  TokenizeCounters tc;
  for (const CorpusRecord& record : records) {
    collector.add(record, clean_and_tokenize(record.text, cfg.lowercase, &tc));
    ++counters.records;
  }
  counters.dropped_mentions = tc.dropped_mentions;
  counters.dropped_non_word = tc.dropped_non_word;
  return std::move(collector).finish(counters);
}

/// Streams a JSONL corpus and counts tokens.
inline CorpusStats collect_stats(const std::filesystem::path& corpus, const IngestConfig& cfg) {
  StatsCollector collector(cfg.dimension_field.has_value());
  TokenizeCounters tc;
  IngestCounters counters = for_each_record(corpus, cfg, [&](const CorpusRecord& record) {
    collector.add(record, clean_and_tokenize(record.text, cfg.lowercase, &tc));
  });
  counters.dropped_mentions = tc.dropped_mentions;
  counters.dropped_non_word = tc.dropped_non_word;
  return std::move(collector).finish(counters);
}

// Stats file: a header object, then one object per token in sorted order.

inline void write_stats(std::ostream& out, const CorpusStats& stats) {
  const auto& c = stats.counters;
  nlohmann::ordered_json header = {
      {"has_dimension", stats.has_dimension},
      {"counters",
       {{"lines", c.lines},
        {"records", c.records},
        {"skipped_malformed", c.skipped_malformed},
        {"skipped_missing_text", c.skipped_missing_text},
        {"missing_dimension", c.missing_dimension},
        {"tokens", c.tokens},
        {"dropped_mentions", c.dropped_mentions},
        {"dropped_non_word", c.dropped_non_word}}},
      {"vocabulary", stats.tokens.size()}};
  out << header.dump() << '\n';
  for (const auto& [token, s] : stats.tokens) {
    nlohmann::ordered_json line = {{"token", token},
                                   {"frequency", s.corpus_frequency},
                                   {"document_frequency", s.document_frequency}};
    if (stats.has_dimension) {
      line["dimensions"] = s.dimension_counts;
    } else {
      line["dimensions"] = nullptr;
    }
    out << line.dump() << '\n';
  }
}

inline CorpusStats read_stats(std::istream& in) {
  CorpusStats stats;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& why) {
    throw DataError("stats file line " + std::to_string(line_no) + ": " + why);
  };
  try {
    if (!std::getline(in, line)) fail("missing header");
    ++line_no;
    auto header = nlohmann::json::parse(line);
    stats.has_dimension = header.at("has_dimension").get<bool>();
    const auto& c = header.at("counters");
    auto& k = stats.counters;
    k.lines = c.at("lines");
    k.records = c.at("records");
    k.skipped_malformed = c.at("skipped_malformed");
    k.skipped_missing_text = c.at("skipped_missing_text");
    k.missing_dimension = c.at("missing_dimension");
    k.tokens = c.at("tokens");
    k.dropped_mentions = c.at("dropped_mentions");
    k.dropped_non_word = c.at("dropped_non_word");
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto obj = nlohmann::json::parse(line);
      TokenStats s;
      s.token = obj.at("token").get<std::string>();
      s.corpus_frequency = obj.at("frequency");
      s.document_frequency = obj.at("document_frequency");
      if (const auto& dims = obj.at("dimensions"); !dims.is_null()) {
        s.dimension_counts = dims.get<std::map<std::string, std::uint64_t>>();
      }
      auto token = s.token;
      stats.tokens.emplace(std::move(token), std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(e.what());
  }
  return stats;
}

}  // namespace varfam
