#include <sys/resource.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "varfam/corpus.hpp"

namespace fs = std::filesystem;
using namespace varfam;

namespace {

fs::path temp_file(const std::string& name, const std::string& content) {
  const fs::path dir = fs::temp_directory_path() / "varfam_test_corpus";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream(p, std::ios::binary) << content;
  return p;
}

std::vector<CorpusRecord> read_all(const fs::path& p, IngestCounters* counters = nullptr) {
  std::vector<CorpusRecord> out;
  RecordReader reader(p, "text", std::string("user_id"));
  while (auto r = reader.next()) out.push_back(*r);
  if (counters) *counters = reader.counters();
  return out;
}

long peak_rss_kb() {
  rusage usage{};
  getrusage(RUSAGE_SELF, &usage);
  return usage.ru_maxrss;
}

}  // namespace

TEST(StreamRecords, ExtractsTextAndDimension) {
  auto p = temp_file("one.jsonl", R"({"text":"moien alleguer","user_id":"u1"})" "\n");
  auto records = read_all(p);
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records[0].text, "moien alleguer");
  EXPECT_EQ(records[0].dimension, "u1");
  EXPECT_EQ(records[0].record_id, 0u);
}

TEST(StreamRecords, MissingTextIsSkippedAndCounted) {
  auto p = temp_file("body.jsonl", R"({"body":"x"})" "\n");
  IngestCounters c;
  EXPECT_TRUE(read_all(p, &c).empty());
  EXPECT_EQ(c.skipped_missing_text, 1u);
  EXPECT_EQ(c.skipped(), 1u);
}

TEST(StreamRecords, MalformedLineIsSkipped) {
  auto p = temp_file("bad.jsonl", "{\"text\":\"a\"}\n{not json\n{\"text\":\"b\",\"user_id\":\"u2\"}\n");
  IngestCounters c;
  auto records = read_all(p, &c);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(c.skipped_malformed, 1u);
  EXPECT_EQ(records[0].text, "a");
  EXPECT_FALSE(records[0].dimension.has_value());
  EXPECT_EQ(c.missing_dimension, 1u);
  EXPECT_EQ(records[1].dimension, "u2");
  EXPECT_EQ(records[1].record_id, 1u);
}

TEST(StreamRecords, NonStringDimensionIsOpaqueLabel) {
  auto p = temp_file("num.jsonl", R"({"text":"a","user_id":17})" "\n");
  auto records = read_all(p);
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records[0].dimension, "17");
}

TEST(StreamRecords, UnreadableFileThrows) {
  EXPECT_THROW(RecordReader("/nonexistent/corpus.jsonl", "text", std::nullopt), DataError);
}

TEST(Tokenize, DropsMentionsKeepsInternalApostrophe) {
  EXPECT_EQ(clean_and_tokenize("@max Moien d'Zukunft!", true), (std::vector<std::string>{"moien", "d'zukunft"}));
}

TEST(Tokenize, Empty) { EXPECT_TRUE(clean_and_tokenize("", true).empty()); }

TEST(Tokenize, PunctuationStrippedDiacriticsKept) {
  EXPECT_EQ(clean_and_tokenize("Zäit, Zeit.", true), (std::vector<std::string>{"zäit", "zeit"}));
}

TEST(Tokenize, CaseKeptWithoutLowercase) {
  EXPECT_EQ(clean_and_tokenize("Zäit Zeit", false), (std::vector<std::string>{"Zäit", "Zeit"}));
}

TEST(Tokenize, EdgeApostrophesAndQuotesStripped) {
  EXPECT_EQ(clean_and_tokenize("'t \"Wuert\" (hallo) ...", true),
            (std::vector<std::string>{"t", "wuert", "hallo"}));
}

TEST(Tokenize, PunctuationOnlyChunksDropped) {
  TokenizeCounters c;
  EXPECT_EQ(clean_and_tokenize("a -- !!! 🙂 b", true, &c), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(c.dropped_non_word, 3u);
}

TEST(Tokenize, UnicodeWhitespaceSplits) {
  EXPECT_EQ(clean_and_tokenize("mat matt maat\tmoar\n", true),
            (std::vector<std::string>{"mat", "matt", "maat", "moar"}));
}

TEST(Tokenize, DecomposedInputIsComposed) {
  // "a" + combining diaeresis
  EXPECT_EQ(clean_and_tokenize("Za\xCC\x88it", true), (std::vector<std::string>{"zäit"}));
}

TEST(Tokenize, InternalHyphenKept) {
  EXPECT_EQ(clean_and_tokenize("-Porte-Monnaie-", true), (std::vector<std::string>{"porte-monnaie"}));
}

TEST(TokenizeProperty, IdempotentAndNoMentions) {
  std::mt19937_64 rng(5);
  const std::vector<std::string> pieces = {"Zäit", "@u1", "d'Zukunft", ",", "moar!", "'", "éi", " ", "  ", "\t",
                                           "Mat", "-", "@", "x'", "ë", "...", "Ö", "1990", "e-mail", "🙂"};
  for (int trial = 0; trial < 2000; ++trial) {
    std::string text;
    const int n = static_cast<int>(rng() % 12);
    for (int k = 0; k < n; ++k) text += pieces[rng() % pieces.size()];
    for (const auto& tok : clean_and_tokenize(text, true)) {
      ASSERT_FALSE(tok.empty());
      ASSERT_NE(tok.front(), '@') << text;
      ASSERT_EQ(clean_and_tokenize(tok, true), std::vector<std::string>{tok}) << "text: " << text;
    }
  }
}

TEST(CollectStats, CountsPerDimension) {
  std::vector<CorpusRecord> records = {{"mat", "u1", 0}, {"mat", "u1", 1}, {"Mat", "u2", 2}};
  auto stats = collect_stats(records, IngestConfig{});
  const auto* s = stats.find("mat");
  ASSERT_NE(s, nullptr);
  EXPECT_EQ(s->corpus_frequency, 3u);
  EXPECT_EQ(s->document_frequency, 3u);
  EXPECT_EQ(s->dimension_counts, (std::map<std::string, std::uint64_t>{{"u1", 2}, {"u2", 1}}));
  EXPECT_EQ(stats.find("matt"), nullptr);
}

TEST(CollectStats, NoDimensionConfigured) {
  IngestConfig cfg;
  cfg.dimension_field.reset();
  std::vector<CorpusRecord> records = {{"mat mat", "u1", 0}};
  auto stats = collect_stats(records, cfg);
  EXPECT_FALSE(stats.has_dimension);
  EXPECT_EQ(stats.find("mat")->corpus_frequency, 2u);
  EXPECT_EQ(stats.find("mat")->document_frequency, 1u);
  EXPECT_TRUE(stats.find("mat")->dimension_counts.empty());
}

TEST(CollectStats, RecordWithoutDimensionCountsOnlyTowardFrequency) {
  std::vector<CorpusRecord> records = {{"mat", "u1", 0}, {"mat", std::nullopt, 1}};
  auto stats = collect_stats(records, IngestConfig{});
  EXPECT_EQ(stats.find("mat")->corpus_frequency, 2u);
  EXPECT_EQ(stats.find("mat")->dimension_counts.size(), 1u);
}

TEST(CollectStats, InvariantsAndByteIdenticalRerun) {
  std::ostringstream corpus;
  std::mt19937_64 rng(9);
  const std::vector<std::string> words = {"muer", "muar", "moar", "mat", "matt", "maat", "zäit", "zeit", "ech", "@x"};
  for (int i = 0; i < 500; ++i) {
    std::string text;
    for (int k = 0; k < 6; ++k) text += words[rng() % words.size()] + ' ';
    corpus << R"({"text":")" << text << R"(","user_id":"u)" << rng() % 7 << "\"}\n";
  }
  auto p = temp_file("inv.jsonl", corpus.str());
  auto a = collect_stats(p, IngestConfig{});
  auto b = collect_stats(p, IngestConfig{});
  std::ostringstream sa, sb;
  write_stats(sa, a);
  write_stats(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  for (const auto& [token, s] : a.tokens) {
    EXPECT_NE(token.front(), '@');
    EXPECT_GE(s.corpus_frequency, s.document_frequency);
    EXPECT_GE(s.document_frequency, 1u);
    std::uint64_t sum = 0;
    for (const auto& [label, n] : s.dimension_counts) sum += n;
    EXPECT_EQ(sum, s.corpus_frequency);
  }
  std::istringstream in(sa.str());
  auto round = read_stats(in);
  std::ostringstream sc;
  write_stats(sc, round);
  EXPECT_EQ(sc.str(), sa.str());
}

TEST(CollectStats, PeakMemoryBoundedByVocabularyNotRecords) {
  // Same 2,000-token vocabulary, 100k then 1M records: the second pass must
  // not raise peak memory by more than a few MB.
  const fs::path dir = fs::temp_directory_path() / "varfam_test_corpus";
  fs::create_directories(dir);
  auto make = [&](const std::string& name, int records) {
    const fs::path p = dir / name;
    std::ofstream out(p, std::ios::binary);
    std::mt19937_64 rng(1);
    for (int i = 0; i < records; ++i) {
      out << "{\"text\":\"";
      for (int k = 0; k < 4; ++k) out << 'w' << rng() % 2000 << ' ';
      out << "\",\"user_id\":\"u" << rng() % 50 << "\"}\n";
    }
    return p;
  };
  const auto small = make("small.jsonl", 100'000);
  const auto large = make("large.jsonl", 1'000'000);
  { auto s = collect_stats(small, IngestConfig{}); EXPECT_EQ(s.counters.records, 100'000u); }
  const long after_small = peak_rss_kb();
  { auto s = collect_stats(large, IngestConfig{}); EXPECT_EQ(s.counters.records, 1'000'000u); }
  const long after_large = peak_rss_kb();
  EXPECT_LT(after_large - after_small, 8 * 1024) << "peak RSS grew by " << (after_large - after_small) << " kB";
  fs::remove(small);
  fs::remove(large);
}
