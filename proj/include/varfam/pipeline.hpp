#pragma once

// Train / induce / pipeline runs over files, with run metadata.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "varfam/config.hpp"
#include "varfam/corpus.hpp"
#include "varfam/error.hpp"
#include "varfam/fs.hpp"
#include "varfam/induction.hpp"
#include "varfam/model_io.hpp"
#include "varfam/output.hpp"
#include "varfam/scoring.hpp"
#include "varfam/trainer.hpp"

namespace varfam {

namespace fs = std::filesystem;

/// Token statistics live next to the model: model.bin -> model.stats.jsonl.
inline fs::path stats_path_for(const fs::path& model) {
  fs::path p = model;
  return p.replace_extension(".stats.jsonl");
}

inline fs::path metadata_path_for(const fs::path& model) {
  fs::path p = model;
  return p.replace_extension(".meta.json");
}

inline void save_stats(const fs::path& path, const CorpusStats& stats) {
  write_atomically(path, [&](std::ostream& out) { write_stats(out, stats); });
}

inline CorpusStats load_stats(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open stats file: " + path.string());
  return read_stats(in);
}

inline void save_json(const fs::path& path, const nlohmann::ordered_json& j) {
  write_atomically(path, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
}

inline nlohmann::ordered_json counters_json(const IngestCounters& c) {
  return {{"lines", c.lines},
          {"records", c.records},
          {"skipped_malformed", c.skipped_malformed},
          {"skipped_missing_text", c.skipped_missing_text},
          {"missing_dimension", c.missing_dimension},
          {"tokens", c.tokens},
          {"dropped_mentions", c.dropped_mentions},
          {"dropped_non_word_tokens", c.dropped_non_word}};
}

struct TrainResult {
  fs::path model;
  fs::path stats;
  fs::path metadata;
  nlohmann::ordered_json meta;
};

/// Ingests `cfg.corpus`, trains, and writes the model, its token statistics
/// and a metadata file next to `cfg.model`.
inline TrainResult run_train(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.corpus.empty()) throw ConfigError("corpus: path required");
  if (cfg.model.empty()) throw ConfigError("model: path required");
  const fs::path corpus = cfg.corpus;
  if (!fs::exists(corpus)) throw DataError("corpus file not found: " + corpus.string());

  const auto start = std::chrono::steady_clock::now();
  spdlog::info("ingesting {}", corpus.string());
  CorpusStats stats = collect_stats(corpus, cfg.ingest);
  spdlog::info("{} records, {} tokens, {} distinct, {} skipped lines", stats.counters.records, stats.counters.tokens,
               stats.tokens.size(), stats.counters.skipped());

  TrainReport report;
  JsonlSentences sentences(corpus, cfg.ingest);
  EmbeddingModel model = train(sentences, cfg.embedding, TrainOptions{cfg.workers}, &report);

  TrainResult r;
  r.model = cfg.model;
  r.stats = stats_path_for(r.model);
  r.metadata = metadata_path_for(r.model);
  write_atomically(r.model, [&](std::ostream& out) { write_model(out, model); });
  save_stats(r.stats, stats);

  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  r.meta = {{"command", "train"},
            {"config", cfg.to_json()},
            {"config_echo", cfg.echo_hash()},
            {"corpus", counters_json(stats.counters)},
            {"distinct_tokens", stats.tokens.size()},
            {"vocabulary_size", report.vocab_size},
            {"vocabulary_tokens_per_epoch", report.vocab_tokens},
            {"ngram_rows", report.ngram_rows},
            {"train_seconds", report.seconds},
            {"total_seconds", seconds},
            {"outputs", {{"model", r.model.string()}, {"stats", r.stats.string()}}}};
  save_json(r.metadata, r.meta);
  spdlog::info("model written to {} ({:.1f}s)", r.model.string(), seconds);
  return r;
}

struct InduceResult {
  std::vector<ScoredFamily> families;
  std::size_t written = 0;
  fs::path families_path;
  fs::path summary_path;
  fs::path metadata;
  nlohmann::ordered_json meta;
};

/// Runs induction + scoring on an in-memory model and statistics.
inline std::vector<ScoredFamily> induce_and_score(const EmbeddingModel& model, const CorpusStats& stats,
                                                  const RunConfig& cfg, std::size_t* lexicon_size = nullptr) {
  const auto lexicon = candidate_lexicon(stats, model, cfg.embedding.min_count, cfg.induction.min_len);
  if (lexicon_size) *lexicon_size = lexicon.size();
  spdlog::info("candidate lexicon: {} tokens, mode {}", lexicon.size(), to_string(cfg.mode));
  const auto raw = induce(model, lexicon, cfg.induction, cfg.mode);
  return score_families(raw, stats, cfg.scoring);
}

/// Loads `cfg.model` (and its statistics unless `stats_path` is given),
/// induces families and writes families.jsonl, summary.csv and
/// induce.meta.json into `cfg.out`.
inline InduceResult run_induce(const RunConfig& cfg, fs::path stats_path = {}) {
  cfg.validate();
  if (cfg.model.empty()) throw ConfigError("model: path required");
  if (cfg.out.empty()) throw ConfigError("out: directory required");
  const auto start = std::chrono::steady_clock::now();
  if (stats_path.empty()) stats_path = stats_path_for(cfg.model);
  const EmbeddingModel model = load_model(cfg.model);
  const CorpusStats stats = load_stats(stats_path);

  std::size_t lexicon_size = 0;
  InduceResult r;
  r.families = induce_and_score(model, stats, cfg, &lexicon_size);

  const fs::path out = cfg.out;
  r.families_path = out / "families.jsonl";
  r.summary_path = out / "summary.csv";
  r.metadata = out / "induce.meta.json";
  r.written = write_families_jsonl(r.families_path, r.families, cfg.echo_hash());
  write_summary_csv(r.summary_path, r.families);

  std::map<std::string, std::size_t> reasons;
  std::size_t removed_members = 0;
  std::map<std::string, std::size_t> membership;
  for (const auto& f : r.families) {
    for (const auto& reason : f.prune_reasons) ++reasons[reason];
    removed_members += f.removed.size();
    if (!f.pruned()) {
      for (const auto& m : f.family.members) ++membership[m];
    }
  }
  std::size_t shared_tokens = 0;
  for (const auto& [token, n] : membership) shared_tokens += n > 1 ? 1 : 0;

  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  r.meta = {{"command", "induce"},
            {"config", cfg.to_json()},
            {"config_echo", cfg.echo_hash()},
            {"model", cfg.model},
            {"stats", stats_path.string()},
            {"lexicon_size", lexicon_size},
            {"families_total", r.families.size()},
            {"families_written", r.written},
            {"families_pruned", r.families.size() - r.written},
            {"prune_reasons", reasons},
            {"members_removed_by_min_users", removed_members},
            {"tokens_in_several_families", shared_tokens},
            {"dimension_stats", stats.has_dimension},
            {"seconds", seconds},
            {"outputs", {{"families", r.families_path.string()}, {"summary", r.summary_path.string()}}}};
  save_json(r.metadata, r.meta);
  spdlog::info("{} families written ({} pruned) to {}", r.written, r.families.size() - r.written, out.string());
  return r;
}

struct PipelineResult {
  TrainResult train;
  InduceResult induce;
};

/// Train then induce; every output lands in `cfg.out` (the model defaults to
/// out/model.bin).
inline PipelineResult run_pipeline(RunConfig cfg) {
  cfg.validate();
  if (cfg.out.empty()) throw ConfigError("out: directory required");
  if (cfg.model.empty()) cfg.model = (fs::path(cfg.out) / "model.bin").string();
  PipelineResult r;
  r.train = run_train(cfg);
  r.induce = run_induce(cfg);
  return r;
}

}  // namespace varfam
