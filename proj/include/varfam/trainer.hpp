#pragma once

// Skip-gram training with negative sampling over subword input
// representations.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <spdlog/spdlog.h>

#include "varfam/corpus.hpp"
#include "varfam/embedding.hpp"
#include "varfam/error.hpp"
#include "varfam/sgns.hpp"

namespace varfam {

/// A re-iterable stream of tokenized sentences, one per corpus record.
class SentenceSource {
 public:
  using Callback = std::function<void(const std::vector<std::string>&)>;
  virtual ~SentenceSource() = default;
  /// Visits the sentences whose ordinal is congruent to `shard` mod `shards`.
  virtual void for_each(std::size_t shard, std::size_t shards, const Callback& fn) const = 0;
};

class InMemorySentences final : public SentenceSource {
 public:
  explicit InMemorySentences(std::vector<std::vector<std::string>> sentences) : sentences_(std::move(sentences)) {}

  void for_each(std::size_t shard, std::size_t shards, const Callback& fn) const override {
    for (std::size_t i = shard; i < sentences_.size(); i += shards) fn(sentences_[i]);
  }

 private:
  std::vector<std::vector<std::string>> sentences_;
};

/// Re-streams and re-tokenizes a JSONL corpus on every pass.
class JsonlSentences final : public SentenceSource {
 public:
  JsonlSentences(std::filesystem::path path, IngestConfig cfg) : path_(std::move(path)), cfg_(std::move(cfg)) {}

  void for_each(std::size_t shard, std::size_t shards, const Callback& fn) const override {
    RecordReader reader(path_, cfg_.text_field, std::nullopt);
    std::size_t ordinal = 0;
    while (auto record = reader.next()) {
      if (ordinal++ % shards != shard) continue;
      fn(clean_and_tokenize(record->text, cfg_.lowercase));
    }
  }

 private:
  std::filesystem::path path_;
  IngestConfig cfg_;
};

struct TrainOptions {
  int workers = 1;
};

struct TrainReport {
  std::uint64_t corpus_tokens = 0;  // all tokens in one pass
  std::uint64_t vocab_tokens = 0;   // tokens kept by min_count, one pass
  std::size_t vocab_size = 0;
  std::size_t ngram_rows = 0;
  double seconds = 0.0;
};

namespace detail {

inline constexpr std::size_t kNegativeTableSize = 10'000'000;

class Trainer {
 public:
  Trainer(const SentenceSource& source, const EmbeddingConfig& cfg) : source_(source), cfg_(cfg) {
    build_vocabulary();
    build_subwords();
    init_weights();
    build_negative_table();
  }

  void run(int workers) {
    if (workers <= 1) {
      run_worker(0, 1);
      return;
    }
    std::vector<std::jthread> threads;
    for (int w = 0; w < workers; ++w) {
      threads.emplace_back([this, w, workers] { run_worker(static_cast<std::size_t>(w), static_cast<std::size_t>(workers)); });
    }
  }

  EmbeddingModel finish() && {
    const auto dim = static_cast<std::size_t>(cfg_.vector_size);
    Matrix words(vocab_.size(), dim);
    Matrix ngrams(buckets_.size(), dim);
    std::copy_n(input_.data().begin(), vocab_.size() * dim, words.data().begin());
    std::copy(input_.data().begin() + static_cast<std::ptrdiff_t>(vocab_.size() * dim), input_.data().end(),
              ngrams.data().begin());
    return EmbeddingModel(cfg_, std::move(vocab_), std::move(words), std::move(buckets_), std::move(ngrams));
  }

  TrainReport report() const {
    return {corpus_tokens_, vocab_tokens_, vocab_.size(), buckets_.size(), 0.0};
  }

 private:
  void build_vocabulary() {
    std::unordered_map<std::string, std::uint64_t> counts;
    source_.for_each(0, 1, [&](const std::vector<std::string>& sentence) {
      for (const auto& t : sentence) ++counts[t];
      corpus_tokens_ += sentence.size();
    });
    for (auto& [token, count] : counts) {
      if (count >= static_cast<std::uint64_t>(cfg_.min_count)) vocab_.push_back({token, count});
    }
    if (vocab_.empty()) {
      throw ConfigError("min_count: no token occurs at least " + std::to_string(cfg_.min_count) +
                        " times; vocabulary is empty");
    }
    std::sort(vocab_.begin(), vocab_.end(), [](const VocabEntry& a, const VocabEntry& b) {
      return a.count != b.count ? a.count > b.count : a.token < b.token;
    });
    ids_.reserve(vocab_.size());
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
      ids_.emplace(vocab_[i].token, static_cast<std::uint32_t>(i));
      vocab_tokens_ += vocab_[i].count;
    }
    keep_probability_.resize(vocab_.size(), 1.0);
    if (cfg_.subsample_threshold > 0.0) {
      for (std::size_t i = 0; i < vocab_.size(); ++i) {
        const double f = static_cast<double>(vocab_[i].count) / static_cast<double>(vocab_tokens_);
        const double r = cfg_.subsample_threshold / f;
        keep_probability_[i] = std::sqrt(r) + r;
      }
    }
  }

  void build_subwords() {
    std::vector<std::vector<std::uint32_t>> word_buckets(vocab_.size());
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
      word_buckets[i] = ngram_buckets(vocab_[i].token, cfg_.min_n, cfg_.max_n, cfg_.bucket_count);
      buckets_.insert(buckets_.end(), word_buckets[i].begin(), word_buckets[i].end());
    }
    std::sort(buckets_.begin(), buckets_.end());
    buckets_.erase(std::unique(buckets_.begin(), buckets_.end()), buckets_.end());

    subwords_.resize(vocab_.size());
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
      auto& rows = subwords_[i];
      rows.push_back(static_cast<std::uint32_t>(i));
      for (std::uint32_t b : word_buckets[i]) {
        auto pos = std::lower_bound(buckets_.begin(), buckets_.end(), b) - buckets_.begin();
        rows.push_back(static_cast<std::uint32_t>(vocab_.size() + static_cast<std::size_t>(pos)));
      }
    }
  }

  void init_weights() {
    const auto dim = static_cast<std::size_t>(cfg_.vector_size);
    input_ = Matrix(vocab_.size() + buckets_.size(), dim);
    for (std::size_t i = 0; i < vocab_.size(); ++i) fill_initial_row(input_.row(i), cfg_.rng_seed, RowKind::kWord, i);
    for (std::size_t k = 0; k < buckets_.size(); ++k) {
      fill_initial_row(input_.row(vocab_.size() + k), cfg_.rng_seed, RowKind::kNgram, buckets_[k]);
    }
    output_ = Matrix(vocab_.size(), dim);
  }

  // Unigram counts raised to 0.5, as in fastText.
  void build_negative_table() {
    double z = 0.0;
    for (const auto& e : vocab_) z += std::sqrt(static_cast<double>(e.count));
    negatives_.reserve(kNegativeTableSize);
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
      const double c = std::sqrt(static_cast<double>(vocab_[i].count));
      const auto n = static_cast<std::size_t>(c * static_cast<double>(kNegativeTableSize) / z);
      negatives_.insert(negatives_.end(), std::max<std::size_t>(n, 1), static_cast<std::uint32_t>(i));
    }
  }

  static double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

  std::uint32_t draw_negative(std::mt19937_64& rng, std::uint32_t target) const {
    if (vocab_.size() == 1) return target;
    for (;;) {
      const auto n = negatives_[rng() % negatives_.size()];
      if (n != target) return n;
    }
  }

  void run_worker(std::size_t worker, std::size_t workers) {
    std::mt19937_64 rng(detail::splitmix64(cfg_.rng_seed + worker));
    const auto dim = static_cast<std::size_t>(cfg_.vector_size);
    std::vector<float> hidden(dim), update(dim);
    std::vector<std::uint32_t> line;
    const double total = static_cast<double>(cfg_.epochs) * static_cast<double>(vocab_tokens_);

    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
      source_.for_each(worker, workers, [&](const std::vector<std::string>& sentence) {
        line.clear();
        std::uint64_t seen = 0;
        for (const auto& token : sentence) {
          auto it = ids_.find(token);
          if (it == ids_.end()) continue;
          ++seen;
          if (uniform01(rng) <= keep_probability_[it->second]) line.push_back(it->second);
        }
        const auto done = processed_.fetch_add(seen, std::memory_order_relaxed);
        const auto lr = static_cast<float>(cfg_.initial_learning_rate *
                                           std::max(0.0, 1.0 - static_cast<double>(done) / total));
        train_line(line, lr, rng, hidden, update);
      });
      spdlog::debug("worker {} finished epoch {}/{}", worker, epoch + 1, cfg_.epochs);
    }
  }

  void train_line(const std::vector<std::uint32_t>& line, float lr, std::mt19937_64& rng, std::vector<float>& hidden,
                  std::vector<float>& update) {
    const auto n = static_cast<std::ptrdiff_t>(line.size());
    for (std::ptrdiff_t w = 0; w < n; ++w) {
      const auto boundary = static_cast<std::ptrdiff_t>(1 + rng() % static_cast<std::uint64_t>(cfg_.window));
      const auto& rows = subwords_[line[static_cast<std::size_t>(w)]];

      std::fill(hidden.begin(), hidden.end(), 0.0f);
      for (auto r : rows) {
        auto row = input_.row(r);
        for (std::size_t c = 0; c < hidden.size(); ++c) hidden[c] += row[c];
      }
      const float inv = 1.0f / static_cast<float>(rows.size());
      for (auto& h : hidden) h *= inv;
      std::fill(update.begin(), update.end(), 0.0f);

      for (std::ptrdiff_t c = -boundary; c <= boundary; ++c) {
        if (c == 0 || w + c < 0 || w + c >= n) continue;
        const auto target = line[static_cast<std::size_t>(w + c)];
        sgns::step<float>(hidden, output_.row(target), true, lr, update);
        for (int k = 0; k < cfg_.negative_samples; ++k) {
          sgns::step<float>(hidden, output_.row(draw_negative(rng, target)), false, lr, update);
        }
      }
      for (auto r : rows) {
        auto row = input_.row(r);
        for (std::size_t c = 0; c < update.size(); ++c) row[c] += update[c];
      }
    }
  }

  const SentenceSource& source_;
  EmbeddingConfig cfg_;
  std::vector<VocabEntry> vocab_;
  std::unordered_map<std::string, std::uint32_t> ids_;
  std::vector<double> keep_probability_;
  std::vector<std::uint32_t> buckets_;
  std::vector<std::vector<std::uint32_t>> subwords_;
  Matrix input_;
  Matrix output_;
  std::vector<std::uint32_t> negatives_;
  std::uint64_t corpus_tokens_ = 0;
  std::uint64_t vocab_tokens_ = 0;
  std::atomic<std::uint64_t> processed_{0};
};

}  // namespace detail

/// Trains a subword skip-gram model. With one worker and a fixed seed the
/// result is bit-reproducible; with several workers, updates race
/// (Hogwild-style) and only statistical quality is preserved.
inline EmbeddingModel train(const SentenceSource& source, const EmbeddingConfig& cfg, const TrainOptions& opts = {},
                            TrainReport* report = nullptr) {
  cfg.validate();
  if (opts.workers < 1) throw ConfigError("workers: must be >= 1");
  const auto start = std::chrono::steady_clock::now();
  detail::Trainer trainer(source, cfg);
  const TrainReport base = trainer.report();
  spdlog::info("training: {} vocabulary tokens, {} n-gram rows, {} tokens/epoch, {} epochs, {} worker(s)",
               base.vocab_size, base.ngram_rows, base.vocab_tokens, cfg.epochs, opts.workers);
  trainer.run(opts.workers);
  if (report) {
    *report = base;
    report->seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return std::move(trainer).finish();
}

}  // namespace varfam
