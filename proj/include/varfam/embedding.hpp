#pragma once

// Subword embedding model: word vectors plus hashed character n-gram
// vectors. A token's vector is the average of its word vector (when in
// vocabulary) and the vectors of its n-gram buckets.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <spdlog/spdlog.h>

#include "varfam/error.hpp"
#include "varfam/ngrams.hpp"

namespace varfam {

struct EmbeddingConfig {
  int vector_size = 100;
  int window = 5;
  int min_count = 10;
  int epochs = 10;
  bool sg = true;
  int min_n = 3;
  int max_n = 7;
  std::uint32_t bucket_count = 2'000'000;
  int negative_samples = 5;
  double initial_learning_rate = 0.05;
  double subsample_threshold = 1e-4;
  std::uint64_t rng_seed = 42;

  void validate() const {
    auto require = [](bool ok, const char* key, const char* what) {
      if (!ok) throw ConfigError(std::string(key) + ": " + what);
    };
    require(vector_size >= 1, "vector_size", "must be >= 1");
    require(window >= 1, "window", "must be >= 1");
    require(min_count >= 1, "min_count", "must be >= 1");
    require(epochs >= 1, "epochs", "must be >= 1");
    require(sg, "sg", "only skip-gram (sg=1) is supported");
    require(min_n >= 1, "min_n", "must be >= 1");
    require(max_n >= min_n, "max_n", "must be >= min_n");
    require(bucket_count >= 1, "bucket_count", "must be >= 1");
    require(negative_samples >= 1, "negative_samples", "must be >= 1");
    require(initial_learning_rate > 0.0, "learning_rate", "must be > 0");
    require(subsample_threshold >= 0.0, "subsample_threshold", "must be >= 0");
  }

  bool operator==(const EmbeddingConfig&) const = default;
};

/// Row-major float matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<float> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const float> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace detail

enum class RowKind : std::uint64_t { kWord = 1, kNgram = 2 };

/// Initial value of an input-matrix element, uniform in [-1/dim, 1/dim].
/// A pure function of (seed, kind, id, col): n-gram rows never touched in
/// training are regenerated on demand instead of being stored.
inline float initial_weight(std::uint64_t seed, RowKind kind, std::uint64_t id, std::size_t col,
                            int dim) {
  std::uint64_t h = detail::splitmix64(seed ^ (static_cast<std::uint64_t>(kind) << 56));
  h = detail::splitmix64(h ^ id);
  h = detail::splitmix64(h ^ static_cast<std::uint64_t>(col));
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  return static_cast<float>((2.0 * u - 1.0) / dim);
}

inline void fill_initial_row(std::span<float> row, std::uint64_t seed, RowKind kind, std::uint64_t id) {
  const int dim = static_cast<int>(row.size());
  for (std::size_t c = 0; c < row.size(); ++c) row[c] = initial_weight(seed, kind, id, c, dim);
}

using Vector = std::vector<double>;

struct VocabEntry {
  std::string token;
  std::uint64_t count = 0;
  bool operator==(const VocabEntry&) const = default;
};

class EmbeddingModel {
 public:
  EmbeddingModel() = default;

  /// Assembles a model. `ngram_buckets` must be strictly ascending and
  /// index the rows of `ngram_rows`.
  EmbeddingModel(EmbeddingConfig config, std::vector<VocabEntry> vocab, Matrix word_vectors,
                 std::vector<std::uint32_t> ngram_buckets, Matrix ngram_rows)
      : config_(std::move(config)),
        vocab_(std::move(vocab)),
        word_vectors_(std::move(word_vectors)),
        ngram_buckets_(std::move(ngram_buckets)),
        ngram_rows_(std::move(ngram_rows)) {
    const auto dim = static_cast<std::size_t>(config_.vector_size);
    if (word_vectors_.rows() != vocab_.size() || (word_vectors_.rows() > 0 && word_vectors_.cols() != dim) ||
        ngram_rows_.rows() != ngram_buckets_.size() || (ngram_rows_.rows() > 0 && ngram_rows_.cols() != dim)) {
      throw DataError("embedding model: matrix shape does not match vocabulary/config");
    }
    index_.reserve(vocab_.size());
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
      if (!index_.emplace(vocab_[i].token, static_cast<std::uint32_t>(i)).second) {
        throw DataError("embedding model: duplicate vocabulary token '" + vocab_[i].token + "'");
      }
    }
    for (std::size_t i = 0; i < ngram_buckets_.size(); ++i) {
      if (ngram_buckets_[i] >= config_.bucket_count || (i > 0 && ngram_buckets_[i] <= ngram_buckets_[i - 1])) {
        throw DataError("embedding model: n-gram bucket list not strictly ascending within bucket_count");
      }
    }
  }

  /// A model whose composed vectors point exactly along the given vectors:
  /// word rows are the given vectors and every n-gram row they use is zero.
  static EmbeddingModel from_vectors(EmbeddingConfig config,
                                     const std::vector<std::pair<std::string, std::vector<float>>>& vectors) {
    config.vector_size = vectors.empty() ? config.vector_size : static_cast<int>(vectors.front().second.size());
    std::vector<VocabEntry> vocab;
    Matrix words(vectors.size(), static_cast<std::size_t>(config.vector_size));
    std::vector<std::uint32_t> buckets;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      vocab.push_back({vectors[i].first, static_cast<std::uint64_t>(config.min_count)});
      std::copy(vectors[i].second.begin(), vectors[i].second.end(), words.row(i).begin());
      auto b = varfam::ngram_buckets(vectors[i].first, config.min_n, config.max_n, config.bucket_count);
      buckets.insert(buckets.end(), b.begin(), b.end());
    }
    std::sort(buckets.begin(), buckets.end());
    buckets.erase(std::unique(buckets.begin(), buckets.end()), buckets.end());
    Matrix ngram_rows(buckets.size(), static_cast<std::size_t>(config.vector_size));
    return EmbeddingModel(std::move(config), std::move(vocab), std::move(words), std::move(buckets),
                          std::move(ngram_rows));
  }

  const EmbeddingConfig& config() const { return config_; }
  int dim() const { return config_.vector_size; }
  const std::vector<VocabEntry>& vocab() const { return vocab_; }
  const Matrix& word_vectors() const { return word_vectors_; }
  const std::vector<std::uint32_t>& ngram_buckets() const { return ngram_buckets_; }
  const Matrix& ngram_rows() const { return ngram_rows_; }

  std::optional<std::uint32_t> find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  bool contains(std::string_view token) const { return find(token).has_value(); }

  /// Adds n-gram row `bucket` into `acc`. Rows absent from the stored set
  /// were never trained and hold their initial values.
  void add_ngram_row(std::uint32_t bucket, std::span<double> acc) const {
    auto it = std::lower_bound(ngram_buckets_.begin(), ngram_buckets_.end(), bucket);
    if (it != ngram_buckets_.end() && *it == bucket) {
      auto row = ngram_rows_.row(static_cast<std::size_t>(it - ngram_buckets_.begin()));
      for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += row[c];
    } else {
      for (std::size_t c = 0; c < acc.size(); ++c) {
        acc[c] += initial_weight(config_.rng_seed, RowKind::kNgram, bucket, c, dim());
      }
    }
  }

  bool operator==(const EmbeddingModel& other) const {
    return config_ == other.config_ && vocab_ == other.vocab_ && word_vectors_ == other.word_vectors_ &&
           ngram_buckets_ == other.ngram_buckets_ && ngram_rows_ == other.ngram_rows_;
  }

 private:
  EmbeddingConfig config_;
  std::vector<VocabEntry> vocab_;
  Matrix word_vectors_;
  std::vector<std::uint32_t> ngram_buckets_;
  Matrix ngram_rows_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

/// Composed vector of `token`: mean of its word vector (if in vocabulary)
/// and its n-gram bucket vectors. Zero when there is nothing to average.
inline Vector word_vector(const EmbeddingModel& model, std::string_view token) {
  Vector v(static_cast<std::size_t>(model.dim()), 0.0);
  std::size_t parts = 0;
  if (auto id = model.find(token)) {
    auto row = model.word_vectors().row(*id);
    for (std::size_t c = 0; c < v.size(); ++c) v[c] += row[c];
    ++parts;
  }
  const auto& cfg = model.config();
  for (std::uint32_t bucket : ngram_buckets(token, cfg.min_n, cfg.max_n, cfg.bucket_count)) {
    model.add_ngram_row(bucket, v);
    ++parts;
  }
  if (parts == 0) {
    spdlog::warn("token '{}' has no vocabulary entry and no n-grams; using zero vector", token);
    return v;
  }
  for (double& x : v) x /= static_cast<double>(parts);
  return v;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// dot(a,b) / (|a| |b|) given precomputed norms, clamped to [-1, 1].
inline double cosine_with_norms(std::span<const double> a, double norm_a, std::span<const double> b,
                                double norm_b) {
  if (norm_a == 0.0 || norm_b == 0.0) throw UndefinedSimilarity("cosine of a zero vector");
  return std::clamp(dot(a, b) / (norm_a * norm_b), -1.0, 1.0);
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
  return cosine_with_norms(a, norm(a), b, norm(b));
}

inline double cosine(const EmbeddingModel& model, std::string_view w, std::string_view v) {
  return cosine(word_vector(model, w), word_vector(model, v));
}

struct Neighbor {
  std::string token;
  double cosine = 0.0;
  bool operator==(const Neighbor&) const = default;
};

/// Exact nearest-neighbor search by full scan over a fixed token list.
/// Composed vectors and their norms are cached at construction.
class NeighborIndex {
 public:
  NeighborIndex(const EmbeddingModel& model, std::vector<std::string> tokens)
      : tokens_(std::move(tokens)), dim_(static_cast<std::size_t>(model.dim())) {
    vectors_.reserve(tokens_.size() * dim_);
    norms_.reserve(tokens_.size());
    for (const auto& t : tokens_) {
      Vector v = word_vector(model, t);
      norms_.push_back(norm(v));
      vectors_.insert(vectors_.end(), v.begin(), v.end());
    }
  }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::span<const double> vector(std::size_t i) const { return {vectors_.data() + i * dim_, dim_}; }
  double vector_norm(std::size_t i) const { return norms_[i]; }

  double cosine(std::size_t i, std::size_t j) const {
    return cosine_with_norms(vector(i), norms_[i], vector(j), norms_[j]);
  }

  /// Top `n` entries by cosine against entry `i`, excluding `i`. Ties go to
  /// the lexicographically smaller token. Entries with zero vectors are
  /// skipped.
  std::vector<std::pair<std::size_t, double>> query(std::size_t i, int n) const {
    if (n <= 0) return {};
    if (norms_[i] == 0.0) throw UndefinedSimilarity("query token '" + tokens_[i] + "' has a zero vector");
    std::vector<std::pair<std::size_t, double>> scored;
    scored.reserve(tokens_.size());
    for (std::size_t j = 0; j < tokens_.size(); ++j) {
      if (j == i || norms_[j] == 0.0) continue;
      scored.emplace_back(j, cosine(i, j));
    }
    auto better = [this](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return tokens_[a.first] < tokens_[b.first];
    };
    const auto k = std::min(scored.size(), static_cast<std::size_t>(n));
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(), better);
    scored.resize(k);
    return scored;
  }

 private:
  std::vector<std::string> tokens_;
  std::size_t dim_;
  std::vector<double> vectors_;
  std::vector<double> norms_;
};

/// The `n` in-vocabulary tokens most similar to `w` (which need not be in
/// the vocabulary), excluding `w`.
inline std::vector<Neighbor> top_neighbors(const EmbeddingModel& model, std::string_view w, int n) {
  if (n <= 0) return {};
  const Vector query = word_vector(model, w);
  const double query_norm = norm(query);
  if (query_norm == 0.0) throw UndefinedSimilarity("top_neighbors: zero vector for '" + std::string(w) + "'");
  std::vector<Neighbor> scored;
  scored.reserve(model.vocab().size());
  for (const auto& entry : model.vocab()) {
    if (entry.token == w) continue;
    const Vector v = word_vector(model, entry.token);
    const double v_norm = norm(v);
    if (v_norm == 0.0) continue;
    scored.push_back({entry.token, cosine_with_norms(query, query_norm, v, v_norm)});
  }
  auto better = [](const Neighbor& a, const Neighbor& b) {
    if (a.cosine != b.cosine) return a.cosine > b.cosine;
    return a.token < b.token;
  };
  const auto k = std::min(scored.size(), static_cast<std::size_t>(n));
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(), better);
  scored.resize(k);
  return scored;
}

}  // namespace varfam
