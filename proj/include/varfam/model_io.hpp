#pragma once

// Binary model files and .vec text export.
//
// Binary layout, all integers and floats little-endian:
//   magic "VFEMB\0\0\0" (8 bytes), u32 format version
//   config: i32 vector_size, window, min_count, epochs, sg, min_n, max_n;
//           u32 bucket_count; i32 negative_samples;
//           f64 initial_learning_rate, subsample_threshold; u64 rng_seed
//   u32 vocabulary size, then per entry: u32 byte length, UTF-8 bytes,
//           u64 count
//   word vectors: vocabulary size x vector_size f32
//   u32 stored n-gram rows K, K x u32 bucket ids (ascending),
//           K x vector_size f32
// N-gram buckets not stored hold their deterministic initial values.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "varfam/embedding.hpp"
#include "varfam/error.hpp"
#include "varfam/fs.hpp"

namespace varfam {

inline constexpr std::array<char, 8> kModelMagic = {'V', 'F', 'E', 'M', 'B', '\0', '\0', '\0'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

namespace detail {

template <class T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(bytes.data(), bytes.size());
}

template <class T>
T get_le(std::istream& in) {
  std::array<char, sizeof(T)> bytes{};
  if (!in.read(bytes.data(), bytes.size())) throw DataError("model file truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

inline void put_floats(std::ostream& out, const std::vector<float>& values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)));
  } else {
    for (float v : values) put_le(out, v);
  }
}

inline void get_floats(std::istream& in, std::vector<float>& values) {
  if constexpr (std::endian::native == std::endian::little) {
    if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)))) {
      throw DataError("model file truncated");
    }
  } else {
    for (float& v : values) v = get_le<float>(in);
  }
}

}  // namespace detail

inline void write_model(std::ostream& out, const EmbeddingModel& model) {
  using detail::put_le;
  const auto& c = model.config();
  out.write(kModelMagic.data(), kModelMagic.size());
  put_le<std::uint32_t>(out, kModelFormatVersion);
  put_le<std::int32_t>(out, c.vector_size);
  put_le<std::int32_t>(out, c.window);
  put_le<std::int32_t>(out, c.min_count);
  put_le<std::int32_t>(out, c.epochs);
  put_le<std::int32_t>(out, c.sg ? 1 : 0);
  put_le<std::int32_t>(out, c.min_n);
  put_le<std::int32_t>(out, c.max_n);
  put_le<std::uint32_t>(out, c.bucket_count);
  put_le<std::int32_t>(out, c.negative_samples);
  put_le<double>(out, c.initial_learning_rate);
  put_le<double>(out, c.subsample_threshold);
  put_le<std::uint64_t>(out, c.rng_seed);

  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.vocab().size()));
  for (const auto& e : model.vocab()) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.token.size()));
    out.write(e.token.data(), static_cast<std::streamsize>(e.token.size()));
    put_le<std::uint64_t>(out, e.count);
  }
  detail::put_floats(out, model.word_vectors().data());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.ngram_buckets().size()));
  for (auto b : model.ngram_buckets()) put_le<std::uint32_t>(out, b);
  detail::put_floats(out, model.ngram_rows().data());
}

inline EmbeddingModel read_model(std::istream& in) {
  using detail::get_le;
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kModelMagic) throw DataError("not a model file (bad magic)");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kModelFormatVersion) {
    throw DataError("unsupported model format version " + std::to_string(version));
  }
  EmbeddingConfig c;
  c.vector_size = get_le<std::int32_t>(in);
  c.window = get_le<std::int32_t>(in);
  c.min_count = get_le<std::int32_t>(in);
  c.epochs = get_le<std::int32_t>(in);
  c.sg = get_le<std::int32_t>(in) != 0;
  c.min_n = get_le<std::int32_t>(in);
  c.max_n = get_le<std::int32_t>(in);
  c.bucket_count = get_le<std::uint32_t>(in);
  c.negative_samples = get_le<std::int32_t>(in);
  c.initial_learning_rate = get_le<double>(in);
  c.subsample_threshold = get_le<double>(in);
  c.rng_seed = get_le<std::uint64_t>(in);
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("model file has invalid config: ") + e.what());
  }
  const auto dim = static_cast<std::size_t>(c.vector_size);

  const auto vocab_size = get_le<std::uint32_t>(in);
  std::vector<VocabEntry> vocab(vocab_size);
  for (auto& e : vocab) {
    const auto len = get_le<std::uint32_t>(in);
    e.token.resize(len);
    if (!in.read(e.token.data(), len)) throw DataError("model file truncated");
    e.count = get_le<std::uint64_t>(in);
  }
  Matrix words(vocab_size, dim);
  detail::get_floats(in, words.data());
  const auto k = get_le<std::uint32_t>(in);
  std::vector<std::uint32_t> buckets(k);
  for (auto& b : buckets) b = get_le<std::uint32_t>(in);
  Matrix ngrams(k, dim);
  detail::get_floats(in, ngrams.data());
  return EmbeddingModel(c, std::move(vocab), std::move(words), std::move(buckets), std::move(ngrams));
}

inline void save_model(const std::filesystem::path& path, const EmbeddingModel& model) {
  write_atomically(path, [&](std::ostream& out) { write_model(out, model); });
}

inline EmbeddingModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file: " + path.string());
  return read_model(in);
}

/// Text export: header "<count> <dim>", then one line per vocabulary token
/// with its composed vector.
inline void write_vec(std::ostream& out, const EmbeddingModel& model) {
  out << model.vocab().size() << ' ' << model.dim() << '\n';
  char buf[32];
  for (const auto& e : model.vocab()) {
    out << e.token;
    for (double x : word_vector(model, e.token)) {
      std::snprintf(buf, sizeof buf, " %.6g", x);
      out << buf;
    }
    out << '\n';
  }
}

inline void export_vec(const std::filesystem::path& path, const EmbeddingModel& model) {
  write_atomically(path, [&](std::ostream& out) { write_vec(out, model); });
}

}  // namespace varfam
