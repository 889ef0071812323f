#pragma once

// Run configuration: one JSON object whose keys are the pipeline
// parameters. Capitalized keys (open_TOPN, SNN_MIN, ...) may also be
// written in lowercase. Unknown keys are rejected.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "varfam/corpus.hpp"
#include "varfam/embedding.hpp"
#include "varfam/error.hpp"
#include "varfam/family_id.hpp"
#include "varfam/induction.hpp"
#include "varfam/scoring.hpp"

namespace varfam {

struct RunConfig {
  IngestConfig ingest;
  EmbeddingConfig embedding;
  InductionConfig induction;
  ScoringConfig scoring;
  Mode mode = Mode::kStrict;
  int workers = 1;
  std::string corpus;
  std::string model;
  std::string out;

  void validate() const {
    if (ingest.text_field.empty()) throw ConfigError("text_field: must not be empty");
    embedding.validate();
    induction.validate();
    scoring.validate();
    if (workers < 1) throw ConfigError("workers: must be >= 1");
  }

  /// Fully resolved parameters. Paths are left out when `include_paths` is
  /// false so that the echo hash only depends on what shapes the results.
  nlohmann::ordered_json to_json(bool include_paths = true) const {
    nlohmann::ordered_json j;
    j["lowercase"] = ingest.lowercase;
    j["dimension"] = ingest.dimension_field ? nlohmann::ordered_json(*ingest.dimension_field) : nlohmann::ordered_json(nullptr);
    j["text_field"] = ingest.text_field;
    j["vector_size"] = embedding.vector_size;
    j["window"] = embedding.window;
    j["min_count"] = embedding.min_count;
    j["epochs"] = embedding.epochs;
    j["sg"] = embedding.sg ? 1 : 0;
    j["min_n"] = embedding.min_n;
    j["max_n"] = embedding.max_n;
    j["open_TOPN"] = induction.open_topn;
    j["open_TH"] = induction.open_th;
    j["strict_TOPN"] = induction.strict_topn;
    j["strict_TH"] = induction.strict_th;
    j["SNN_MIN"] = induction.snn_min;
    j["DEGREE_CAP"] = induction.degree_cap;
    j["MIN_LEN"] = induction.min_len;
    j["MIN_USERS"] = scoring.min_users;
    j["MAX_FREQ_RATIO"] = scoring.max_freq_ratio;
    j["jaccard_th"] = induction.jaccard_th;
    j["bucket_count"] = embedding.bucket_count;
    j["negative_samples"] = embedding.negative_samples;
    j["learning_rate"] = embedding.initial_learning_rate;
    j["subsample_threshold"] = embedding.subsample_threshold;
    j["seed"] = embedding.rng_seed;
    j["mode"] = std::string(to_string(mode));
    if (include_paths) {
      j["workers"] = workers;
      j["corpus"] = corpus;
      j["model"] = model;
      j["out"] = out;
    }
    return j;
  }

  /// Short hash of the result-shaping parameters, echoed into every family.
  std::string echo_hash() const { return sha256_hex(to_json(false).dump()).substr(0, 16); }
};

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline int as_int(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError(key + ": expected an integer");
  const auto x = v.get<std::int64_t>();
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    throw ConfigError(key + ": integer out of range");
  }
  return static_cast<int>(x);
}

inline double as_real(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError(key + ": expected a number");
  return v.get<double>();
}

inline bool as_bool(const nlohmann::json& v, const std::string& key) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number_integer() && (v.get<std::int64_t>() == 0 || v.get<std::int64_t>() == 1)) return v.get<std::int64_t>() == 1;
  throw ConfigError(key + ": expected a boolean");
}

inline std::string as_string(const nlohmann::json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError(key + ": expected a string");
  return v.get<std::string>();
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
  using namespace detail;
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  RunConfig c;
  using Setter = std::function<void(const nlohmann::json&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"lowercase", [&](auto& v, auto& k) { c.ingest.lowercase = as_bool(v, k); }},
      {"dimension",
       [&](auto& v, auto& k) {
         if (v.is_null()) {
           c.ingest.dimension_field.reset();
         } else {
           auto s = as_string(v, k);
           if (s.empty()) {
             c.ingest.dimension_field.reset();
           } else {
             c.ingest.dimension_field = s;
           }
         }
       }},
      {"text_field", [&](auto& v, auto& k) { c.ingest.text_field = as_string(v, k); }},
      {"vector_size", [&](auto& v, auto& k) { c.embedding.vector_size = as_int(v, k); }},
      {"window", [&](auto& v, auto& k) { c.embedding.window = as_int(v, k); }},
      {"min_count", [&](auto& v, auto& k) { c.embedding.min_count = as_int(v, k); }},
      {"epochs", [&](auto& v, auto& k) { c.embedding.epochs = as_int(v, k); }},
      {"sg", [&](auto& v, auto& k) { c.embedding.sg = as_bool(v, k); }},
      {"min_n", [&](auto& v, auto& k) { c.embedding.min_n = as_int(v, k); }},
      {"max_n", [&](auto& v, auto& k) { c.embedding.max_n = as_int(v, k); }},
      {"open_topn", [&](auto& v, auto& k) { c.induction.open_topn = as_int(v, k); }},
      {"open_th", [&](auto& v, auto& k) { c.induction.open_th = as_real(v, k); }},
      {"strict_topn", [&](auto& v, auto& k) { c.induction.strict_topn = as_int(v, k); }},
      {"strict_th", [&](auto& v, auto& k) { c.induction.strict_th = as_real(v, k); }},
      {"snn_min", [&](auto& v, auto& k) { c.induction.snn_min = c.scoring.snn_min = as_int(v, k); }},
      {"degree_cap", [&](auto& v, auto& k) { c.induction.degree_cap = as_int(v, k); }},
      {"min_len", [&](auto& v, auto& k) { c.induction.min_len = as_int(v, k); }},
      {"min_users", [&](auto& v, auto& k) { c.scoring.min_users = as_int(v, k); }},
      {"max_freq_ratio", [&](auto& v, auto& k) { c.scoring.max_freq_ratio = as_real(v, k); }},
      {"jaccard_th", [&](auto& v, auto& k) { c.induction.jaccard_th = as_real(v, k); }},
      {"bucket_count",
       [&](auto& v, auto& k) {
         const int b = as_int(v, k);
         if (b < 1) throw ConfigError(k + ": must be >= 1");
         c.embedding.bucket_count = static_cast<std::uint32_t>(b);
       }},
      {"negative_samples", [&](auto& v, auto& k) { c.embedding.negative_samples = as_int(v, k); }},
      {"learning_rate", [&](auto& v, auto& k) { c.embedding.initial_learning_rate = as_real(v, k); }},
      {"subsample_threshold", [&](auto& v, auto& k) { c.embedding.subsample_threshold = as_real(v, k); }},
      {"seed",
       [&](auto& v, auto& k) {
         if (!v.is_number_unsigned() && !(v.is_number_integer() && v.template get<std::int64_t>() >= 0)) {
           throw ConfigError(k + ": expected a non-negative integer");
         }
         c.embedding.rng_seed = v.template get<std::uint64_t>();
       }},
      {"workers", [&](auto& v, auto& k) { c.workers = as_int(v, k); }},
      {"mode", [&](auto& v, auto& k) { c.mode = parse_mode(as_string(v, k)); }},
      {"corpus", [&](auto& v, auto& k) { c.corpus = as_string(v, k); }},
      {"model", [&](auto& v, auto& k) { c.model = as_string(v, k); }},
      {"out", [&](auto& v, auto& k) { c.out = as_string(v, k); }},
  };

  std::map<std::string, std::string> seen;  // normalized -> spelling used
  for (const auto& [key, value] : j.items()) {
    const std::string norm = lower(key);
    auto it = setters.find(norm);
    if (it == setters.end()) throw ConfigError("unknown config key: " + key);
    if (auto [pos, inserted] = seen.emplace(norm, key); !inserted) {
      throw ConfigError("config key given twice: " + pos->second + " and " + key);
    }
    it->second(value, key);
  }
  c.validate();
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path.string());
  return parse_config(j);
}

}  // namespace varfam
