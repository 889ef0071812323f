#pragma once

// Candidate lexicon and variant-family induction in open (star) and strict
// (connected component) modes.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "varfam/corpus.hpp"
#include "varfam/embedding.hpp"
#include "varfam/error.hpp"
#include "varfam/family_id.hpp"
#include "varfam/ngrams.hpp"
#include "varfam/unicode.hpp"

namespace varfam {

enum class Mode { kOpen, kStrict };

inline std::string_view to_string(Mode m) { return m == Mode::kOpen ? "open" : "strict"; }

inline Mode parse_mode(std::string_view s) {
  if (s == "open") return Mode::kOpen;
  if (s == "strict") return Mode::kStrict;
  throw ConfigError("mode: expected \"open\" or \"strict\", got \"" + std::string(s) + "\"");
}

struct InductionConfig {
  int open_topn = 30;
  double open_th = 0.75;
  int strict_topn = 100;
  double strict_th = 0.73;
  int snn_min = 2;
  int degree_cap = 200;
  int min_len = 3;
  double jaccard_th = 0.2;

  void validate() const {
    auto require = [](bool ok, const char* key, const char* what) {
      if (!ok) throw ConfigError(std::string(key) + ": " + what);
    };
    require(open_topn >= 1, "open_TOPN", "must be >= 1");
    require(strict_topn >= 1, "strict_TOPN", "must be >= 1");
    require(open_th >= 0.0 && open_th <= 1.0, "open_TH", "must be in [0, 1]");
    require(strict_th >= 0.0 && strict_th <= 1.0, "strict_TH", "must be in [0, 1]");
    require(jaccard_th >= 0.0 && jaccard_th <= 1.0, "jaccard_th", "must be in [0, 1]");
    require(snn_min >= 2, "SNN_MIN", "must be >= 2");
    require(degree_cap >= 1, "DEGREE_CAP", "must be >= 1");
    require(min_len >= 1, "MIN_LEN", "must be >= 1");
  }

  bool operator==(const InductionConfig&) const = default;
};

/// A scored token pair with w < v.
struct VariantPair {
  std::string w;
  std::string v;
  double cosine = 0.0;
  double jaccard = 0.0;
  bool is_edge = false;

  bool operator==(const VariantPair&) const = default;
};

struct RawFamily {
  std::string family_id;
  std::vector<std::string> members;  // sorted
  std::vector<VariantPair> pairs;    // every unordered member pair, sorted by (w, v)
  Mode mode = Mode::kStrict;
  std::optional<std::string> seed;   // open mode only

  bool operator==(const RawFamily&) const = default;
};

/// Tokens with frequency >= min_count, at least min_len code points, and a
/// vocabulary entry in the model. Sorted.
inline std::vector<std::string> candidate_lexicon(const CorpusStats& stats, const EmbeddingModel& model, int min_count,
                                                  int min_len) {
  std::vector<std::string> lexicon;
  for (const auto& [token, s] : stats.tokens) {
    if (s.corpus_frequency < static_cast<std::uint64_t>(std::max(min_count, 0))) continue;
    if (unicode::length(token) < static_cast<std::size_t>(std::max(min_len, 0))) continue;
    if (!model.contains(token)) continue;
    lexicon.push_back(token);
  }
  if (lexicon.empty()) throw ConfigError("candidate lexicon is empty (check min_count / MIN_LEN)");
  return lexicon;  // std::map iteration is already sorted
}

/// |G(w) & G(v)| / |G(w) | G(v)| over boundary-wrapped n-gram sets; 0 when
/// both sets are empty.
inline double jaccard_of_sorted(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::size_t inter = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++inter;
      ++i;
      ++j;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline std::vector<std::string> sorted_ngram_set(std::string_view token, int min_n, int max_n) {
  auto grams = extract_ngrams(token, min_n, max_n);
  std::sort(grams.begin(), grams.end());
  grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
  return grams;
}

inline double jaccard(std::string_view w, std::string_view v, int min_n, int max_n) {
  return jaccard_of_sorted(sorted_ngram_set(w, min_n, max_n), sorted_ngram_set(v, min_n, max_n));
}

/// Cached vectors and n-gram sets for the candidate lexicon.
class PairScorer {
 public:
  PairScorer(const EmbeddingModel& model, std::vector<std::string> lexicon)
      : index_(model, std::move(lexicon)), min_n_(model.config().min_n), max_n_(model.config().max_n) {
    grams_.reserve(index_.size());
    for (const auto& t : index_.tokens()) grams_.push_back(sorted_ngram_set(t, min_n_, max_n_));
  }

  const NeighborIndex& index() const { return index_; }
  std::size_t size() const { return index_.size(); }
  const std::string& token(std::size_t i) const { return index_.tokens()[i]; }

  double cosine(std::size_t i, std::size_t j) const { return index_.cosine(i, j); }
  double jaccard(std::size_t i, std::size_t j) const { return jaccard_of_sorted(grams_[i], grams_[j]); }

  VariantPair score(std::size_t i, std::size_t j) const {
    if (token(j) < token(i)) std::swap(i, j);
    return {token(i), token(j), cosine(i, j), jaccard(i, j), false};
  }

 private:
  NeighborIndex index_;
  int min_n_;
  int max_n_;
  std::vector<std::vector<std::string>> grams_;
};

/// Inclusive thresholds on both scores.
inline bool passes(double cosine_value, double jaccard_value, double cosine_th, double jaccard_th) {
  return cosine_value >= cosine_th && jaccard_value >= jaccard_th;
}

inline std::optional<VariantPair> admit_pair(const EmbeddingModel& model, std::string_view w, std::string_view v,
                                             double cosine_th, double jaccard_th) {
  const auto& cfg = model.config();
  auto [a, b] = std::minmax(w, v);
  VariantPair pair{std::string(a), std::string(b), cosine(model, a, b), jaccard(a, b, cfg.min_n, cfg.max_n), false};
  if (!passes(pair.cosine, pair.jaccard, cosine_th, jaccard_th)) return std::nullopt;
  return pair;
}

namespace detail {

inline RawFamily assemble_family(const PairScorer& scorer, std::vector<std::size_t> members, Mode mode,
                                 std::optional<std::string> seed,
                                 const std::set<std::pair<std::size_t, std::size_t>>& edges) {
  std::sort(members.begin(), members.end(),
            [&](std::size_t a, std::size_t b) { return scorer.token(a) < scorer.token(b); });
  RawFamily f;
  f.mode = mode;
  f.seed = std::move(seed);
  for (auto m : members) f.members.push_back(scorer.token(m));
  for (std::size_t x = 0; x < members.size(); ++x) {
    for (std::size_t y = x + 1; y < members.size(); ++y) {
      VariantPair p = scorer.score(members[x], members[y]);
      p.is_edge = edges.contains(std::minmax(members[x], members[y]));
      f.pairs.push_back(std::move(p));
    }
  }
  f.family_id = make_family_id(f.members, f.seed);
  return f;
}

}  // namespace detail

/// One star per seed: the seed plus its admitted top-open_topn neighbors.
/// Stars are not merged; output follows seed order.
inline std::vector<RawFamily> induce_open(const PairScorer& scorer, const InductionConfig& cfg) {
  std::vector<RawFamily> families;
  for (std::size_t seed = 0; seed < scorer.size(); ++seed) {
    if (scorer.index().vector_norm(seed) == 0.0) continue;
    std::vector<std::size_t> members{seed};
    std::set<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& [j, cos] : scorer.index().query(seed, cfg.open_topn)) {
      if (!passes(cos, scorer.jaccard(seed, j), cfg.open_th, cfg.jaccard_th)) continue;
      members.push_back(j);
      edges.insert(std::minmax(seed, j));
    }
    if (members.size() < static_cast<std::size_t>(cfg.snn_min)) continue;
    families.push_back(detail::assemble_family(scorer, std::move(members), Mode::kOpen, scorer.token(seed), edges));
  }
  return families;
}

struct EdgeProposal {
  std::size_t seed = 0;
  std::size_t neighbor = 0;
  double cosine = 0.0;
  double jaccard = 0.0;
};

/// Admitted edges each seed proposes from its top-`topn` neighbors, per
/// seed in descending cosine order (ties: smaller token first).
inline std::vector<std::vector<EdgeProposal>> propose_edges(const PairScorer& scorer, int topn, double cosine_th,
                                                            double jaccard_th) {
  std::vector<std::vector<EdgeProposal>> proposals(scorer.size());
  for (std::size_t seed = 0; seed < scorer.size(); ++seed) {
    if (scorer.index().vector_norm(seed) == 0.0) continue;
    for (const auto& [j, cos] : scorer.index().query(seed, topn)) {
      const double jac = scorer.jaccard(seed, j);
      if (passes(cos, jac, cosine_th, jaccard_th)) proposals[seed].push_back({seed, j, cos, jac});
    }
  }
  return proposals;
}

/// Installs proposals seed by seed; an edge goes in only when both endpoints
/// are below `degree_cap`. Returns canonical (smaller index first) edges.
inline std::set<std::pair<std::size_t, std::size_t>> install_edges(
    const std::vector<std::vector<EdgeProposal>>& proposals, std::size_t vertex_count, int degree_cap) {
  std::set<std::pair<std::size_t, std::size_t>> edges;
  std::vector<int> degree(vertex_count, 0);
  for (const auto& per_seed : proposals) {
    for (const auto& p : per_seed) {
      auto key = std::minmax(p.seed, p.neighbor);
      if (edges.contains(key)) continue;
      if (degree[p.seed] >= degree_cap || degree[p.neighbor] >= degree_cap) continue;
      edges.insert(key);
      ++degree[p.seed];
      ++degree[p.neighbor];
    }
  }
  return edges;
}

/// Connected components of the degree-capped admitted-edge graph with at
/// least snn_min members, each carrying scores for all member pairs.
/// Sorted by family_id.
inline std::vector<RawFamily> induce_strict(const PairScorer& scorer, const InductionConfig& cfg) {
  const auto proposals = propose_edges(scorer, cfg.strict_topn, cfg.strict_th, cfg.jaccard_th);
  const auto edges = install_edges(proposals, scorer.size(), cfg.degree_cap);

  std::vector<std::vector<std::size_t>> adjacency(scorer.size());
  for (const auto& [a, b] : edges) {
    adjacency[a].push_back(b);
    adjacency[b].push_back(a);
  }
  std::vector<bool> visited(scorer.size(), false);
  std::vector<RawFamily> families;
  for (std::size_t start = 0; start < scorer.size(); ++start) {
    if (visited[start] || adjacency[start].empty()) continue;
    std::vector<std::size_t> component;
    std::vector<std::size_t> stack{start};
    visited[start] = true;
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      component.push_back(u);
      for (auto v : adjacency[u]) {
        if (!visited[v]) {
          visited[v] = true;
          stack.push_back(v);
        }
      }
    }
    if (component.size() < static_cast<std::size_t>(cfg.snn_min)) continue;
    families.push_back(detail::assemble_family(scorer, std::move(component), Mode::kStrict, std::nullopt, edges));
  }
  std::sort(families.begin(), families.end(),
            [](const RawFamily& a, const RawFamily& b) { return a.family_id < b.family_id; });
  return families;
}

inline std::vector<RawFamily> induce(const EmbeddingModel& model, const std::vector<std::string>& lexicon,
                                     const InductionConfig& cfg, Mode mode) {
  cfg.validate();
  if (lexicon.empty()) throw ConfigError("candidate lexicon is empty");
  PairScorer scorer(model, lexicon);
  return mode == Mode::kOpen ? induce_open(scorer, cfg) : induce_strict(scorer, cfg);
}

}  // namespace varfam
