#pragma once

// Synthetic corpora with planted variant families, and pairwise recovery
// metrics against the planted ground truth.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "varfam/error.hpp"
#include "varfam/fs.hpp"
#include "varfam/induction.hpp"
#include "varfam/unicode.hpp"

namespace varfam::bench {

enum class Applicability { kAnywhere, kWordFinal, kVowelNucleus };

struct PerturbationRule {
  std::string name;
  std::string pattern;
  std::string replacement;
  Applicability applicability = Applicability::kAnywhere;
};

inline bool is_vowel(char32_t c) {
  static constexpr std::u32string_view kVowels = U"aeiouyäëéèöüàâêîôûï";
  return kVowels.find(c) != std::u32string_view::npos;
}

/// Every result of applying `rule` at one matching site of `token`.
inline std::vector<std::string> apply_rule(std::string_view token, const PerturbationRule& rule) {
  if (rule.pattern.empty() || rule.pattern == rule.replacement) {
    throw ConfigError("perturbation rule '" + rule.name + "' does not change its input");
  }
  const std::u32string word = unicode::decode(token);
  const std::u32string pat = unicode::decode(rule.pattern);
  const std::u32string rep = unicode::decode(rule.replacement);
  std::vector<std::string> out;
  for (std::size_t pos = word.find(pat); pos != std::u32string::npos; pos = word.find(pat, pos + 1)) {
    const std::size_t end = pos + pat.size();
    if (rule.applicability == Applicability::kWordFinal && end != word.size()) continue;
    if (rule.applicability == Applicability::kVowelNucleus) {
      // the match must be a whole vowel run
      if (!std::all_of(pat.begin(), pat.end(), is_vowel)) continue;
      if (pos > 0 && is_vowel(word[pos - 1])) continue;
      if (end < word.size() && is_vowel(word[end])) continue;
    }
    std::u32string changed = word.substr(0, pos) + rep + word.substr(end);
    if (changed.empty()) continue;
    auto s = unicode::encode(changed);
    if (s != token && std::find(out.begin(), out.end(), s) == out.end()) out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<PerturbationRule> default_rules() {
  using A = Applicability;
  return {
      {"ae_to_a", "ä", "a", A::kAnywhere},          {"ae_to_e", "ä", "e", A::kAnywhere},
      {"ei_acute_to_grave", "éi", "èi", A::kAnywhere}, {"ei_acute_to_plain", "éi", "ei", A::kAnywhere},
      {"n_rule", "n", "", A::kWordFinal},           {"ue_to_ua", "ue", "ua", A::kVowelNucleus},
      {"ue_to_oa", "ue", "oa", A::kVowelNucleus},   {"a_lengthening", "a", "aa", A::kVowelNucleus},
      {"final_t_doubling", "t", "tt", A::kWordFinal}, {"e_diaeresis_drop", "ë", "e", A::kAnywhere},
      {"ie_to_i", "ie", "i", A::kVowelNucleus},     {"ou_to_o", "ou", "o", A::kVowelNucleus},
  };
}

struct PlantedFamily {
  std::string id;
  std::string lemma;
  std::vector<std::string> variants;  // derived forms, lemma excluded
  std::vector<std::size_t> context_template_ids;

  /// Lemma followed by variants.
  std::vector<std::string> forms() const {
    std::vector<std::string> f{lemma};
    f.insert(f.end(), variants.begin(), variants.end());
    return f;
  }
};

struct GeneratorSpec {
  int num_families = 20;
  int min_forms = 3;  // surface forms per family, lemma included
  int max_forms = 5;
  int users = 200;
  int records = 50'000;
  double zipf_exponent = 1.0;
  std::uint64_t rng_seed = 7;
  int distractors = 1500;
  int decoys_per_family = 1;  // look-alike words used in unrelated contexts
  double family_record_share = 0.5;
  double preference_strength = 0.8;
  double min_lemma_jaccard = 0.25;  // every variant vs its lemma, boundary-wrapped 3..7-grams

  void validate() const {
    auto require = [](bool ok, const std::string& what) {
      if (!ok) throw ConfigError("generator spec: " + what);
    };
    require(num_families >= 1, "num_families must be >= 1");
    require(min_forms >= 2, "variants_per_family must be >= 2");
    require(max_forms >= min_forms, "variants_per_family range is empty");
    require(users >= 1, "users must be >= 1");
    require(records >= 1, "records must be >= 1");
    require(zipf_exponent >= 0.0, "zipf_exponent must be >= 0");
    require(distractors >= 1, "distractors must be >= 1");
    require(decoys_per_family >= 0, "decoys_per_family must be >= 0");
    require(family_record_share > 0.0 && family_record_share <= 1.0, "family_record_share must be in (0, 1]");
    require(preference_strength >= 0.0 && preference_strength <= 1.0, "preference_strength must be in [0, 1]");
  }
};

/// Reads a generator spec. `variants_per_family` is an integer or a
/// two-element [min, max] array.
inline GeneratorSpec parse_generator_spec(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("generator spec: expected a JSON object");
  GeneratorSpec s;
  for (const auto& [key, v] : j.items()) {
    auto need_int = [&]() {
      if (!v.is_number_integer()) throw ConfigError("generator spec: " + key + " must be an integer");
      return v.get<int>();
    };
    auto need_real = [&]() {
      if (!v.is_number()) throw ConfigError("generator spec: " + key + " must be a number");
      return v.get<double>();
    };
    if (key == "num_families") {
      s.num_families = need_int();
    } else if (key == "variants_per_family") {
      if (v.is_array() && v.size() == 2 && v[0].is_number_integer() && v[1].is_number_integer()) {
        s.min_forms = v[0].get<int>();
        s.max_forms = v[1].get<int>();
      } else {
        s.min_forms = s.max_forms = need_int();
      }
    } else if (key == "users") {
      s.users = need_int();
    } else if (key == "records") {
      s.records = need_int();
    } else if (key == "zipf_exponent") {
      s.zipf_exponent = need_real();
    } else if (key == "rng_seed" || key == "seed") {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw ConfigError("generator spec: " + key + " must be >= 0");
      s.rng_seed = v.get<std::uint64_t>();
    } else if (key == "distractors") {
      s.distractors = need_int();
    } else if (key == "decoys_per_family") {
      s.decoys_per_family = need_int();
    } else if (key == "family_record_share") {
      s.family_record_share = need_real();
    } else if (key == "preference_strength") {
      s.preference_strength = need_real();
    } else if (key == "min_lemma_jaccard") {
      s.min_lemma_jaccard = need_real();
    } else {
      throw ConfigError("generator spec: unknown key " + key);
    }
  }
  s.validate();
  return s;
}

namespace detail {

/// Deterministic sampling helpers over mt19937_64 (whose output sequence is
/// fixed by the standard, unlike std:: distributions).
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }
  bool chance(double p) { return uniform() < p; }

  /// Index drawn from cumulative weights.
  std::size_t pick(const std::vector<double>& cumulative) {
    const double u = uniform() * cumulative.back();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return std::min(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
  }

  template <class T>
  const T& choose(const std::vector<T>& items) {
    return items[below(items.size())];
  }

 private:
  std::mt19937_64 rng_;
};

inline std::vector<double> cumulative(const std::vector<double>& weights) {
  std::vector<double> c(weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) c[i] = (acc += weights[i]);
  return c;
}

inline std::vector<double> zipf_weights(std::size_t n, double exponent) {
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k) w[k] = 1.0 / std::pow(static_cast<double>(k + 1), exponent);
  return w;
}

/// Rejects words orthographically close to anything already registered
/// outside their own group.
class Lexicon {
 public:
  bool admissible(const std::string& word, double max_jaccard, int group) const {
    if (words_.contains(word)) return false;
    const auto grams = sorted_ngram_set(word, 3, 7);
    std::unordered_set<std::size_t> candidates;
    for (const auto& g : grams) {
      if (g.size() > 4 && unicode::length(g) != 3) continue;
      if (auto it = by_trigram_.find(g); it != by_trigram_.end()) candidates.insert(it->second.begin(), it->second.end());
    }
    for (auto id : candidates) {
      if (groups_[id] == group && group >= 0) continue;
      if (jaccard_of_sorted(grams, grams_[id]) >= max_jaccard) return false;
    }
    return true;
  }

  void add(const std::string& word, int group) {
    const std::size_t id = grams_.size();
    words_.insert(word);
    grams_.push_back(sorted_ngram_set(word, 3, 7));
    groups_.push_back(group);
    for (const auto& g : grams_.back()) {
      if (unicode::length(g) == 3) by_trigram_[g].push_back(id);
    }
  }

 private:
  std::unordered_set<std::string> words_;
  std::vector<std::vector<std::string>> grams_;
  std::vector<int> groups_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_trigram_;
};

inline const std::vector<std::string>& onsets() {
  static const std::vector<std::string> v = {"b",  "d",  "f",  "g",  "h",  "k",   "l",   "m",  "n",  "p",
                                             "r",  "s",  "t",  "w",  "z",  "sch", "ch",  "kr", "gr", "fl",
                                             "st", "br", "dr", "tr", "pl", "bl",  "kl",  "j",  "v",  "schw"};
  return v;
}
inline const std::vector<std::string>& nuclei() {
  static const std::vector<std::string> v = {"a", "e", "i", "o", "u", "ä", "éi", "ue", "ie", "ou", "ë", "ei", "au"};
  return v;
}
inline const std::vector<std::string>& codas() {
  static const std::vector<std::string> v = {"", "", "", "n", "r", "l", "t", "s", "ch", "ng", "m", "nt", "st", "ck"};
  return v;
}

inline std::string random_word(Sampler& rng, int syllables) {
  std::string w;
  for (int i = 0; i < syllables; ++i) {
    w += rng.choose(onsets());
    w += rng.choose(nuclei());
    w += rng.choose(codas());
  }
  return w;
}

}  // namespace detail

/// High-frequency short words shared by all records.
inline const std::vector<std::string>& function_words() {
  static const std::vector<std::string> v = {"ech", "du", "hien", "si", "mir", "dir", "ass", "net", "awer",
                                             "dat", "fir", "vun", "op", "an", "et", "wéi", "ons", "gëtt"};
  return v;
}

struct GeneratedCorpus {
  std::vector<PlantedFamily> families;
  std::vector<std::string> distractors;
  std::vector<std::string> decoys;  // also listed among the distractors
  std::vector<std::vector<std::string>> templates;  // slot marked by an empty string
  std::size_t records = 0;
};

/// Writes the JSONL corpus to `corpus_out` ({"text": ..., "user_id": ...}
/// per line) and returns the planted families. Deterministic in the spec.
inline GeneratedCorpus generate_corpus(const GeneratorSpec& spec, std::ostream& corpus_out,
                                       const std::vector<PerturbationRule>& rules = default_rules()) {
  spec.validate();
  detail::Sampler rng(spec.rng_seed);
  detail::Lexicon lexicon;
  GeneratedCorpus out;
  constexpr double kForeignJaccard = 0.2;

  for (const auto& w : function_words()) lexicon.add(w, -1);

  // Planted families: lemma plus rule-derived variants.
  for (int f = 0; f < spec.num_families; ++f) {
    const int forms = spec.min_forms + static_cast<int>(rng.below(static_cast<std::size_t>(spec.max_forms - spec.min_forms + 1)));
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10'000) throw ConfigError("generator: cannot build enough distinct variants");
      std::string lemma = detail::random_word(rng, 3);
      const auto len = unicode::length(lemma);
      if (len < 8 || len > 13 || !lexicon.admissible(lemma, kForeignJaccard, f)) continue;
      std::vector<std::string> candidates;
      for (const auto& rule : rules) {
        for (auto& v : apply_rule(lemma, rule)) {
          if (std::find(candidates.begin(), candidates.end(), v) == candidates.end() &&
              jaccard(lemma, v, 3, 7) >= spec.min_lemma_jaccard && lexicon.admissible(v, kForeignJaccard, f)) {
            candidates.push_back(std::move(v));
          }
        }
      }
      if (candidates.size() < static_cast<std::size_t>(forms - 1)) continue;
      PlantedFamily fam;
      fam.id = "F" + std::string(f < 10 ? "0" : "") + std::to_string(f);
      fam.lemma = lemma;
      while (fam.variants.size() < static_cast<std::size_t>(forms - 1)) {
        const auto k = rng.below(candidates.size());
        fam.variants.push_back(candidates[k]);
        candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(k));
      }
      for (const auto& w : fam.forms()) lexicon.add(w, f);
      out.families.push_back(std::move(fam));
      break;
    }
  }

  auto fresh_word = [&](int min_syl, int max_syl) {
    for (;;) {
      std::string w = detail::random_word(rng, min_syl + static_cast<int>(rng.below(static_cast<std::size_t>(max_syl - min_syl + 1))));
      if (unicode::length(w) >= 3 && lexicon.admissible(w, kForeignJaccard, -1)) {
        lexicon.add(w, -1);
        return w;
      }
    }
  };

  // Context templates: three per family over family-specific context words.
  for (auto& fam : out.families) {
    std::vector<std::string> context;
    for (int i = 0; i < 5; ++i) context.push_back(fresh_word(1, 2));
    for (int t = 0; t < 3; ++t) {
      std::vector<std::string> tpl;
      const std::size_t len = 4 + rng.below(3);
      const std::size_t slot = rng.below(len);
      for (std::size_t i = 0; i < len; ++i) {
        if (i == slot) {
          tpl.emplace_back();
        } else if (rng.chance(0.7)) {
          tpl.push_back(rng.choose(context));
        } else {
          tpl.push_back(rng.choose(function_words()));
        }
      }
      fam.context_template_ids.push_back(out.templates.size());
      out.templates.push_back(std::move(tpl));
    }
  }

  for (int i = 0; i < spec.distractors; ++i) out.distractors.push_back(fresh_word(1, 3));

  // Decoys share much of a lemma's spelling but none of its contexts; they
  // take mid-frequency distractor ranks so that they survive min_count.
  for (std::size_t f = 0; f < out.families.size(); ++f) {
    const auto& fam = out.families[f];
    for (int d = 0, attempt = 0; d < spec.decoys_per_family && attempt < 1000; ++attempt) {
      std::string w = attempt % 2 == 0 ? fam.lemma + detail::random_word(rng, 1)
                                       : detail::random_word(rng, 1) + fam.lemma;
      const double j = jaccard(fam.lemma, w, 3, 7);
      if (j < 0.3 || j > 0.7 || !lexicon.admissible(w, kForeignJaccard, static_cast<int>(f))) continue;
      lexicon.add(w, static_cast<int>(f));
      out.decoys.push_back(w);
      ++d;
    }
  }
  for (std::size_t k = 0; k < out.decoys.size(); ++k) {
    const std::size_t rank = std::min(out.distractors.size(), 20 + 10 * k);
    out.distractors.insert(out.distractors.begin() + static_cast<std::ptrdiff_t>(rank), out.decoys[k]);
  }

  // Per-user preferred form for each family, favoring earlier forms.
  const auto n_fam = out.families.size();
  std::vector<std::vector<std::size_t>> preferred(static_cast<std::size_t>(spec.users), std::vector<std::size_t>(n_fam));
  std::vector<std::vector<double>> form_cdf(n_fam);
  for (std::size_t f = 0; f < n_fam; ++f) {
    form_cdf[f] = detail::cumulative(detail::zipf_weights(out.families[f].forms().size(), 1.0));
  }
  for (auto& user : preferred) {
    for (std::size_t f = 0; f < n_fam; ++f) user[f] = rng.pick(form_cdf[f]);
  }

  const auto family_cdf = detail::cumulative(detail::zipf_weights(n_fam, spec.zipf_exponent));
  const auto distractor_cdf = detail::cumulative(detail::zipf_weights(out.distractors.size(), spec.zipf_exponent));
  std::vector<std::vector<std::string>> forms(n_fam);
  for (std::size_t f = 0; f < n_fam; ++f) forms[f] = out.families[f].forms();

  auto distractor = [&]() -> const std::string& {
    return rng.chance(0.25) ? rng.choose(function_words()) : out.distractors[rng.pick(distractor_cdf)];
  };

  for (int r = 0; r < spec.records; ++r) {
    const auto user = rng.below(static_cast<std::size_t>(spec.users));
    std::vector<std::string> words;
    if (rng.chance(spec.family_record_share)) {
      const auto f = rng.pick(family_cdf);
      const auto& fam = out.families[f];
      const std::size_t form = rng.chance(spec.preference_strength) ? preferred[user][f] : rng.below(forms[f].size());
      const auto& tpl = out.templates[fam.context_template_ids[rng.below(fam.context_template_ids.size())]];
      for (const auto& w : tpl) words.push_back(w.empty() ? forms[f][form] : w);
      for (std::size_t k = rng.below(3); k > 0; --k) words.push_back(distractor());
    } else {
      const std::size_t len = 5 + rng.below(8);
      for (std::size_t k = 0; k < len; ++k) words.push_back(distractor());
    }

    std::string text;
    if (rng.chance(0.05)) text += "@user" + std::to_string(rng.below(static_cast<std::size_t>(spec.users))) + " ";
    for (std::size_t k = 0; k < words.size(); ++k) {
      if (k) text += ' ';
      std::string w = words[k];
      if (k == 0 && !w.empty() && w[0] >= 'a' && w[0] <= 'z' && rng.chance(0.5)) w[0] = static_cast<char>(w[0] - 'a' + 'A');
      text += w;
    }
    text += rng.chance(0.5) ? "." : (rng.chance(0.5) ? "!" : "");

    nlohmann::ordered_json line = {{"text", text}, {"user_id", "u" + std::to_string(user)}};
    corpus_out << line.dump() << '\n';
  }
  out.records = static_cast<std::size_t>(spec.records);
  return out;
}

/// Ground truth as {"<family id>": [forms...]}.
inline nlohmann::ordered_json truth_to_json(const std::vector<PlantedFamily>& families) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& f : families) j[f.id] = f.forms();
  return j;
}

inline std::vector<std::vector<std::string>> truth_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("truth file: expected a JSON object");
  std::vector<std::vector<std::string>> out;
  for (const auto& [id, members] : j.items()) {
    if (!members.is_array()) throw DataError("truth file: family " + id + " is not an array");
    out.push_back(members.get<std::vector<std::string>>());
  }
  return out;
}

struct RecoveryMetrics {
  double pair_precision = 0.0;
  double pair_recall = 0.0;
  double pair_f1 = 0.0;
  double family_exact_match_rate = 0.0;
  std::size_t predicted_pairs = 0;
  std::size_t true_pairs = 0;
  std::size_t true_positives = 0;
  std::size_t unlearnable_true_pairs = 0;
  std::size_t evaluable_families = 0;
  std::size_t exact_matches = 0;

  nlohmann::ordered_json to_json() const {
    return {{"pair_precision", pair_precision},
            {"pair_recall", pair_recall},
            {"pair_f1", pair_f1},
            {"family_exact_match_rate", family_exact_match_rate},
            {"predicted_pairs", predicted_pairs},
            {"true_pairs", true_pairs},
            {"true_positives", true_positives},
            {"unlearnable_true_pairs", unlearnable_true_pairs},
            {"evaluable_families", evaluable_families},
            {"exact_matches", exact_matches}};
  }
};

using Learnable = std::function<bool(const std::string&)>;

namespace detail {

using PairSet = std::set<std::pair<std::string, std::string>>;

inline void add_pairs(const std::vector<std::string>& members, PairSet& pairs) {
  for (std::size_t i = 0; i < members.size(); ++i) {
    for (std::size_t j = i + 1; j < members.size(); ++j) {
      if (members[i] == members[j]) continue;
      pairs.insert(std::minmax(members[i], members[j]));
    }
  }
}

}  // namespace detail

/// Pairwise precision/recall/F1 of found families against planted ones.
/// Pairs touching an unlearnable token (below min_count) are excluded from
/// both sides; excluded true pairs are counted separately. A planted family
/// is exactly matched when some found family equals its learnable members
/// (families with fewer than two learnable members are not evaluable).
inline RecoveryMetrics evaluate_recovery(const std::vector<std::vector<std::string>>& found,
                                         const std::vector<std::vector<std::string>>& truth,
                                         const Learnable& learnable = nullptr) {
  auto ok = [&](const std::string& t) { return !learnable || learnable(t); };
  RecoveryMetrics m;

  detail::PairSet predicted;
  std::set<std::vector<std::string>> found_sets;
  for (const auto& f : found) {
    std::vector<std::string> kept;
    for (const auto& t : f) {
      if (ok(t)) kept.push_back(t);
    }
    std::sort(kept.begin(), kept.end());
    kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
    detail::add_pairs(kept, predicted);
    found_sets.insert(std::move(kept));
  }

  detail::PairSet true_pairs;
  for (const auto& family : truth) {
    detail::PairSet all;
    detail::add_pairs(family, all);
    std::vector<std::string> kept;
    for (const auto& t : family) {
      if (ok(t)) kept.push_back(t);
    }
    std::sort(kept.begin(), kept.end());
    kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
    detail::PairSet learnable_pairs;
    detail::add_pairs(kept, learnable_pairs);
    m.unlearnable_true_pairs += all.size() - learnable_pairs.size();
    true_pairs.insert(learnable_pairs.begin(), learnable_pairs.end());
    if (kept.size() >= 2) {
      ++m.evaluable_families;
      if (found_sets.contains(kept)) ++m.exact_matches;
    }
  }

  m.predicted_pairs = predicted.size();
  m.true_pairs = true_pairs.size();
  for (const auto& p : predicted) {
    if (true_pairs.contains(p)) ++m.true_positives;
  }
  const auto tp = static_cast<double>(m.true_positives);
  m.pair_precision = m.predicted_pairs ? tp / static_cast<double>(m.predicted_pairs) : 0.0;
  m.pair_recall = m.true_pairs ? tp / static_cast<double>(m.true_pairs) : 0.0;
  m.pair_f1 = (m.pair_precision + m.pair_recall) > 0.0
                  ? 2.0 * m.pair_precision * m.pair_recall / (m.pair_precision + m.pair_recall)
                  : 0.0;
  m.family_exact_match_rate =
      m.evaluable_families ? static_cast<double>(m.exact_matches) / static_cast<double>(m.evaluable_families) : 0.0;
  return m;
}

/// Families with the same size profile as `found`, filled with tokens drawn
/// without replacement from `pool` (with replacement once it runs out).
inline std::vector<std::vector<std::string>> random_pairing_baseline(const std::vector<std::vector<std::string>>& found,
                                                                      std::vector<std::string> pool,
                                                                      std::uint64_t seed) {
  std::vector<std::vector<std::string>> out;
  if (pool.empty()) return out;
  std::sort(pool.begin(), pool.end());
  detail::Sampler rng(seed);
  for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.below(i)]);
  std::size_t next = 0;
  for (const auto& f : found) {
    std::vector<std::string> fam;
    for (std::size_t k = 0; k < f.size(); ++k) {
      fam.push_back(next < pool.size() ? pool[next++] : pool[rng.below(pool.size())]);
    }
    out.push_back(std::move(fam));
  }
  return out;
}

}  // namespace varfam::bench
