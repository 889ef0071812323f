// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "varfam/varfam.hpp"

namespace fs = std::filesystem;
using namespace varfam;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt_double(double x, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << x;
  return os.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int vf(const std::string& args) {
  const int status = std::system((std::string(VF_BINARY) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("vf_acceptance_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Outcome jaccard_matches_oracle() {
  std::mt19937_64 rng(2024);
  int mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto a = oracle::random_token(rng, 1, 15);
    const auto b = i % 3 == 0 ? oracle::mutate(a, rng) : oracle::random_token(rng, 1, 15);
    if (jaccard(a, b, 3, 7) != oracle::jaccard(a, b, 3, 7)) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches in 1000 pairs"};
}

Outcome strict_matches_brute_force() {
  int mismatches = 0;
  std::size_t families = 0;
  for (int m = 0; m < 20; ++m) {
    auto cm = oracle::clustered_model(1000 + static_cast<std::uint64_t>(m), 200 + 15 * static_cast<std::size_t>(m), 12,
                                      0.3 + 0.02 * m);
    InductionConfig cfg;
    if (m % 2 == 1) {
      cfg.strict_topn = 3 + m % 5;
      cfg.degree_cap = 2 + m % 3;
    }
    std::set<std::pair<std::string, std::string>> oracle_edges;
    const auto expected = oracle::strict_families(cm.model, cm.lexicon, cfg, &oracle_edges);
    const auto found = induce(cm.model, cm.lexicon, cfg, Mode::kStrict);
    std::set<std::vector<std::string>> sets;
    std::set<std::pair<std::string, std::string>> edges;
    for (const auto& f : found) {
      sets.insert(f.members);
      for (const auto& p : f.pairs) {
        if (p.is_edge) edges.emplace(p.w, p.v);
      }
    }
    families += found.size();
    if (sets != expected || edges != oracle_edges) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + "/20 models differ, " + std::to_string(families) + " families"};
}

// One negative-sampling example against a long double evaluation of the loss.
Outcome gradient_matches_finite_differences() {
  constexpr int kDim = 6;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> h(kDim);
    std::vector<std::vector<double>> outputs(5, std::vector<double>(kDim));
    for (auto& x : h) x = u(rng);
    for (auto& r : outputs) for (auto& x : r) x = u(rng);

    auto loss = [&]() {
      long double total = 0.0L;
      for (std::size_t t = 0; t < outputs.size(); ++t) {
        long double s = 0.0L;
        for (int c = 0; c < kDim; ++c) s += static_cast<long double>(outputs[t][c]) * h[c];
        total += std::log1p(std::exp(t == 0 ? -s : s));
      }
      return total;
    };

    std::vector<std::span<const double>> outs(outputs.begin(), outputs.end());
    std::vector<double> gh(kDim, 0.0);
    std::vector<std::vector<double>> go(outputs.size(), std::vector<double>(kDim));
    std::vector<std::span<double>> gouts(go.begin(), go.end());
    sgns::loss_and_gradient<double>(h, outs, gh, gouts);

    auto check = [&](double& x, double analytic) {
      const double eps = 1e-5;
      const double saved = x;
      x = saved + eps;
      const auto plus = loss();
      x = saved - eps;
      const auto minus = loss();
      x = saved;
      const double numeric = static_cast<double>((plus - minus) / (2.0L * eps));
      const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(analytic - numeric) / scale);
    };
    for (int c = 0; c < kDim; ++c) check(h[c], gh[c]);
    for (std::size_t t = 0; t < outputs.size(); ++t) {
      for (int c = 0; c < kDim; ++c) check(outputs[t][c], go[t][c]);
    }
  }
  return {worst <= 1e-4, "max relative error " + fmt_double(worst, 3)};
}

Outcome cohesion_matches_oracle() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  int pairs = 0;
  while (pairs < 10'000) {
    RawFamily f;
    const int size = 2 + static_cast<int>(rng() % 5);
    for (int i = 0; i < size; ++i) f.members.push_back("t" + std::to_string(i));
    long double cs = 0.0L;
    long double js = 0.0L;
    for (int i = 0; i < size; ++i) {
      for (int j = i + 1; j < size; ++j) {
        const double c = u(rng);
        const double jac = u(rng);
        f.pairs.push_back({f.members[i], f.members[j], c, jac, true});
        cs += c;
        js += jac;
        ++pairs;
      }
    }
    const long double n = static_cast<long double>(f.pairs.size());
    const long double a = cs / n;
    const long double b = js / n;
    const long double expected = a + b == 0.0L ? 0.0L : 2.0L * a * b / (a + b);
    worst = std::max(worst, static_cast<double>(std::abs(score_family(f).cohesion - expected)));
  }
  return {worst <= 1e-12, std::to_string(pairs) + " pairs, max abs error " + fmt_double(worst, 3)};
}

Outcome raising_threshold_shrinks_edges() {
  auto cm = oracle::clustered_model(42, 300, 10, 0.45);
  PairScorer scorer(cm.model, cm.lexicon);
  auto admitted = [&](double th) {
    std::set<std::pair<std::size_t, std::size_t>> out;
    for (const auto& per_seed : propose_edges(scorer, 100, th, 0.2)) {
      for (const auto& p : per_seed) out.insert(std::minmax(p.seed, p.neighbor));
    }
    return out;
  };
  const auto low = admitted(0.73);
  const auto high = admitted(0.80);
  const bool subset = std::includes(low.begin(), low.end(), high.begin(), high.end());
  return {subset && high.size() < low.size(),
          std::to_string(high.size()) + " edges at 0.80 vs " + std::to_string(low.size()) + " at 0.73"};
}

Outcome synthetic_recovery() {
  const auto dir = scratch("recovery");
  if (vf("bench generate --seed 7 --out " + (dir / "bench").string()) != 0) return {false, "bench generate failed"};
  if (vf("pipeline --seed 42 --corpus " + (dir / "bench" / "corpus.jsonl").string() + " --out " +
         (dir / "run").string()) != 0) {
    return {false, "pipeline failed"};
  }
  const auto report_path = dir / "report.json";
  if (vf("bench evaluate --families " + (dir / "run" / "families.jsonl").string() + " --truth " +
         (dir / "bench" / "truth.json").string() + " --stats " + (dir / "run" / "model.stats.jsonl").string() +
         " --out " + report_path.string()) != 0) {
    return {false, "bench evaluate failed"};
  }
  const auto report = nlohmann::json::parse(slurp(report_path));
  const double p = report["metrics"]["pair_precision"];
  const double r = report["metrics"]["pair_recall"];
  const double f1 = report["metrics"]["pair_f1"];
  const double base = report["random_baseline"]["pair_f1"];
  return {p >= 0.6 && r >= 0.6 && f1 > base,
          "P=" + fmt_double(p) + " R=" + fmt_double(r) + " F1=" + fmt_double(f1) + " baseline F1=" + fmt_double(base)};
}

Outcome pipeline_is_deterministic() {
  const auto dir = scratch("determinism");
  const std::string common = " --seed 42 --workers 1 --config " + (fs::path(VF_SAMPLES) / "toy_config.json").string() +
                             " --corpus " + (fs::path(VF_SAMPLES) / "toy_corpus.jsonl").string() + " --out ";
  if (vf("pipeline" + common + (dir / "a").string()) != 0 || vf("pipeline" + common + (dir / "b").string()) != 0) {
    return {false, "pipeline failed"};
  }
  for (const char* f : {"families.jsonl", "summary.csv"}) {
    const auto a = slurp(dir / "a" / f);
    if (a.empty() || a != slurp(dir / "b" / f)) return {false, std::string(f) + " differs or is empty"};
  }
  return {true, "families.jsonl and summary.csv byte-identical"};
}

Outcome golden_outputs() {
  const auto scored = fixture::scored();
  std::ostringstream jsonl;
  std::ostringstream csv;
  write_families_jsonl(jsonl, scored, fixture::kEcho);
  write_summary_csv(csv, scored);
  const bool files = jsonl.str() == slurp(fs::path(VF_TEST_DATA) / "golden_families.jsonl") &&
                     csv.str() == slurp(fs::path(VF_TEST_DATA) / "golden_summary.csv");
  bool kept = false;
  for (const auto& f : scored) {
    if (f.family.members == std::vector<std::string>{"moar", "muar", "muer"}) kept = !f.pruned();
  }
  return {files && kept, std::string(files ? "golden files match" : "golden files differ") +
                             (kept ? ", 6577/604/338 kept" : ", 6577/604/338 pruned")};
}

Outcome defaults_match_table() {
  const auto c = parse_config(nlohmann::json::object());
  const std::vector<std::pair<const char*, bool>> checks = {
      {"lowercase", c.ingest.lowercase},
      {"dimension", c.ingest.dimension_field == "user_id"},
      {"vector_size", c.embedding.vector_size == 100},
      {"window", c.embedding.window == 5},
      {"min_count", c.embedding.min_count == 10},
      {"epochs", c.embedding.epochs == 10},
      {"sg", c.embedding.sg},
      {"min_n/max_n", c.embedding.min_n == 3 && c.embedding.max_n == 7},
      {"open_TOPN", c.induction.open_topn == 30},
      {"open_TH", c.induction.open_th == 0.75},
      {"strict_TOPN", c.induction.strict_topn == 100},
      {"strict_TH", c.induction.strict_th == 0.73},
      {"SNN_MIN", c.induction.snn_min == 2},
      {"DEGREE_CAP", c.induction.degree_cap == 200},
      {"MIN_LEN", c.induction.min_len == 3},
      {"MIN_USERS", c.scoring.min_users == 3},
      {"MAX_FREQ_RATIO", c.scoring.max_freq_ratio == 25.0},
  };
  std::string wrong;
  for (const auto& [name, ok] : checks) {
    if (!ok) wrong += std::string(wrong.empty() ? "" : ",") + name;
  }
  return {wrong.empty(), wrong.empty() ? std::to_string(checks.size()) + " defaults" : "wrong: " + wrong};
}

struct Criterion {
  const char* name;
  double budget_seconds;  // 0: no time bound
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  log::init_from_env();
  const std::vector<Criterion> criteria = {
      {"jaccard_oracle_1000_pairs", 5, jaccard_matches_oracle},
      {"strict_components_vs_brute_force_20_models", 60, strict_matches_brute_force},
      {"sgns_gradient_check_1e-4", 5, gradient_matches_finite_differences},
      {"cohesion_harmonic_mean_1e-12", 0, cohesion_matches_oracle},
      {"strict_th_0.73_to_0.80_shrinks_edges", 0, raising_threshold_shrinks_edges},
      {"synthetic_recovery_p_r_0.6_beats_random", 600, synthetic_recovery},
      {"pipeline_deterministic_fixed_seed", 0, pipeline_is_deterministic},
      {"golden_jsonl_csv_and_ratio_example", 0, golden_outputs},
      {"config_defaults_17_rows", 0, defaults_match_table},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0 && seconds >= c.budget_seconds) {
      o.pass = false;
      o.detail += ", over the " + fmt_double(c.budget_seconds) + "s budget";
    }
    if (!o.pass) ++failed;
    std::printf("%s %s (%s; %.2fs)\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), seconds);
    std::fflush(stdout);
  }
  fs::remove_all(fs::temp_directory_path() / ("vf_acceptance_" + std::to_string(::getpid())));
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? 0 : 1;
}
