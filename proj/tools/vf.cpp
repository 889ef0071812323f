// vf: corpus -> subword embeddings -> variant families, plus the annotation
// service and the synthetic benchmark.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

#include <pthread.h>
#include <signal.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "varfam/varfam.hpp"
#include "varfam/server.hpp"

namespace fs = std::filesystem;
using namespace varfam;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct CommonFlags {
  std::string config;
  std::string corpus;
  std::string model;
  std::string out;
  std::string mode;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool dry_run = false;
};

void add_config_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON config file");
  cmd->add_option("--seed", f.seed, "RNG seed");
  cmd->add_option("--workers", f.workers, "training threads");
  cmd->add_flag("--dry-run", f.dry_run, "validate the config, print it, and exit");
}

RunConfig resolve(const CommonFlags& f) {
  RunConfig cfg = f.config.empty() ? parse_config(nlohmann::json::object()) : load_config(f.config);
  if (!f.corpus.empty()) cfg.corpus = f.corpus;
  if (!f.model.empty()) cfg.model = f.model;
  if (!f.out.empty()) cfg.out = f.out;
  if (!f.mode.empty()) cfg.mode = parse_mode(f.mode);
  if (f.seed) cfg.embedding.rng_seed = *f.seed;
  if (f.workers) cfg.workers = *f.workers;
  cfg.validate();
  return cfg;
}

int dry_run(const RunConfig& cfg) {
  std::cout << cfg.to_json().dump(2) << '\n';
  return 0;
}

int cmd_train(const CommonFlags& f, const std::string& export_vec) {
  RunConfig cfg = resolve(f);
  if (cfg.corpus.empty()) throw ConfigError("--corpus is required");
  if (cfg.model.empty()) throw ConfigError("--model is required");
  if (f.dry_run) return dry_run(cfg);
  auto r = run_train(cfg);
  if (!export_vec.empty()) varfam::export_vec(export_vec, load_model(r.model));
  return 0;
}

int cmd_induce(const CommonFlags& f, const std::string& stats) {
  RunConfig cfg = resolve(f);
  if (cfg.model.empty()) throw ConfigError("--model is required");
  if (cfg.out.empty()) throw ConfigError("--out is required");
  if (f.dry_run) return dry_run(cfg);
  run_induce(cfg, stats);
  return 0;
}

int cmd_pipeline(const CommonFlags& f) {
  RunConfig cfg = resolve(f);
  if (cfg.corpus.empty()) throw ConfigError("--corpus is required");
  if (cfg.out.empty()) throw ConfigError("--out is required");
  if (f.dry_run) return dry_run(cfg);
  run_pipeline(cfg);
  return 0;
}

int cmd_serve(const std::string& families, const std::string& annotations, const std::string& bind,
              const std::string& static_dir) {
  const auto [host, port] = annotation::parse_bind(bind);
  auto loaded = read_families_jsonl(fs::path(families));
  annotation::AnnotationStore store(annotations);
  annotation::AnnotationService service(std::move(loaded), store);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGTERM);
  sigaddset(&signals, SIGINT);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  httplib::Server server;
  annotation::install_routes(server, service, static_dir);
  if (!server.bind_to_port(host, port)) {
    throw DataError("cannot bind " + host + ":" + std::to_string(port));
  }
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    spdlog::info("signal {} received, shutting down", sig);
    server.stop();
  });
  spdlog::info("serving {} families on {}:{}", service.size(), host, port);
  const bool ok = server.listen_after_bind();
  if (!ok && server.is_running()) spdlog::error("server stopped unexpectedly");
  store.flush();
  if (waiter.joinable()) {
    // wake the waiter if the server ended on its own
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
  }
  spdlog::info("annotations flushed to {}", store.path().string());
  return 0;
}

int cmd_bench_generate(const std::string& spec_path, const std::string& out_dir, std::optional<std::uint64_t> seed) {
  bench::GeneratorSpec spec;
  if (!spec_path.empty()) {
    std::ifstream in(spec_path);
    if (!in) throw ConfigError("cannot open generator spec: " + spec_path);
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("generator spec is not valid JSON: " + spec_path);
    spec = bench::parse_generator_spec(j);
  }
  if (seed) spec.rng_seed = *seed;
  spec.validate();
  const fs::path out = out_dir;
  bench::GeneratedCorpus corpus;
  write_atomically(out / "corpus.jsonl", [&](std::ostream& os) { corpus = bench::generate_corpus(spec, os); });
  save_json(out / "truth.json", bench::truth_to_json(corpus.families));
  spdlog::info("{} records, {} planted families written to {}", corpus.records, corpus.families.size(), out.string());
  return 0;
}

int cmd_bench_evaluate(const std::string& families_path, const std::string& truth_path, const std::string& stats_path,
                       int min_count, int min_len, const std::string& out_path, std::uint64_t baseline_seed) {
  std::vector<std::vector<std::string>> found;
  for (const auto& f : read_families_jsonl(fs::path(families_path))) found.push_back(f.family.family.members);

  std::ifstream tin(truth_path);
  if (!tin) throw DataError("cannot open truth file: " + truth_path);
  auto tj = nlohmann::json::parse(tin, nullptr, false);
  if (tj.is_discarded()) throw DataError("truth file is not valid JSON: " + truth_path);
  const auto truth = bench::truth_from_json(tj);

  std::optional<CorpusStats> stats;
  if (!stats_path.empty()) stats = load_stats(stats_path);
  bench::Learnable learnable = nullptr;
  std::vector<std::string> pool;
  if (stats) {
    learnable = [&](const std::string& t) {
      const auto* s = stats->find(t);
      return s != nullptr && s->corpus_frequency >= static_cast<std::uint64_t>(min_count);
    };
    for (const auto& [token, s] : stats->tokens) {
      if (s.corpus_frequency >= static_cast<std::uint64_t>(min_count) &&
          unicode::length(token) >= static_cast<std::size_t>(min_len)) {
        pool.push_back(token);
      }
    }
  }
  const auto metrics = bench::evaluate_recovery(found, truth, learnable);
  nlohmann::ordered_json report = {{"metrics", metrics.to_json()}};
  if (!pool.empty()) {
    const auto baseline = bench::random_pairing_baseline(found, pool, baseline_seed);
    report["random_baseline"] = bench::evaluate_recovery(baseline, truth, learnable).to_json();
  }
  if (out_path.empty()) {
    std::cout << report.dump(2) << '\n';
  } else {
    save_json(out_path, report);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  log::init_from_env();
  CLI::App app{"variant family induction toolkit"};
  app.require_subcommand(1);

  CommonFlags train_flags;
  std::string export_vec;
  auto* train = app.add_subcommand("train", "ingest a corpus and train subword embeddings");
  add_config_flags(train, train_flags);
  train->add_option("--corpus", train_flags.corpus, "JSONL corpus");
  train->add_option("--model", train_flags.model, "model output path");
  train->add_option("--export-vec", export_vec, "also write a .vec text export");

  CommonFlags induce_flags;
  std::string stats;
  auto* induce = app.add_subcommand("induce", "induce, score and write variant families");
  add_config_flags(induce, induce_flags);
  induce->add_option("--model", induce_flags.model, "trained model");
  induce->add_option("--stats", stats, "token statistics (default: next to the model)");
  induce->add_option("--out", induce_flags.out, "output directory");
  induce->add_option("--mode", induce_flags.mode, "open or strict");

  CommonFlags pipe_flags;
  auto* pipeline = app.add_subcommand("pipeline", "train then induce");
  add_config_flags(pipeline, pipe_flags);
  pipeline->add_option("--corpus", pipe_flags.corpus, "JSONL corpus");
  pipeline->add_option("--model", pipe_flags.model, "model path (default: <out>/model.bin)");
  pipeline->add_option("--out", pipe_flags.out, "output directory");
  pipeline->add_option("--mode", pipe_flags.mode, "open or strict");

  std::string families, annotations = "annotations.jsonl", bind = "127.0.0.1:8080", static_dir;
  auto* serve = app.add_subcommand("serve", "annotation HTTP service");
  serve->add_option("--families", families, "families JSONL")->required();
  serve->add_option("--annotations", annotations, "append-only annotation log");
  serve->add_option("--bind", bind, "host:port");
  serve->add_option("--static", static_dir, "directory with the browser frontend");

  auto* bench_cmd = app.add_subcommand("bench", "synthetic benchmark");
  bench_cmd->require_subcommand(1);
  std::string spec_path, bench_out;
  std::optional<std::uint64_t> bench_seed;
  auto* generate = bench_cmd->add_subcommand("generate", "write a corpus with planted families");
  generate->add_option("--spec", spec_path, "generator spec JSON");
  generate->add_option("--out", bench_out, "output directory")->required();
  generate->add_option("--seed", bench_seed, "RNG seed");

  std::string eval_families, truth, eval_stats, eval_out;
  int min_count = 10, min_len = 3;
  std::uint64_t baseline_seed = 1;
  auto* evaluate = bench_cmd->add_subcommand("evaluate", "score found families against planted ones");
  evaluate->add_option("--families", eval_families, "families JSONL")->required();
  evaluate->add_option("--truth", truth, "ground-truth JSON")->required();
  evaluate->add_option("--stats", eval_stats, "token statistics, for learnability and the random baseline");
  evaluate->add_option("--min-count", min_count, "learnability threshold");
  evaluate->add_option("--min-len", min_len, "minimum token length for the baseline pool");
  evaluate->add_option("--baseline-seed", baseline_seed, "seed of the random-pairing baseline");
  evaluate->add_option("--out", eval_out, "metrics JSON (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*train) return cmd_train(train_flags, export_vec);
    if (*induce) return cmd_induce(induce_flags, stats);
    if (*pipeline) return cmd_pipeline(pipe_flags);
    if (*serve) return cmd_serve(families, annotations, bind, static_dir);
    if (*generate) return cmd_bench_generate(spec_path, bench_out, bench_seed);
    if (*evaluate) {
      return cmd_bench_evaluate(eval_families, truth, eval_stats, min_count, min_len, eval_out, baseline_seed);
    }
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
