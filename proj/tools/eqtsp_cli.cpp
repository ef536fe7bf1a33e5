// eqtsp: train, solve, bench and ablate from the command line.
//
// Exit codes: 0 ok, 2 usage or configuration error, 3 file or I/O error,
// 4 checkpoint incompatible with the requested model.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "eqtsp/bench.hpp"
#include "eqtsp/config.hpp"
#include "eqtsp/errors.hpp"
#include "eqtsp/policy.hpp"
#include "eqtsp/training.hpp"
#include "eqtsp/tsplib.hpp"

#ifndef EQTSP_DEFAULT_DATA_DIR
#define EQTSP_DEFAULT_DATA_DIR "data/tsplib"
#endif

namespace fs = std::filesystem;
using namespace eqtsp;

namespace {

enum Exit { kOk = 0, kUsage = 2, kIo = 3, kModel = 4 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string default_data_dir() {
  if (const char* env = std::getenv("EQTSP_DATA_DIR")) return env;
  return EQTSP_DEFAULT_DATA_DIR;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
  const fs::path probe = dir / ".eqtsp_write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw IoError("output directory " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
}

TrainConfig read_config(const std::string& path) {
  if (path.empty()) return desk_train_config();
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  return parse_train_config(in);
}

Checkpoint read_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  return read_checkpoint(in);
}

std::vector<Method> parse_methods(const std::string& list) {
  std::vector<Method> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (item == "all") {
      out = all_methods();
      continue;
    }
    const auto m = parse_method(item);
    if (!m) throw UsageError("unknown method '" + item + "'");
    out.push_back(*m);
  }
  if (out.empty()) throw UsageError("no methods given");
  return out;
}

Suite build_suite(const std::string& name, int count, std::uint64_t seed, const std::string& data_dir) {
  if (count < 1) throw UsageError("--instances must be at least 1");
  try {
    return make_suite(name, count, seed, data_dir);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  } catch (const fs::filesystem_error& e) {
    throw IoError(e.what());
  }
}

void emit_report(const std::vector<BenchRow>& rows, const std::string& suite, std::uint64_t seed, bool timing,
                 const std::string& format, const std::string& jsonl_path) {
  if (format == "jsonl") {
    write_jsonl_report(std::cout, rows, suite, seed, timing);
  } else {
    write_text_report(std::cout, rows, timing);
  }
  if (!jsonl_path.empty()) {
    std::ofstream out(jsonl_path);
    if (!out) throw IoError("cannot write " + jsonl_path);
    write_jsonl_report(out, rows, suite, seed, timing);
  }
}

struct TrainArgs {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  bool no_timing = false;
};

int cmd_train(const TrainArgs& a) {
  const TrainConfig config = read_config(a.config);
  ensure_dir(a.out);
  {
    std::ofstream copy(fs::path(a.out) / "config.cfg");
    write_train_config(copy, config);
  }
  std::ofstream log(fs::path(a.out) / "train_log.jsonl");
  if (!log) throw IoError("cannot write training log in " + a.out);
  TrainOptions options;
  options.out_dir = fs::path(a.out);
  options.log = &log;
  options.timing = !a.no_timing;
  TrainResult result;
  try {
    result = train(config, Rng(a.seed), options);
  } catch (const std::ios_base::failure& e) {
    throw IoError(e.what());
  }
  for (const auto& s : result.epochs) {
    std::printf("epoch %d  N=%d  lr=%.6g  raw=%.4f  improved=%.4f  advantage=%.4f\n", s.epoch, s.n, s.lr,
                s.mean_raw_len, s.mean_improved_len, s.mean_advantage);
  }
  if (!result.checkpoints.empty()) std::printf("checkpoint %s\n", result.checkpoints.back().string().c_str());
  return kOk;
}

struct SolveArgs {
  std::string instance;
  int random_n = 0;
  std::string checkpoint;
  std::string variant = "greedy";
  std::uint64_t seed = 0;
  LocalSearchConfig ls;
};

void check_ls(const LocalSearchConfig& ls) {
  try {
    ls.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

int cmd_solve(const SolveArgs& a) {
  check_ls(a.ls);
  if (a.instance.empty() == (a.random_n == 0)) throw UsageError("give exactly one of an instance file or --random N");
  int k = 1;
  DecodeMode mode = DecodeMode::Greedy;
  if (a.variant == "s10") {
    k = 10;
    mode = DecodeMode::Sample;
  } else if (a.variant == "S100") {
    k = 100;
    mode = DecodeMode::Sample;
  } else if (a.variant != "greedy") {
    throw UsageError("--variant must be greedy, s10 or S100");
  }

  std::optional<TsplibRecord> record;
  std::optional<Instance> instance;
  Rng rng(a.seed);
  if (!a.instance.empty()) {
    std::ifstream in(a.instance);
    if (!in) throw IoError("cannot open instance " + a.instance);
    record = parse_tsplib(in);
    instance = normalize_to_unit_square(*record);
  } else {
    if (a.random_n < 3) throw UsageError("--random needs at least 3 cities");
    Rng gen = rng.child(0);
    instance = random_instance(a.random_n, gen);
  }
  const Checkpoint model = read_model(a.checkpoint);
  Rng solve_rng = rng.child(1);
  const Tour tour = sample_best(*instance, model.params, k, mode, a.ls, model.preprocess, solve_rng);

  std::printf("instance %s\n", record ? record->name.c_str() : ("random" + std::to_string(a.random_n)).c_str());
  std::printf("cities %d\n", instance->size());
  std::printf("variant %s\n", a.variant.c_str());
  // Print the cycle starting from city 1.
  std::vector<int> order = tour.order();
  std::ranges::rotate(order, std::ranges::find(order, 0));
  std::printf("tour");
  for (int c : order) std::printf(" %d", c + 1);
  std::printf("\nlength %.9f\n", tour.length());
  if (record) {
    std::printf("tsplib_length %ld\n", tsplib_length(*record, tour));
    if (record->known_opt) std::printf("known_opt %ld\n", *record->known_opt);
  }
  return kOk;
}

struct BenchArgs {
  std::string suite = "random20";
  std::string methods = "random-insert,nearest-insert,farthest-insert,2opt,ls-only";
  int instances = 100;
  std::uint64_t seed = 0;
  std::string checkpoint;
  int threads = 0;
  std::string data_dir;
  std::string format = "text";
  std::string jsonl;
  bool no_timing = false;
  LocalSearchConfig ls;
};

int cmd_bench(const BenchArgs& a) {
  check_ls(a.ls);
  const std::vector<Method> methods = parse_methods(a.methods);
  const Suite suite = build_suite(a.suite, a.instances, a.seed, a.data_dir.empty() ? default_data_dir() : a.data_dir);
  BenchContext ctx;
  ctx.seed = a.seed;
  ctx.threads = a.threads > 0 ? a.threads : default_thread_count();
  ctx.ls = a.ls;
  if (!a.checkpoint.empty()) {
    Checkpoint model = read_model(a.checkpoint);
    ctx.params = std::move(model.params);
    ctx.preprocess = model.preprocess;
  } else if (std::ranges::any_of(methods, needs_checkpoint)) {
    throw UsageError("the emagic methods need --checkpoint");
  }
  emit_report(run_bench(suite, methods, ctx), a.suite, a.seed, !a.no_timing, a.format, a.jsonl);
  return kOk;
}

struct AblateArgs {
  std::vector<std::string> off;
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  std::string suite = "random20";
  int instances = 100;
  int threads = 0;
  std::string data_dir;
  std::string format = "text";
  std::string jsonl;
  bool no_timing = false;
};

int cmd_ablate(const AblateArgs& a) {
  if (a.off.size() != 1) throw UsageError("give exactly one --off feature");
  const std::string& feature = a.off.front();
  TrainConfig full = read_config(a.config);
  TrainConfig ablated = full;
  AblationFlags& f = ablated.ablation;
  if (feature == "equivariance") f.use_equivariance = false;
  else if (feature == "baseline") f.use_rollout_baseline = false;
  else if (feature == "interleaved-ls") f.use_interleaved_ls = false;
  else if (feature == "curriculum") f.use_curriculum = false;
  else if (feature == "rl") f.use_rl = false;
  else throw UsageError("unknown feature '" + feature + "'");

  const Suite suite = build_suite(a.suite, a.instances, a.seed, a.data_dir.empty() ? default_data_dir() : a.data_dir);
  const int threads = a.threads > 0 ? a.threads : default_thread_count();
  std::vector<BenchRow> rows;
  for (const auto& [label, config] : {std::pair{std::string("full"), full}, std::pair{"no-" + feature, ablated}}) {
    TrainOptions options;
    std::ofstream log;
    options.timing = !a.no_timing;
    if (!a.out.empty()) {
      const fs::path dir = fs::path(a.out) / label;
      ensure_dir(dir);
      log.open(dir / "train_log.jsonl");
      options.out_dir = dir;
      options.log = &log;
    }
    TrainResult trained = train(config, Rng(a.seed), options);
    BenchContext ctx;
    ctx.seed = a.seed;
    ctx.threads = threads;
    ctx.ls = config.ls;
    Method method = Method::Emagic;
    if (config.ablation.use_rl) {
      ctx.params = std::move(trained.params);
      ctx.preprocess = config.effective_preprocess();
    } else {
      method = Method::LsOnly;
    }
    for (BenchRow& row : run_bench(suite, {method}, ctx)) {
      row.model = label;
      rows.push_back(std::move(row));
    }
  }
  emit_report(rows, a.suite, a.seed, !a.no_timing, a.format, a.jsonl);
  return kOk;
}

void add_ls_options(CLI::App* cmd, LocalSearchConfig& ls) {
  cmd->add_option("--ls-alpha", ls.alpha, "Local-search trial scale alpha");
  cmd->add_option("--ls-beta", ls.beta, "Local-search trial exponent beta");
  cmd->add_option("--ls-iters", ls.iterations, "Combined local-search iterations");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Equivariant reinforcement-learning TSP solver"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a policy and write per-epoch checkpoints");
  train_cmd->add_option("config", train_args.config, "Config file (key = value)")->required();
  train_cmd->add_option("--seed", train_args.seed, "Random seed");
  train_cmd->add_option("--out", train_args.out, "Output directory")->required();
  train_cmd->add_flag("--no-timing", train_args.no_timing, "Leave wall-clock times out of the log");

  SolveArgs solve_args;
  auto* solve_cmd = app.add_subcommand("solve", "Solve one instance with a trained policy");
  solve_cmd->add_option("instance", solve_args.instance, "TSPLIB EUC_2D file");
  solve_cmd->add_option("--random", solve_args.random_n, "Solve a random instance with this many cities");
  solve_cmd->add_option("--checkpoint", solve_args.checkpoint, "Checkpoint file")->required();
  solve_cmd->add_option("--variant", solve_args.variant, "greedy, s10 or S100");
  solve_cmd->add_option("--seed", solve_args.seed, "Random seed");
  add_ls_options(solve_cmd, solve_args.ls);

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "Benchmark methods on a suite");
  bench_cmd->add_option("--suite", bench_args.suite, "random<N> or tsplib-small");
  bench_cmd->add_option("--methods", bench_args.methods, "Comma-separated method list, or 'all'");
  bench_cmd->add_option("--instances", bench_args.instances, "Instances per random suite");
  bench_cmd->add_option("--seed", bench_args.seed, "Random seed");
  bench_cmd->add_option("--checkpoint", bench_args.checkpoint, "Checkpoint for the emagic methods");
  bench_cmd->add_option("--threads", bench_args.threads, "Worker threads (default: EQTSP_THREADS or all cores)");
  bench_cmd->add_option("--data-dir", bench_args.data_dir, "Directory of .tsp files for tsplib-small");
  bench_cmd->add_option("--format", bench_args.format, "text or jsonl on stdout")->check(CLI::IsMember({"text", "jsonl"}));
  bench_cmd->add_option("--jsonl", bench_args.jsonl, "Also write the JSONL report to this file");
  bench_cmd->add_flag("--no-timing", bench_args.no_timing, "Leave wall-clock times out of the report");
  add_ls_options(bench_cmd, bench_args.ls);

  AblateArgs ablate_args;
  auto* ablate_cmd = app.add_subcommand("ablate", "Train with one feature disabled and compare against the full model");
  ablate_cmd->add_option("--off", ablate_args.off, "equivariance, baseline, interleaved-ls, curriculum or rl")
      ->required();
  ablate_cmd->add_option("--config", ablate_args.config, "Config file (default: desk scale)");
  ablate_cmd->add_option("--seed", ablate_args.seed, "Random seed");
  ablate_cmd->add_option("--out", ablate_args.out, "Directory for logs and checkpoints");
  ablate_cmd->add_option("--suite", ablate_args.suite, "random<N> or tsplib-small");
  ablate_cmd->add_option("--instances", ablate_args.instances, "Instances per random suite");
  ablate_cmd->add_option("--threads", ablate_args.threads, "Worker threads");
  ablate_cmd->add_option("--data-dir", ablate_args.data_dir, "Directory of .tsp files for tsplib-small");
  ablate_cmd->add_option("--format", ablate_args.format, "text or jsonl on stdout")->check(CLI::IsMember({"text", "jsonl"}));
  ablate_cmd->add_option("--jsonl", ablate_args.jsonl, "Also write the JSONL report to this file");
  ablate_cmd->add_flag("--no-timing", ablate_args.no_timing, "Leave wall-clock times out of the report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train_args);
    if (*solve_cmd) return cmd_solve(solve_args);
    if (*bench_cmd) return cmd_bench(bench_args);
    if (*ablate_cmd) return cmd_ablate(ablate_args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const ModelMismatch& e) {
    std::cerr << "model error: " << e.what() << '\n';
    return kModel;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kIo;
  } catch (const ParseError& e) {
    std::cerr << "instance error: " << e.what() << '\n';
    return kIo;
  } catch (const UnsupportedFormat& e) {
    std::cerr << "instance error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  }
  return kUsage;
}
