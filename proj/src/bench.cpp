#include "eqtsp/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace eqtsp {
namespace {

struct MethodName {
  Method method;
  std::string_view name;
};

constexpr MethodName kMethods[] = {
    {Method::RandomInsert, "random-insert"}, {Method::NearestInsert, "nearest-insert"},
    {Method::FarthestInsert, "farthest-insert"}, {Method::TwoOpt, "2opt"},
    {Method::LsOnly, "ls-only"}, {Method::Emagic, "emagic"},
    {Method::EmagicSample10, "emagic-s"}, {Method::EmagicSample100, "emagic-S"},
};

// Rounds through the decimal text so JSON and the text table print the same digits.
double round_to(double v, double unit) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", unit < 0.001 ? 4 : 2, v);
  return std::strtod(buf, nullptr);
}

template <class Fn>
void parallel_for(int count, int threads, Fn&& fn) {
  threads = std::clamp(threads, 1, std::max(count, 1));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (int i = next++; i < count && !failed; i = next++) {
          try {
            fn(i);
          } catch (...) {
            if (!failed.exchange(true)) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

std::string_view to_string(Method method) {
  for (const auto& m : kMethods) {
    if (m.method == method) return m.name;
  }
  return "?";
}

std::optional<Method> parse_method(std::string_view name) {
  for (const auto& m : kMethods) {
    if (m.name == name) return m.method;
  }
  return std::nullopt;
}

bool needs_checkpoint(Method method) {
  return method == Method::Emagic || method == Method::EmagicSample10 || method == Method::EmagicSample100;
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = [] {
    std::vector<Method> out;
    for (const auto& m : kMethods) out.push_back(m.method);
    return out;
  }();
  return methods;
}

std::optional<double> reference_mean(int n) {
  switch (n) {
    case 20: return 3.830;
    case 50: return 5.691;
    case 100: return 7.761;
    case 200: return 10.72;
    case 500: return 16.55;
    case 1000: return 23.12;
    default: return std::nullopt;
  }
}

Suite make_suite(const std::string& name, int count, std::uint64_t seed, const std::string& data_dir) {
  Suite suite{name, {}};
  if (name == "tsplib-small") {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(data_dir)) {
      if (entry.path().extension() == ".tsp") files.push_back(entry.path());
    }
    std::ranges::sort(files);
    if (files.empty()) throw std::runtime_error("no .tsp files in " + data_dir);
    for (const auto& path : files) {
      TsplibRecord record = load_tsplib(path.string());
      Instance instance = normalize_to_unit_square(record);
      suite.classes.push_back({record.name, {std::move(instance)}, std::move(record), std::nullopt});
    }
    return suite;
  }
  if (name.starts_with("random")) {
    int n = 0;
    try {
      std::size_t used = 0;
      n = std::stoi(name.substr(6), &used);
      if (used != name.size() - 6) n = 0;
    } catch (const std::exception&) {
      n = 0;
    }
    if (n < 3) throw std::invalid_argument("unknown suite '" + name + "'");
    if (count < 1) throw std::invalid_argument("suite needs at least one instance");
    Rng rng = Rng(seed).child(static_cast<std::uint64_t>(n));
    InstanceClass cls{"TSP" + std::to_string(n), {}, std::nullopt, reference_mean(n)};
    cls.instances.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) cls.instances.push_back(random_instance(n, rng));
    suite.classes.push_back(std::move(cls));
    return suite;
  }
  throw std::invalid_argument("unknown suite '" + name + "'");
}

Tour solve_with(Method method, const Instance& instance, const BenchContext& context, const PolicyParams* params,
                Rng& rng) {
  switch (method) {
    case Method::RandomInsert: return insertion_heuristic(instance, InsertionRule::Random, rng);
    case Method::NearestInsert: return insertion_heuristic(instance, InsertionRule::Nearest, rng);
    case Method::FarthestInsert: return insertion_heuristic(instance, InsertionRule::Farthest, rng);
    case Method::TwoOpt: return plain_two_opt_baseline(instance, rng);
    case Method::LsOnly: return sample_best(instance, *params, 1, DecodeMode::Sample, context.ls, context.preprocess, rng);
    case Method::Emagic: return sample_best(instance, *params, 1, DecodeMode::Greedy, context.ls, context.preprocess, rng);
    case Method::EmagicSample10:
      return sample_best(instance, *params, 10, DecodeMode::Sample, context.ls, context.preprocess, rng);
    case Method::EmagicSample100:
      return sample_best(instance, *params, 100, DecodeMode::Sample, context.ls, context.preprocess, rng);
  }
  throw std::invalid_argument("unknown method");
}

std::vector<BenchRow> run_bench(const Suite& suite, const std::vector<Method>& methods, const BenchContext& context) {
  std::optional<PolicyParams> untrained;
  const Rng base(context.seed);
  std::vector<BenchRow> rows;
  for (Method method : methods) {
    const PolicyParams* params = nullptr;
    if (needs_checkpoint(method)) {
      if (!context.params) throw std::invalid_argument(std::string(to_string(method)) + " needs a checkpoint");
      params = &*context.params;
    } else if (method == Method::LsOnly) {
      if (!untrained) {
        Rng init = base.child(0x1417);
        untrained = PolicyParams::init(PolicyArch{}, init);
      }
      params = &*untrained;
    }
    for (std::size_t c = 0; c < suite.classes.size(); ++c) {
      const InstanceClass& cls = suite.classes[c];
      const int count = static_cast<int>(cls.instances.size());
      std::vector<double> lengths(static_cast<std::size_t>(count));
      std::vector<long> tsplib(static_cast<std::size_t>(count));
      const Rng class_rng = base.child(c);
      const auto start = std::chrono::steady_clock::now();
      parallel_for(count, context.threads, [&](int i) {
        Rng rng = class_rng.child(static_cast<std::uint64_t>(i));
        const Tour tour = solve_with(method, cls.instances[static_cast<std::size_t>(i)], context, params, rng);
        lengths[static_cast<std::size_t>(i)] = tour.length();
        if (cls.record) tsplib[static_cast<std::size_t>(i)] = tsplib_length(*cls.record, tour);
      });
      BenchRow row;
      row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      row.method = std::string(to_string(method));
      row.instance_class = cls.name;
      row.instances = count;
      double total = 0.0;
      for (double l : lengths) total += l;  // fixed order keeps the mean reproducible
      row.mean_len = total / count;
      if (cls.record) {
        row.tsplib_len = tsplib.front();
        row.opt_len = cls.record->known_opt;
        if (row.opt_len) {
          row.gap_pct = 100.0 * static_cast<double>(*row.tsplib_len - *row.opt_len) / static_cast<double>(*row.opt_len);
          row.gap_basis = "optimal";
        }
      } else if (cls.reference_mean) {
        row.gap_pct = 100.0 * (row.mean_len - *cls.reference_mean) / *cls.reference_mean;
        row.gap_basis = "reference";
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

int default_thread_count() {
  if (const char* env = std::getenv("EQTSP_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0 && v <= 1024) return static_cast<int>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void write_text_report(std::ostream& out, const std::vector<BenchRow>& rows, bool timing) {
  const bool any_model = std::ranges::any_of(rows, [](const BenchRow& r) { return !r.model.empty(); });
  char line[256];
  auto header = [&] {
    if (any_model) out << (std::snprintf(line, sizeof line, "%-10s ", "model"), line);
    std::snprintf(line, sizeof line, "%-16s %-10s %6s %10s %10s %10s %9s %-9s", "method", "class", "n", "mean_len",
                  "tsplib_len", "opt", "gap_%", "gap_basis");
    out << line;
    if (timing) out << (std::snprintf(line, sizeof line, " %10s", "wall_ms"), line);
    out << '\n';
  };
  header();
  for (const BenchRow& r : rows) {
    if (any_model) out << (std::snprintf(line, sizeof line, "%-10s ", r.model.c_str()), line);
    const std::string tl = r.tsplib_len ? std::to_string(*r.tsplib_len) : "-";
    const std::string opt = r.opt_len ? std::to_string(*r.opt_len) : "-";
    char gap[32] = "-";
    if (r.gap_pct) std::snprintf(gap, sizeof gap, "%.2f", round_to(*r.gap_pct, 0.01));
    std::snprintf(line, sizeof line, "%-16s %-10s %6d %10.4f %10s %10s %9s %-9s", r.method.c_str(),
                  r.instance_class.c_str(), r.instances, round_to(r.mean_len, 1e-4), tl.c_str(), opt.c_str(), gap,
                  r.gap_basis.empty() ? "-" : r.gap_basis.c_str());
    out << line;
    if (timing) out << (std::snprintf(line, sizeof line, " %10.0f", std::round(r.wall_ms)), line);
    out << '\n';
  }
}

void write_jsonl_report(std::ostream& out, const std::vector<BenchRow>& rows, const std::string& suite,
                        std::uint64_t seed, bool timing) {
  nlohmann::ordered_json header = {
      {"type", "header"}, {"format", "eqtsp-bench"}, {"version", kReportVersion}, {"suite", suite}, {"seed", seed}};
  out << header.dump() << '\n';
  for (const BenchRow& r : rows) {
    nlohmann::ordered_json rec = {{"type", "row"}};
    if (!r.model.empty()) rec["model"] = r.model;
    rec["method"] = r.method;
    rec["class"] = r.instance_class;
    rec["instances"] = r.instances;
    rec["mean_len"] = round_to(r.mean_len, 1e-4);
    rec["tsplib_len"] = r.tsplib_len ? nlohmann::ordered_json(*r.tsplib_len) : nullptr;
    rec["opt"] = r.opt_len ? nlohmann::ordered_json(*r.opt_len) : nullptr;
    rec["gap_pct"] = r.gap_pct ? nlohmann::ordered_json(round_to(*r.gap_pct, 0.01)) : nullptr;
    rec["gap_basis"] = r.gap_basis.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(r.gap_basis);
    if (timing) rec["wall_ms"] = std::round(r.wall_ms);
    out << rec.dump() << '\n';
  }
}

}  // namespace eqtsp
