#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "eqtsp/equivariance.hpp"
#include "eqtsp/local_search.hpp"
#include "eqtsp/policy.hpp"
#include "eqtsp/tsp.hpp"
#include "eqtsp/tsplib.hpp"

namespace eqtsp {

enum class Method { RandomInsert, NearestInsert, FarthestInsert, TwoOpt, LsOnly, Emagic, EmagicSample10, EmagicSample100 };

std::string_view to_string(Method method);
std::optional<Method> parse_method(std::string_view name);
/// True for the methods that decode with a trained policy.
bool needs_checkpoint(Method method);
const std::vector<Method>& all_methods();

/// Published mean optimal tour lengths of uniform random instances, used as
/// the gap reference for random suites.
std::optional<double> reference_mean(int n);

/// A group of instances reported as one row.
struct InstanceClass {
  std::string name;
  std::vector<Instance> instances;
  std::optional<TsplibRecord> record;    // single TSPLIB instance
  std::optional<double> reference_mean;  // random suites
};

struct Suite {
  std::string name;
  std::vector<InstanceClass> classes;
};

/// "random<N>" draws `count` uniform instances of size N from the seed;
/// "tsplib-small" loads every *.tsp file in `data_dir` (count is ignored).
/// Throws std::invalid_argument on an unknown suite or count < 1.
Suite make_suite(const std::string& name, int count, std::uint64_t seed, const std::string& data_dir);

struct BenchContext {
  std::uint64_t seed = 0;
  int threads = 1;
  LocalSearchConfig ls;
  /// Used by the emagic methods. ls-only falls back to untrained weights
  /// drawn from the seed when this is empty.
  std::optional<PolicyParams> params;
  PreprocessConfig preprocess;
};

struct BenchRow {
  std::string method;
  std::string instance_class;
  std::string model;           // "" unless set by the caller (ablation runs)
  int instances = 0;
  double mean_len = 0.0;       // unit-square coordinates
  std::optional<long> tsplib_len;
  std::optional<long> opt_len;
  std::optional<double> gap_pct;
  std::string gap_basis;       // "optimal", "reference" or ""
  double wall_ms = 0.0;
};

/// Tour produced by one method. Deterministic in (method, instance, rng state).
Tour solve_with(Method method, const Instance& instance, const BenchContext& context, const PolicyParams* params,
                Rng& rng);

/// Runs a method on every class of a suite. Instance i of class c uses the
/// stream Rng(seed).child(c).child(i), so every method sees the same randomness.
std::vector<BenchRow> run_bench(const Suite& suite, const std::vector<Method>& methods, const BenchContext& context);

/// Default worker count: EQTSP_THREADS when set to a positive integer,
/// otherwise the hardware concurrency.
int default_thread_count();

inline constexpr int kReportVersion = 1;

/// Aligned text table. Numbers are rounded exactly as in the JSONL records.
void write_text_report(std::ostream& out, const std::vector<BenchRow>& rows, bool timing);
/// A header record followed by one record per row.
void write_jsonl_report(std::ostream& out, const std::vector<BenchRow>& rows, const std::string& suite,
                        std::uint64_t seed, bool timing);

}  // namespace eqtsp
