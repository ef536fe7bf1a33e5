#pragma once

#include <cstdint>
#include <vector>

#include "eqtsp/rng.hpp"
#include "eqtsp/tsp.hpp"

namespace eqtsp {

/// Strength and repetition count of the combined local search.
struct LocalSearchConfig {
  double alpha = 0.5;
  double beta = 1.5;
  int iterations = 10;
  /// Accepted for configuration compatibility; no heuristic reads it.
  double gamma = 0.25;

  /// Throws std::invalid_argument unless alpha > 0, beta > 0, iterations >= 1.
  void validate() const;

  /// ceil(alpha * n^beta): trial count of the randomized heuristics.
  std::int64_t trials(int n) const;

  friend bool operator==(const LocalSearchConfig&, const LocalSearchConfig&) = default;
};

/// Dense pairwise distances, built once per local-search call.
class DistanceMatrix {
 public:
  explicit DistanceMatrix(const Instance& instance);
  double operator()(int i, int j) const { return d_[static_cast<std::size_t>(i) * n_ + static_cast<std::size_t>(j)]; }
  int size() const { return static_cast<int>(n_); }

 private:
  std::size_t n_;
  std::vector<double> d_;
};

/// Moves each city (by current tour position) to its cheapest slot.
Tour local_insertion(const Instance& instance, const Tour& tour);

/// ceil(alpha * N^beta) random edge-pair trials; a reversal is applied only
/// when it strictly shortens the tour.
Tour random_two_opt(const Instance& instance, const Tour& tour, const LocalSearchConfig& config, Rng& rng);

/// For each position t, applies the best reversal of positions t..t' (t' >= t).
Tour search_two_opt(const Instance& instance, const Tour& tour);

/// ceil(alpha * N^beta) rounds; each draws two distinct edges, scans every
/// third edge and applies the best of the seven 3-opt reconnections.
Tour search_random_three_opt(const Instance& instance, const Tour& tour, const LocalSearchConfig& config, Rng& rng);

/// `iterations` rounds of insertion, random 2-opt, search 2-opt and search
/// random 3-opt.
Tour combined_local_search(const Instance& instance, const Tour& tour, const LocalSearchConfig& config, Rng& rng);

enum class InsertionRule { Random, Nearest, Farthest };

/// Classical insertion construction starting from a random city.
Tour insertion_heuristic(const Instance& instance, InsertionRule rule, Rng& rng);

/// First-improvement 2-opt from a random tour, run until no move improves.
Tour plain_two_opt_baseline(const Instance& instance, Rng& rng);

/// One first-improvement sweep of 2-opt (positions i < j, scanned in order).
Tour first_improvement_two_opt_sweep(const Instance& instance, const Tour& tour);

}  // namespace eqtsp
