#include "eqtsp/tsp.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "eqtsp/errors.hpp"

namespace eqtsp {

Instance::Instance(std::vector<Point> coords, std::string id) : coords_(std::move(coords)), id_(std::move(id)) {
  if (coords_.empty()) throw std::invalid_argument("instance needs at least one city");
  for (const Point& p : coords_) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw std::invalid_argument("instance has non-finite coordinates");
  }
}

bool is_permutation_of(std::span<const int> order, int n) {
  if (static_cast<int>(order.size()) != n) return false;
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (int c : order) {
    if (c < 0 || c >= n || seen[static_cast<std::size_t>(c)]) return false;
    seen[static_cast<std::size_t>(c)] = 1;
  }
  return true;
}

double tour_length(const Instance& instance, std::span<const int> order) {
  if (!is_permutation_of(order, instance.size())) {
    throw std::invalid_argument("tour is not a permutation of the instance's cities");
  }
  double total = 0.0;
  const std::size_t n = order.size();
  for (std::size_t t = 0; t < n; ++t) total += instance.dist(order[t], order[(t + 1) % n]);
  return total;
}

Tour::Tour(const Instance& instance, std::vector<int> order) : order_(std::move(order)) {
  length_ = tour_length(instance, order_);
}

Instance random_instance(int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("random_instance: n must be at least 1");
  std::vector<Point> pts(static_cast<std::size_t>(n));
  for (Point& p : pts) {
    p.x = rng.uniform();
    p.y = rng.uniform();
  }
  return Instance(std::move(pts));
}

std::vector<int> random_order(int n, Rng& rng) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  // Fisher-Yates with our own bounded draw; std::shuffle is not portable.
  for (int i = n - 1; i > 0; --i) std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(rng.below(i + 1))]);
  return order;
}

Tour brute_force_optimal(const Instance& instance) {
  const int n = instance.size();
  if (n > kBruteForceMaxCities) throw OracleSizeExceeded("brute_force_optimal: more than 10 cities");
  if (n < 3) throw std::invalid_argument("brute_force_optimal: needs at least 3 cities");

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> best = order;
  double best_len = tour_length(instance, order);
  // Permute everything after the pinned first city in lexicographic order.
  while (std::next_permutation(order.begin() + 1, order.end())) {
    double len = 0.0;
    for (int t = 0; t < n; ++t) len += instance.dist(order[t], order[(t + 1) % n]);
    if (len < best_len - 1e-12) {
      best_len = len;
      best = order;
    }
  }
  return Tour(instance, std::move(best));
}

}  // namespace eqtsp
