#include "eqtsp/local_search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace eqtsp {
namespace {

// A move must beat the current tour by more than this to be applied.
constexpr double kImproveEps = 1e-12;

using Order = std::vector<int>;

std::size_t idx(int i) { return static_cast<std::size_t>(i); }

void draw_two_positions(int n, Rng& rng, int& a, int& b) {
  a = rng.below(n);
  b = rng.below(n - 1);
  if (b >= a) ++b;
}

void insertion_pass(Order& o, const DistanceMatrix& d) {
  const int n = static_cast<int>(o.size());
  if (n < 4) return;
  for (int t = 0; t < n; ++t) {
    const int c = o[idx(t)];
    const int prev = o[idx((t - 1 + n) % n)];
    const int next = o[idx((t + 1) % n)];
    const double gain = d(prev, c) + d(c, next) - d(prev, next);

    double best = 0.0;
    int best_k = -1;
    for (int k = 0; k < n; ++k) {
      const int a = o[idx(k)];
      if (a == c) continue;
      const int b = (k + 1) % n == t ? next : o[idx((k + 1) % n)];
      const double delta = d(a, c) + d(c, b) - d(a, b) - gain;
      if (delta < best) {
        best = delta;
        best_k = k;
      }
    }
    if (best_k < 0 || best >= -kImproveEps) continue;

    // Remove c, then reinsert it right after the city that sat at best_k.
    const int anchor = o[idx(best_k)];
    o.erase(o.begin() + t);
    const auto pos = std::find(o.begin(), o.end(), anchor);
    o.insert(pos + 1, c);
  }
}

void random_two_opt_pass(Order& o, const DistanceMatrix& d, std::int64_t trials, Rng& rng) {
  const int n = static_cast<int>(o.size());
  if (n < 4) return;
  for (std::int64_t k = 0; k < trials; ++k) {
    int i = 0, j = 0;
    draw_two_positions(n, rng, i, j);
    if (i > j) std::swap(i, j);
    if (j == i + 1 || (i == 0 && j == n - 1)) continue;  // adjacent edges share a city
    const int a = o[idx(i)], b = o[idx(i + 1)], c = o[idx(j)], e = o[idx((j + 1) % n)];
    const double delta = d(a, c) + d(b, e) - d(a, b) - d(c, e);
    if (delta < -kImproveEps) std::reverse(o.begin() + i + 1, o.begin() + j + 1);
  }
}

void search_two_opt_pass(Order& o, const DistanceMatrix& d) {
  const int n = static_cast<int>(o.size());
  if (n < 4) return;
  for (int t = 0; t < n; ++t) {
    const int prev = o[idx((t - 1 + n) % n)];
    const int first = o[idx(t)];
    double best = 0.0;
    int best_end = -1;
    for (int u = t + 1; u < n; ++u) {
      if (t == 0 && u == n - 1) continue;  // reversing everything changes nothing
      const int last = o[idx(u)];
      const int next = o[idx((u + 1) % n)];
      const double delta = d(prev, last) + d(first, next) - d(prev, first) - d(last, next);
      if (delta < best) {
        best = delta;
        best_end = u;
      }
    }
    if (best_end >= 0 && best < -kImproveEps) std::reverse(o.begin() + t, o.begin() + best_end + 1);
  }
}

// Segments between removed edges p < q < r: B = o[p+1..q], C = o[q+1..r].
enum class Reconnect { RevB = 1, RevC, RevBC, RevBRevC, SwapBC, SwapRevB, SwapRevC };

void apply_reconnect(Order& o, int p, int q, int r, Reconnect kind) {
  const auto b_begin = o.begin() + p + 1, b_end = o.begin() + q + 1;
  const auto c_begin = b_end, c_end = o.begin() + r + 1;
  std::vector<int> b(b_begin, b_end), c(c_begin, c_end);
  auto rev = [](std::vector<int> v) {
    std::reverse(v.begin(), v.end());
    return v;
  };
  std::vector<int> mid;
  mid.reserve(b.size() + c.size());
  auto put = [&mid](const std::vector<int>& s) { mid.insert(mid.end(), s.begin(), s.end()); };
  switch (kind) {
    case Reconnect::RevB: put(rev(b)); put(c); break;
    case Reconnect::RevC: put(b); put(rev(c)); break;
    case Reconnect::RevBC: put(rev(c)); put(rev(b)); break;
    case Reconnect::RevBRevC: put(rev(b)); put(rev(c)); break;
    case Reconnect::SwapBC: put(c); put(b); break;
    case Reconnect::SwapRevB: put(c); put(rev(b)); break;
    case Reconnect::SwapRevC: put(rev(c)); put(b); break;
  }
  std::copy(mid.begin(), mid.end(), b_begin);
}

void three_opt_pass(Order& o, const DistanceMatrix& d, std::int64_t rounds, Rng& rng) {
  const int n = static_cast<int>(o.size());
  if (n < 3) return;
  for (std::int64_t round = 0; round < rounds; ++round) {
    int t1 = 0, t2 = 0;
    draw_two_positions(n, rng, t1, t2);

    double best = 0.0;
    int best_p = -1, best_q = -1, best_r = -1;
    Reconnect best_kind = Reconnect::RevB;
    for (int t3 = 0; t3 < n; ++t3) {
      if (t3 == t1 || t3 == t2) continue;
      int e3[3] = {t1, t2, t3};
      std::sort(e3, e3 + 3);
      const int p = e3[0], q = e3[1], r = e3[2];
      const int a = o[idx(p)], b = o[idx(p + 1)], c = o[idx(q)], dd = o[idx(q + 1)], e = o[idx(r)], f = o[idx((r + 1) % n)];
      const double base = d(a, b) + d(c, dd) + d(e, f);
      const double cand[7] = {
          d(a, c) + d(b, dd) + d(e, f),  // RevB
          d(a, b) + d(c, e) + d(dd, f),  // RevC
          d(a, e) + d(dd, c) + d(b, f),  // RevBC
          d(a, c) + d(b, e) + d(dd, f),  // RevBRevC
          d(a, dd) + d(e, b) + d(c, f),  // SwapBC
          d(a, dd) + d(e, c) + d(b, f),  // SwapRevB
          d(a, e) + d(dd, b) + d(c, f),  // SwapRevC
      };
      for (int k = 0; k < 7; ++k) {
        const double delta = cand[k] - base;
        if (delta < best) {
          best = delta;
          best_p = p;
          best_q = q;
          best_r = r;
          best_kind = static_cast<Reconnect>(k + 1);
        }
      }
    }
    if (best_p >= 0 && best < -kImproveEps) apply_reconnect(o, best_p, best_q, best_r, best_kind);
  }
}

bool first_improvement_sweep(Order& o, const DistanceMatrix& d) {
  const int n = static_cast<int>(o.size());
  bool improved = false;
  for (int i = 0; i + 2 < n; ++i) {
    for (int j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      const int a = o[idx(i)], b = o[idx(i + 1)], c = o[idx(j)], e = o[idx((j + 1) % n)];
      const double delta = d(a, c) + d(b, e) - d(a, b) - d(c, e);
      if (delta < -kImproveEps) {
        std::reverse(o.begin() + i + 1, o.begin() + j + 1);
        improved = true;
      }
    }
  }
  return improved;
}

void check_tour(const Instance& instance, const Tour& tour) {
  if (!is_permutation_of(tour.order(), instance.size())) throw std::invalid_argument("tour does not match instance");
}

}  // namespace

void LocalSearchConfig::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("local search alpha must be positive");
  if (!(beta > 0.0)) throw std::invalid_argument("local search beta must be positive");
  if (iterations < 1) throw std::invalid_argument("local search iterations must be at least 1");
}

std::int64_t LocalSearchConfig::trials(int n) const {
  return static_cast<std::int64_t>(std::ceil(alpha * std::pow(static_cast<double>(n), beta) - 1e-9));
}

DistanceMatrix::DistanceMatrix(const Instance& instance)
    : n_(static_cast<std::size_t>(instance.size())), d_(n_ * n_) {
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < n_; ++j) d_[i * n_ + j] = instance.dist(static_cast<int>(i), static_cast<int>(j));
  }
}

Tour local_insertion(const Instance& instance, const Tour& tour) {
  check_tour(instance, tour);
  Order o = tour.order();
  insertion_pass(o, DistanceMatrix(instance));
  return Tour(instance, std::move(o));
}

Tour random_two_opt(const Instance& instance, const Tour& tour, const LocalSearchConfig& config, Rng& rng) {
  check_tour(instance, tour);
  config.validate();
  Order o = tour.order();
  random_two_opt_pass(o, DistanceMatrix(instance), config.trials(instance.size()), rng);
  return Tour(instance, std::move(o));
}

Tour search_two_opt(const Instance& instance, const Tour& tour) {
  check_tour(instance, tour);
  Order o = tour.order();
  search_two_opt_pass(o, DistanceMatrix(instance));
  return Tour(instance, std::move(o));
}

Tour search_random_three_opt(const Instance& instance, const Tour& tour, const LocalSearchConfig& config, Rng& rng) {
  check_tour(instance, tour);
  config.validate();
  Order o = tour.order();
  three_opt_pass(o, DistanceMatrix(instance), config.trials(instance.size()), rng);
  return Tour(instance, std::move(o));
}

Tour combined_local_search(const Instance& instance, const Tour& tour, const LocalSearchConfig& config, Rng& rng) {
  check_tour(instance, tour);
  config.validate();
  const DistanceMatrix d(instance);
  const std::int64_t trials = config.trials(instance.size());
  Tour best = tour;
  Order o = tour.order();
  for (int it = 0; it < config.iterations; ++it) {
    insertion_pass(o, d);
    random_two_opt_pass(o, d, trials, rng);
    search_two_opt_pass(o, d);
    three_opt_pass(o, d, trials, rng);
    // Lengths are recomputed from scratch here so delta drift never accumulates.
    Tour current(instance, o);
    if (current.length() < best.length()) best = std::move(current);
  }
  return best;
}

Tour insertion_heuristic(const Instance& instance, InsertionRule rule, Rng& rng) {
  const int n = instance.size();
  if (n < 3) throw std::invalid_argument("insertion_heuristic needs at least 3 cities");
  const DistanceMatrix d(instance);
  const int start = rng.below(n);

  Order tour{start};
  tour.reserve(idx(n));
  std::vector<int> remaining;
  remaining.reserve(idx(n));
  for (int c = 0; c < n; ++c) {
    if (c != start) remaining.push_back(c);
  }
  std::vector<double> to_tour(idx(n));
  for (int c = 0; c < n; ++c) to_tour[idx(c)] = d(c, start);

  while (!remaining.empty()) {
    std::size_t pick = 0;
    switch (rule) {
      case InsertionRule::Random:
        pick = static_cast<std::size_t>(rng.below(static_cast<int>(remaining.size())));
        break;
      case InsertionRule::Nearest:
      case InsertionRule::Farthest:
        for (std::size_t k = 1; k < remaining.size(); ++k) {
          const double cand = to_tour[idx(remaining[k])], cur = to_tour[idx(remaining[pick])];
          if (rule == InsertionRule::Nearest ? cand < cur : cand > cur) pick = k;
        }
        break;
    }
    const int c = remaining[pick];
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));

    const int m = static_cast<int>(tour.size());
    int best_k = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < m; ++k) {
      const int a = tour[idx(k)], b = tour[idx((k + 1) % m)];
      const double delta = d(a, c) + d(c, b) - (m == 1 ? 0.0 : d(a, b));
      if (delta < best) {
        best = delta;
        best_k = k;
      }
    }
    tour.insert(tour.begin() + best_k + 1, c);
    for (int r : remaining) to_tour[idx(r)] = std::min(to_tour[idx(r)], d(r, c));
  }
  return Tour(instance, std::move(tour));
}

Tour first_improvement_two_opt_sweep(const Instance& instance, const Tour& tour) {
  check_tour(instance, tour);
  Order o = tour.order();
  first_improvement_sweep(o, DistanceMatrix(instance));
  return Tour(instance, std::move(o));
}

Tour plain_two_opt_baseline(const Instance& instance, Rng& rng) {
  if (instance.size() < 4) throw std::invalid_argument("plain_two_opt_baseline needs at least 4 cities");
  const DistanceMatrix d(instance);
  Order o = random_order(instance.size(), rng);
  while (first_improvement_sweep(o, d)) {
  }
  return Tour(instance, std::move(o));
}

}  // namespace eqtsp
