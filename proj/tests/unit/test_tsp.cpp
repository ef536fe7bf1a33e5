#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "eqtsp/errors.hpp"
#include "eqtsp/local_search.hpp"
#include "eqtsp/tsp.hpp"
#include "unit/helpers.hpp"

using namespace eqtsp;
using namespace eqtsp::testing;

namespace {

// Second implementation: long double accumulation, explicit square root.
long double resum(const Instance& inst, const std::vector<int>& order) {
  long double total = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const Point a = inst[order[k]];
    const Point b = inst[order[(k + 1) % order.size()]];
    const long double dx = a.x - b.x, dy = a.y - b.y;
    total += std::sqrt(dx * dx + dy * dy);
  }
  return total;
}

}  // namespace

TEST_SUITE("tsp") {

TEST_CASE("square perimeter and collinear out-and-back") {
  CHECK(tour_length(unit_square(), identity_order(4)) == doctest::Approx(4.0).epsilon(1e-15));
  const Instance line({{0, 0}, {0.5, 0}, {1, 0}});
  for (auto order : {std::vector<int>{0, 1, 2}, {0, 2, 1}, {1, 0, 2}}) {
    CHECK(tour_length(line, order) == doctest::Approx(2.0).epsilon(1e-15));
  }
}

TEST_CASE("tour length matches an independent re-summation") {
  Rng rng(2024);
  const Instance inst = random_instance(7, rng);
  const auto order = identity_order(7);
  CHECK(std::abs(tour_length(inst, order) - static_cast<double>(resum(inst, order))) < 1e-12);
}

TEST_CASE("invalid tours are rejected") {
  const Instance sq = unit_square();
  CHECK_THROWS_AS(tour_length(sq, std::vector<int>{0, 1, 2}), std::invalid_argument);
  CHECK_THROWS_AS(tour_length(sq, std::vector<int>{0, 1, 2, 2}), std::invalid_argument);
  CHECK_THROWS_AS(tour_length(sq, std::vector<int>{0, 1, 2, 4}), std::invalid_argument);
  CHECK_THROWS_AS(Tour(sq, {3, 2, 1}), std::invalid_argument);
}

TEST_CASE("instances reject empty and non-finite input") {
  CHECK_THROWS_AS(Instance({}), std::invalid_argument);
  CHECK_THROWS_AS(Instance({{0, NAN}}), std::invalid_argument);
  CHECK_THROWS_AS(Instance({{INFINITY, 0}}), std::invalid_argument);
  Rng rng(1);
  CHECK_THROWS_AS(random_instance(0, rng), std::invalid_argument);
  CHECK(random_instance(1, rng).size() == 1);
}

TEST_CASE("random instances are reproducible and inside the unit square") {
  Rng a(7), b(7);
  const Instance x = random_instance(20, a), y = random_instance(20, b);
  CHECK(std::ranges::equal(x.coords(), y.coords()));

  Rng r(11);
  const Instance big = random_instance(1000, r);
  CHECK(std::ranges::all_of(big.coords(), [](Point p) { return p.x >= 0 && p.x <= 1 && p.y >= 0 && p.y <= 1; }));

  Rng m(13);
  const Instance huge = random_instance(10000, m);
  double sx = 0, sy = 0;
  for (Point p : huge.coords()) {
    sx += p.x;
    sy += p.y;
  }
  CHECK(std::abs(sx / 10000 - 0.5) < 0.01);
  CHECK(std::abs(sy / 10000 - 0.5) < 0.01);
}

TEST_CASE("child streams do not depend on parent consumption") {
  Rng a(99), b(99);
  for (int i = 0; i < 17; ++i) b.next_u64();
  Rng ca = a.child(5), cb = b.child(5);
  CHECK(ca.next_u64() == cb.next_u64());
  CHECK(a.child(5).next_u64() != a.child(6).next_u64());
}

TEST_CASE("tour length is invariant under rotation and reversal of the order") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Instance inst = random_instance(12, rng);
    auto order = random_order(12, rng);
    const double base = tour_length(inst, order);
    auto shifted = order;
    std::ranges::rotate(shifted, shifted.begin() + 5);
    auto reversed = order;
    std::ranges::reverse(reversed);
    CHECK(std::abs(tour_length(inst, shifted) - base) < 1e-12);
    CHECK(std::abs(tour_length(inst, reversed) - base) < 1e-12);
  }
}

TEST_CASE("tour length scales linearly with the instance") {
  Rng rng(4);
  const Instance inst = random_instance(15, rng);
  const auto order = random_order(15, rng);
  for (double c : {0.001, 0.5, 3.0, 1000.0}) {
    const Instance scaled = transform(inst, c, {0, 0});
    CHECK(tour_length(scaled, order) == doctest::Approx(c * tour_length(inst, order)).epsilon(1e-12));
  }
}

TEST_CASE("brute force on convex position follows the hull") {
  CHECK(brute_force_optimal(unit_square()).length() == doctest::Approx(4.0));
  const Tour t = brute_force_optimal(circle(5));
  const std::vector<int> fwd{0, 1, 2, 3, 4}, back{0, 4, 3, 2, 1};
  CHECK((t.order() == fwd || t.order() == back));
}

TEST_CASE("brute force refuses large inputs") {
  Rng rng(5);
  CHECK_THROWS_AS(brute_force_optimal(random_instance(11, rng)), OracleSizeExceeded);
  CHECK_THROWS_AS(brute_force_optimal(random_instance(2, rng)), std::invalid_argument);
}

TEST_CASE("brute force is a lower bound for every tour produced elsewhere") {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const Instance inst = random_instance(trial % 2 == 0 ? 9 : 8, rng);
    const double opt = brute_force_optimal(inst).length();
    for (auto rule : {InsertionRule::Random, InsertionRule::Nearest, InsertionRule::Farthest}) {
      CHECK(insertion_heuristic(inst, rule, rng).length() >= opt - 1e-12);
    }
    CHECK(plain_two_opt_baseline(inst, rng).length() >= opt - 1e-12);
    const Tour start(inst, random_order(inst.size(), rng));
    CHECK(combined_local_search(inst, start, LocalSearchConfig{}, rng).length() >= opt - 1e-12);
    for (int k = 0; k < 20; ++k) CHECK(tour_length(inst, random_order(inst.size(), rng)) >= opt - 1e-12);
  }
}

}  // TEST_SUITE
