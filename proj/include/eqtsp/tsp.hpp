#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "eqtsp/rng.hpp"

namespace eqtsp {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// A set of cities in the plane. Immutable after construction.
class Instance {
 public:
  /// Throws std::invalid_argument on an empty set or non-finite coordinates.
  explicit Instance(std::vector<Point> coords, std::string id = {});

  int size() const { return static_cast<int>(coords_.size()); }
  const Point& operator[](int i) const { return coords_[static_cast<std::size_t>(i)]; }
  std::span<const Point> coords() const { return coords_; }
  const std::string& id() const { return id_; }

  double dist(int i, int j) const { return distance((*this)[i], (*this)[j]); }

 private:
  std::vector<Point> coords_;
  std::string id_;
};

/// Closed-tour length over 0-based city indices. Throws std::invalid_argument
/// when the order is not a permutation of the instance's cities.
double tour_length(const Instance& instance, std::span<const int> order);

/// True when `order` contains every index in [0, n) exactly once.
bool is_permutation_of(std::span<const int> order, int n);

/// A permutation of 0-based city indices with its cached length.
class Tour {
 public:
  Tour() = default;
  /// Validates the permutation and computes the length.
  Tour(const Instance& instance, std::vector<int> order);

  const std::vector<int>& order() const { return order_; }
  double length() const { return length_; }
  int size() const { return static_cast<int>(order_.size()); }

  friend bool operator==(const Tour& a, const Tour& b) { return a.order_ == b.order_; }

 private:
  std::vector<int> order_;
  double length_ = 0.0;
};

/// n i.i.d. uniform points in [0,1]^2. Throws std::invalid_argument for n < 1.
Instance random_instance(int n, Rng& rng);

/// Uniformly random permutation of [0, n).
std::vector<int> random_order(int n, Rng& rng);

inline constexpr int kBruteForceMaxCities = 10;

/// Exact optimum by enumeration with city 0 pinned first. Among tours whose
/// lengths agree to 1e-12 the lexicographically smallest order wins.
/// Throws OracleSizeExceeded above kBruteForceMaxCities and
/// std::invalid_argument below 3 cities.
Tour brute_force_optimal(const Instance& instance);

}  // namespace eqtsp
