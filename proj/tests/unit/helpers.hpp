#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "eqtsp/tsp.hpp"

namespace eqtsp::testing {

inline Instance unit_square() { return Instance({{0, 0}, {1, 0}, {1, 1}, {0, 1}}); }

/// n points on a circle of radius r around (cx, cy), in angular order.
inline Instance circle(int n, double r = 0.4, double cx = 0.5, double cy = 0.5, double phase = 0.1) {
  std::vector<Point> pts;
  for (int i = 0; i < n; ++i) {
    const double a = phase + 2.0 * std::numbers::pi * i / n;
    pts.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
  }
  return Instance(std::move(pts));
}

inline std::vector<int> identity_order(int n) {
  std::vector<int> o(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) o[static_cast<std::size_t>(i)] = i;
  return o;
}

inline Instance transform(const Instance& inst, double scale, Point shift, double angle = 0.0) {
  std::vector<Point> pts;
  const double c = std::cos(angle), s = std::sin(angle);
  for (const Point& p : inst.coords()) {
    pts.push_back({scale * (c * p.x - s * p.y) + shift.x, scale * (s * p.x + c * p.y) + shift.y});
  }
  return Instance(std::move(pts));
}

}  // namespace eqtsp::testing
