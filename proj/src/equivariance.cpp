#include "eqtsp/equivariance.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace eqtsp {

std::string_view to_string(PreprocessStep step) {
  switch (step) {
    case PreprocessStep::Rotation: return "rotation";
    case PreprocessStep::ScaleTranslate: return "scale_translate";
    case PreprocessStep::ReflectH: return "reflect_h";
    case PreprocessStep::ReflectV: return "reflect_v";
    case PreprocessStep::ReflectDiag: return "reflect_diag";
  }
  return "?";
}

std::optional<PreprocessStep> parse_preprocess_step(std::string_view name) {
  for (auto s : {PreprocessStep::Rotation, PreprocessStep::ScaleTranslate, PreprocessStep::ReflectH,
                 PreprocessStep::ReflectV, PreprocessStep::ReflectDiag}) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

void PreprocessConfig::validate() const {
  for (std::size_t i = 0; i < steps.size(); ++i) {
    for (std::size_t j = i + 1; j < steps.size(); ++j) {
      if (steps[i] == steps[j]) throw std::invalid_argument("duplicate preprocessing step " + std::string(to_string(steps[i])));
    }
  }
}

PreprocessConfig PreprocessConfig::disabled() {
  PreprocessConfig c;
  c.steps.clear();
  c.per_step = false;
  c.delete_visited = false;
  c.relative_positions = false;
  return c;
}

std::vector<Point> scale_translate_canonical(std::span<const Point> points) {
  std::vector<Point> out(points.begin(), points.end());
  if (out.empty()) return out;
  double min_x = out[0].x, max_x = min_x, min_y = out[0].y, max_y = min_y;
  for (const Point& p : out) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const double scale = std::max(max_x - min_x, max_y - min_y);
  if (!(scale > 0.0)) return out;
  for (Point& p : out) p = {(p.x - min_x) / scale, (p.y - min_y) / scale};
  return out;
}

std::vector<Point> rotate_canonical(std::span<const Point> points) {
  const std::size_t n = points.size();
  if (n < 3) return {points.begin(), points.end()};
  // The mean of equal points can pick up rounding, so test for them directly.
  if (std::ranges::all_of(points, [&](const Point& p) { return p == points[0]; })) return {points.begin(), points.end()};

  Point mean;
  for (const Point& p : points) mean = mean + p;
  mean = (1.0 / static_cast<double>(n)) * mean;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (const Point& p : points) {
    const Point d = p - mean;
    sxx += d.x * d.x;
    syy += d.y * d.y;
    sxy += d.x * d.y;
  }
  const double trace = sxx + syy;
  if (!(trace > 0.0)) return {points.begin(), points.end()};
  const double spread = std::hypot(0.5 * (sxx - syy), sxy);
  if (spread <= 1e-12 * trace) return scale_translate_canonical(points);

  // Principal direction, oriented to x >= 0 (ties toward +y).
  const double phi = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  double vx = std::cos(phi), vy = std::sin(phi);
  if (vx < 0.0 || (vx == 0.0 && vy < 0.0)) {
    vx = -vx;
    vy = -vy;
  }
  const double theta = std::numbers::pi / 4.0 - std::atan2(vy, vx);
  const double c = std::cos(theta), s = std::sin(theta);
  std::vector<Point> out;
  out.reserve(n);
  for (const Point& p : points) {
    const Point d = p - mean;
    out.push_back({c * d.x - s * d.y, s * d.x + c * d.y});
  }
  return scale_translate_canonical(out);
}

std::vector<Point> reflect_canonical(std::span<const Point> points, Reflection which) {
  // outside > 0 means the point sits on the side that should be emptied.
  auto side = [which](const Point& p) {
    switch (which) {
      case Reflection::H: return p.y - 0.5;
      case Reflection::V: return p.x - 0.5;
      case Reflection::Diag: return p.y - p.x;
    }
    return 0.0;
  };
  int outside = 0, inside = 0;
  for (const Point& p : points) {
    const double s = side(p);
    if (s > 0.0) ++outside;
    else if (s < 0.0) ++inside;
  }
  std::vector<Point> out(points.begin(), points.end());
  if (outside <= inside) return out;
  for (Point& p : out) {
    switch (which) {
      case Reflection::H: p.y = 1.0 - p.y; break;
      case Reflection::V: p.x = 1.0 - p.x; break;
      case Reflection::Diag: std::swap(p.x, p.y); break;
    }
  }
  return out;
}

std::vector<Point> apply_preprocessing(std::span<const Point> points, std::span<const PreprocessStep> steps) {
  std::vector<Point> cur(points.begin(), points.end());
  for (PreprocessStep step : steps) {
    switch (step) {
      case PreprocessStep::Rotation: cur = rotate_canonical(cur); break;
      case PreprocessStep::ScaleTranslate: cur = scale_translate_canonical(cur); break;
      case PreprocessStep::ReflectH: cur = reflect_canonical(cur, Reflection::H); break;
      case PreprocessStep::ReflectV: cur = reflect_canonical(cur, Reflection::V); break;
      case PreprocessStep::ReflectDiag: cur = reflect_canonical(cur, Reflection::Diag); break;
    }
  }
  return cur;
}

CanonicalView build_view(const Instance& instance, std::span<const int> visited, const PreprocessConfig& config) {
  const int n = instance.size();
  std::vector<char> is_visited(static_cast<std::size_t>(n), 0);
  for (int c : visited) {
    if (c < 0 || c >= n) throw std::invalid_argument("build_view: visited city out of range");
    if (is_visited[static_cast<std::size_t>(c)]) throw std::invalid_argument("build_view: visited cities repeat");
    is_visited[static_cast<std::size_t>(c)] = 1;
  }
  const bool started = !visited.empty();
  const int first = started ? visited.front() : -1;
  const int last = started ? visited.back() : -1;

  CanonicalView view;
  for (int c = 0; c < n; ++c) {
    const bool keep = !config.delete_visited || !is_visited[static_cast<std::size_t>(c)] || c == first || c == last;
    if (!keep) continue;
    if (c == first) view.first_row = view.rows();
    if (c == last) view.last_row = view.rows();
    view.remaining_ids.push_back(c);
    view.selectable.push_back(is_visited[static_cast<std::size_t>(c)] ? 0 : 1);
  }

  std::vector<Point> canon;
  if (config.per_step) {
    std::vector<Point> raw;
    raw.reserve(view.remaining_ids.size());
    for (int c : view.remaining_ids) raw.push_back(instance[c]);
    canon = apply_preprocessing(raw, config.steps);
  } else {
    const std::vector<Point> whole = apply_preprocessing(instance.coords(), config.steps);
    canon.reserve(view.remaining_ids.size());
    for (int c : view.remaining_ids) canon.push_back(whole[static_cast<std::size_t>(c)]);
  }

  if (!config.relative_positions) {
    view.rel_coords = std::move(canon);
    // Absolute mode: the query carries the current position instead.
    view.first_rel = started ? view.rel_coords[static_cast<std::size_t>(*view.last_row)] : Point{};
    return view;
  }

  Point origin;
  if (started) {
    origin = canon[static_cast<std::size_t>(*view.last_row)];
  } else {
    for (const Point& p : canon) origin = origin + p;
    origin = (1.0 / static_cast<double>(canon.size())) * origin;
  }
  view.rel_coords.reserve(canon.size());
  for (const Point& p : canon) view.rel_coords.push_back(p - origin);
  if (started) {
    view.rel_coords[static_cast<std::size_t>(*view.last_row)] = Point{};
    view.first_rel = view.rel_coords[static_cast<std::size_t>(*view.first_row)];
  }
  return view;
}

}  // namespace eqtsp
