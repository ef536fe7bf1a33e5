#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eqtsp/tsp.hpp"

namespace eqtsp {

enum class PreprocessStep { Rotation, ScaleTranslate, ReflectH, ReflectV, ReflectDiag };

std::string_view to_string(PreprocessStep step);
/// Accepts "rotation", "scale_translate", "reflect_h", "reflect_v", "reflect_diag".
std::optional<PreprocessStep> parse_preprocess_step(std::string_view name);

/// How decoding-time inputs are canonicalized. The three switches at the
/// bottom are the components the equivariance ablation turns off together.
struct PreprocessConfig {
  std::vector<PreprocessStep> steps{PreprocessStep::Rotation, PreprocessStep::ScaleTranslate};
  bool per_step = true;          // re-run the steps on the remaining cities at every decision
  bool delete_visited = true;    // drop interior visited cities from the view
  bool relative_positions = true;

  /// Throws std::invalid_argument on duplicate steps.
  void validate() const;

  /// Everything off: raw absolute coordinates of all cities.
  static PreprocessConfig disabled();

  friend bool operator==(const PreprocessConfig&, const PreprocessConfig&) = default;
};

/// Rotates the principal axis onto the 45 degree diagonal, then fits the
/// result into [0,1]^2. Fewer than three points, coincident points or an
/// isotropic covariance leave the rotation out.
std::vector<Point> rotate_canonical(std::span<const Point> points);

/// Moves the bounding-box corner to the origin and divides by the larger
/// axis range. Coincident points are returned unchanged.
std::vector<Point> scale_translate_canonical(std::span<const Point> points);

enum class Reflection { H, V, Diag };

/// Flips the points when strictly more of them lie outside the fixed region
/// (lower half for H, left half for V, below the main diagonal for Diag)
/// than inside it.
std::vector<Point> reflect_canonical(std::span<const Point> points, Reflection which);

/// Applies the configured steps in order.
std::vector<Point> apply_preprocessing(std::span<const Point> points, std::span<const PreprocessStep> steps);

/// Snapshot of the remaining subproblem handed to the policy.
struct CanonicalView {
  std::vector<int> remaining_ids;   // city index of each row
  std::vector<Point> rel_coords;    // one row per remaining id
  std::vector<char> selectable;     // 1 for unvisited rows
  Point first_rel;                  // query input for the first-city encoder
  std::optional<int> last_row;      // row of the last visited city
  std::optional<int> first_row;     // row of the first visited city

  int rows() const { return static_cast<int>(remaining_ids.size()); }
};

/// Builds the view after the cities in `visited` have been toured in order.
/// With nothing visited every position is taken relative to the centroid.
/// Throws std::invalid_argument when `visited` repeats or is out of range.
CanonicalView build_view(const Instance& instance, std::span<const int> visited, const PreprocessConfig& config);

}  // namespace eqtsp
