#pragma once

#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "eqtsp/tsp.hpp"

namespace eqtsp {

enum class EdgeWeightType { Euc2D };

/// A parsed TSPLIB instance in its original units.
struct TsplibRecord {
  std::string name;
  std::string comment;
  int dimension = 0;
  EdgeWeightType edge_weight_type = EdgeWeightType::Euc2D;
  std::vector<Point> raw_coords;  // ordered by ascending node id
  std::optional<long> known_opt;

  friend bool operator==(const TsplibRecord&, const TsplibRecord&) = default;
};

/// Throws ParseError on malformed input and UnsupportedFormat for any
/// EDGE_WEIGHT_TYPE other than EUC_2D.
TsplibRecord parse_tsplib(std::istream& in);
TsplibRecord parse_tsplib(std::string_view text);
TsplibRecord load_tsplib(const std::string& path);

/// Writes the record back in TSPLIB syntax with shortest round-trip numbers.
std::string serialize_tsplib(const TsplibRecord& record);

/// TSPLIB nint(): Euclidean distance rounded to the nearest integer.
long euc2d_distance(Point a, Point b);

/// Tour length under the EUC_2D convention on raw coordinates.
long tsplib_length(const TsplibRecord& record, std::span<const int> order);
inline long tsplib_length(const TsplibRecord& record, const Tour& tour) { return tsplib_length(record, tour.order()); }

/// Shifts the bounding box corner to the origin and divides both axes by the
/// larger range. Throws DegenerateInstance when every point coincides.
Instance normalize_to_unit_square(const TsplibRecord& record);

/// Published optimal tour lengths (EUC_2D convention), by instance name.
std::optional<long> known_optimum(std::string_view name);

}  // namespace eqtsp
