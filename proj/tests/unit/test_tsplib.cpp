#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "eqtsp/errors.hpp"
#include "eqtsp/tsplib.hpp"
#include "unit/helpers.hpp"

using namespace eqtsp;

namespace {

const std::string kData = std::string(EQTSP_SOURCE_DIR) + "/data/tsplib/";

// Published optimal tours (1-based node ids).
const std::vector<int> kBerlinOpt = {1,  49, 32, 45, 19, 41, 8,  9,  10, 43, 33, 51, 11, 52, 14, 13, 47, 26,
                                     27, 28, 12, 25, 4,  6,  15, 5,  24, 48, 38, 37, 40, 39, 36, 35, 34, 44,
                                     46, 16, 29, 50, 20, 23, 30, 2,  7,  42, 21, 17, 3,  18, 31, 22};
const std::vector<int> kEilOpt = {1,  22, 8,  26, 31, 28, 3,  36, 35, 20, 2,  29, 21, 16, 50, 34, 30,
                                  9,  49, 10, 39, 33, 45, 15, 44, 42, 40, 19, 41, 13, 25, 14, 24, 43,
                                  7,  23, 48, 6,  27, 51, 46, 12, 47, 18, 4,  17, 37, 5,  38, 11, 32};

std::vector<int> zero_based(const std::vector<int>& ids) {
  std::vector<int> out;
  for (int id : ids) out.push_back(id - 1);
  return out;
}

const char* kSmall =
    "NAME : tiny\n"
    "COMMENT : five points\n"
    "TYPE : TSP\n"
    "DIMENSION : 5\n"
    "EDGE_WEIGHT_TYPE : EUC_2D\n"
    "NODE_COORD_SECTION\n"
    "1 0 0\n"
    "2 10 0\n"
    "3 10 10\n"
    "4 0 10\n"
    "5 5 5\n"
    "EOF\n";

}  // namespace

TEST_SUITE("tsplib") {

TEST_CASE("bundled instances parse with the published optima") {
  const TsplibRecord eil = load_tsplib(kData + "eil51.tsp");
  CHECK(eil.name == "eil51");
  CHECK(eil.dimension == 51);
  CHECK(eil.raw_coords.size() == 51);
  CHECK(eil.known_opt == 426);
  const TsplibRecord berlin = load_tsplib(kData + "berlin52.tsp");
  CHECK(berlin.dimension == 52);
  CHECK(berlin.known_opt == 7542);
}

TEST_CASE("the optimal tours have the optimal integer length") {
  CHECK(tsplib_length(load_tsplib(kData + "berlin52.tsp"), zero_based(kBerlinOpt)) == 7542);
  CHECK(tsplib_length(load_tsplib(kData + "eil51.tsp"), zero_based(kEilOpt)) == 426);
}

TEST_CASE("integer length matches an independent rounding oracle") {
  const TsplibRecord eil = load_tsplib(kData + "eil51.tsp");
  Rng rng(51);
  for (int trial = 0; trial < 5; ++trial) {
    const auto order = random_order(51, rng);
    long expect = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      const Point a = eil.raw_coords[static_cast<std::size_t>(order[k])];
      const Point b = eil.raw_coords[static_cast<std::size_t>(order[(k + 1) % order.size()])];
      expect += static_cast<long>(std::floor(std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y)) + 0.5));
    }
    CHECK(tsplib_length(eil, order) == expect);
    CHECK(tsplib_length(eil, order) >= 426);
  }
}

TEST_CASE("degenerate two-city loop rounds each leg") {
  TsplibRecord r;
  r.name = "pair";
  r.dimension = 2;
  r.raw_coords = {{0, 0}, {0, 3}};
  CHECK(tsplib_length(r, std::vector<int>{0, 1}) == 6);
}

TEST_CASE("malformed files are rejected") {
  std::string short_file = kSmall;
  short_file.replace(short_file.find("5 5 5\n"), 6, "");
  CHECK_THROWS_AS(parse_tsplib(short_file), ParseError);

  std::string no_dim = kSmall;
  no_dim.replace(no_dim.find("DIMENSION : 5\n"), 14, "");
  CHECK_THROWS_AS(parse_tsplib(no_dim), ParseError);

  std::string geo = kSmall;
  geo.replace(geo.find("EUC_2D"), 6, "GEO");
  CHECK_THROWS_AS(parse_tsplib(geo), UnsupportedFormat);

  std::string dup = kSmall;
  dup.replace(dup.find("5 5 5"), 5, "4 5 5");
  CHECK_THROWS_AS(parse_tsplib(dup), ParseError);

  CHECK_THROWS_AS(parse_tsplib("NAME : x\nDIMENSION : 3\nBOGUS : 1\n"), ParseError);
}

TEST_CASE("node ids are remapped to contiguous order") {
  const char* text =
      "NAME: gaps\nTYPE: TSP\nDIMENSION: 3\nEDGE_WEIGHT_TYPE: EUC_2D\nNODE_COORD_SECTION\n7 2 2\n1 0 0\n3 1 1\n";
  const TsplibRecord r = parse_tsplib(text);
  REQUIRE(r.raw_coords.size() == 3);
  CHECK(r.raw_coords[0] == Point{0, 0});
  CHECK(r.raw_coords[1] == Point{1, 1});
  CHECK(r.raw_coords[2] == Point{2, 2});
  CHECK_FALSE(r.known_opt.has_value());
}

TEST_CASE("parse, serialize, parse round-trips") {
  for (const char* name : {"eil51.tsp", "berlin52.tsp"}) {
    const TsplibRecord a = load_tsplib(kData + name);
    CHECK(parse_tsplib(serialize_tsplib(a)) == a);
  }
  const TsplibRecord tiny = parse_tsplib(kSmall);
  CHECK(parse_tsplib(serialize_tsplib(tiny)) == tiny);
}

TEST_CASE("normalization uses one shared scale") {
  TsplibRecord r;
  r.dimension = 3;
  r.raw_coords = {{0, 0}, {10, 0}, {10, 10}};
  Instance n = normalize_to_unit_square(r);
  CHECK(n[0] == Point{0, 0});
  CHECK(n[1] == Point{1, 0});
  CHECK(n[2] == Point{1, 1});

  r.dimension = 2;
  r.raw_coords = {{5, 5}, {5, 7}};
  n = normalize_to_unit_square(r);
  CHECK(n[0] == Point{0, 0});
  CHECK(n[1] == Point{0, 1});

  r.raw_coords = {{3, 3}, {3, 3}};
  CHECK_THROWS_AS(normalize_to_unit_square(r), DegenerateInstance);
}

TEST_CASE("normalized eil51 fills the unit square") {
  const Instance n = normalize_to_unit_square(load_tsplib(kData + "eil51.tsp"));
  CHECK(std::ranges::all_of(n.coords(), [](Point p) { return p.x >= 0 && p.x <= 1 && p.y >= 0 && p.y <= 1; }));
  CHECK(std::ranges::any_of(n.coords(), [](Point p) { return p.x == 1.0 || p.y == 1.0; }));
}

TEST_CASE("normalization keeps the optimal permutation") {
  Rng rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    TsplibRecord r;
    r.dimension = 8;
    for (int i = 0; i < 8; ++i) {
      r.raw_coords.push_back({static_cast<double>(rng.below(1000)), static_cast<double>(rng.below(700))});
    }
    const Instance raw(r.raw_coords);
    CHECK(brute_force_optimal(raw).order() == brute_force_optimal(normalize_to_unit_square(r)).order());
  }
}

TEST_CASE("known optimum table") {
  CHECK(known_optimum("eil51") == 426);
  CHECK(known_optimum("berlin52") == 7542);
  CHECK(known_optimum("pr1002") == 259045);
  CHECK_FALSE(known_optimum("nonexistent").has_value());
}

}  // TEST_SUITE
