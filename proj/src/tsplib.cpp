#include "eqtsp/tsplib.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

#include "eqtsp/errors.hpp"

namespace eqtsp {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

// Known optima for the instances used in our TSPLIB benchmarks.
const std::map<std::string, long, std::less<>>& optimum_table() {
  static const std::map<std::string, long, std::less<>> table = {
      {"eil51", 426},       {"berlin52", 7542},   {"st70", 675},        {"eil76", 538},
      {"pr76", 108159},     {"rat99", 1211},      {"kroA100", 21282},   {"kroB100", 22141},
      {"kroC100", 20749},   {"kroD100", 21294},   {"kroE100", 22068},   {"rd100", 7910},
      {"eil101", 629},      {"lin105", 14379},    {"pr107", 44303},     {"pr124", 59030},
      {"bier127", 118282},  {"ch130", 6110},      {"pr136", 96772},     {"pr144", 58537},
      {"ch150", 6528},      {"kroA150", 26524},   {"kroB150", 26130},   {"pr152", 73682},
      {"u159", 42080},      {"rat195", 2323},     {"d198", 15780},      {"kroA200", 29368},
      {"kroB200", 29437},   {"ts225", 126643},    {"tsp225", 3916},     {"pr226", 80369},
      {"gil262", 2378},     {"pr264", 49135},     {"a280", 2579},       {"pr299", 48191},
      {"lin318", 42029},    {"rd400", 15281},     {"fl417", 11861},     {"pr439", 107217},
      {"pcb442", 50778},    {"d493", 35002},      {"u574", 36905},      {"rat575", 6773},
      {"p654", 34643},      {"d657", 48912},      {"u724", 41910},      {"rat783", 8806},
      {"pr1002", 259045},
  };
  return table;
}

}  // namespace

std::optional<long> known_optimum(std::string_view name) {
  const auto& table = optimum_table();
  if (auto it = table.find(name); it != table.end()) return it->second;
  return std::nullopt;
}

TsplibRecord parse_tsplib(std::istream& in) {
  TsplibRecord rec;
  bool have_dimension = false;
  bool have_type = false;
  std::map<long, Point> nodes;
  std::string line;
  bool in_coords = false;

  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t == "EOF") break;

    if (in_coords) {
      // A keyword ends the coordinate section.
      if (std::isalpha(static_cast<unsigned char>(t[0]))) {
        in_coords = false;
      } else {
        std::istringstream ls(t);
        long id = 0;
        double x = 0.0, y = 0.0;
        if (!(ls >> id >> x >> y)) throw ParseError("bad coordinate line: " + t);
        if (!nodes.emplace(id, Point{x, y}).second) throw ParseError("duplicate node id " + std::to_string(id));
        continue;
      }
    }

    std::string key, value;
    if (auto colon = t.find(':'); colon != std::string::npos) {
      key = trim(std::string_view(t).substr(0, colon));
      value = trim(std::string_view(t).substr(colon + 1));
    } else {
      key = t;
    }

    if (key == "NAME") {
      rec.name = value;
    } else if (key == "COMMENT") {
      rec.comment = rec.comment.empty() ? value : rec.comment + "\n" + value;
    } else if (key == "TYPE") {
      if (value != "TSP") throw UnsupportedFormat("unsupported problem TYPE: " + value);
    } else if (key == "DIMENSION") {
      int d = 0;
      auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), d);
      if (ec != std::errc{} || p != value.data() + value.size() || d < 1) throw ParseError("bad DIMENSION: " + value);
      rec.dimension = d;
      have_dimension = true;
    } else if (key == "EDGE_WEIGHT_TYPE") {
      if (value != "EUC_2D") throw UnsupportedFormat("unsupported EDGE_WEIGHT_TYPE: " + value);
      have_type = true;
    } else if (key == "NODE_COORD_SECTION") {
      in_coords = true;
    } else if (key == "NODE_COORD_TYPE" || key == "DISPLAY_DATA_TYPE") {
      // informational
    } else {
      throw ParseError("unknown keyword: " + key);
    }
  }

  if (!have_dimension) throw ParseError("missing DIMENSION");
  if (!have_type) throw ParseError("missing EDGE_WEIGHT_TYPE");
  if (static_cast<int>(nodes.size()) != rec.dimension) {
    throw ParseError("DIMENSION is " + std::to_string(rec.dimension) + " but " + std::to_string(nodes.size()) +
                     " coordinates were given");
  }
  rec.raw_coords.reserve(nodes.size());
  for (const auto& [id, p] : nodes) rec.raw_coords.push_back(p);
  rec.known_opt = known_optimum(rec.name);
  return rec;
}

TsplibRecord parse_tsplib(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_tsplib(in);
}

TsplibRecord load_tsplib(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_tsplib(in);
}

std::string serialize_tsplib(const TsplibRecord& record) {
  std::ostringstream out;
  out << "NAME : " << record.name << '\n';
  if (!record.comment.empty()) {
    std::istringstream lines(record.comment);
    for (std::string c; std::getline(lines, c);) out << "COMMENT : " << c << '\n';
  }
  out << "TYPE : TSP\n";
  out << "DIMENSION : " << record.dimension << '\n';
  out << "EDGE_WEIGHT_TYPE : EUC_2D\n";
  out << "NODE_COORD_SECTION\n";
  for (std::size_t i = 0; i < record.raw_coords.size(); ++i) {
    out << (i + 1) << ' ' << format_double(record.raw_coords[i].x) << ' ' << format_double(record.raw_coords[i].y) << '\n';
  }
  out << "EOF\n";
  return out.str();
}

long euc2d_distance(Point a, Point b) { return static_cast<long>(distance(a, b) + 0.5); }

long tsplib_length(const TsplibRecord& record, std::span<const int> order) {
  const int n = static_cast<int>(record.raw_coords.size());
  if (!is_permutation_of(order, n)) throw std::invalid_argument("tour is not a permutation of the record's cities");
  long total = 0;
  for (std::size_t t = 0; t < order.size(); ++t) {
    total += euc2d_distance(record.raw_coords[static_cast<std::size_t>(order[t])],
                            record.raw_coords[static_cast<std::size_t>(order[(t + 1) % order.size()])]);
  }
  return total;
}

Instance normalize_to_unit_square(const TsplibRecord& record) {
  if (record.raw_coords.empty()) throw std::invalid_argument("normalize_to_unit_square: empty record");
  double min_x = record.raw_coords[0].x, max_x = min_x;
  double min_y = record.raw_coords[0].y, max_y = min_y;
  for (const Point& p : record.raw_coords) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const double scale = std::max(max_x - min_x, max_y - min_y);
  if (!(scale > 0.0)) throw DegenerateInstance("all points of " + record.name + " coincide");
  std::vector<Point> pts;
  pts.reserve(record.raw_coords.size());
  for (const Point& p : record.raw_coords) pts.push_back({(p.x - min_x) / scale, (p.y - min_y) / scale});
  return Instance(std::move(pts), record.name);
}

}  // namespace eqtsp
