#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>
#include <stdexcept>

#include "eqtsp/bench.hpp"
#include "eqtsp/config.hpp"
#include "eqtsp/errors.hpp"
#include "eqtsp/local_search.hpp"
#include "eqtsp/policy.hpp"
#include "eqtsp/training.hpp"
#include "eqtsp/tsplib.hpp"

namespace py = pybind11;
using namespace eqtsp;

namespace {

using Coords = py::array_t<double, py::array::c_style | py::array::forcecast>;

Instance to_instance(const Coords& coords) {
  if (coords.ndim() != 2 || coords.shape(1) != 2) throw std::invalid_argument("coordinates must have shape (n, 2)");
  auto c = coords.unchecked<2>();
  std::vector<Point> points(static_cast<std::size_t>(c.shape(0)));
  for (py::ssize_t i = 0; i < c.shape(0); ++i) points[static_cast<std::size_t>(i)] = {c(i, 0), c(i, 1)};
  return Instance(std::move(points));
}

py::array_t<double> to_array(std::span<const Point> points) {
  py::array_t<double> out({static_cast<py::ssize_t>(points.size()), py::ssize_t{2}});
  auto o = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < points.size(); ++i) {
    o(static_cast<py::ssize_t>(i), 0) = points[i].x;
    o(static_cast<py::ssize_t>(i), 1) = points[i].y;
  }
  return out;
}

LocalSearchConfig ls_config(double alpha, double beta, int iterations) {
  LocalSearchConfig ls;
  ls.alpha = alpha;
  ls.beta = beta;
  ls.iterations = iterations;
  ls.validate();
  return ls;
}

InsertionRule parse_rule(const std::string& name) {
  if (name == "random") return InsertionRule::Random;
  if (name == "nearest") return InsertionRule::Nearest;
  if (name == "farthest") return InsertionRule::Farthest;
  throw std::invalid_argument("insertion rule must be random, nearest or farthest");
}

std::pair<int, DecodeMode> parse_variant(const std::string& variant) {
  if (variant == "greedy") return {1, DecodeMode::Greedy};
  if (variant == "s10") return {10, DecodeMode::Sample};
  if (variant == "S100") return {100, DecodeMode::Sample};
  throw std::invalid_argument("variant must be greedy, s10 or S100");
}

// A trained or freshly initialized model together with the preprocessing it expects.
struct Policy {
  Checkpoint model;

  static Policy load(const std::string& path) { return {load_checkpoint(path)}; }

  static Policy init(std::uint64_t seed, int hidden) {
    PolicyArch arch;
    arch.hidden = hidden;
    arch.validate();
    Rng rng = Rng(seed).child(1);
    return {{PolicyParams::init(arch, rng), PreprocessConfig{}}};
  }

  void save(const std::string& path) const { save_checkpoint(path, model.params, model.preprocess); }

  std::vector<int> solve(const Coords& coords, const std::string& variant, std::uint64_t seed, double alpha,
                         double beta, int iterations) const {
    const Instance inst = to_instance(coords);
    const auto [k, mode] = parse_variant(variant);
    const LocalSearchConfig ls = ls_config(alpha, beta, iterations);
    Rng rng = Rng(seed).child(1);
    py::gil_scoped_release release;
    return sample_best(inst, model.params, k, mode, ls, model.preprocess, rng).order();
  }
};

py::dict summary_dict(const EpochSummary& s) {
  py::dict d;
  d["epoch"] = s.epoch;
  d["n"] = s.n;
  d["lr"] = s.lr;
  d["mean_raw_len"] = s.mean_raw_len;
  d["mean_improved_len"] = s.mean_improved_len;
  d["mean_advantage"] = s.mean_advantage;
  d["mean_abs_advantage"] = s.mean_abs_advantage;
  d["aborted_steps"] = s.aborted_steps;
  d["clipped_steps"] = s.clipped_steps;
  return d;
}

py::dict row_dict(const BenchRow& r) {
  py::dict d;
  d["method"] = r.method;
  d["class"] = r.instance_class;
  d["instances"] = r.instances;
  d["mean_len"] = r.mean_len;
  d["tsplib_len"] = r.tsplib_len ? py::cast(*r.tsplib_len) : py::none();
  d["opt_len"] = r.opt_len ? py::cast(*r.opt_len) : py::none();
  d["gap_pct"] = r.gap_pct ? py::cast(*r.gap_pct) : py::none();
  d["gap_basis"] = r.gap_basis;
  return d;
}

}  // namespace

PYBIND11_MODULE(_eqtsp, m) {
  m.doc() = "Bindings for the eqtsp C++ library";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<UnsupportedFormat>(m, "UnsupportedFormat", PyExc_ValueError);
  py::register_exception<DegenerateInstance>(m, "DegenerateInstance", PyExc_ValueError);
  py::register_exception<InvalidState>(m, "InvalidState", PyExc_RuntimeError);
  py::register_exception<OracleSizeExceeded>(m, "OracleSizeExceeded", PyExc_ValueError);
  py::register_exception<ModelMismatch>(m, "ModelMismatch", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def(
      "random_instance",
      [](int n, std::uint64_t seed) {
        Rng rng(seed);
        const Instance inst = random_instance(n, rng);
        return to_array(inst.coords());
      },
      py::arg("n"), py::arg("seed") = 0, "n uniform points in the unit square as an (n, 2) array.");

  m.def(
      "tour_length", [](const Coords& coords, const std::vector<int>& order) { return tour_length(to_instance(coords), order); },
      py::arg("coords"), py::arg("order"));

  m.def(
      "brute_force_optimal", [](const Coords& coords) { return brute_force_optimal(to_instance(coords)).order(); },
      py::arg("coords"), "Exact optimum by enumeration, up to 10 cities.");

  m.def(
      "insertion_heuristic",
      [](const Coords& coords, const std::string& rule, std::uint64_t seed) {
        Rng rng(seed);
        return insertion_heuristic(to_instance(coords), parse_rule(rule), rng).order();
      },
      py::arg("coords"), py::arg("rule") = "farthest", py::arg("seed") = 0);

  m.def(
      "two_opt_baseline",
      [](const Coords& coords, std::uint64_t seed) {
        Rng rng(seed);
        return plain_two_opt_baseline(to_instance(coords), rng).order();
      },
      py::arg("coords"), py::arg("seed") = 0);

  m.def(
      "combined_local_search",
      [](const Coords& coords, const std::vector<int>& order, std::uint64_t seed, double alpha, double beta,
         int iterations) {
        const Instance inst = to_instance(coords);
        const LocalSearchConfig ls = ls_config(alpha, beta, iterations);
        Rng rng(seed);
        return combined_local_search(inst, Tour(inst, order), ls, rng).order();
      },
      py::arg("coords"), py::arg("order"), py::arg("seed") = 0, py::arg("alpha") = 0.5, py::arg("beta") = 1.5,
      py::arg("iterations") = 10);

  m.def("curriculum_dist", &curriculum_dist, py::arg("epoch"), py::arg("sigma") = 3.0, py::arg("size_min") = 10,
        py::arg("size_max") = 50);

  py::class_<TsplibRecord>(m, "TsplibInstance")
      .def_readonly("name", &TsplibRecord::name)
      .def_readonly("comment", &TsplibRecord::comment)
      .def_readonly("dimension", &TsplibRecord::dimension)
      .def_readonly("known_opt", &TsplibRecord::known_opt)
      .def_property_readonly("coords", [](const TsplibRecord& r) { return to_array(r.raw_coords); })
      .def_property_readonly("unit_coords",
                             [](const TsplibRecord& r) { return to_array(normalize_to_unit_square(r).coords()); })
      .def("length", [](const TsplibRecord& r, const std::vector<int>& order) { return tsplib_length(r, order); },
           py::arg("order"), "Integer EUC_2D length of a 0-based tour.")
      .def("__repr__", [](const TsplibRecord& r) {
        return "<TsplibInstance " + r.name + " with " + std::to_string(r.dimension) + " cities>";
      });

  m.def("load_tsplib", &load_tsplib, py::arg("path"));

  py::class_<Policy>(m, "Policy")
      .def_static("load", &Policy::load, py::arg("path"))
      .def_static("init", &Policy::init, py::arg("seed") = 0, py::arg("hidden") = 128,
                  "Untrained weights drawn the same way training draws them.")
      .def("save", &Policy::save, py::arg("path"))
      .def_property_readonly("hidden", [](const Policy& p) { return p.model.params.arch.hidden; })
      .def_property_readonly("parameter_count", [](const Policy& p) { return p.model.params.count(); })
      .def_property_readonly("lam", [](const Policy& p) { return p.model.params.lambda.value(0, 0); })
      .def("solve", &Policy::solve, py::arg("coords"), py::arg("variant") = "greedy", py::arg("seed") = 0,
           py::arg("alpha") = 0.5, py::arg("beta") = 1.5, py::arg("iterations") = 10,
           "Tour from the policy refined by local search; greedy, s10 or S100.");

  m.def(
      "train",
      [](const std::string& config_path, std::uint64_t seed, std::optional<std::filesystem::path> out_dir) {
        const TrainConfig config = load_train_config(config_path);
        TrainOptions options;
        options.out_dir = std::move(out_dir);
        options.timing = false;
        TrainResult result;
        {
          py::gil_scoped_release release;
          result = train(config, Rng(seed), options);
        }
        py::list epochs;
        for (const auto& e : result.epochs) epochs.append(summary_dict(e));
        return py::make_tuple(Policy{{std::move(result.params), config.effective_preprocess()}}, epochs);
      },
      py::arg("config"), py::arg("seed") = 0, py::arg("out_dir") = py::none(),
      "Trains from a config file. Returns the final policy and per-epoch summaries.");

  m.def("methods", [] {
    std::vector<std::string> names;
    for (Method method : all_methods()) names.emplace_back(to_string(method));
    return names;
  });

  m.def(
      "bench",
      [](const std::string& suite_name, const std::vector<std::string>& method_names, int instances,
         std::uint64_t seed, const Policy* policy, const std::string& data_dir, int threads) {
        std::vector<Method> methods;
        for (const auto& name : method_names) {
          const auto method = parse_method(name);
          if (!method) throw std::invalid_argument("unknown method " + name);
          if (needs_checkpoint(*method) && policy == nullptr) throw std::invalid_argument(name + " needs a policy");
          methods.push_back(*method);
        }
        const Suite suite = make_suite(suite_name, instances, seed, data_dir);
        BenchContext context;
        context.seed = seed;
        context.threads = threads > 0 ? threads : default_thread_count();
        if (policy != nullptr) {
          context.params = policy->model.params;
          context.preprocess = policy->model.preprocess;
        }
        std::vector<BenchRow> rows;
        {
          py::gil_scoped_release release;
          rows = run_bench(suite, methods, context);
        }
        py::list out;
        for (const auto& r : rows) out.append(row_dict(r));
        return out;
      },
      py::arg("suite"), py::arg("methods"), py::arg("instances") = 100, py::arg("seed") = 0,
      py::arg("policy") = nullptr, py::arg("data_dir") = "data/tsplib", py::arg("threads") = 0);
}
