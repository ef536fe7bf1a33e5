#include "eqtsp/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "eqtsp/errors.hpp"

namespace eqtsp {

using ad::Matrix;
using ad::Parameter;
using ad::Tape;
using ad::Var;

void PolicyArch::validate() const {
  if (hidden < 1 || n_gnn < 0 || mlp_hidden1 < 1 || mlp_hidden2 < 1) {
    throw std::invalid_argument("policy architecture dimensions must be positive");
  }
}

namespace {

Parameter make_param(std::string name, Eigen::Index rows, Eigen::Index cols, double bound, Rng* rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng ? bound * (2.0 * rng->uniform() - 1.0) : 0.0;
  return Parameter(std::move(name), std::move(m));
}

PolicyParams build(const PolicyArch& arch, Rng* rng) {
  arch.validate();
  const int h = arch.hidden;
  auto bound = [](int fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); };
  PolicyParams p;
  p.arch = arch;
  p.mlp_w1 = make_param("mlp.w1", 2, arch.mlp_hidden1, bound(2), rng);
  p.mlp_b1 = make_param("mlp.b1", 1, arch.mlp_hidden1, bound(2), rng);
  p.mlp_w2 = make_param("mlp.w2", arch.mlp_hidden1, arch.mlp_hidden2, bound(arch.mlp_hidden1), rng);
  p.mlp_b2 = make_param("mlp.b2", 1, arch.mlp_hidden2, bound(arch.mlp_hidden1), rng);
  p.mlp_w3 = make_param("mlp.w3", arch.mlp_hidden2, h, bound(arch.mlp_hidden2), rng);
  p.mlp_b3 = make_param("mlp.b3", 1, h, bound(arch.mlp_hidden2), rng);
  p.gnn_theta0 = make_param("gnn.theta0", 2, h, bound(2), rng);
  for (int l = 1; l <= arch.n_gnn; ++l) {
    const std::string k = std::to_string(l);
    p.gnn_theta.push_back(make_param("gnn.theta." + k, h, h, bound(h), rng));
    p.gnn_aggr_w.push_back(make_param("gnn.aggr_w." + k, h, h, bound(h), rng));
    p.gnn_aggr_b.push_back(make_param("gnn.aggr_b." + k, 1, h, bound(h), rng));
  }
  p.lambda = Parameter("gnn.lambda", Matrix::Constant(1, 1, 0.5));
  p.theta_g = make_param("dec.theta_g", h, h, bound(h), rng);
  p.theta_m = make_param("dec.theta_m", h, h, bound(h), rng);
  p.w = make_param("dec.w", h, 1, bound(h), rng);
  return p;
}

}  // namespace

PolicyParams PolicyParams::init(const PolicyArch& arch, Rng& rng) { return build(arch, &rng); }

std::vector<Parameter*> PolicyParams::all() {
  std::vector<Parameter*> out{&mlp_w1, &mlp_b1, &mlp_w2, &mlp_b2, &mlp_w3, &mlp_b3, &gnn_theta0};
  for (std::size_t l = 0; l < gnn_theta.size(); ++l) {
    out.push_back(&gnn_theta[l]);
    out.push_back(&gnn_aggr_w[l]);
    out.push_back(&gnn_aggr_b[l]);
  }
  out.insert(out.end(), {&lambda, &theta_g, &theta_m, &w});
  return out;
}

std::vector<const Parameter*> PolicyParams::all() const {
  auto ptrs = const_cast<PolicyParams*>(this)->all();
  return {ptrs.begin(), ptrs.end()};
}

std::size_t PolicyParams::count() const {
  std::size_t n = 0;
  for (const Parameter* p : all()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void PolicyParams::zero_grad() {
  for (Parameter* p : all()) p->zero_grad();
}

void PolicyParams::clamp_lambda() { lambda.value(0, 0) = std::clamp(lambda.value(0, 0), 0.0, 1.0); }

bool PolicyParams::finite() const {
  return std::ranges::all_of(all(), [](const Parameter* p) { return p->value.allFinite(); });
}

namespace {

template <class Params, class Leaf>
void bind_all(BoundPolicy& b, Params& p, Leaf leaf) {
  b.mlp_w1 = leaf(p.mlp_w1);
  b.mlp_b1 = leaf(p.mlp_b1);
  b.mlp_w2 = leaf(p.mlp_w2);
  b.mlp_b2 = leaf(p.mlp_b2);
  b.mlp_w3 = leaf(p.mlp_w3);
  b.mlp_b3 = leaf(p.mlp_b3);
  b.gnn_theta0 = leaf(p.gnn_theta0);
  for (std::size_t l = 0; l < p.gnn_theta.size(); ++l) {
    b.gnn_theta.push_back(leaf(p.gnn_theta[l]));
    b.gnn_aggr_w.push_back(leaf(p.gnn_aggr_w[l]));
    b.gnn_aggr_b.push_back(leaf(p.gnn_aggr_b[l]));
  }
  b.lambda = leaf(p.lambda);
  b.theta_g = leaf(p.theta_g);
  b.theta_m = leaf(p.theta_m);
  b.w = leaf(p.w);
}

}  // namespace

BoundPolicy::BoundPolicy(Tape& tape, PolicyParams& params) {
  bind_all(*this, params, [&tape](Parameter& p) { return tape.param(p); });
}

BoundPolicy::BoundPolicy(Tape& tape, const PolicyParams& params) {
  bind_all(*this, params, [&tape](const Parameter& p) { return tape.view(p.value); });
}

Var gnn_encode(Tape& tape, const CanonicalView& view, const BoundPolicy& p) {
  const int rows = view.rows();
  if (rows < 2) throw InvalidState("gnn_encode: fewer than two cities remain");
  Matrix coords(rows, 2);
  for (int r = 0; r < rows; ++r) {
    coords(r, 0) = view.rel_coords[static_cast<std::size_t>(r)].x;
    coords(r, 1) = view.rel_coords[static_cast<std::size_t>(r)].y;
  }
  Var x = tape.matmul(tape.constant(std::move(coords)), p.gnn_theta0);
  for (std::size_t l = 0; l < p.gnn_theta.size(); ++l) {
    const Var own = tape.matmul(x, p.gnn_theta[l]);
    const Var neighbours = tape.row_mean_excluding_self(x);
    const Var aggregated = tape.relu(tape.add_row(tape.matmul(neighbours, p.gnn_aggr_w[l]), p.gnn_aggr_b[l]));
    x = tape.mix(p.lambda, own, aggregated);
  }
  return x;
}

Var mlp_encode(Tape& tape, Point first_rel, const BoundPolicy& p) {
  Matrix in(1, 2);
  in << first_rel.x, first_rel.y;
  Var h = tape.relu(tape.add_row(tape.matmul(tape.constant(std::move(in)), p.mlp_w1), p.mlp_b1));
  h = tape.relu(tape.add_row(tape.matmul(h, p.mlp_w2), p.mlp_b2));
  return tape.add_row(tape.matmul(h, p.mlp_w3), p.mlp_b3);
}

StepChoice decode_step(Tape& tape, const CanonicalView& view, Var embeddings, Var query, const BoundPolicy& p,
                       DecodeMode mode, Rng& rng, std::optional<int> forced_city) {
  if (std::ranges::none_of(view.selectable, [](char c) { return c != 0; })) {
    throw InvalidState("decode_step: every city is masked");
  }
  const Var keys = tape.matmul(embeddings, p.theta_g);
  const Var q = tape.matmul(query, p.theta_m);
  const Var scores = tape.matmul(tape.tanh(tape.add_row(keys, q)), p.w);
  const Var probs = tape.masked_softmax(scores, view.selectable);

  StepChoice choice;
  const Matrix& pv = tape.value(probs);
  choice.probs.assign(pv.data(), pv.data() + pv.size());
  const int rows = view.rows();

  if (forced_city) {
    for (int r = 0; r < rows; ++r) {
      if (view.remaining_ids[static_cast<std::size_t>(r)] == *forced_city) choice.row = r;
    }
    if (choice.row < 0 || !view.selectable[static_cast<std::size_t>(choice.row)]) {
      throw InvalidState("decode_step: forced city is not selectable");
    }
  } else if (mode == DecodeMode::Greedy) {
    for (int r = 0; r < rows; ++r) {
      if (!view.selectable[static_cast<std::size_t>(r)]) continue;
      if (choice.row < 0 || choice.probs[static_cast<std::size_t>(r)] > choice.probs[static_cast<std::size_t>(choice.row)]) {
        choice.row = r;
      }
    }
  } else {
    const double u = rng.uniform();
    double acc = 0.0;
    for (int r = 0; r < rows; ++r) {
      if (!view.selectable[static_cast<std::size_t>(r)]) continue;
      choice.row = r;  // last selectable row absorbs rounding
      acc += choice.probs[static_cast<std::size_t>(r)];
      if (u < acc) break;
    }
  }
  choice.city = view.remaining_ids[static_cast<std::size_t>(choice.row)];
  choice.log_prob = tape.log_pick(probs, choice.row);
  return choice;
}

namespace {

// Runs the decoding loop. With `recorded` set every step lands on that tape;
// otherwise each step gets a scratch tape bound through `bind`.
template <class Bind>
RolloutResult run_rollout(const Instance& instance, Bind&& bind, const PreprocessConfig& preprocess, DecodeMode mode,
                          Rng& rng, Tape* recorded, std::span<const int> forced) {
  const int n = instance.size();
  if (n < 3) throw std::invalid_argument("rollout needs at least 3 cities");
  if (!forced.empty() && (static_cast<int>(forced.size()) != n || forced.front() != 0)) {
    throw std::invalid_argument("replayed tour must cover every city and start at city 0");
  }
  preprocess.validate();

  std::optional<BoundPolicy> bound_once;
  if (recorded) bound_once.emplace(bind(*recorded));

  std::vector<int> visited{0};
  visited.reserve(static_cast<std::size_t>(n));
  RolloutResult result;
  result.rewards.assign(static_cast<std::size_t>(n), 0.0);

  for (int t = 2; t <= n; ++t) {
    const CanonicalView view = build_view(instance, visited, preprocess);
    std::optional<int> force;
    if (!forced.empty()) force = forced[static_cast<std::size_t>(t - 1)];

    Tape scratch;
    Tape& tape = recorded ? *recorded : scratch;
    std::optional<BoundPolicy> local;
    if (!recorded) local.emplace(bind(scratch));
    const BoundPolicy& p = recorded ? *bound_once : *local;

    const Var emb = gnn_encode(tape, view, p);
    const Var query = mlp_encode(tape, view.first_rel, p);
    const StepChoice choice = decode_step(tape, view, emb, query, p, mode, rng, force);

    result.log_prob_sum += tape.scalar(choice.log_prob);
    if (recorded) result.log_prob = result.log_prob ? tape.add(*result.log_prob, choice.log_prob) : choice.log_prob;

    result.rewards[static_cast<std::size_t>(t - 1)] = -instance.dist(visited.back(), choice.city);
    visited.push_back(choice.city);
  }
  result.rewards.back() -= instance.dist(visited.back(), visited.front());
  result.tour = Tour(instance, std::move(visited));
  return result;
}

}  // namespace

RolloutResult rollout(const Instance& instance, const PolicyParams& params, const PreprocessConfig& preprocess,
                      DecodeMode mode, Rng& rng) {
  // Scratch tapes read the parameters through non-differentiable views.
  auto bind = [&params](Tape& tape) { return BoundPolicy(tape, params); };
  return run_rollout(instance, bind, preprocess, mode, rng, nullptr, {});
}

RolloutResult rollout(const Instance& instance, PolicyParams& params, const PreprocessConfig& preprocess,
                      DecodeMode mode, Rng& rng, Tape& tape) {
  auto bind = [&params](Tape& t) { return BoundPolicy(t, params); };
  return run_rollout(instance, bind, preprocess, mode, rng, &tape, {});
}

Var trajectory_log_prob(Tape& tape, const Instance& instance, PolicyParams& params, const PreprocessConfig& preprocess,
                        std::span<const int> order) {
  auto bind = [&params](Tape& t) { return BoundPolicy(t, params); };
  Rng unused(0);
  return *run_rollout(instance, bind, preprocess, DecodeMode::Greedy, unused, &tape, order).log_prob;
}

Tour sample_best(const Instance& instance, const PolicyParams& params, int k, DecodeMode mode,
                 const LocalSearchConfig& ls, const PreprocessConfig& preprocess, Rng& rng) {
  if (k < 1) throw std::invalid_argument("sample_best: k must be at least 1");
  if (k == 1) {
    const RolloutResult r = rollout(instance, params, preprocess, mode, rng);
    return combined_local_search(instance, r.tour, ls, rng);
  }
  std::optional<Tour> best;
  for (int j = 0; j < k; ++j) {
    Rng stream = rng.child(static_cast<std::uint64_t>(j));
    const RolloutResult r = rollout(instance, params, preprocess, mode, stream);
    Tour improved = combined_local_search(instance, r.tour, ls, stream);
    if (!best || improved.length() < best->length()) best = std::move(improved);
  }
  return *best;
}

namespace {

constexpr std::string_view kMagic = "EQTSPCKP";

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
  }
  return v;
}

nlohmann::json preprocess_json(const PreprocessConfig& c) {
  nlohmann::json steps = nlohmann::json::array();
  for (PreprocessStep s : c.steps) steps.push_back(std::string(to_string(s)));
  return {{"steps", steps},
          {"per_step", c.per_step},
          {"delete_visited", c.delete_visited},
          {"relative_positions", c.relative_positions}};
}

PreprocessConfig preprocess_from_json(const nlohmann::json& j) {
  PreprocessConfig c;
  c.steps.clear();
  for (const auto& s : j.at("steps")) {
    auto step = parse_preprocess_step(s.get<std::string>());
    if (!step) throw ModelMismatch("checkpoint: unknown preprocessing step " + s.get<std::string>());
    c.steps.push_back(*step);
  }
  c.per_step = j.at("per_step").get<bool>();
  c.delete_visited = j.at("delete_visited").get<bool>();
  c.relative_positions = j.at("relative_positions").get<bool>();
  c.validate();
  return c;
}

}  // namespace

void write_checkpoint(std::ostream& out, const PolicyParams& params, const PreprocessConfig& preprocess) {
  nlohmann::json arrays = nlohmann::json::array();
  for (const Parameter* p : params.all()) arrays.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
  const nlohmann::json header = {
      {"arch",
       {{"hidden", params.arch.hidden},
        {"n_gnn", params.arch.n_gnn},
        {"mlp_hidden1", params.arch.mlp_hidden1},
        {"mlp_hidden2", params.arch.mlp_hidden2}}},
      {"preprocess", preprocess_json(preprocess)},
      {"arrays", arrays}};
  out << kMagic << ' ' << kCheckpointVersion << '\n' << header.dump() << '\n';
  for (const Parameter* p : params.all()) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const std::uint64_t bits = to_le(std::bit_cast<std::uint64_t>(p->value.data()[i]));
      char buf[8];
      std::memcpy(buf, &bits, 8);
      out.write(buf, 8);
    }
  }
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

void save_checkpoint(const std::string& path, const PolicyParams& params, const PreprocessConfig& preprocess) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_checkpoint(out, params, preprocess);
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string first;
  if (!std::getline(in, first)) throw ModelMismatch("checkpoint: empty input");
  if (first != std::string(kMagic) + ' ' + std::to_string(kCheckpointVersion)) {
    throw ModelMismatch("checkpoint: unrecognised magic or version '" + first + "'");
  }
  std::string line;
  if (!std::getline(in, line)) throw ModelMismatch("checkpoint: missing header");
  nlohmann::json header;
  PolicyArch arch;
  PreprocessConfig preprocess;
  try {
    header = nlohmann::json::parse(line);
    const auto& a = header.at("arch");
    arch.hidden = a.at("hidden").get<int>();
    arch.n_gnn = a.at("n_gnn").get<int>();
    arch.mlp_hidden1 = a.at("mlp_hidden1").get<int>();
    arch.mlp_hidden2 = a.at("mlp_hidden2").get<int>();
    arch.validate();
    preprocess = preprocess_from_json(header.at("preprocess"));
  } catch (const ModelMismatch&) {
    throw;
  } catch (const std::exception& e) {
    throw ModelMismatch(std::string("checkpoint: bad header: ") + e.what());
  }

  Checkpoint ckp{build(arch, nullptr), preprocess};
  auto params = ckp.params.all();
  const auto& arrays = header.at("arrays");
  if (!arrays.is_array() || arrays.size() != params.size()) throw ModelMismatch("checkpoint: array count does not match architecture");
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    const auto& meta = arrays[k];
    if (meta.value("name", "") != p.name || meta.value("rows", -1L) != p.value.rows() || meta.value("cols", -1L) != p.value.cols()) {
      throw ModelMismatch("checkpoint: array " + std::to_string(k) + " does not match " + p.name);
    }
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      char buf[8];
      if (!in.read(buf, 8)) throw ModelMismatch("checkpoint: truncated data in " + p.name);
      std::uint64_t bits = 0;
      std::memcpy(&bits, buf, 8);
      p.value.data()[i] = std::bit_cast<double>(to_le(bits));
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw ModelMismatch("checkpoint: trailing bytes");
  if (!ckp.params.finite()) throw ModelMismatch("checkpoint: non-finite parameter values");
  return ckp;
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_checkpoint(in);
}

}  // namespace eqtsp
