#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>
#include <utility>

#include "eqtsp/errors.hpp"
#include "eqtsp/policy.hpp"
#include "unit/gradcheck.hpp"
#include "unit/helpers.hpp"

using namespace eqtsp;
using namespace eqtsp::testing;
using ad::Matrix;
using ad::Tape;
using ad::Var;

namespace {

PolicyArch small_arch() {
  PolicyArch a;
  a.hidden = 8;
  return a;
}

PolicyParams make_params(const PolicyArch& arch, std::uint64_t seed) {
  Rng rng(seed);
  return PolicyParams::init(arch, rng);
}

CanonicalView random_view(int rows, Rng& rng) {
  CanonicalView v;
  for (int r = 0; r < rows; ++r) {
    v.remaining_ids.push_back(r);
    v.rel_coords.push_back({rng.uniform() - 0.5, rng.uniform() - 0.5});
    v.selectable.push_back(1);
  }
  return v;
}

Matrix encode(const CanonicalView& v, const PolicyParams& p) {
  Tape tape;
  const BoundPolicy b(tape, p);
  return tape.value(gnn_encode(tape, v, b));
}

}  // namespace

TEST_SUITE("policy") {

TEST_CASE("parameter layout") {
  const PolicyParams p = make_params(PolicyArch{}, 1);
  CHECK(p.mlp_w1.value.rows() == 2);
  CHECK(p.mlp_w1.value.cols() == 128);
  CHECK(p.mlp_w2.value.cols() == 256);
  CHECK(p.mlp_w3.value.cols() == 128);
  CHECK(p.gnn_theta0.value.rows() == 2);
  CHECK(p.gnn_theta.size() == 3);
  CHECK(p.w.value.rows() == 128);
  CHECK(p.w.value.cols() == 1);
  CHECK(p.lambda.value(0, 0) == 0.5);
  for (const ad::Parameter* q : p.all()) {
    if (q->name == "gnn.lambda") continue;
    const bool from_input = q->name == "mlp.w1" || q->name == "mlp.b1" || q->name == "gnn.theta0";
    const bool from_wide = q->name == "mlp.w3" || q->name == "mlp.b3";
    const double bound = 1.0 / std::sqrt(from_input ? 2.0 : from_wide ? 256.0 : 128.0);
    CAPTURE(q->name);
    CHECK(q->value.cwiseAbs().maxCoeff() <= bound);
  }
  std::vector<std::string> names;
  for (const ad::Parameter* q : p.all()) names.push_back(q->name);
  CHECK(std::set<std::string>(names.begin(), names.end()).size() == names.size());
}

TEST_CASE("GNN rows follow a row permutation exactly") {
  Rng rng(2);
  for (const PolicyArch& arch : {small_arch(), PolicyArch{}}) {
    const PolicyParams p = make_params(arch, 3);
    const CanonicalView v = random_view(11, rng);
    std::vector<int> perm(11);
    std::iota(perm.begin(), perm.end(), 0);
    std::ranges::shuffle(perm, std::mt19937(4));
    CanonicalView w = v;
    for (int r = 0; r < 11; ++r) w.rel_coords[static_cast<std::size_t>(r)] = v.rel_coords[static_cast<std::size_t>(perm[static_cast<std::size_t>(r)])];
    const Matrix a = encode(v, p), b = encode(w, p);
    for (int r = 0; r < 11; ++r) CHECK(b.row(r) == a.row(perm[static_cast<std::size_t>(r)]));
  }
}

TEST_CASE("GNN with lambda = 1 is a plain linear chain") {
  Rng rng(5);
  PolicyParams p = make_params(small_arch(), 6);
  p.lambda.value(0, 0) = 1.0;
  const CanonicalView v = random_view(7, rng);
  Matrix x(7, 2);
  for (int r = 0; r < 7; ++r) x.row(r) << v.rel_coords[static_cast<std::size_t>(r)].x, v.rel_coords[static_cast<std::size_t>(r)].y;
  Matrix expect = x * p.gnn_theta0.value;
  for (const auto& t : p.gnn_theta) expect = expect * t.value;
  CHECK((encode(v, p) - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("duplicate cities get identical embeddings") {
  Rng rng(7);
  const PolicyParams p = make_params(PolicyArch{}, 8);
  CanonicalView v = random_view(9, rng);
  v.rel_coords[6] = v.rel_coords[2];
  const Matrix e = encode(v, p);
  CHECK(e.row(6) == e.row(2));
  CHECK(e.rows() == 9);
  CHECK(e.cols() == 128);
}

TEST_CASE("GNN needs two rows") {
  Rng rng(9);
  const PolicyParams p = make_params(small_arch(), 9);
  CHECK_THROWS_AS(encode(random_view(1, rng), p), InvalidState);
}

TEST_CASE("first-city MLP") {
  PolicyParams p = make_params(PolicyArch{}, 10);
  {
    PolicyParams z = p;
    z.mlp_b1.value.setZero();
    z.mlp_b2.value.setZero();
    z.mlp_b3.value.setZero();
    Tape tape;
    const BoundPolicy b(tape, z);
    const Matrix& out = tape.value(mlp_encode(tape, {0, 0}, b));
    CHECK(out.cols() == 128);
    CHECK(out.cwiseAbs().maxCoeff() == 0.0);
  }
  // Hand-rolled forward pass with explicit loops.
  const double in[2] = {0.3, 0.7};
  std::vector<double> h1(128), h2(256), out(128);
  for (int j = 0; j < 128; ++j) {
    double s = p.mlp_b1.value(0, j);
    for (int i = 0; i < 2; ++i) s += in[i] * p.mlp_w1.value(i, j);
    h1[static_cast<std::size_t>(j)] = s > 0 ? s : 0;
  }
  for (int j = 0; j < 256; ++j) {
    double s = p.mlp_b2.value(0, j);
    for (int i = 0; i < 128; ++i) s += h1[static_cast<std::size_t>(i)] * p.mlp_w2.value(i, j);
    h2[static_cast<std::size_t>(j)] = s > 0 ? s : 0;
  }
  for (int j = 0; j < 128; ++j) {
    double s = p.mlp_b3.value(0, j);
    for (int i = 0; i < 256; ++i) s += h2[static_cast<std::size_t>(i)] * p.mlp_w3.value(i, j);
    out[static_cast<std::size_t>(j)] = s;
  }
  Tape tape;
  const BoundPolicy b(tape, std::as_const(p));
  const Matrix& got = tape.value(mlp_encode(tape, {0.3, 0.7}, b));
  for (int j = 0; j < 128; ++j) CHECK(std::abs(got(0, j) - out[static_cast<std::size_t>(j)]) < 1e-12);
}

TEST_CASE("decoder masking and symmetry") {
  Rng rng(11);
  const PolicyParams p = make_params(small_arch(), 12);
  CanonicalView v = random_view(5, rng);
  v.selectable = {0, 0, 1, 0, 0};
  {
    Tape tape;
    const BoundPolicy b(tape, p);
    const StepChoice c = decode_step(tape, v, gnn_encode(tape, v, b), mlp_encode(tape, {0.1, 0.2}, b), b,
                                     DecodeMode::Sample, rng);
    CHECK(c.city == 2);
    CHECK(tape.scalar(c.log_prob) == 0.0);
    CHECK(c.probs == std::vector<double>{0, 0, 1, 0, 0});
  }
  v.selectable = {1, 0, 1, 1, 0};
  for (auto mode : {DecodeMode::Greedy, DecodeMode::Sample}) {
    for (int k = 0; k < 20; ++k) {
      Tape tape;
      const BoundPolicy b(tape, p);
      const StepChoice c =
          decode_step(tape, v, gnn_encode(tape, v, b), mlp_encode(tape, {0.1, 0.2}, b), b, mode, rng);
      CHECK(c.probs[1] == 0.0);
      CHECK(c.probs[4] == 0.0);
      CHECK(v.selectable[static_cast<std::size_t>(c.row)] == 1);
      CHECK(std::abs(std::accumulate(c.probs.begin(), c.probs.end(), 0.0) - 1.0) < 1e-9);
    }
  }
  v.selectable = {0, 0, 0, 0, 0};
  Tape tape;
  const BoundPolicy b(tape, p);
  CHECK_THROWS_AS(decode_step(tape, v, gnn_encode(tape, v, b), mlp_encode(tape, {0, 0}, b), b, DecodeMode::Greedy, rng),
                  InvalidState);

  // Two selectable rows with equal embeddings split the mass evenly.
  Tape t2;
  const BoundPolicy b2(t2, p);
  Matrix emb(3, 8);
  for (int j = 0; j < 8; ++j) emb(0, j) = emb(2, j) = 0.1 * j - 0.3;
  emb.row(1).setConstant(0.9);
  CanonicalView three = random_view(3, rng);
  three.selectable = {1, 0, 1};
  const StepChoice c = decode_step(t2, three, t2.constant(emb), mlp_encode(t2, {0.4, -0.2}, b2), b2, DecodeMode::Greedy, rng);
  CHECK(c.probs[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(c.probs[2] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(c.row == 0);
}

TEST_CASE("rollouts") {
  const PolicyParams p = make_params(small_arch(), 13);
  Rng gen(14);
  for (int trial = 0; trial < 10; ++trial) {
    const Instance inst = random_instance(4 + trial, gen);
    for (auto mode : {DecodeMode::Greedy, DecodeMode::Sample}) {
      Rng rng(trial);
      const RolloutResult r = rollout(inst, p, PreprocessConfig{}, mode, rng);
      CHECK(r.tour.order().front() == 0);
      CHECK(std::abs(std::accumulate(r.rewards.begin(), r.rewards.end(), 0.0) + r.tour.length()) < 1e-9);
      CHECK(r.rewards.front() == 0.0);
      CHECK(r.log_prob_sum <= 0.0);
      CHECK_FALSE(r.log_prob.has_value());
    }
  }
  // Three cities: two decisions, the second forced.
  const Instance tri({{0, 0}, {1, 0}, {0, 1}});
  PolicyParams q = p;
  Rng rng(1);
  Tape tape;
  const RolloutResult r = rollout(tri, q, PreprocessConfig{}, DecodeMode::Sample, rng, tape);
  REQUIRE(r.log_prob.has_value());
  CHECK(r.tour.size() == 3);
  CHECK(tape.scalar(*r.log_prob) == doctest::Approx(r.log_prob_sum));
  CHECK(tape.scalar(trajectory_log_prob(tape, tri, q, PreprocessConfig{}, r.tour.order())) ==
        doctest::Approx(r.log_prob_sum));
  CHECK_THROWS_AS(rollout(Instance({{0, 0}, {1, 1}}), p, PreprocessConfig{}, DecodeMode::Greedy, rng),
                  std::invalid_argument);
}

TEST_CASE("greedy rollouts are reproducible and thread-independent") {
  const PolicyParams p = make_params(PolicyArch{}, 15);
  Rng gen(16);
  std::vector<Instance> insts;
  for (int i = 0; i < 6; ++i) insts.push_back(random_instance(12, gen));
  std::vector<std::vector<int>> serial;
  for (const auto& inst : insts) {
    Rng r(0);
    serial.push_back(rollout(inst, p, PreprocessConfig{}, DecodeMode::Greedy, r).tour.order());
  }
  std::vector<std::vector<int>> parallel(insts.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < insts.size(); ++i) {
      pool.emplace_back([&, i] {
        Rng r(0);
        parallel[i] = rollout(insts[i], p, PreprocessConfig{}, DecodeMode::Greedy, r).tour.order();
      });
    }
  }
  CHECK(serial == parallel);
}

TEST_CASE("greedy decisions ignore translation and uniform scaling") {
  const PolicyParams p = make_params(PolicyArch{}, 17);
  Rng gen(18);
  int same = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Instance inst = random_instance(15, gen);
    const Instance moved = transform(inst, 0.05 + 20 * gen.uniform(), {gen.uniform() * 10 - 5, gen.uniform() * 10 - 5});
    Rng a(0), b(0);
    if (rollout(inst, p, PreprocessConfig{}, DecodeMode::Greedy, a).tour.order() ==
        rollout(moved, p, PreprocessConfig{}, DecodeMode::Greedy, b).tour.order()) {
      ++same;
    }
  }
  CHECK(same == 20);
}

TEST_CASE("relabeling cities relabels the greedy tour") {
  const PolicyParams p = make_params(PolicyArch{}, 19);
  Rng gen(20);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 12;
    const Instance inst = random_instance(n, gen);
    // Keep city 0 in place: it is the fixed starting city.
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin() + 1, perm.end(), std::mt19937(static_cast<unsigned>(trial)));
    std::vector<Point> pts(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pts[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = inst[i];
    const Instance relabeled(pts);
    Rng a(0), b(0);
    const auto t1 = rollout(inst, p, PreprocessConfig{}, DecodeMode::Greedy, a).tour.order();
    const auto t2 = rollout(relabeled, p, PreprocessConfig{}, DecodeMode::Greedy, b).tour.order();
    std::vector<int> mapped;
    for (int c : t1) mapped.push_back(perm[static_cast<std::size_t>(c)]);
    CHECK(mapped == t2);
  }
}

TEST_CASE("log-probability gradient matches finite differences end to end") {
  PolicyParams p = make_params(small_arch(), 21);
  p.lambda.value(0, 0) = 0.43;
  Rng gen(22);
  const Instance inst = random_instance(6, gen);
  Rng rng(23);
  const std::vector<int> order = rollout(inst, p, PreprocessConfig{}, DecodeMode::Sample, rng).tour.order();
  // Below a magnitude of 1e-5 double rounding in the central difference of a
  // loss near 5 is already about 1e-4 of the entry, so that is the floor.
  const auto r = grad_check(
      p.all(), [&](Tape& t) { return trajectory_log_prob(t, inst, p, PreprocessConfig{}, order); }, 1e-5, 1e-5);
  MESSAGE("checked " << r.checked << " entries, worst relative error " << r.worst_rel << " in " << r.worst_name << "["
                  << r.worst_index << "] analytic " << r.worst_analytic << " numeric " << r.worst_numeric);
  CHECK(r.worst_rel < 1e-4);
}

TEST_CASE("sample_best") {
  const PolicyParams p = make_params(small_arch(), 24);
  Rng gen(25);
  const Instance inst = random_instance(15, gen);
  const LocalSearchConfig ls;
  Rng a(3), b(3);
  const Tour best = sample_best(inst, p, 1, DecodeMode::Greedy, ls, PreprocessConfig{}, a);
  const RolloutResult r = rollout(inst, p, PreprocessConfig{}, DecodeMode::Greedy, b);
  CHECK(best.order() == combined_local_search(inst, r.tour, ls, b).order());

  Rng c(4), d(4);
  CHECK(sample_best(inst, p, 10, DecodeMode::Sample, ls, PreprocessConfig{}, c).order() ==
        sample_best(inst, p, 10, DecodeMode::Sample, ls, PreprocessConfig{}, d).order());
  CHECK_THROWS_AS(sample_best(inst, p, 0, DecodeMode::Sample, ls, PreprocessConfig{}, c), std::invalid_argument);
}

TEST_CASE("more samples never hurt on average") {
  const PolicyParams p = make_params(PolicyArch{}, 26);
  Rng gen(27);
  double m1 = 0, m10 = 0, m100 = 0;
  const int count = 200;
  for (int i = 0; i < count; ++i) {
    const Instance inst = random_instance(10, gen);
    Rng r1(static_cast<std::uint64_t>(i)), r10(static_cast<std::uint64_t>(i)), r100(static_cast<std::uint64_t>(i));
    m1 += sample_best(inst, p, 1, DecodeMode::Greedy, LocalSearchConfig{}, PreprocessConfig{}, r1).length();
    m10 += sample_best(inst, p, 10, DecodeMode::Sample, LocalSearchConfig{}, PreprocessConfig{}, r10).length();
    m100 += sample_best(inst, p, 100, DecodeMode::Sample, LocalSearchConfig{}, PreprocessConfig{}, r100).length();
  }
  MESSAGE("pooled means k=1 " << m1 / count << ", k=10 " << m10 / count << ", k=100 " << m100 / count);
  CHECK(m100 <= m10);
  CHECK(m10 <= m1);
}

TEST_CASE("checkpoints round-trip byte for byte") {
  const PolicyParams p = make_params(small_arch(), 28);
  PreprocessConfig pre;
  pre.steps = {PreprocessStep::Rotation, PreprocessStep::ScaleTranslate, PreprocessStep::ReflectDiag};
  pre.per_step = false;
  std::stringstream first;
  write_checkpoint(first, p, pre);
  const std::string bytes = first.str();
  const Checkpoint loaded = read_checkpoint(first);
  CHECK(loaded.preprocess == pre);
  CHECK(loaded.params.arch == p.arch);
  const auto a = p.all();
  const auto b = std::as_const(loaded.params).all();
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k]->name == b[k]->name);
    CHECK(a[k]->value == b[k]->value);
  }
  std::stringstream second;
  write_checkpoint(second, loaded.params, loaded.preprocess);
  CHECK(second.str() == bytes);
}

TEST_CASE("damaged checkpoints are refused") {
  const PolicyParams p = make_params(small_arch(), 29);
  std::stringstream ss;
  write_checkpoint(ss, p, PreprocessConfig{});
  const std::string good = ss.str();

  auto read = [](const std::string& s) {
    std::stringstream in(s);
    return read_checkpoint(in);
  };
  CHECK_THROWS_AS(read("NOTACKPT 1\n{}\n"), ModelMismatch);
  std::string v2 = good;
  v2.replace(v2.find(" 1\n"), 3, " 2\n");
  CHECK_THROWS_AS(read(v2), ModelMismatch);
  CHECK_THROWS_AS(read(good.substr(0, good.size() - 8)), ModelMismatch);
  CHECK_THROWS_AS(read(good + "x"), ModelMismatch);
  std::string shape = good;
  shape.replace(shape.find("\"hidden\":8"), 10, "\"hidden\":9");
  CHECK_THROWS_AS(read(shape), ModelMismatch);
  std::string renamed = good;
  renamed.replace(renamed.find("dec.theta_g"), 11, "dec.theta_x");
  CHECK_THROWS_AS(read(renamed), ModelMismatch);
  CHECK(read(good).params.count() == p.count());
}

}  // TEST_SUITE
