#include "eqtsp/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace eqtsp {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

int to_int(const std::string& v) {
  int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) throw ConfigError("expected an integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) throw ConfigError("expected a number, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("expected a boolean, got '" + v + "'");
}

std::vector<PreprocessStep> to_steps(const std::string& v) {
  std::vector<PreprocessStep> steps;
  if (v == "none") return steps;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto step = parse_preprocess_step(trim(item));
    if (!step) throw ConfigError("unknown preprocessing step '" + trim(item) + "'");
    steps.push_back(*step);
  }
  return steps;
}

using Setter = std::function<void(TrainConfig&, const std::string&)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"epochs", [](TrainConfig& c, const std::string& v) { c.epochs = to_int(v); }},
      {"steps_per_epoch", [](TrainConfig& c, const std::string& v) { c.steps_per_epoch = to_int(v); }},
      {"batch", [](TrainConfig& c, const std::string& v) { c.batch = to_int(v); }},
      {"lr", [](TrainConfig& c, const std::string& v) { c.lr = to_double(v); }},
      {"lr_decay", [](TrainConfig& c, const std::string& v) { c.lr_decay = to_double(v); }},
      {"sigma_n", [](TrainConfig& c, const std::string& v) { c.sigma_n = to_double(v); }},
      {"size_min", [](TrainConfig& c, const std::string& v) { c.size_min = to_int(v); }},
      {"size_max", [](TrainConfig& c, const std::string& v) { c.size_max = to_int(v); }},
      {"fixed_size",
       [](TrainConfig& c, const std::string& v) {
         if (v == "none") c.fixed_size.reset();
         else c.fixed_size = to_int(v);
       }},
      {"ls.alpha", [](TrainConfig& c, const std::string& v) { c.ls.alpha = to_double(v); }},
      {"ls.beta", [](TrainConfig& c, const std::string& v) { c.ls.beta = to_double(v); }},
      {"ls.iterations", [](TrainConfig& c, const std::string& v) { c.ls.iterations = to_int(v); }},
      {"ls.gamma", [](TrainConfig& c, const std::string& v) { c.ls.gamma = to_double(v); }},
      {"preprocess.steps", [](TrainConfig& c, const std::string& v) { c.preprocess.steps = to_steps(v); }},
      {"preprocess.per_step", [](TrainConfig& c, const std::string& v) { c.preprocess.per_step = to_bool(v); }},
      {"preprocess.delete_visited", [](TrainConfig& c, const std::string& v) { c.preprocess.delete_visited = to_bool(v); }},
      {"preprocess.relative_positions",
       [](TrainConfig& c, const std::string& v) { c.preprocess.relative_positions = to_bool(v); }},
      {"arch.hidden", [](TrainConfig& c, const std::string& v) { c.arch.hidden = to_int(v); }},
      {"arch.n_gnn", [](TrainConfig& c, const std::string& v) { c.arch.n_gnn = to_int(v); }},
      {"arch.mlp_hidden1", [](TrainConfig& c, const std::string& v) { c.arch.mlp_hidden1 = to_int(v); }},
      {"arch.mlp_hidden2", [](TrainConfig& c, const std::string& v) { c.arch.mlp_hidden2 = to_int(v); }},
      {"ablation.equivariance", [](TrainConfig& c, const std::string& v) { c.ablation.use_equivariance = to_bool(v); }},
      {"ablation.rollout_baseline",
       [](TrainConfig& c, const std::string& v) { c.ablation.use_rollout_baseline = to_bool(v); }},
      {"ablation.interleaved_ls", [](TrainConfig& c, const std::string& v) { c.ablation.use_interleaved_ls = to_bool(v); }},
      {"ablation.curriculum", [](TrainConfig& c, const std::string& v) { c.ablation.use_curriculum = to_bool(v); }},
      {"ablation.rl", [](TrainConfig& c, const std::string& v) { c.ablation.use_rl = to_bool(v); }},
      {"optimizer",
       [](TrainConfig& c, const std::string& v) {
         const auto k = parse_optimizer(v);
         if (!k) throw ConfigError("unknown optimizer '" + v + "'");
         c.optimizer = *k;
       }},
      {"momentum", [](TrainConfig& c, const std::string& v) { c.momentum = to_double(v); }},
      {"adam_beta1", [](TrainConfig& c, const std::string& v) { c.adam_beta1 = to_double(v); }},
      {"adam_beta2", [](TrainConfig& c, const std::string& v) { c.adam_beta2 = to_double(v); }},
      {"adam_eps", [](TrainConfig& c, const std::string& v) { c.adam_eps = to_double(v); }},
      {"grad_clip", [](TrainConfig& c, const std::string& v) { c.grad_clip = to_double(v); }},
  };
  return table;
}

std::string fmt(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string fmt(bool v) { return v ? "true" : "false"; }

}  // namespace

TrainConfig parse_train_config(std::istream& in) {
  TrainConfig config;
  std::set<std::string, std::less<>> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(std::string_view(line).substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + "repeated key '" + key + "'");
    if (value.empty()) throw ConfigError(where + "missing value for '" + key + "'");
    try {
      it->second(config, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
  return config;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  return parse_train_config(in);
}

void write_train_config(std::ostream& out, const TrainConfig& c) {
  std::string steps;
  for (PreprocessStep s : c.preprocess.steps) steps += (steps.empty() ? "" : ",") + std::string(to_string(s));
  out << "epochs = " << c.epochs << '\n'
      << "steps_per_epoch = " << c.steps_per_epoch << '\n'
      << "batch = " << c.batch << '\n'
      << "lr = " << fmt(c.lr) << '\n'
      << "lr_decay = " << fmt(c.lr_decay) << '\n'
      << "sigma_n = " << fmt(c.sigma_n) << '\n'
      << "size_min = " << c.size_min << '\n'
      << "size_max = " << c.size_max << '\n'
      << "fixed_size = " << (c.fixed_size ? std::to_string(*c.fixed_size) : "none") << '\n'
      << "ls.alpha = " << fmt(c.ls.alpha) << '\n'
      << "ls.beta = " << fmt(c.ls.beta) << '\n'
      << "ls.iterations = " << c.ls.iterations << '\n'
      << "ls.gamma = " << fmt(c.ls.gamma) << '\n'
      << "preprocess.steps = " << (steps.empty() ? "none" : steps) << '\n'
      << "preprocess.per_step = " << fmt(c.preprocess.per_step) << '\n'
      << "preprocess.delete_visited = " << fmt(c.preprocess.delete_visited) << '\n'
      << "preprocess.relative_positions = " << fmt(c.preprocess.relative_positions) << '\n'
      << "arch.hidden = " << c.arch.hidden << '\n'
      << "arch.n_gnn = " << c.arch.n_gnn << '\n'
      << "arch.mlp_hidden1 = " << c.arch.mlp_hidden1 << '\n'
      << "arch.mlp_hidden2 = " << c.arch.mlp_hidden2 << '\n'
      << "ablation.equivariance = " << fmt(c.ablation.use_equivariance) << '\n'
      << "ablation.rollout_baseline = " << fmt(c.ablation.use_rollout_baseline) << '\n'
      << "ablation.interleaved_ls = " << fmt(c.ablation.use_interleaved_ls) << '\n'
      << "ablation.curriculum = " << fmt(c.ablation.use_curriculum) << '\n'
      << "ablation.rl = " << fmt(c.ablation.use_rl) << '\n'
      << "optimizer = " << to_string(c.optimizer) << '\n'
      << "momentum = " << fmt(c.momentum) << '\n'
      << "adam_beta1 = " << fmt(c.adam_beta1) << '\n'
      << "adam_beta2 = " << fmt(c.adam_beta2) << '\n'
      << "adam_eps = " << fmt(c.adam_eps) << '\n'
      << "grad_clip = " << fmt(c.grad_clip) << '\n';
}

TrainConfig desk_train_config() {
  TrainConfig c;
  c.epochs = 5;
  c.steps_per_epoch = 50;
  c.batch = 32;
  c.size_min = 10;
  c.size_max = 20;
  return c;
}

}  // namespace eqtsp
