#include "eqtsp/training.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "eqtsp/errors.hpp"

namespace eqtsp {

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::Momentum: return "momentum";
    case OptimizerKind::Adam: return "adam";
  }
  return "sgd";
}

std::optional<OptimizerKind> parse_optimizer(std::string_view name) {
  for (OptimizerKind k : {OptimizerKind::Sgd, OptimizerKind::Momentum, OptimizerKind::Adam}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument(what); };
  if (epochs < 1) fail("epochs must be positive");
  if (steps_per_epoch < 1) fail("steps_per_epoch must be positive");
  if (batch < 1) fail("batch must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr)) fail("lr must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) fail("lr_decay must lie in (0, 1]");
  if (!(sigma_n > 0.0) || !std::isfinite(sigma_n)) fail("sigma_n must be positive");
  if (size_min < 3) fail("size_min must be at least 3");
  if (size_max < size_min) fail("size_max must be at least size_min");
  if (fixed_size && *fixed_size < 3) fail("fixed_size must be at least 3");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must lie in [0, 1)");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    fail("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) fail("adam_eps must be positive");
  if (!(grad_clip >= 0.0)) fail("grad_clip must be non-negative");
  ls.validate();
  preprocess.validate();
  arch.validate();
}

PreprocessConfig TrainConfig::effective_preprocess() const {
  return ablation.use_equivariance ? preprocess : PreprocessConfig::disabled();
}

std::vector<double> curriculum_dist(int epoch, double sigma, int size_min, int size_max) {
  if (epoch < 1) throw std::invalid_argument("curriculum_dist: epoch must be at least 1");
  if (!(sigma > 0.0)) throw std::invalid_argument("curriculum_dist: sigma must be positive");
  if (size_max < size_min) throw std::invalid_argument("curriculum_dist: empty size range");
  const int count = size_max - size_min + 1;
  std::vector<double> g(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const double z = (static_cast<double>(k + size_min) - epoch) / sigma;
    g[static_cast<std::size_t>(k)] = std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
  }
  const double top = *std::ranges::max_element(g);
  double total = 0.0;
  for (double& v : g) total += (v = std::exp(v - top));
  for (double& v : g) v /= total;
  return g;
}

int sample_size(std::span<const double> dist, int size_min, Rng& rng) {
  if (dist.empty()) throw std::invalid_argument("sample_size: empty distribution");
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t k = 0; k < dist.size(); ++k) {
    acc += dist[k];
    if (u < acc) return size_min + static_cast<int>(k);
  }
  return size_min + static_cast<int>(dist.size()) - 1;
}

double learning_rate_at(const TrainConfig& config, int epoch) {
  if (epoch < 1) throw std::invalid_argument("learning_rate_at: epoch must be at least 1");
  return config.lr * std::pow(config.lr_decay, epoch - 1);
}

StepStats accumulate_policy_gradient(std::span<const Instance> batch, PolicyParams& params, const TrainConfig& config,
                                     const Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("policy gradient: empty batch");
  const PreprocessConfig preprocess = config.effective_preprocess();
  const AblationFlags& flags = config.ablation;
  const bool self_critic = !flags.use_rollout_baseline || !flags.use_interleaved_ls;
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  params.zero_grad();
  StepStats stats;
  stats.n = batch.front().size();
  stats.batch = static_cast<int>(batch.size());

  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Instance& instance = batch[b];
    if (instance.size() != stats.n) throw std::invalid_argument("policy gradient: batch sizes differ");
    Rng item = rng.child(b);

    try {
      ad::Tape tape;
      const RolloutResult sampled = rollout(instance, params, preprocess, DecodeMode::Sample, item, tape);
      const double raw = sampled.tour.length();
      const double improved =
          flags.use_interleaved_ls ? combined_local_search(instance, sampled.tour, config.ls, item).length() : raw;

      double baseline = raw;
      if (self_critic) {
        Rng unused(0);
        baseline = rollout(instance, std::as_const(params), preprocess, DecodeMode::Greedy, unused).tour.length();
      }
      const double advantage = improved - baseline;

      stats.mean_raw_len += raw * inv_b;
      stats.mean_improved_len += improved * inv_b;
      stats.mean_advantage += advantage * inv_b;
      stats.mean_abs_advantage += std::abs(advantage) * inv_b;

      if (advantage != 0.0) tape.backward(*sampled.log_prob, -advantage * inv_b);
    } catch (const InvalidState& e) {
      // Non-finite values anywhere in the forward or backward pass.
      stats.aborted = true;
      stats.abort_reason = e.what();
      break;
    }
  }
  if (!stats.aborted) {
    for (const ad::Parameter* p : std::as_const(params).all()) {
      if (!p->grad.allFinite()) {
        stats.aborted = true;
        stats.abort_reason = "non-finite gradient in " + p->name;
        break;
      }
    }
  }
  if (stats.aborted) params.zero_grad();
  return stats;
}

double Optimizer::step(PolicyParams& params, double lr, bool* clipped) {
  auto all = params.all();
  double sq = 0.0;
  for (const ad::Parameter* p : all) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  double factor = 1.0;
  if (config_.grad_clip > 0.0 && norm > config_.grad_clip) factor = config_.grad_clip / norm;
  if (clipped) *clipped = factor < 1.0;

  if (m_.empty()) {
    for (const ad::Parameter* p : all) {
      m_.push_back(ad::Matrix::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(ad::Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  ++t_;
  for (std::size_t k = 0; k < all.size(); ++k) {
    ad::Parameter& p = *all[k];
    const ad::Matrix g = p.grad * factor;
    switch (config_.optimizer) {
      case OptimizerKind::Sgd:
        p.value += lr * g;
        break;
      case OptimizerKind::Momentum:
        m_[k] = config_.momentum * m_[k] + g;
        p.value += lr * m_[k];
        break;
      case OptimizerKind::Adam: {
        const double b1 = config_.adam_beta1, b2 = config_.adam_beta2;
        m_[k] = b1 * m_[k] + (1.0 - b1) * g;
        v_[k] = b2 * v_[k] + (1.0 - b2) * g.cwiseAbs2();
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
        p.value.array() += lr * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + config_.adam_eps);
        break;
      }
    }
  }
  params.clamp_lambda();
  return norm;
}

StepStats smoothed_policy_gradient_step(std::span<const Instance> batch, PolicyParams& params, const TrainConfig& config,
                                        double lr, Optimizer& optimizer, const Rng& rng) {
  StepStats stats = accumulate_policy_gradient(batch, params, config, rng);
  if (stats.aborted) return stats;
  stats.grad_norm = optimizer.step(params, lr, &stats.clipped);
  if (!params.finite()) throw InvalidState("parameters became non-finite after an update");
  return stats;
}

std::string checkpoint_name(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "checkpoint_epoch_%03d.ckp", epoch);
  return buf;
}

TrainResult train(const TrainConfig& config, const Rng& rng, const TrainOptions& options) {
  config.validate();
  Rng init_rng = rng.child(1);
  TrainResult result{PolicyParams::init(config.arch, init_rng), {}, {}};
  PolicyParams& params = result.params;
  const PreprocessConfig preprocess = config.effective_preprocess();
  Optimizer optimizer(config);

  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  auto wall_ms = [&] { return std::chrono::duration<double, std::milli>(Clock::now() - start).count(); };
  auto emit = [&](nlohmann::ordered_json record) {
    if (!options.log) return;
    if (options.timing) record["wall_ms"] = std::round(wall_ms());
    *options.log << record.dump() << '\n';
    options.log->flush();
  };
  auto save = [&](int epoch) {
    if (!options.out_dir) return;
    const auto path = *options.out_dir / checkpoint_name(epoch);
    save_checkpoint(path.string(), params, preprocess);
    result.checkpoints.push_back(path);
  };

  if (options.on_epoch) options.on_epoch(0, params);
  if (!config.ablation.use_rl) {
    emit({{"type", "info"}, {"message", "reinforcement learning disabled; keeping initial weights"}});
    save(0);
    return result;
  }

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const Rng epoch_rng = rng.child(1000 + static_cast<std::uint64_t>(epoch));
    int n = config.size_max;
    if (config.fixed_size) {
      n = *config.fixed_size;
    } else if (config.ablation.use_curriculum) {
      Rng size_rng = epoch_rng.child(0);
      n = sample_size(curriculum_dist(epoch, config.sigma_n, config.size_min, config.size_max), config.size_min, size_rng);
    }
    const double lr = learning_rate_at(config, epoch);
    EpochSummary summary;
    summary.epoch = epoch;
    summary.n = n;
    summary.lr = lr;

    for (int step = 1; step <= config.steps_per_epoch; ++step) {
      const Rng step_rng = epoch_rng.child(static_cast<std::uint64_t>(step));
      std::vector<Instance> batch;
      batch.reserve(static_cast<std::size_t>(config.batch));
      Rng instance_rng = step_rng.child(~std::uint64_t{0});
      for (int b = 0; b < config.batch; ++b) batch.push_back(random_instance(n, instance_rng));

      const StepStats s = smoothed_policy_gradient_step(batch, params, config, lr, optimizer, step_rng);
      const double w = 1.0 / config.steps_per_epoch;
      summary.mean_raw_len += s.mean_raw_len * w;
      summary.mean_improved_len += s.mean_improved_len * w;
      summary.mean_advantage += s.mean_advantage * w;
      summary.mean_abs_advantage += s.mean_abs_advantage * w;
      summary.aborted_steps += s.aborted ? 1 : 0;
      summary.clipped_steps += s.clipped ? 1 : 0;

      nlohmann::ordered_json rec = {{"type", "step"},
                                    {"epoch", epoch},
                                    {"step", step},
                                    {"N", n},
                                    {"mean_raw_len", s.mean_raw_len},
                                    {"mean_improved_len", s.mean_improved_len},
                                    {"mean_advantage", s.mean_advantage},
                                    {"lr", lr},
                                    {"grad_norm", s.grad_norm},
                                    {"clipped", s.clipped}};
      if (s.aborted) rec["aborted"] = s.abort_reason;
      emit(std::move(rec));
    }
    result.epochs.push_back(summary);
    emit({{"type", "epoch"},
          {"epoch", epoch},
          {"N", n},
          {"mean_raw_len", summary.mean_raw_len},
          {"mean_improved_len", summary.mean_improved_len},
          {"mean_advantage", summary.mean_advantage},
          {"mean_abs_advantage", summary.mean_abs_advantage},
          {"lr", lr},
          {"aborted_steps", summary.aborted_steps},
          {"clipped_steps", summary.clipped_steps}});
    save(epoch);
    if (options.on_epoch) options.on_epoch(epoch, params);
  }
  return result;
}

}  // namespace eqtsp
