#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eqtsp/equivariance.hpp"
#include "eqtsp/local_search.hpp"
#include "eqtsp/policy.hpp"
#include "eqtsp/rng.hpp"
#include "eqtsp/tsp.hpp"

namespace eqtsp {

/// Feature switches used by the ablation runs. Everything on is the full method.
struct AblationFlags {
  bool use_equivariance = true;
  bool use_rollout_baseline = true;
  bool use_interleaved_ls = true;
  bool use_curriculum = true;
  bool use_rl = true;

  friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

enum class OptimizerKind { Sgd, Momentum, Adam };

std::string_view to_string(OptimizerKind kind);
std::optional<OptimizerKind> parse_optimizer(std::string_view name);

struct TrainConfig {
  int epochs = 200;
  int steps_per_epoch = 1000;
  int batch = 128;
  double lr = 1e-3;
  double lr_decay = 0.96;  // applied once per epoch
  double sigma_n = 3.0;
  int size_min = 10;
  int size_max = 50;
  std::optional<int> fixed_size;  // overrides both curriculum and size_max

  LocalSearchConfig ls;
  PreprocessConfig preprocess;
  PolicyArch arch;
  AblationFlags ablation;

  OptimizerKind optimizer = OptimizerKind::Sgd;
  double momentum = 0.9;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 1.0;  // global norm; 0 disables

  /// Throws std::invalid_argument naming the first offending field.
  void validate() const;
  /// The preprocessing actually used: everything off when equivariance is ablated.
  PreprocessConfig effective_preprocess() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Softmax over Gaussian densities (mean e, std sigma) evaluated at the
/// sizes size_min..size_max. Entry k belongs to size size_min + k.
std::vector<double> curriculum_dist(int epoch, double sigma, int size_min, int size_max);

/// Draws one size from curriculum_dist.
int sample_size(std::span<const double> dist, int size_min, Rng& rng);

/// lr * lr_decay^(epoch - 1) for 1-based epochs.
double learning_rate_at(const TrainConfig& config, int epoch);

struct StepStats {
  int n = 0;
  int batch = 0;
  double mean_raw_len = 0.0;
  double mean_improved_len = 0.0;
  double mean_advantage = 0.0;
  double mean_abs_advantage = 0.0;
  double grad_norm = 0.0;  // before clipping
  bool clipped = false;
  bool aborted = false;    // non-finite gradient; parameters untouched
  std::string abort_reason;
};

/// Fills every parameter's grad with the ascent direction
///   g = -(1/B) sum_b A_b * grad log pi(sigma_b),
/// where sigma_b is a sampled rollout and A_b its advantage:
///   L(local_search(sigma_b)) - L(sigma_b)        full method
///   L(local_search(sigma_b)) - L(greedy_b)       self-critic baseline
///   L(sigma_b) - L(greedy_b)                     without interleaved search
/// Item b draws its instance-independent randomness from rng.child(b).
StepStats accumulate_policy_gradient(std::span<const Instance> batch, PolicyParams& params, const TrainConfig& config,
                                     const Rng& rng);

/// Optimizer state that persists across steps (momentum / Adam moments).
class Optimizer {
 public:
  explicit Optimizer(const TrainConfig& config) : config_(config) {}

  /// Clips the accumulated gradient to the configured global norm, takes an
  /// ascent step of size lr and clamps lambda. Returns the pre-clip norm.
  double step(PolicyParams& params, double lr, bool* clipped = nullptr);

 private:
  TrainConfig config_;
  std::vector<ad::Matrix> m_, v_;
  long t_ = 0;
};

/// One full update: gradient, then the optimizer step. A non-finite
/// gradient aborts the step and leaves params unchanged.
StepStats smoothed_policy_gradient_step(std::span<const Instance> batch, PolicyParams& params, const TrainConfig& config,
                                        double lr, Optimizer& optimizer, const Rng& rng);

struct EpochSummary {
  int epoch = 0;
  int n = 0;
  double lr = 0.0;
  double mean_raw_len = 0.0;
  double mean_improved_len = 0.0;
  double mean_advantage = 0.0;
  double mean_abs_advantage = 0.0;
  int aborted_steps = 0;
  int clipped_steps = 0;
};

struct TrainOptions {
  std::optional<std::filesystem::path> out_dir;  // checkpoints land here
  std::ostream* log = nullptr;                   // JSONL step and epoch records
  bool timing = true;                            // include wall_ms in the log
  /// Called with epoch 0 for the initial parameters and after every epoch.
  std::function<void(int epoch, const PolicyParams&)> on_epoch;
};

struct TrainResult {
  PolicyParams params;
  std::vector<EpochSummary> epochs;
  std::vector<std::filesystem::path> checkpoints;
};

/// The full training loop. Initial weights come from rng.child(1); epoch e
/// uses rng.child(1000 + e). Throws std::runtime_error when a checkpoint
/// cannot be written; the log written so far is kept.
TrainResult train(const TrainConfig& config, const Rng& rng, const TrainOptions& options = {});

std::string checkpoint_name(int epoch);

}  // namespace eqtsp
