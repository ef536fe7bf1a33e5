#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eqtsp/diffcore.hpp"
#include "eqtsp/equivariance.hpp"
#include "eqtsp/local_search.hpp"
#include "eqtsp/rng.hpp"
#include "eqtsp/tsp.hpp"

namespace eqtsp {

struct PolicyArch {
  int hidden = 128;       // embedding width H
  int n_gnn = 3;
  int mlp_hidden1 = 128;
  int mlp_hidden2 = 256;

  void validate() const;
  friend bool operator==(const PolicyArch&, const PolicyArch&) = default;
};

/// Every trainable array of the policy: first-city MLP, GNN encoder with a
/// shared mixing weight lambda, and the attention decoder.
struct PolicyParams {
  PolicyArch arch;

  ad::Parameter mlp_w1, mlp_b1, mlp_w2, mlp_b2, mlp_w3, mlp_b3;
  ad::Parameter gnn_theta0;
  std::vector<ad::Parameter> gnn_theta;   // n_gnn of H x H
  std::vector<ad::Parameter> gnn_aggr_w;  // n_gnn of H x H
  std::vector<ad::Parameter> gnn_aggr_b;  // n_gnn of 1 x H
  ad::Parameter lambda;
  ad::Parameter theta_g, theta_m, w;

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, lambda = 0.5.
  static PolicyParams init(const PolicyArch& arch, Rng& rng);

  /// Stable order used for checkpoints, optimizers and gradient checks.
  std::vector<ad::Parameter*> all();
  std::vector<const ad::Parameter*> all() const;

  std::size_t count() const;
  void zero_grad();
  void clamp_lambda();
  bool finite() const;
};

/// Parameters bound as leaves of one tape.
struct BoundPolicy {
  ad::Var mlp_w1, mlp_b1, mlp_w2, mlp_b2, mlp_w3, mlp_b3;
  ad::Var gnn_theta0;
  std::vector<ad::Var> gnn_theta, gnn_aggr_w, gnn_aggr_b;
  ad::Var lambda;
  ad::Var theta_g, theta_m, w;

  /// Trainable leaves: backward() accumulates into the parameters.
  BoundPolicy(ad::Tape& tape, PolicyParams& params);
  /// Read-only leaves for inference.
  BoundPolicy(ad::Tape& tape, const PolicyParams& params);
};

/// |J| x H embedding of the view's rows.
ad::Var gnn_encode(ad::Tape& tape, const CanonicalView& view, const BoundPolicy& p);

/// 1 x H embedding of the first-city feature.
ad::Var mlp_encode(ad::Tape& tape, Point first_rel, const BoundPolicy& p);

enum class DecodeMode { Greedy, Sample };

struct StepChoice {
  int row = -1;
  int city = -1;
  ad::Var log_prob;            // 1 x 1
  std::vector<double> probs;   // one per view row
};

/// Attention scores over the view's rows, masked softmax, then a greedy or
/// sampled pick. `forced_city` replays a known action instead.
/// Throws InvalidState when no row is selectable.
StepChoice decode_step(ad::Tape& tape, const CanonicalView& view, ad::Var embeddings, ad::Var query,
                       const BoundPolicy& p, DecodeMode mode, Rng& rng, std::optional<int> forced_city = {});

struct RolloutResult {
  Tour tour;
  std::vector<double> rewards;      // r_1 = 0; the last one includes the closing edge
  double log_prob_sum = 0.0;        // sum of step log-probabilities
  std::optional<ad::Var> log_prob;  // set when recorded on a tape
};

/// Constructs a tour from city 0 on. Without a tape each step runs on a
/// scratch tape and nothing is kept for backward.
RolloutResult rollout(const Instance& instance, const PolicyParams& params, const PreprocessConfig& preprocess,
                      DecodeMode mode, Rng& rng);

/// Same, recorded on `tape` so `log_prob` can be differentiated.
RolloutResult rollout(const Instance& instance, PolicyParams& params, const PreprocessConfig& preprocess,
                      DecodeMode mode, Rng& rng, ad::Tape& tape);

/// Log-probability of a fixed tour (which must start at city 0) under the policy.
ad::Var trajectory_log_prob(ad::Tape& tape, const Instance& instance, PolicyParams& params,
                            const PreprocessConfig& preprocess, std::span<const int> order);

/// Best of k local-search-refined rollouts. k = 1 with Greedy mode is the
/// plain greedy-plus-local-search solver.
Tour sample_best(const Instance& instance, const PolicyParams& params, int k, DecodeMode mode,
                 const LocalSearchConfig& ls, const PreprocessConfig& preprocess, Rng& rng);

/// Checkpoint container: magic, format version, JSON header with the
/// architecture, preprocessing and array shapes, then raw little-endian doubles.
struct Checkpoint {
  PolicyParams params;
  PreprocessConfig preprocess;
};

inline constexpr int kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const PolicyParams& params, const PreprocessConfig& preprocess);
void save_checkpoint(const std::string& path, const PolicyParams& params, const PreprocessConfig& preprocess);
/// Throws ModelMismatch on a bad magic, version or array shape.
Checkpoint read_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace eqtsp
