#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "eimplace/approximator.hpp"
#include "eimplace/placement_env.hpp"
#include "eimplace/reward_learning.hpp"

namespace eim {

// Actor maps features to N^2 logits (illegal cells masked out before
// sampling); critic is the same trunk with a scalar value head.
struct PolicyModel {
  QMapModel actor;
  QMapModel critic;
};

enum class RewardSource { hpwl, eim_d, eim_p };

const char* to_string(RewardSource source);
RewardSource reward_source_from_string(const std::string& s);

struct PPOConfig {
  double clip = 0.2;
  double gae_lambda = 0.95;
  double gamma = 0.99;
  int epochs_per_update = 4;
  int rollout_episodes = 16;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double lr = 3e-4;
  int total_updates = 200;
  std::uint64_t seed = 0;
  RewardSource reward_source = RewardSource::hpwl;
  bool reward_standardize = true;  // learned sources only
  int hidden = 256;
  int threads = 1;
};

PolicyModel init_policy(int grid_n, int hidden, std::uint64_t seed);

// Masked softmax over actor logits; support is exactly the legal cells.
std::vector<double> policy_distribution(const PolicyModel& p, const PlacementState& s);

struct StepRecord {
  Action action;
  double log_prob = 0.0;
  double value = 0.0;
  double reward = 0.0;
  bool done = false;
  std::vector<double> features;       // flattened maps at s_t
  std::vector<std::uint8_t> legal;
};

struct EpisodeRecord {
  std::vector<StepRecord> steps;
  double final_hpwl = 0.0;
  double periphery_occupancy = 0.0;  // fraction of placed macros touching the boundary ring
  bool failed = false;               // hit a state with no legal action

  double reward_sum() const;
};

// Online mean/variance (Welford). Rewards standardize as
// (r - mean) / max(std, 1e-8) with the statistic updated first.
struct RunningStat {
  long long count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x);
  double stddev() const;
  double standardize(double x);  // updates, then scales
};

// `count` complete episodes sampled with per-episode generators seeded by
// (seed, episode index); episodes are independent and may be collected in
// parallel. Learned rewards are standardized afterwards in episode order
// when `standardizer` is non-null, keeping results thread-count invariant.
std::vector<EpisodeRecord> collect_rollouts(const PolicyModel& p,
                                            const std::shared_ptr<const Netlist>& netlist,
                                            RewardSource source, const RewardModel* rm, int count,
                                            std::uint64_t seed, RunningStat* standardizer,
                                            int threads = 1);

// delta_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t)
// A_t = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}; returns = A + V.
struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};
GaeResult gae_advantages(const EpisodeRecord& ep, double gamma, double lambda);

// Flattened update unit: steps of all non-failed episodes plus their raw
// GAE advantages and returns.
struct PPOBatch {
  std::vector<const StepRecord*> steps;
  std::vector<double> advantages;
  std::vector<double> returns;
};
PPOBatch make_ppo_batch(const std::vector<EpisodeRecord>& episodes, double gamma, double lambda);

// Clipped-surrogate composite loss at the current parameters:
//   mean(-min(rho A, clip(rho) A)) + value_coef * mean((V - returns)^2)
//   - entropy_coef * mean(H).
// Advantages are used as passed (normalize before calling). Accumulates
// parameter gradients when the out-pointers are non-null.
double ppo_composite_loss(const PolicyModel& p, const PPOBatch& batch,
                          const std::vector<double>& advantages, const PPOConfig& cfg,
                          std::vector<double>* actor_grad, std::vector<double>* critic_grad);

struct PPOStats {
  double loss = 0.0;
  double approx_kl = 0.0;
  double entropy = 0.0;
};

// Normalizes advantages over the batch (mean 0, std 1, std guard 1e-8),
// verifies stored log-probs replay under the current policy (stale-batch
// check, tolerance 1e-6), then runs epochs_per_update full-batch steps.
PPOStats ppo_update(PolicyModel& p, OptimizerState& actor_opt, OptimizerState& critic_opt,
                    const PPOBatch& batch, const PPOConfig& cfg);

double boundary_macro_fraction(const PlacementState& s);
double boundary_macro_fraction(const Netlist& n, const Layout& layout);

struct EvalReport {
  int episodes = 0;
  double mean_final_hpwl = 0.0;
  double std_final_hpwl = 0.0;
  double mean_periphery_occupancy = 0.0;
  std::vector<double> reward_sums;  // dense HPWL reward per episode
  int failures = 0;
};

EvalReport evaluate_policy(const PolicyModel& p, const std::shared_ptr<const Netlist>& netlist,
                           int episodes, std::uint64_t seed, int threads = 1);

struct PolicyUpdateMetrics {
  int update = 0;
  double mean_reward_sum = 0.0;
  double mean_final_hpwl = 0.0;
  double mean_periphery_occupancy = 0.0;
  double loss = 0.0;
  double approx_kl = 0.0;
  double entropy = 0.0;
  int failures = 0;
  double wall_ms = 0.0;  // informational; kept out of deterministic logs
};

struct PolicyTrainResult {
  PolicyModel policy;
  std::vector<PolicyUpdateMetrics> log;
};

// Full PPO loop against the configured reward source. rm must be non-null
// for learned sources. Deterministic per (netlist, cfg).
PolicyTrainResult train_policy(const std::shared_ptr<const Netlist>& netlist, const PPOConfig& cfg,
                               const RewardModel* rm);

// Actor + critic checkpoints bundled in one JSON envelope.
std::string save_policy(const PolicyModel& p);
PolicyModel load_policy(const std::string& text);

}  // namespace eim
