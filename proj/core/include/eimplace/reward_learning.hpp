#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "eimplace/approximator.hpp"
#include "eimplace/expert_synth.hpp"
#include "eimplace/netlist.hpp"
#include "eimplace/placement_env.hpp"

namespace eim {

enum class RewardKind { demonstration, preference };

const char* to_string(RewardKind kind);
RewardKind reward_kind_from_string(const std::string& s);

// A learned reward. kind selects the scoring rule:
//   demonstration: r(s,a,s') = Q(s,a) - gamma * V*(s'), V* = legal logsumexp
//   preference:    r(s,a)    = forward(s)[a]
struct RewardModel {
  RewardKind kind = RewardKind::preference;
  QMapModel model;
  double gamma = 0.99;
  double alpha = 1e-3;
};

struct TrainConfig {
  int epochs = 200;
  int batch_size = 64;
  double lr = 1e-3;
  double alpha = 1e-3;
  double gamma = 0.99;
  std::uint64_t seed = 0;
  int eval_every = 10;
  int hidden = 256;
  double weight_decay = 0.0;  // optimizer-level; selects low-norm fits that transfer
};

// Soft state value: numerically stable log-sum-exp of q over legal actions.
// Throws NoLegalActionError when the mask is empty; terminal states are the
// caller's business (they contribute V* = 0 by convention).
double soft_value(std::span<const double> q, std::span<const std::uint8_t> legal);

// Soft policy pi(a|s) = exp Q(s,a) / Z_s over legal actions, 0 elsewhere.
std::vector<double> policy_from_q(std::span<const double> q, std::span<const std::uint8_t> legal);

// Demonstration-kind reward on a verified transition. Throws
// TransitionMismatchError when s_next != step(s, a).
double extract_reward(const RewardModel& rm, const PlacementState& s, Action a,
                      const PlacementState& s_next);

// Replay-backed state/feature store for dataset records. States are rebuilt
// deterministically from (netlist, trajectory actions); features and legal
// masks are cached per (trajectory, step), post-action states per
// (trajectory, step, action).
class FeatureCache {
 public:
  FeatureCache(std::shared_ptr<const Netlist> netlist, const std::vector<Trajectory>* trajectories);

  const std::shared_ptr<const Netlist>& netlist() const { return netlist_; }
  const PlacementState& state(int traj, int step);           // step in [0, length]
  const std::vector<double>& features(int traj, int step);   // step < length
  const std::vector<std::uint8_t>& legal(int traj, int step);
  int traj_length(int traj) const;

  struct AfterState {
    bool terminal = false;
    std::vector<double> features;      // empty when terminal
    std::vector<std::uint8_t> legal;
  };
  const AfterState& after(int traj, int step, int cell);

 private:
  struct TrajCache {
    bool built = false;
    std::vector<PlacementState> states;
    std::vector<std::vector<double>> features;
    std::vector<std::vector<std::uint8_t>> legal;
  };
  void build(int traj);

  std::shared_ptr<const Netlist> netlist_;
  const std::vector<Trajectory>* trajectories_;
  std::vector<TrajCache> cache_;
  std::unordered_map<std::uint64_t, AfterState> after_;
};

// One expert transition prepared for the demonstration objective.
// feat_next/legal_next are null for terminal next states.
struct TransitionSample {
  const std::vector<double>* feat_s = nullptr;
  int action = -1;
  const std::vector<double>* feat_next = nullptr;
  const std::vector<std::uint8_t>* legal_next = nullptr;
};

struct StateSample {
  const std::vector<double>* feat = nullptr;
  const std::vector<std::uint8_t>* legal = nullptr;
};

// Offline soft-Q imitation loss:
//   L = -[ mean_i( r_i - alpha * r_i^2 ) - (1-gamma) * mean_k V*(s0_k) ]
// with r_i = Q(s_i, a_i) - gamma * V*(s'_i). Minimizing L maximizes the
// demonstration objective. Returns the loss; accumulates dL/dparams into
// *grad when non-null. Throws ValidationError on an empty batch.
double iq_objective(const RewardModel& rm, std::span<const TransitionSample> batch,
                    std::span<const StateSample> initial_states, std::vector<double>* grad);

struct PreferenceSample {
  const std::vector<double>* feat_s = nullptr;
  int chosen = -1;
  int rejected = -1;
};

// Pairwise logistic preference loss with quadratic reward regularizer:
//   L = -mean log sigma(r_c - r_r) + alpha * mean(r_c^2 + r_r^2),
// computed via the softplus formulation for stability.
double pref_loss(const RewardModel& rm, std::span<const PreferenceSample> batch, double alpha,
                 std::vector<double>* grad);

// Top-1 reward accuracy: fraction of validation tuples whose expert action
// scores strictly higher than every distractor. Ties count as failures.
double reward_accuracy(const RewardModel& rm, const std::vector<ValidationTuple>& validation,
                       FeatureCache& cache);

struct MetricsRow {
  int epoch = 0;
  double loss = 0.0;
  std::optional<double> val_accuracy;
  double wall_ms = 0.0;  // informational; kept out of deterministic logs
};

struct RewardTrainResult {
  RewardModel model;  // checkpoint with the best validation accuracy
  double best_accuracy = 0.0;
  int best_epoch = 0;
  std::vector<MetricsRow> log;
};

// Minibatch trainers; deterministic per (dataset, cfg.seed). Both log the
// epoch loss always and validation accuracy every cfg.eval_every epochs, and
// return the best-accuracy checkpoint.
RewardTrainResult train_eim_d(const ExpertDataset& ds, std::shared_ptr<const Netlist> netlist,
                              const TrainConfig& cfg);
RewardTrainResult train_eim_p(const ExpertDataset& ds, std::shared_ptr<const Netlist> netlist,
                              const TrainConfig& cfg);

// Reward checkpoint: the approximator checkpoint plus kind/gamma/alpha.
std::string save_reward_model(const RewardModel& rm);
RewardModel load_reward_model(const std::string& text);

}  // namespace eim
