#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "eimplace/netlist.hpp"
#include "eimplace/placement_env.hpp"

namespace eim {

// A step-by-step demonstration recovered from a final layout. States are not
// materialized: transition t is (digest[t], actions[t], digest[t+1]) and full
// states are reconstructed by replaying `actions` from reset.
struct Trajectory {
  std::string design;
  std::vector<Action> actions;         // length = |macros|
  std::vector<std::uint64_t> digests;  // length = |macros| + 1
  bool validation = false;             // 80/20 split membership

  int length() const { return static_cast<int>(actions.size()); }
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

// (s, a_c, a_r): the expert action is preferred over a random legal one.
struct PreferenceTuple {
  int traj_id = 0;
  int step = 0;
  Action chosen;
  Action rejected;
  friend bool operator==(const PreferenceTuple&, const PreferenceTuple&) = default;
};

// (s, {a_e} + distractors): Top-1 scoring unit for reward accuracy.
struct ValidationTuple {
  int traj_id = 0;
  int step = 0;
  Action expert_action;
  std::vector<Action> distractors;  // pairwise distinct, legal, != expert
  friend bool operator==(const ValidationTuple&, const ValidationTuple&) = default;
};

struct ExpertDataset {
  std::string design;
  int grid_n = 0;
  std::vector<Trajectory> trajectories;
  std::vector<PreferenceTuple> preferences;  // reference training trajectories
  std::vector<ValidationTuple> validation;   // reference held-out trajectories

  std::vector<int> train_ids() const;
  std::vector<int> validation_ids() const;
};

// Periphery-first heuristic expert: macros go down in canonical order; at
// each step the candidate set is the legal cells whose footprint touches the
// outermost boundary ring that still admits one (ring depth grows inward
// when exhausted); the pick is argmin raw delta-HPWL with seeded uniform
// tie-breaking, except with probability 0.2 the second-best candidate group
// is used instead. Deterministic per (netlist, seed).
Layout generate_expert_layout(const Netlist& n, std::uint64_t seed);

// Expands a complete overlap-free layout into a demonstration. Throws
// ValidationError when macros are out of canonical order or an intermediate
// state is not legally reachable.
Trajectory decompose_layout(const std::shared_ptr<const Netlist>& n, const Layout& layout);

// k_per_step preference tuples per step with >= 2 legal actions; rejected
// actions drawn without replacement from legal \ {chosen}.
std::vector<PreferenceTuple> assign_preferences(const std::shared_ptr<const Netlist>& n,
                                                const Trajectory& traj, int traj_id,
                                                int k_per_step, std::uint64_t seed);

// One validation tuple per transition of the selected trajectories, each
// with min(m, legal_count - 1) distractors.
std::vector<ValidationTuple> build_validation_set(const std::shared_ptr<const Netlist>& n,
                                                  const std::vector<Trajectory>& trajectories,
                                                  const std::vector<int>& traj_ids, int m,
                                                  std::uint64_t seed);

struct DatasetBuildConfig {
  int count = 50;     // expert layouts to synthesize
  int m = 15;         // distractors per validation tuple
  int k_per_step = 1; // preference tuples per transition
  std::uint64_t seed = 0;
};

struct DatasetBuildResult {
  ExpertDataset dataset;
  std::vector<Layout> layouts;            // one per seed index
  std::vector<std::string> warnings;
};

// Full pipeline: expert layouts -> trajectories -> 80/20 split by seed index
// -> preferences from the training side, validation tuples from the held-out
// side. A single layout falls back to validating on itself (with a warning).
DatasetBuildResult build_expert_dataset(const std::shared_ptr<const Netlist>& n,
                                        const DatasetBuildConfig& cfg);

// JSON-lines `.eimset.jsonl` serialization; record kinds `trajectory`,
// `preference`, `validation` discriminated by a `kind` field.
std::string dataset_to_jsonl(const ExpertDataset& ds);
ExpertDataset dataset_from_jsonl(const std::string& text);

}  // namespace eim
