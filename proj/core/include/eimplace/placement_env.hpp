#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "eimplace/netlist.hpp"

namespace eim {

// Discrete action: index of the lower-left cell for the current macro.
// Decodes as x = cell % N, y = cell / N.
struct Action {
  int cell = -1;
  friend bool operator==(const Action&, const Action&) = default;
};

inline int action_x(Action a, int grid_n) { return a.cell % grid_n; }
inline int action_y(Action a, int grid_n) { return a.cell / grid_n; }
inline Action make_action(int x, int y, int grid_n) { return Action{y * grid_n + x}; }

// A finished or in-progress placement result: (macro_id, x, y) triples in
// placement order. The on-disk `.layout.json` format mirrors this.
struct Layout {
  struct Placement {
    int macro_id = 0;
    int x = 0;
    int y = 0;
    friend bool operator==(const Placement&, const Placement&) = default;
  };
  std::string netlist_name;
  int grid_n = 0;
  std::vector<Placement> placements;
  friend bool operator==(const Layout&, const Layout&) = default;
};

std::string serialize_layout(const Layout& layout);
Layout parse_layout(const std::string& text);

// Pixel-level policy/reward input channels. The three scalar channels are
// broadcast to full N x N planes when flattened.
struct FeatureMaps {
  static constexpr int kChannels = 6;
  int grid_n = 0;
  std::vector<double> view;      // occupancy snapshot, binary
  std::vector<double> position;  // 1 = legal lower-left cell for current macro
  std::vector<double> wire;      // normalized incremental HPWL, illegal cells = 1
  double macro_w = 0.0;          // current macro width / N
  double macro_h = 0.0;          // current macro height / N
  double progress = 0.0;         // cursor / |macros|

  // Channel-major layout: [view, position, wire, macro_w, macro_h, progress].
  std::vector<double> flatten() const;
};

// The placement MDP state. Value-semantic: step() returns a new state and
// never mutates its input; apply() is the in-place fast path with identical
// semantics. Occupancy is indexed y * N + x.
class PlacementState {
 public:
  PlacementState() = default;

  int grid_n() const { return netlist_ ? netlist_->grid_n : 0; }
  int macro_count() const { return netlist_ ? static_cast<int>(netlist_->macros.size()) : 0; }
  int cursor() const { return cursor_; }
  bool finished() const { return cursor_ == macro_count(); }
  const Netlist& netlist() const { return *netlist_; }
  const std::shared_ptr<const Netlist>& netlist_ptr() const { return netlist_; }
  const std::vector<int>& order() const { return order_; }
  const std::vector<std::uint8_t>& occupancy() const { return occupancy_; }

  // Macro to be placed next; throws EpisodeFinishedError when finished.
  const Macro& current_macro() const;

  bool is_placed(int macro_id) const { return placements_[macro_id][0] >= 0; }
  std::pair<int, int> placement_of(int macro_id) const;

  // Binary mask of legal lower-left cells for the current macro.
  std::vector<std::uint8_t> position_mask() const;
  int legal_action_count() const;

  // Half-perimeter wirelength over nets with >= 2 resolved points.
  double hpwl() const;

  // Raw HPWL increase if the current macro were placed with lower-left at a.
  // Requires a to be in bounds (footprint inside the canvas).
  double delta_hpwl(Action a) const;

  // Normalized incremental-HPWL map: min-max over legal cells, illegal = 1.
  std::vector<double> wire_mask() const;

  std::vector<double> view_mask() const;

  FeatureMaps feature_maps() const;

  // Pure transition. Throws IllegalActionError / EpisodeFinishedError.
  std::pair<PlacementState, bool> step(Action a) const;

  // In-place transition, observationally equivalent to step().
  // Returns done.
  bool apply(Action a);

  Layout to_layout() const;

  // Stable content hash over (grid, cursor, placements).
  std::uint64_t digest() const;

  friend bool operator==(const PlacementState& a, const PlacementState& b);

  friend PlacementState reset(std::shared_ptr<const Netlist> netlist);

 private:
  std::shared_ptr<const Netlist> netlist_;
  std::vector<std::uint8_t> occupancy_;          // grid_n^2 cells
  std::vector<std::array<int, 2>> placements_;   // by macro id; {-1,-1} = unplaced
  std::vector<int> order_;
  int cursor_ = 0;

  void check_not_finished(const char* op) const;
};

// Fresh episode: empty canvas, cursor 0, canonical macro order.
PlacementState reset(std::shared_ptr<const Netlist> netlist);

// Dense incremental-HPWL baseline reward: -(hpwl(s') - hpwl(s)).
// Telescopes to -hpwl(terminal) over a full episode when hpwl(reset) = 0.
double dense_hpwl_reward(const PlacementState& s, Action a, const PlacementState& s_next);

// Replays an action sequence from reset; throws on any illegal step.
PlacementState replay(std::shared_ptr<const Netlist> netlist, const std::vector<Action>& actions);

}  // namespace eim
