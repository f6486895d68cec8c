#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace eim {

// Pin position in fractional grid units from the macro's lower-left corner.
struct PinOffset {
  double dx = 0.0;
  double dy = 0.0;
  friend bool operator==(const PinOffset&, const PinOffset&) = default;
};

struct Macro {
  int id = 0;
  int width_cells = 1;
  int height_cells = 1;
  std::vector<PinOffset> pins;

  int area() const { return width_cells * height_cells; }
  friend bool operator==(const Macro&, const Macro&) = default;
};

struct NetEndpoint {
  int macro_id = 0;
  int pin_index = 0;
  friend bool operator==(const NetEndpoint&, const NetEndpoint&) = default;
};

// Absolute grid coordinate of a fixed connection point (I/O pad, pre-placed
// block pin). Participates in HPWL from step 0.
struct Terminal {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Terminal&, const Terminal&) = default;
};

// Hyperedge: every listed pin and terminal must end up electrically
// connected; contributes one half-perimeter term to HPWL.
struct Net {
  std::vector<NetEndpoint> endpoints;
  std::vector<Terminal> terminals;

  int degree() const { return static_cast<int>(endpoints.size() + terminals.size()); }
  friend bool operator==(const Net&, const Net&) = default;
};

// The placement problem instance: an N x N cell canvas, movable macros and
// the hypergraph connecting them. Immutable after construction.
struct Netlist {
  std::string name;
  int grid_n = 0;
  std::vector<Macro> macros;
  std::vector<Net> nets;

  int total_macro_area() const;
  double density() const;  // total macro area / N^2
  friend bool operator==(const Netlist&, const Netlist&) = default;
};

// Generator density cap: guarantees legal actions exist deep into episodes
// on small grids.
inline constexpr double kMaxSynthDensity = 0.5;
// Parser accepts denser instances but warns above this.
inline constexpr double kParseWarnDensity = 0.9;

struct SynthConfig {
  std::string name = "synthetic";
  int grid_n = 16;
  int macro_count = 8;
  int size_min = 2;  // width/height cells, drawn independently per axis
  int size_max = 4;
  int net_count = 12;
  int degree_min = 2;  // connection points per net, terminals included
  int degree_max = 4;
  double terminal_prob = 0.25;  // chance a net gets one fixed terminal
};

// Parses the `.netlist.json` document format and validates every invariant.
// Throws ParseError (with line number) on malformed JSON, ValidationError on
// dangling references or macros exceeding the grid. Appends a note to
// `warnings` when macro density exceeds kParseWarnDensity.
Netlist parse_netlist(const std::string& text, std::vector<std::string>* warnings = nullptr);

// Canonical text form: sorted keys, macros sorted by id, floats at fixed
// 6-decimal precision. parse_netlist(serialize_netlist(n)) == n, and
// structurally equal netlists serialize to identical bytes.
std::string serialize_netlist(const Netlist& n);

// Deterministic synthetic design generator; a pure function of (cfg, seed).
// Macro sizes are rejection-sampled until total area fits the
// kMaxSynthDensity budget; throws ConfigError after 1000 failed attempts.
Netlist generate_synthetic(const SynthConfig& cfg, std::uint64_t seed);

// Placement order: descending area, ties broken by ascending id.
std::vector<int> macro_order(const Netlist& n);

}  // namespace eim
