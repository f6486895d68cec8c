#include "eimplace/netlist.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "eimplace/errors.hpp"
#include "eimplace/io.hpp"
#include "eimplace/rng.hpp"

namespace eim {

using nlohmann::json;

int Netlist::total_macro_area() const {
  int area = 0;
  for (const auto& m : macros) area += m.area();
  return area;
}

double Netlist::density() const {
  if (grid_n == 0) return 0.0;
  return static_cast<double>(total_macro_area()) / (static_cast<double>(grid_n) * grid_n);
}

namespace {

const json& require_key(const json& obj, const char* key, const char* where) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw ParseError(std::string("missing key '") + key + "' in " + where);
  return *it;
}

int require_int(const json& v, const char* what) {
  if (!v.is_number_integer())
    throw ParseError(std::string(what) + " must be an integer");
  return v.get<int>();
}

double require_number(const json& v, const char* what) {
  if (!v.is_number()) throw ParseError(std::string(what) + " must be a number");
  return v.get<double>();
}

void validate(const Netlist& n, std::vector<std::string>* warnings) {
  if (n.grid_n < 1) throw ValidationError("grid_n must be positive");
  const int count = static_cast<int>(n.macros.size());
  for (int i = 0; i < count; ++i) {
    const Macro& m = n.macros[i];
    if (m.id != i)
      throw ValidationError("macro ids must be 0..n-1 with no gaps; found id " +
                            std::to_string(m.id) + " at position " + std::to_string(i));
    if (m.width_cells < 1 || m.width_cells > n.grid_n || m.height_cells < 1 ||
        m.height_cells > n.grid_n)
      throw ValidationError("macro " + std::to_string(m.id) + " dimensions " +
                            std::to_string(m.width_cells) + "x" + std::to_string(m.height_cells) +
                            " exceed the " + std::to_string(n.grid_n) + "x" +
                            std::to_string(n.grid_n) + " grid");
    for (std::size_t p = 0; p < m.pins.size(); ++p) {
      const PinOffset& pin = m.pins[p];
      if (pin.dx < 0.0 || pin.dx > m.width_cells || pin.dy < 0.0 || pin.dy > m.height_cells)
        throw ValidationError("macro " + std::to_string(m.id) + " pin " + std::to_string(p) +
                              " offset outside macro bounds");
    }
  }
  for (std::size_t i = 0; i < n.nets.size(); ++i) {
    const Net& net = n.nets[i];
    if (net.degree() < 2)
      throw ValidationError("net " + std::to_string(i) + " has fewer than 2 connection points");
    for (const NetEndpoint& ep : net.endpoints) {
      if (ep.macro_id < 0 || ep.macro_id >= count)
        throw ValidationError("net " + std::to_string(i) + " references macro_id " +
                              std::to_string(ep.macro_id) + " in a " + std::to_string(count) +
                              "-macro design");
      const Macro& m = n.macros[ep.macro_id];
      if (ep.pin_index < 0 || ep.pin_index >= static_cast<int>(m.pins.size()))
        throw ValidationError("net " + std::to_string(i) + " references pin " +
                              std::to_string(ep.pin_index) + " of macro " +
                              std::to_string(ep.macro_id) + " which has " +
                              std::to_string(m.pins.size()) + " pins");
    }
  }
  if (warnings && n.density() > kParseWarnDensity) {
    std::ostringstream ss;
    ss << "macro density " << io::format_fixed(n.density(), 3) << " exceeds "
       << io::format_fixed(kParseWarnDensity, 3) << "; legal placements may be scarce";
    warnings->push_back(ss.str());
  }
}

}  // namespace

Netlist parse_netlist(const std::string& text, std::vector<std::string>* warnings) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("netlist syntax error at line " +
                     std::to_string(io::line_of_offset(text, e.byte)) + ": " + e.what());
  }
  if (!doc.is_object()) throw ParseError("netlist document must be a JSON object");

  Netlist n;
  n.name = require_key(doc, "name", "netlist").get<std::string>();
  n.grid_n = require_int(require_key(doc, "grid_n", "netlist"), "grid_n");

  for (const json& jm : require_key(doc, "macros", "netlist")) {
    Macro m;
    m.id = require_int(require_key(jm, "id", "macro"), "macro id");
    m.width_cells = require_int(require_key(jm, "w", "macro"), "macro w");
    m.height_cells = require_int(require_key(jm, "h", "macro"), "macro h");
    for (const json& jp : require_key(jm, "pins", "macro")) {
      PinOffset pin;
      pin.dx = require_number(require_key(jp, "dx", "pin"), "pin dx");
      pin.dy = require_number(require_key(jp, "dy", "pin"), "pin dy");
      m.pins.push_back(pin);
    }
    n.macros.push_back(std::move(m));
  }
  // ids may appear in any order in the file; canonical order is by id.
  std::sort(n.macros.begin(), n.macros.end(),
            [](const Macro& a, const Macro& b) { return a.id < b.id; });

  for (const json& jn : require_key(doc, "nets", "netlist")) {
    Net net;
    for (const json& je : require_key(jn, "endpoints", "net")) {
      if (!je.is_array() || je.size() != 2)
        throw ParseError("net endpoint must be a [macro_id, pin_index] pair");
      net.endpoints.push_back({require_int(je[0], "endpoint macro_id"),
                               require_int(je[1], "endpoint pin_index")});
    }
    for (const json& jt : require_key(jn, "terminals", "net")) {
      if (!jt.is_array() || jt.size() != 2)
        throw ParseError("net terminal must be an [x, y] pair");
      net.terminals.push_back({require_number(jt[0], "terminal x"),
                               require_number(jt[1], "terminal y")});
    }
    n.nets.push_back(std::move(net));
  }

  validate(n, warnings);
  return n;
}

std::string serialize_netlist(const Netlist& n) {
  // Hand-rolled writer: nlohmann prints shortest-round-trip floats, while the
  // canonical form pins them to 6 decimals.
  std::ostringstream out;
  out << "{\n";
  out << "  \"grid_n\": " << n.grid_n << ",\n";
  out << "  \"macros\": [";
  std::vector<const Macro*> by_id;
  by_id.reserve(n.macros.size());
  for (const Macro& m : n.macros) by_id.push_back(&m);
  std::sort(by_id.begin(), by_id.end(),
            [](const Macro* a, const Macro* b) { return a->id < b->id; });
  for (std::size_t i = 0; i < by_id.size(); ++i) {
    const Macro& m = *by_id[i];
    out << (i ? ",\n    " : "\n    ");
    out << "{\"h\": " << m.height_cells << ", \"id\": " << m.id << ", \"pins\": [";
    for (std::size_t p = 0; p < m.pins.size(); ++p) {
      if (p) out << ", ";
      out << "{\"dx\": " << io::format_fixed(m.pins[p].dx) << ", \"dy\": "
          << io::format_fixed(m.pins[p].dy) << "}";
    }
    out << "], \"w\": " << m.width_cells << "}";
  }
  out << (by_id.empty() ? "],\n" : "\n  ],\n");
  out << "  \"name\": " << json(n.name).dump() << ",\n";
  out << "  \"nets\": [";
  for (std::size_t i = 0; i < n.nets.size(); ++i) {
    const Net& net = n.nets[i];
    out << (i ? ",\n    " : "\n    ");
    out << "{\"endpoints\": [";
    for (std::size_t e = 0; e < net.endpoints.size(); ++e) {
      if (e) out << ", ";
      out << "[" << net.endpoints[e].macro_id << ", " << net.endpoints[e].pin_index << "]";
    }
    out << "], \"terminals\": [";
    for (std::size_t t = 0; t < net.terminals.size(); ++t) {
      if (t) out << ", ";
      out << "[" << io::format_fixed(net.terminals[t].x) << ", "
          << io::format_fixed(net.terminals[t].y) << "]";
    }
    out << "]}";
  }
  out << (n.nets.empty() ? "]\n" : "\n  ]\n");
  out << "}\n";
  return out.str();
}

namespace {

void validate_config(const SynthConfig& cfg) {
  if (cfg.grid_n < 1) throw ConfigError("grid_n must be positive");
  if (cfg.macro_count < 1) throw ConfigError("macro_count must be positive");
  if (cfg.size_min < 1 || cfg.size_min > cfg.size_max || cfg.size_max > cfg.grid_n)
    throw ConfigError("macro size range must satisfy 1 <= min <= max <= grid_n");
  if (cfg.net_count < 0) throw ConfigError("net_count must be nonnegative");
  if (cfg.degree_min < 2 || cfg.degree_min > cfg.degree_max)
    throw ConfigError("net degree range must satisfy 2 <= min <= max");
  if (cfg.terminal_prob < 0.0 || cfg.terminal_prob > 1.0)
    throw ConfigError("terminal_prob must lie in [0, 1]");
}

}  // namespace

Netlist generate_synthetic(const SynthConfig& cfg, std::uint64_t seed) {
  validate_config(cfg);
  auto engine = rng::make_engine(rng::derive_seed(seed, 0xd351));

  const int budget = static_cast<int>(kMaxSynthDensity * cfg.grid_n * cfg.grid_n);
  std::vector<std::pair<int, int>> sizes(cfg.macro_count);
  bool feasible = false;
  for (int attempt = 0; attempt < 1000 && !feasible; ++attempt) {
    int total = 0;
    for (auto& [w, h] : sizes) {
      w = static_cast<int>(rng::uniform_int(engine, cfg.size_min, cfg.size_max));
      h = static_cast<int>(rng::uniform_int(engine, cfg.size_min, cfg.size_max));
      total += w * h;
    }
    feasible = total <= budget;
  }
  if (!feasible)
    throw ConfigError("infeasible config: " + std::to_string(cfg.macro_count) + " macros of size " +
                      std::to_string(cfg.size_min) + ".." + std::to_string(cfg.size_max) +
                      " cannot fit the area budget " + std::to_string(budget) + " after 1000 attempts");

  Netlist n;
  n.name = cfg.name;
  n.grid_n = cfg.grid_n;
  n.macros.reserve(cfg.macro_count);
  for (int id = 0; id < cfg.macro_count; ++id) {
    Macro m;
    m.id = id;
    m.width_cells = sizes[id].first;
    m.height_cells = sizes[id].second;
    m.pins.push_back({m.width_cells / 2.0, m.height_cells / 2.0});
    n.macros.push_back(std::move(m));
  }

  std::vector<int> ids(cfg.macro_count);
  std::iota(ids.begin(), ids.end(), 0);
  for (int k = 0; k < cfg.net_count; ++k) {
    Net net;
    const int degree = static_cast<int>(rng::uniform_int(engine, cfg.degree_min, cfg.degree_max));
    const bool has_terminal = rng::uniform_real(engine) < cfg.terminal_prob;
    if (has_terminal) {
      net.terminals.push_back(
          {static_cast<double>(rng::uniform_int(engine, 0, cfg.grid_n)),
           static_cast<double>(rng::uniform_int(engine, 0, cfg.grid_n))});
    }
    int macro_points = degree - (has_terminal ? 1 : 0);
    if (macro_points <= cfg.macro_count) {
      // Distinct macros when the pool allows it.
      const auto chosen = rng::sample_without_replacement(ids, macro_points, engine);
      for (int id : chosen) net.endpoints.push_back({id, 0});
    } else {
      for (int p = 0; p < macro_points; ++p)
        net.endpoints.push_back(
            {static_cast<int>(rng::uniform_int(engine, 0, cfg.macro_count - 1)), 0});
    }
    n.nets.push_back(std::move(net));
  }

  validate(n, nullptr);
  return n;
}

std::vector<int> macro_order(const Netlist& n) {
  std::vector<int> order(n.macros.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const int area_a = n.macros[a].area();
    const int area_b = n.macros[b].area();
    if (area_a != area_b) return area_a > area_b;
    return a < b;
  });
  return order;
}

}  // namespace eim
