#include "eimplace/placement_env.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "eimplace/errors.hpp"
#include "eimplace/io.hpp"

namespace eim {

using nlohmann::json;

std::string serialize_layout(const Layout& layout) {
  std::ostringstream out;
  out << "{\n";
  out << "  \"grid_n\": " << layout.grid_n << ",\n";
  out << "  \"netlist\": " << json(layout.netlist_name).dump() << ",\n";
  out << "  \"placements\": [";
  for (std::size_t i = 0; i < layout.placements.size(); ++i) {
    const auto& p = layout.placements[i];
    out << (i ? ", " : "") << "[" << p.macro_id << ", " << p.x << ", " << p.y << "]";
  }
  out << "]\n}\n";
  return out.str();
}

Layout parse_layout(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("layout syntax error at line " +
                     std::to_string(io::line_of_offset(text, e.byte)) + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("netlist") || !doc.contains("grid_n") ||
      !doc.contains("placements"))
    throw ParseError("layout document must contain netlist, grid_n and placements");
  Layout layout;
  layout.netlist_name = doc["netlist"].get<std::string>();
  layout.grid_n = doc["grid_n"].get<int>();
  for (const json& jp : doc["placements"]) {
    if (!jp.is_array() || jp.size() != 3)
      throw ParseError("layout placement must be a [macro_id, x, y] triple");
    layout.placements.push_back({jp[0].get<int>(), jp[1].get<int>(), jp[2].get<int>()});
  }
  return layout;
}

std::vector<double> FeatureMaps::flatten() const {
  const int cells = grid_n * grid_n;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(kChannels) * cells);
  out.insert(out.end(), view.begin(), view.end());
  out.insert(out.end(), position.begin(), position.end());
  out.insert(out.end(), wire.begin(), wire.end());
  out.insert(out.end(), cells, macro_w);
  out.insert(out.end(), cells, macro_h);
  out.insert(out.end(), cells, progress);
  return out;
}

PlacementState reset(std::shared_ptr<const Netlist> netlist) {
  PlacementState s;
  s.netlist_ = std::move(netlist);
  const int n = s.netlist_->grid_n;
  s.occupancy_.assign(static_cast<std::size_t>(n) * n, 0);
  s.placements_.assign(s.netlist_->macros.size(), {-1, -1});
  s.order_ = macro_order(*s.netlist_);
  s.cursor_ = 0;
  return s;
}

void PlacementState::check_not_finished(const char* op) const {
  if (finished())
    throw EpisodeFinishedError(std::string(op) + ": episode finished, all " +
                               std::to_string(macro_count()) + " macros placed");
}

const Macro& PlacementState::current_macro() const {
  check_not_finished("current_macro");
  return netlist_->macros[order_[cursor_]];
}

std::pair<int, int> PlacementState::placement_of(int macro_id) const {
  const auto& p = placements_.at(macro_id);
  return {p[0], p[1]};
}

std::vector<std::uint8_t> PlacementState::position_mask() const {
  check_not_finished("position_mask");
  const int n = grid_n();
  const Macro& m = current_macro();
  const int w = m.width_cells;
  const int h = m.height_cells;

  // Summed-area table over occupancy; footprint is free iff its sum is 0.
  std::vector<int> sat(static_cast<std::size_t>(n + 1) * (n + 1), 0);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      sat[(y + 1) * (n + 1) + (x + 1)] = occupancy_[y * n + x] + sat[y * (n + 1) + (x + 1)] +
                                         sat[(y + 1) * (n + 1) + x] - sat[y * (n + 1) + x];

  std::vector<std::uint8_t> mask(static_cast<std::size_t>(n) * n, 0);
  for (int y = 0; y + h <= n; ++y) {
    for (int x = 0; x + w <= n; ++x) {
      const int sum = sat[(y + h) * (n + 1) + (x + w)] - sat[y * (n + 1) + (x + w)] -
                      sat[(y + h) * (n + 1) + x] + sat[y * (n + 1) + x];
      mask[y * n + x] = sum == 0 ? 1 : 0;
    }
  }
  return mask;
}

int PlacementState::legal_action_count() const {
  const auto mask = position_mask();
  int count = 0;
  for (auto v : mask) count += v;
  return count;
}

namespace {

// One net's half-perimeter over resolved points. `probe_macro` >= 0 resolves
// that macro at (px, py) even though it is not placed yet; this keeps the
// arithmetic identical between hpwl() and delta_hpwl().
double net_halfperim(const Net& net, const std::vector<std::array<int, 2>>& placements,
                     const std::vector<Macro>& macros, int probe_macro, double px, double py) {
  double min_x = std::numeric_limits<double>::infinity();
  double max_x = -std::numeric_limits<double>::infinity();
  double min_y = std::numeric_limits<double>::infinity();
  double max_y = -std::numeric_limits<double>::infinity();
  int resolved = 0;
  for (const Terminal& t : net.terminals) {
    min_x = std::min(min_x, t.x);
    max_x = std::max(max_x, t.x);
    min_y = std::min(min_y, t.y);
    max_y = std::max(max_y, t.y);
    ++resolved;
  }
  for (const NetEndpoint& ep : net.endpoints) {
    double bx, by;
    if (placements[ep.macro_id][0] >= 0) {
      bx = placements[ep.macro_id][0];
      by = placements[ep.macro_id][1];
    } else if (ep.macro_id == probe_macro) {
      bx = px;
      by = py;
    } else {
      continue;
    }
    const PinOffset& pin = macros[ep.macro_id].pins[ep.pin_index];
    const double x = bx + pin.dx;
    const double y = by + pin.dy;
    min_x = std::min(min_x, x);
    max_x = std::max(max_x, x);
    min_y = std::min(min_y, y);
    max_y = std::max(max_y, y);
    ++resolved;
  }
  if (resolved < 2) return 0.0;
  return (max_x - min_x) + (max_y - min_y);
}

}  // namespace

double PlacementState::hpwl() const {
  double total = 0.0;
  for (const Net& net : netlist_->nets)
    total += net_halfperim(net, placements_, netlist_->macros, -1, 0.0, 0.0);
  return total;
}

double PlacementState::delta_hpwl(Action a) const {
  check_not_finished("delta_hpwl");
  const int n = grid_n();
  const int macro_id = order_[cursor_];
  const double px = action_x(a, n);
  const double py = action_y(a, n);
  double with = 0.0;
  double without = 0.0;
  for (const Net& net : netlist_->nets) {
    with += net_halfperim(net, placements_, netlist_->macros, macro_id, px, py);
    without += net_halfperim(net, placements_, netlist_->macros, -1, 0.0, 0.0);
  }
  return with - without;
}

std::vector<double> PlacementState::wire_mask() const {
  check_not_finished("wire_mask");
  const int n = grid_n();
  const auto legal = position_mask();
  std::vector<double> raw(static_cast<std::size_t>(n) * n, 0.0);
  double min_raw = std::numeric_limits<double>::infinity();
  double max_raw = -std::numeric_limits<double>::infinity();
  for (int cell = 0; cell < n * n; ++cell) {
    if (!legal[cell]) continue;
    raw[cell] = delta_hpwl(Action{cell});
    min_raw = std::min(min_raw, raw[cell]);
    max_raw = std::max(max_raw, raw[cell]);
  }
  std::vector<double> mask(static_cast<std::size_t>(n) * n, 1.0);
  const double span = max_raw - min_raw;
  for (int cell = 0; cell < n * n; ++cell) {
    if (!legal[cell]) continue;
    mask[cell] = span > 0.0 ? (raw[cell] - min_raw) / span : 0.0;
  }
  return mask;
}

std::vector<double> PlacementState::view_mask() const {
  std::vector<double> view(occupancy_.size());
  for (std::size_t i = 0; i < occupancy_.size(); ++i) view[i] = occupancy_[i] ? 1.0 : 0.0;
  return view;
}

FeatureMaps PlacementState::feature_maps() const {
  check_not_finished("feature_maps");
  const int n = grid_n();
  FeatureMaps f;
  f.grid_n = n;
  f.view = view_mask();
  const auto legal = position_mask();
  f.position.resize(legal.size());
  for (std::size_t i = 0; i < legal.size(); ++i) f.position[i] = legal[i] ? 1.0 : 0.0;
  f.wire = wire_mask();
  const Macro& m = current_macro();
  f.macro_w = static_cast<double>(m.width_cells) / n;
  f.macro_h = static_cast<double>(m.height_cells) / n;
  f.progress = static_cast<double>(cursor_) / macro_count();
  return f;
}

bool PlacementState::apply(Action a) {
  check_not_finished("step");
  const int n = grid_n();
  if (a.cell < 0 || a.cell >= n * n)
    throw IllegalActionError("step: action cell " + std::to_string(a.cell) +
                             " outside the grid of " + std::to_string(n * n) + " cells");
  const Macro& m = current_macro();
  const int x = action_x(a, n);
  const int y = action_y(a, n);
  if (x + m.width_cells > n || y + m.height_cells > n)
    throw IllegalActionError("step: cell (" + std::to_string(x) + "," + std::to_string(y) +
                             ") places macro " + std::to_string(m.id) + " footprint " +
                             std::to_string(m.width_cells) + "x" + std::to_string(m.height_cells) +
                             " outside the canvas");
  for (int j = 0; j < m.height_cells; ++j)
    for (int i = 0; i < m.width_cells; ++i)
      if (occupancy_[(y + j) * n + (x + i)])
        throw IllegalActionError("step: cell (" + std::to_string(x) + "," + std::to_string(y) +
                                 ") overlaps occupied cell (" + std::to_string(x + i) + "," +
                                 std::to_string(y + j) + ")");
  for (int j = 0; j < m.height_cells; ++j)
    for (int i = 0; i < m.width_cells; ++i) occupancy_[(y + j) * n + (x + i)] = 1;
  placements_[m.id] = {x, y};
  ++cursor_;
  return finished();
}

std::pair<PlacementState, bool> PlacementState::step(Action a) const {
  PlacementState next = *this;
  const bool done = next.apply(a);
  return {std::move(next), done};
}

Layout PlacementState::to_layout() const {
  Layout layout;
  layout.netlist_name = netlist_->name;
  layout.grid_n = grid_n();
  for (int t = 0; t < cursor_; ++t) {
    const int id = order_[t];
    layout.placements.push_back({id, placements_[id][0], placements_[id][1]});
  }
  return layout;
}

std::uint64_t PlacementState::digest() const {
  std::uint64_t h = io::kFnvOffset;
  auto mix_int = [&h](std::int32_t v) {
    std::uint8_t bytes[4];
    for (int b = 0; b < 4; ++b) bytes[b] = static_cast<std::uint8_t>((v >> (8 * b)) & 0xff);
    h = io::fnv1a64(bytes, 4, h);
  };
  mix_int(grid_n());
  mix_int(cursor_);
  for (const auto& p : placements_) {
    mix_int(p[0]);
    mix_int(p[1]);
  }
  return h;
}

bool operator==(const PlacementState& a, const PlacementState& b) {
  return a.cursor_ == b.cursor_ && a.occupancy_ == b.occupancy_ &&
         a.placements_ == b.placements_ && a.order_ == b.order_ &&
         (a.netlist_ == b.netlist_ ||
          (a.netlist_ && b.netlist_ && *a.netlist_ == *b.netlist_));
}

double dense_hpwl_reward(const PlacementState& s, Action /*a*/, const PlacementState& s_next) {
  return -(s_next.hpwl() - s.hpwl());
}

PlacementState replay(std::shared_ptr<const Netlist> netlist, const std::vector<Action>& actions) {
  PlacementState s = reset(std::move(netlist));
  for (Action a : actions) s.apply(a);
  return s;
}

}  // namespace eim
