#include "eimplace/expert_synth.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "eimplace/errors.hpp"
#include "eimplace/io.hpp"
#include "eimplace/rng.hpp"

namespace eim {

using nlohmann::json;

std::vector<int> ExpertDataset::train_ids() const {
  std::vector<int> ids;
  for (std::size_t i = 0; i < trajectories.size(); ++i)
    if (!trajectories[i].validation) ids.push_back(static_cast<int>(i));
  return ids;
}

std::vector<int> ExpertDataset::validation_ids() const {
  std::vector<int> ids;
  for (std::size_t i = 0; i < trajectories.size(); ++i)
    if (trajectories[i].validation) ids.push_back(static_cast<int>(i));
  return ids;
}

namespace {

int ring_depth(int x, int y, int n) { return std::min(std::min(x, y), std::min(n - 1 - x, n - 1 - y)); }

// Legal cells whose footprint contains at least one cell of ring `depth`.
std::vector<int> ring_candidates(const std::vector<std::uint8_t>& legal, int n, int w, int h,
                                 int depth) {
  std::vector<int> out;
  for (int cell = 0; cell < n * n; ++cell) {
    if (!legal[cell]) continue;
    const int x = cell % n;
    const int y = cell / n;
    bool touches = false;
    for (int j = 0; j < h && !touches; ++j)
      for (int i = 0; i < w && !touches; ++i)
        if (ring_depth(x + i, y + j, n) == depth) touches = true;
    if (touches) out.push_back(cell);
  }
  return out;
}

}  // namespace

Layout generate_expert_layout(const Netlist& n, std::uint64_t seed) {
  auto netlist = std::make_shared<const Netlist>(n);
  auto engine = rng::make_engine(rng::derive_seed(seed, 0xe587));
  PlacementState state = reset(netlist);
  const int grid = n.grid_n;
  const int max_depth = (grid + 1) / 2;

  while (!state.finished()) {
    const auto legal = state.position_mask();
    const Macro& m = state.current_macro();

    std::vector<int> candidates;
    for (int depth = 0; depth < max_depth && candidates.empty(); ++depth)
      candidates = ring_candidates(legal, grid, m.width_cells, m.height_cells, depth);
    if (candidates.empty())
      throw InfeasibleError("expert placement: no legal cell for macro " + std::to_string(m.id) +
                            " at step " + std::to_string(state.cursor()));

    std::vector<double> raw(candidates.size());
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      raw[i] = state.delta_hpwl(Action{candidates[i]});
      best = std::min(best, raw[i]);
    }
    double second = std::numeric_limits<double>::infinity();
    for (double v : raw)
      if (v > best) second = std::min(second, v);

    const bool take_second =
        rng::uniform_real(engine) < 0.2 && second < std::numeric_limits<double>::infinity();
    const double target = take_second ? second : best;
    std::vector<int> pool;
    for (std::size_t i = 0; i < candidates.size(); ++i)
      if (raw[i] == target) pool.push_back(candidates[i]);
    const int pick =
        pool[static_cast<std::size_t>(rng::uniform_int(engine, 0, static_cast<int>(pool.size()) - 1))];
    state.apply(Action{pick});
  }
  return state.to_layout();
}

Trajectory decompose_layout(const std::shared_ptr<const Netlist>& n, const Layout& layout) {
  if (layout.netlist_name != n->name)
    throw ValidationError("layout names netlist '" + layout.netlist_name + "' but got '" +
                          n->name + "'");
  if (layout.grid_n != n->grid_n)
    throw ValidationError("layout grid " + std::to_string(layout.grid_n) +
                          " does not match netlist grid " + std::to_string(n->grid_n));
  const auto order = macro_order(*n);
  if (layout.placements.size() != order.size())
    throw ValidationError("layout is incomplete: " + std::to_string(layout.placements.size()) +
                          " of " + std::to_string(order.size()) + " macros placed");
  for (std::size_t t = 0; t < order.size(); ++t)
    if (layout.placements[t].macro_id != order[t])
      throw ValidationError("order mismatch at step " + std::to_string(t) + ": layout places macro " +
                            std::to_string(layout.placements[t].macro_id) +
                            " but canonical order expects macro " + std::to_string(order[t]));

  Trajectory traj;
  traj.design = n->name;
  PlacementState state = reset(n);
  traj.digests.push_back(state.digest());
  for (std::size_t t = 0; t < layout.placements.size(); ++t) {
    const auto& p = layout.placements[t];
    const Action a = make_action(p.x, p.y, n->grid_n);
    try {
      state.apply(a);
    } catch (const IllegalActionError& e) {
      throw ValidationError("illegal intermediate at step " + std::to_string(t) + ": " + e.what());
    }
    traj.actions.push_back(a);
    traj.digests.push_back(state.digest());
  }
  return traj;
}

std::vector<PreferenceTuple> assign_preferences(const std::shared_ptr<const Netlist>& n,
                                                const Trajectory& traj, int traj_id,
                                                int k_per_step, std::uint64_t seed) {
  if (k_per_step < 1) throw ConfigError("k_per_step must be >= 1");
  auto engine = rng::make_engine(rng::derive_seed(seed, 0x9e37 + static_cast<std::uint64_t>(traj_id)));
  std::vector<PreferenceTuple> out;
  PlacementState state = reset(n);
  for (int t = 0; t < traj.length(); ++t) {
    const auto legal = state.position_mask();
    const Action chosen = traj.actions[t];
    std::vector<int> alternatives;
    for (int cell = 0; cell < static_cast<int>(legal.size()); ++cell)
      if (legal[cell] && cell != chosen.cell) alternatives.push_back(cell);
    if (!alternatives.empty()) {
      const std::size_t k = std::min<std::size_t>(k_per_step, alternatives.size());
      const auto rejected = rng::sample_without_replacement(alternatives, k, engine);
      for (int cell : rejected) out.push_back({traj_id, t, chosen, Action{cell}});
    }
    state.apply(chosen);
  }
  return out;
}

std::vector<ValidationTuple> build_validation_set(const std::shared_ptr<const Netlist>& n,
                                                  const std::vector<Trajectory>& trajectories,
                                                  const std::vector<int>& traj_ids, int m,
                                                  std::uint64_t seed) {
  if (m < 1) throw ConfigError("validation distractor count m must be >= 1");
  std::vector<ValidationTuple> out;
  for (int id : traj_ids) {
    const Trajectory& traj = trajectories.at(id);
    auto engine = rng::make_engine(rng::derive_seed(seed, 0x7a11 + static_cast<std::uint64_t>(id)));
    PlacementState state = reset(n);
    for (int t = 0; t < traj.length(); ++t) {
      const auto legal = state.position_mask();
      const Action expert = traj.actions[t];
      std::vector<int> alternatives;
      for (int cell = 0; cell < static_cast<int>(legal.size()); ++cell)
        if (legal[cell] && cell != expert.cell) alternatives.push_back(cell);
      ValidationTuple vt;
      vt.traj_id = id;
      vt.step = t;
      vt.expert_action = expert;
      const std::size_t k = std::min<std::size_t>(m, alternatives.size());
      for (int cell : rng::sample_without_replacement(alternatives, k, engine))
        vt.distractors.push_back(Action{cell});
      out.push_back(std::move(vt));
      state.apply(expert);
    }
  }
  return out;
}

DatasetBuildResult build_expert_dataset(const std::shared_ptr<const Netlist>& n,
                                        const DatasetBuildConfig& cfg) {
  if (cfg.count < 1) throw ConfigError("expert layout count must be >= 1");
  DatasetBuildResult result;
  result.dataset.design = n->name;
  result.dataset.grid_n = n->grid_n;

  const int n_val = static_cast<int>(cfg.count * 0.2);
  for (int i = 0; i < cfg.count; ++i) {
    const Layout layout = generate_expert_layout(*n, rng::derive_seed(cfg.seed, i));
    Trajectory traj = decompose_layout(n, layout);
    traj.validation = i >= cfg.count - n_val;
    result.layouts.push_back(layout);
    result.dataset.trajectories.push_back(std::move(traj));
  }

  std::vector<int> val_ids = result.dataset.validation_ids();
  if (val_ids.empty()) {
    // Too few layouts for a held-out split: validate on the training layouts.
    val_ids = result.dataset.train_ids();
    result.warnings.push_back("fewer than 5 layouts: validation set falls back to training layouts");
  }

  for (int id : result.dataset.train_ids()) {
    auto prefs = assign_preferences(n, result.dataset.trajectories[id], id, cfg.k_per_step,
                                    rng::derive_seed(cfg.seed, 0x1000));
    result.dataset.preferences.insert(result.dataset.preferences.end(), prefs.begin(), prefs.end());
  }
  result.dataset.validation = build_validation_set(n, result.dataset.trajectories, val_ids, cfg.m,
                                                   rng::derive_seed(cfg.seed, 0x2000));
  return result;
}

std::string dataset_to_jsonl(const ExpertDataset& ds) {
  std::ostringstream out;
  for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
    const Trajectory& t = ds.trajectories[i];
    json rec;
    rec["kind"] = "trajectory";
    rec["id"] = i;
    rec["design"] = t.design;
    rec["grid_n"] = ds.grid_n;
    rec["split"] = t.validation ? "validation" : "train";
    json actions = json::array();
    for (Action a : t.actions) actions.push_back(a.cell);
    rec["actions"] = std::move(actions);
    rec["digests"] = t.digests;
    out << rec.dump() << "\n";
  }
  for (const PreferenceTuple& p : ds.preferences) {
    json rec;
    rec["kind"] = "preference";
    rec["traj"] = p.traj_id;
    rec["step"] = p.step;
    rec["chosen"] = p.chosen.cell;
    rec["rejected"] = p.rejected.cell;
    out << rec.dump() << "\n";
  }
  for (const ValidationTuple& v : ds.validation) {
    json rec;
    rec["kind"] = "validation";
    rec["traj"] = v.traj_id;
    rec["step"] = v.step;
    rec["expert"] = v.expert_action.cell;
    json distractors = json::array();
    for (Action a : v.distractors) distractors.push_back(a.cell);
    rec["distractors"] = std::move(distractors);
    out << rec.dump() << "\n";
  }
  return out.str();
}

ExpertDataset dataset_from_jsonl(const std::string& text) {
  ExpertDataset ds;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
    const std::string kind = rec.value("kind", "");
    if (kind == "trajectory") {
      const int id = rec.at("id").get<int>();
      if (id != static_cast<int>(ds.trajectories.size()))
        throw ParseError("dataset line " + std::to_string(line_no) +
                         ": trajectory ids must be dense and in order");
      Trajectory t;
      t.design = rec.at("design").get<std::string>();
      t.validation = rec.at("split").get<std::string>() == "validation";
      for (const json& a : rec.at("actions")) t.actions.push_back(Action{a.get<int>()});
      for (const json& d : rec.at("digests")) t.digests.push_back(d.get<std::uint64_t>());
      if (t.digests.size() != t.actions.size() + 1)
        throw ParseError("dataset line " + std::to_string(line_no) +
                         ": digest count must be action count + 1");
      if (ds.design.empty()) ds.design = t.design;
      if (rec.contains("grid_n")) ds.grid_n = rec.at("grid_n").get<int>();
      ds.trajectories.push_back(std::move(t));
    } else if (kind == "preference") {
      ds.preferences.push_back({rec.at("traj").get<int>(), rec.at("step").get<int>(),
                                Action{rec.at("chosen").get<int>()},
                                Action{rec.at("rejected").get<int>()}});
    } else if (kind == "validation") {
      ValidationTuple v;
      v.traj_id = rec.at("traj").get<int>();
      v.step = rec.at("step").get<int>();
      v.expert_action = Action{rec.at("expert").get<int>()};
      for (const json& d : rec.at("distractors")) v.distractors.push_back(Action{d.get<int>()});
      ds.validation.push_back(std::move(v));
    } else {
      throw ParseError("dataset line " + std::to_string(line_no) + ": unknown record kind '" +
                       kind + "'");
    }
  }
  for (const PreferenceTuple& p : ds.preferences)
    if (p.traj_id < 0 || p.traj_id >= static_cast<int>(ds.trajectories.size()))
      throw ValidationError("preference record references missing trajectory " +
                            std::to_string(p.traj_id));
  for (const ValidationTuple& v : ds.validation)
    if (v.traj_id < 0 || v.traj_id >= static_cast<int>(ds.trajectories.size()))
      throw ValidationError("validation record references missing trajectory " +
                            std::to_string(v.traj_id));
  return ds;
}

}  // namespace eim
