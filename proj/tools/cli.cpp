#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "eimplace/errors.hpp"
#include "eimplace/expert_synth.hpp"
#include "eimplace/io.hpp"
#include "eimplace/netlist.hpp"
#include "eimplace/parallel.hpp"
#include "eimplace/placement_env.hpp"
#include "eimplace/policy_training.hpp"
#include "eimplace/render.hpp"
#include "eimplace/reward_learning.hpp"
#include "eimplace/rng.hpp"

namespace eim::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config file support: one JSON document with per-command sections; flags
// override config values; unknown keys are rejected.

const std::vector<std::string> kTopLevelKeys = {"out_dir", "design",     "expert",
                                                "reward",  "ppo",        "eval"};

struct RunConfig {
  json doc = json::object();

  static RunConfig load(const std::string& path) {
    RunConfig cfg;
    if (path.empty()) return cfg;
    json doc;
    try {
      doc = json::parse(io::read_file(path));
    } catch (const json::parse_error& e) {
      throw ConfigError("config " + path + ": " + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config " + path + " must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
      if (std::find(kTopLevelKeys.begin(), kTopLevelKeys.end(), key) == kTopLevelKeys.end())
        throw ConfigError("config " + path + ": unknown key '" + key + "'");
      (void)value;
    }
    cfg.doc = std::move(doc);
    return cfg;
  }

  const json* section(const char* name, const std::vector<std::string>& allowed) const {
    auto it = doc.find(name);
    if (it == doc.end()) return nullptr;
    if (!it->is_object()) throw ConfigError(std::string("config section '") + name + "' must be an object");
    for (const auto& [key, value] : it->items()) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
        throw ConfigError(std::string("config section '") + name + "': unknown key '" + key + "'");
      (void)value;
    }
    return &*it;
  }

  std::string out_dir_or(const std::string& fallback) const {
    auto it = doc.find("out_dir");
    if (it != doc.end()) return it->get<std::string>();
    return fallback;
  }
};

// Flag wins; then the config section; then the built-in default already in
// `value`.
template <class T>
void resolve(const CLI::Option* opt, T& value, const json* section, const char* key) {
  if (opt && opt->count() > 0) return;
  if (section && section->contains(key)) value = section->at(key).get<T>();
}

std::string default_out_root() {
  if (const char* env = std::getenv("EIM_OUT_DIR")) return env;
  return ".";
}

std::shared_ptr<const Netlist> load_netlist_file(const std::string& path,
                                                 std::vector<std::string>* warnings = nullptr) {
  return std::make_shared<const Netlist>(parse_netlist(io::read_file(path), warnings));
}

std::string jsonl_escape_free_dump(const json& j) { return j.dump(); }

void write_metrics_jsonl(const fs::path& path, const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  for (const MetricsRow& r : rows) {
    json rec;
    rec["epoch"] = r.epoch;
    rec["loss"] = r.loss;
    if (r.val_accuracy)
      rec["val_accuracy"] = *r.val_accuracy;
    else
      rec["val_accuracy"] = nullptr;
    out << jsonl_escape_free_dump(rec) << "\n";
  }
  io::write_file(path, out.str());
}

void write_timings_jsonl(const fs::path& path, const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  for (const MetricsRow& r : rows) {
    json rec;
    rec["epoch"] = r.epoch;
    rec["wall_ms"] = r.wall_ms;
    out << rec.dump() << "\n";
  }
  io::write_file(path, out.str());
}

// ---------------------------------------------------------------------------
// gen-design

struct GenDesignArgs {
  std::string config_path;
  std::string out;
  SynthConfig synth;
  std::uint64_t seed = 1;
  bool json_out = false;
};

int cmd_gen_design(const GenDesignArgs& a, const RunConfig& cfg, const CLI::App* sub) {
  const json* sec = cfg.section("design", {"name", "grid_n", "macro_count", "size_min", "size_max",
                                           "net_count", "degree_min", "degree_max",
                                           "terminal_prob", "seed"});
  SynthConfig s = a.synth;
  std::uint64_t seed = a.seed;
  resolve(sub->get_option_no_throw("--name"), s.name, sec, "name");
  resolve(sub->get_option_no_throw("--grid"), s.grid_n, sec, "grid_n");
  resolve(sub->get_option_no_throw("--macros"), s.macro_count, sec, "macro_count");
  resolve(sub->get_option_no_throw("--size-min"), s.size_min, sec, "size_min");
  resolve(sub->get_option_no_throw("--size-max"), s.size_max, sec, "size_max");
  resolve(sub->get_option_no_throw("--nets"), s.net_count, sec, "net_count");
  resolve(sub->get_option_no_throw("--deg-min"), s.degree_min, sec, "degree_min");
  resolve(sub->get_option_no_throw("--deg-max"), s.degree_max, sec, "degree_max");
  resolve(sub->get_option_no_throw("--terminal-prob"), s.terminal_prob, sec, "terminal_prob");
  resolve(sub->get_option_no_throw("--seed"), seed, sec, "seed");

  const Netlist n = generate_synthetic(s, seed);
  io::write_file(a.out, serialize_netlist(n));

  json summary;
  summary["file"] = a.out;
  summary["name"] = n.name;
  summary["grid_n"] = n.grid_n;
  summary["macros"] = n.macros.size();
  summary["nets"] = n.nets.size();
  summary["density"] = n.density();
  if (a.json_out) {
    std::cout << summary.dump() << "\n";
  } else {
    std::cout << "wrote " << a.out << ": " << n.macros.size() << " macros, " << n.nets.size()
              << " nets, density " << io::format_fixed(n.density(), 3) << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// gen-expert

struct GenExpertArgs {
  std::string config_path;
  std::string netlist_path;
  std::string out_dir;
  DatasetBuildConfig build;
  int threads = 1;
  bool json_out = false;
};

int cmd_gen_expert(const GenExpertArgs& a, const RunConfig& cfg, const CLI::App* sub) {
  const json* sec = cfg.section("expert", {"count", "m", "k_per_step", "seed"});
  DatasetBuildConfig b = a.build;
  resolve(sub->get_option_no_throw("--count"), b.count, sec, "count");
  resolve(sub->get_option_no_throw("--m"), b.m, sec, "m");
  resolve(sub->get_option_no_throw("--k"), b.k_per_step, sec, "k_per_step");
  resolve(sub->get_option_no_throw("--seed"), b.seed, sec, "seed");

  std::vector<std::string> warnings;
  auto netlist = load_netlist_file(a.netlist_path, &warnings);

  fs::path out_dir = a.out_dir.empty()
                         ? fs::path(cfg.out_dir_or(default_out_root())) / (netlist->name + "_expert")
                         : fs::path(a.out_dir);
  fs::create_directories(out_dir);

  // Layouts are independent per seed index; generation parallelizes with
  // per-index seeds and fixed output slots.
  std::vector<Layout> layouts(b.count);
  parallel_for(static_cast<std::size_t>(b.count), a.threads, [&](std::size_t i) {
    layouts[i] = generate_expert_layout(*netlist, rng::derive_seed(b.seed, i));
  });
  DatasetBuildResult result;
  result.layouts = layouts;
  result.dataset.design = netlist->name;
  result.dataset.grid_n = netlist->grid_n;
  {
    const int n_val = static_cast<int>(b.count * 0.2);
    for (int i = 0; i < b.count; ++i) {
      Trajectory traj = decompose_layout(netlist, layouts[i]);
      traj.validation = i >= b.count - n_val;
      result.dataset.trajectories.push_back(std::move(traj));
    }
    std::vector<int> val_ids = result.dataset.validation_ids();
    if (val_ids.empty()) {
      val_ids = result.dataset.train_ids();
      result.warnings.push_back(
          "fewer than 5 layouts: validation set falls back to training layouts");
    }
    for (int id : result.dataset.train_ids()) {
      auto prefs = assign_preferences(netlist, result.dataset.trajectories[id], id, b.k_per_step,
                                      rng::derive_seed(b.seed, 0x1000));
      result.dataset.preferences.insert(result.dataset.preferences.end(), prefs.begin(),
                                        prefs.end());
    }
    result.dataset.validation = build_validation_set(netlist, result.dataset.trajectories, val_ids,
                                                     b.m, rng::derive_seed(b.seed, 0x2000));
  }

  std::vector<std::string> layout_files;
  for (int i = 0; i < b.count; ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "layout_%03d.layout.json", i);
    const fs::path p = out_dir / name;
    io::write_file(p, serialize_layout(layouts[i]));
    layout_files.push_back(name);
  }
  const fs::path dataset_path = out_dir / (netlist->name + ".eimset.jsonl");
  io::write_file(dataset_path, dataset_to_jsonl(result.dataset));

  json manifest;
  manifest["design"] = netlist->name;
  manifest["netlist_file"] = a.netlist_path;
  manifest["grid_n"] = netlist->grid_n;
  manifest["count"] = b.count;
  manifest["m"] = b.m;
  manifest["k_per_step"] = b.k_per_step;
  manifest["seed"] = b.seed;
  manifest["n_train_layouts"] = result.dataset.train_ids().size();
  manifest["n_validation_layouts"] = result.dataset.validation_ids().size();
  manifest["n_preferences"] = result.dataset.preferences.size();
  manifest["n_validation_tuples"] = result.dataset.validation.size();
  manifest["dataset_file"] = dataset_path.filename().string();
  manifest["layout_files"] = layout_files;
  manifest["warnings"] = result.warnings;
  io::write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");

  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
  for (const std::string& w : result.warnings) std::cerr << "warning: " << w << "\n";
  if (a.json_out) {
    std::cout << manifest.dump() << "\n";
  } else {
    std::cout << "wrote " << b.count << " layouts and " << dataset_path.string() << " ("
              << result.dataset.preferences.size() << " preferences, "
              << result.dataset.validation.size() << " validation tuples)\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// train-reward

struct TrainRewardArgs {
  std::string config_path;
  std::string method;  // demo | pref
  std::string dataset_path;
  std::string netlist_path;
  std::string out_dir;
  TrainConfig train;
  int threads = 1;
  bool json_out = false;
};

json train_config_echo(const TrainConfig& t, const std::string& method) {
  json echo;
  echo["method"] = method;
  echo["epochs"] = t.epochs;
  echo["batch_size"] = t.batch_size;
  echo["lr"] = t.lr;
  echo["alpha"] = t.alpha;
  echo["gamma"] = t.gamma;
  echo["seed"] = t.seed;
  echo["eval_every"] = t.eval_every;
  echo["hidden"] = t.hidden;
  echo["weight_decay"] = t.weight_decay;
  return echo;
}

int cmd_train_reward(const TrainRewardArgs& a, const RunConfig& cfg, const CLI::App* sub) {
  const json* sec = cfg.section("reward", {"epochs", "batch_size", "lr", "alpha", "gamma", "seed",
                                           "eval_every", "hidden", "weight_decay", "method"});
  TrainConfig t = a.train;
  std::string method = a.method;
  resolve(sub->get_option_no_throw("--epochs"), t.epochs, sec, "epochs");
  resolve(sub->get_option_no_throw("--batch"), t.batch_size, sec, "batch_size");
  resolve(sub->get_option_no_throw("--lr"), t.lr, sec, "lr");
  resolve(sub->get_option_no_throw("--alpha"), t.alpha, sec, "alpha");
  resolve(sub->get_option_no_throw("--gamma"), t.gamma, sec, "gamma");
  resolve(sub->get_option_no_throw("--seed"), t.seed, sec, "seed");
  resolve(sub->get_option_no_throw("--eval-every"), t.eval_every, sec, "eval_every");
  resolve(sub->get_option_no_throw("--hidden"), t.hidden, sec, "hidden");
  resolve(sub->get_option_no_throw("--weight-decay"), t.weight_decay, sec, "weight_decay");
  resolve(sub->get_option_no_throw("--method"), method, sec, "method");
  if (method != "demo" && method != "pref")
    throw ConfigError("train-reward: method must be 'demo' or 'pref'");

  auto netlist = load_netlist_file(a.netlist_path);
  const ExpertDataset ds = dataset_from_jsonl(io::read_file(a.dataset_path));
  if (ds.design != netlist->name)
    throw ValidationError("dataset design '" + ds.design + "' does not match netlist '" +
                          netlist->name + "'");
  if (ds.grid_n != netlist->grid_n)
    throw ValidationError("dataset grid " + std::to_string(ds.grid_n) +
                          " does not match netlist grid " + std::to_string(netlist->grid_n));

  const fs::path out_dir = a.out_dir.empty()
                               ? fs::path(cfg.out_dir_or(default_out_root())) /
                                     (netlist->name + "_" + method + "_reward")
                               : fs::path(a.out_dir);
  fs::create_directories(out_dir);

  const RewardTrainResult result = method == "demo" ? train_eim_d(ds, netlist, t)
                                                    : train_eim_p(ds, netlist, t);

  io::write_file(out_dir / "reward.qmap.json", save_reward_model(result.model));
  write_metrics_jsonl(out_dir / "metrics.jsonl", result.log);
  write_timings_jsonl(out_dir / "timings.jsonl", result.log);
  json echo = train_config_echo(t, method);
  echo["dataset"] = a.dataset_path;
  echo["netlist"] = a.netlist_path;
  io::write_file(out_dir / "config.json", echo.dump(2) + "\n");

  json report;
  report["best_val_accuracy"] = result.best_accuracy;
  report["best_epoch"] = result.best_epoch;
  report["checkpoint"] = (out_dir / "reward.qmap.json").string();
  if (a.json_out) {
    std::cout << report.dump() << "\n";
  } else {
    std::cout << "final validation accuracy " << io::format_fixed(result.best_accuracy, 4)
              << " (epoch " << result.best_epoch << "), checkpoint " << report["checkpoint"]
              << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// eval-reward

struct EvalRewardArgs {
  std::string config_path;
  std::string checkpoint_path;
  std::string dataset_path;
  std::string netlist_path;
  std::string out;
  bool json_out = false;
};

int cmd_eval_reward(const EvalRewardArgs& a, const RunConfig&, const CLI::App*) {
  auto netlist = load_netlist_file(a.netlist_path);
  const RewardModel rm = load_reward_model(io::read_file(a.checkpoint_path));
  if (rm.model.arch.grid_n != netlist->grid_n)
    throw ConfigError("grid-size mismatch: checkpoint grid " +
                      std::to_string(rm.model.arch.grid_n) + " vs design grid " +
                      std::to_string(netlist->grid_n));
  const ExpertDataset ds = dataset_from_jsonl(io::read_file(a.dataset_path));
  if (ds.design != netlist->name)
    throw ValidationError("dataset design '" + ds.design + "' does not match netlist '" +
                          netlist->name + "'");

  FeatureCache cache(netlist, &ds.trajectories);
  const double acc = reward_accuracy(rm, ds.validation, cache);

  json report;
  report["accuracy"] = acc;
  report["n_tuples"] = ds.validation.size();
  report["kind"] = to_string(rm.kind);
  report["checkpoint"] = a.checkpoint_path;
  report["dataset"] = a.dataset_path;
  report["design"] = ds.design;
  if (!a.out.empty()) io::write_file(a.out, report.dump(2) + "\n");
  if (a.json_out)
    std::cout << report.dump() << "\n";
  else
    std::cout << "reward accuracy " << io::format_fixed(acc, 4) << " over "
              << ds.validation.size() << " tuples (" << to_string(rm.kind) << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train-policy

struct TrainPolicyArgs {
  std::string config_path;
  std::string reward;  // hpwl | eim_d | eim_p
  std::string reward_checkpoint;
  std::string netlist_path;
  std::string out_dir;
  PPOConfig ppo;
  int eval_episodes = 32;
  bool json_out = false;
};

json ppo_config_echo(const PPOConfig& c) {
  json echo;
  echo["clip"] = c.clip;
  echo["gae_lambda"] = c.gae_lambda;
  echo["gamma"] = c.gamma;
  echo["epochs_per_update"] = c.epochs_per_update;
  echo["rollout_episodes"] = c.rollout_episodes;
  echo["entropy_coef"] = c.entropy_coef;
  echo["value_coef"] = c.value_coef;
  echo["lr"] = c.lr;
  echo["total_updates"] = c.total_updates;
  echo["seed"] = c.seed;
  echo["reward_source"] = to_string(c.reward_source);
  echo["reward_standardize"] = c.reward_standardize;
  echo["hidden"] = c.hidden;
  return echo;
}

int cmd_train_policy(const TrainPolicyArgs& a, const RunConfig& cfg, const CLI::App* sub) {
  const json* sec = cfg.section(
      "ppo", {"clip", "gae_lambda", "gamma", "epochs_per_update", "rollout_episodes",
              "entropy_coef", "value_coef", "lr", "total_updates", "seed", "reward_source",
              "reward_standardize", "hidden"});
  PPOConfig p = a.ppo;
  std::string source = a.reward;
  resolve(sub->get_option_no_throw("--clip"), p.clip, sec, "clip");
  resolve(sub->get_option_no_throw("--gae-lambda"), p.gae_lambda, sec, "gae_lambda");
  resolve(sub->get_option_no_throw("--gamma"), p.gamma, sec, "gamma");
  resolve(sub->get_option_no_throw("--epochs-per-update"), p.epochs_per_update, sec,
          "epochs_per_update");
  resolve(sub->get_option_no_throw("--rollout-episodes"), p.rollout_episodes, sec,
          "rollout_episodes");
  resolve(sub->get_option_no_throw("--entropy-coef"), p.entropy_coef, sec, "entropy_coef");
  resolve(sub->get_option_no_throw("--value-coef"), p.value_coef, sec, "value_coef");
  resolve(sub->get_option_no_throw("--lr"), p.lr, sec, "lr");
  resolve(sub->get_option_no_throw("--updates"), p.total_updates, sec, "total_updates");
  resolve(sub->get_option_no_throw("--seed"), p.seed, sec, "seed");
  resolve(sub->get_option_no_throw("--reward"), source, sec, "reward_source");
  resolve(sub->get_option_no_throw("--hidden"), p.hidden, sec, "hidden");
  p.reward_source = reward_source_from_string(source);

  auto netlist = load_netlist_file(a.netlist_path);

  std::optional<RewardModel> rm;
  if (p.reward_source != RewardSource::hpwl) {
    if (a.reward_checkpoint.empty())
      throw ConfigError("train-policy: --reward " + source + " requires --reward-checkpoint");
    rm = load_reward_model(io::read_file(a.reward_checkpoint));
    if (rm->model.arch.grid_n != netlist->grid_n)
      throw ConfigError("grid-size mismatch between reward checkpoint and design");
  }

  const fs::path out_dir =
      a.out_dir.empty()
          ? fs::path(cfg.out_dir_or(default_out_root())) / (netlist->name + "_" + source + "_policy")
          : fs::path(a.out_dir);
  fs::create_directories(out_dir);

  const PolicyTrainResult result = train_policy(netlist, p, rm ? &*rm : nullptr);

  io::write_file(out_dir / "policy.json", save_policy(result.policy));
  {
    std::ostringstream metrics, timings;
    for (const PolicyUpdateMetrics& r : result.log) {
      json rec;
      rec["update"] = r.update;
      rec["mean_reward_sum"] = r.mean_reward_sum;
      rec["mean_final_hpwl"] = r.mean_final_hpwl;
      rec["mean_periphery_occupancy"] = r.mean_periphery_occupancy;
      rec["loss"] = r.loss;
      rec["approx_kl"] = r.approx_kl;
      rec["entropy"] = r.entropy;
      rec["failures"] = r.failures;
      metrics << rec.dump() << "\n";
      json trec;
      trec["update"] = r.update;
      trec["wall_ms"] = r.wall_ms;
      timings << trec.dump() << "\n";
    }
    io::write_file(out_dir / "metrics.jsonl", metrics.str());
    io::write_file(out_dir / "timings.jsonl", timings.str());
  }

  const EvalReport eval = evaluate_policy(result.policy, netlist, a.eval_episodes,
                                          rng::derive_seed(p.seed, 0xe7a1), p.threads);
  json echo = ppo_config_echo(p);
  echo["netlist"] = a.netlist_path;
  if (!a.reward_checkpoint.empty()) echo["reward_checkpoint"] = a.reward_checkpoint;
  io::write_file(out_dir / "config.json", echo.dump(2) + "\n");

  json report;
  report["episodes"] = eval.episodes;
  report["mean_final_hpwl"] = eval.mean_final_hpwl;
  report["std_final_hpwl"] = eval.std_final_hpwl;
  report["mean_periphery_occupancy"] = eval.mean_periphery_occupancy;
  report["reward_sums"] = eval.reward_sums;
  report["failures"] = eval.failures;
  report["config"] = echo;
  io::write_file(out_dir / "eval_report.json", report.dump(2) + "\n");

  if (a.json_out) {
    std::cout << report.dump() << "\n";
  } else {
    std::cout << "trained " << p.total_updates << " updates; eval mean final HPWL "
              << io::format_fixed(eval.mean_final_hpwl, 3) << ", periphery occupancy "
              << io::format_fixed(eval.mean_periphery_occupancy, 3) << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// eval-policy

struct EvalPolicyArgs {
  std::string config_path;
  std::string checkpoint_path;
  std::string netlist_path;
  std::string out;
  int episodes = 32;
  std::uint64_t seed = 0;
  int threads = 1;
  bool json_out = false;
};

int cmd_eval_policy(const EvalPolicyArgs& a, const RunConfig& cfg, const CLI::App* sub) {
  const json* sec = cfg.section("eval", {"episodes", "seed"});
  int episodes = a.episodes;
  std::uint64_t seed = a.seed;
  resolve(sub->get_option_no_throw("--episodes"), episodes, sec, "episodes");
  resolve(sub->get_option_no_throw("--seed"), seed, sec, "seed");

  auto netlist = load_netlist_file(a.netlist_path);
  const PolicyModel policy = load_policy(io::read_file(a.checkpoint_path));
  if (policy.actor.arch.grid_n != netlist->grid_n)
    throw ConfigError("grid-size mismatch between policy checkpoint and design");

  const EvalReport eval = evaluate_policy(policy, netlist, episodes, seed, a.threads);
  json report;
  report["episodes"] = eval.episodes;
  report["mean_final_hpwl"] = eval.mean_final_hpwl;
  report["std_final_hpwl"] = eval.std_final_hpwl;
  report["mean_periphery_occupancy"] = eval.mean_periphery_occupancy;
  report["reward_sums"] = eval.reward_sums;
  report["failures"] = eval.failures;
  report["checkpoint"] = a.checkpoint_path;
  report["netlist"] = a.netlist_path;
  report["seed"] = seed;
  if (!a.out.empty()) io::write_file(a.out, report.dump(2) + "\n");
  if (a.json_out)
    std::cout << report.dump() << "\n";
  else
    std::cout << "episodes " << eval.episodes << ": mean final HPWL "
              << io::format_fixed(eval.mean_final_hpwl, 3) << " (std "
              << io::format_fixed(eval.std_final_hpwl, 3) << "), periphery occupancy "
              << io::format_fixed(eval.mean_periphery_occupancy, 3) << ", failures "
              << eval.failures << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// render

struct RenderArgs {
  std::string layout_path;
  std::string netlist_path;
  std::string out;
};

int cmd_render(const RenderArgs& a) {
  auto netlist = load_netlist_file(a.netlist_path);
  const Layout layout = parse_layout(io::read_file(a.layout_path));
  io::write_file(a.out, render_layout_svg(*netlist, layout));
  std::cout << "wrote " << a.out << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"expert-imitation macro placement workbench"};
  app.require_subcommand(1);

  GenDesignArgs gd;
  auto* sub_gd = app.add_subcommand("gen-design", "generate a synthetic netlist");
  sub_gd->add_option("--name", gd.synth.name, "design name");
  sub_gd->add_option("--grid", gd.synth.grid_n, "grid size N");
  sub_gd->add_option("--macros", gd.synth.macro_count, "macro count");
  sub_gd->add_option("--size-min", gd.synth.size_min, "min macro side (cells)");
  sub_gd->add_option("--size-max", gd.synth.size_max, "max macro side (cells)");
  sub_gd->add_option("--nets", gd.synth.net_count, "net count");
  sub_gd->add_option("--deg-min", gd.synth.degree_min, "min net degree");
  sub_gd->add_option("--deg-max", gd.synth.degree_max, "max net degree");
  sub_gd->add_option("--terminal-prob", gd.synth.terminal_prob, "fixed-terminal probability");
  sub_gd->add_option("--seed", gd.seed, "generator seed");
  sub_gd->add_option("-o,--out", gd.out, "output .netlist.json path")->required();
  sub_gd->add_option("--config", gd.config_path, "JSON config file");
  sub_gd->add_flag("--json", gd.json_out, "machine-readable output");

  GenExpertArgs ge;
  auto* sub_ge = app.add_subcommand("gen-expert", "synthesize expert layouts and the dataset");
  sub_ge->add_option("--netlist", ge.netlist_path, "input .netlist.json")->required();
  sub_ge->add_option("--count", ge.build.count, "number of expert layouts");
  sub_ge->add_option("--m", ge.build.m, "distractors per validation tuple");
  sub_ge->add_option("--k", ge.build.k_per_step, "preference tuples per step");
  sub_ge->add_option("--seed", ge.build.seed, "expert seed");
  sub_ge->add_option("-o,--out", ge.out_dir, "output directory");
  sub_ge->add_option("--threads", ge.threads, "worker cap");
  sub_ge->add_option("--config", ge.config_path, "JSON config file");
  sub_ge->add_flag("--json", ge.json_out, "machine-readable output");

  TrainRewardArgs tr;
  auto* sub_tr = app.add_subcommand("train-reward", "train an EIM reward model");
  sub_tr->add_option("--method", tr.method, "demo | pref")->required();
  sub_tr->add_option("--dataset", tr.dataset_path, "input .eimset.jsonl")->required();
  sub_tr->add_option("--netlist", tr.netlist_path, "input .netlist.json")->required();
  sub_tr->add_option("-o,--out", tr.out_dir, "run directory");
  sub_tr->add_option("--epochs", tr.train.epochs, "training epochs");
  sub_tr->add_option("--batch", tr.train.batch_size, "minibatch size");
  sub_tr->add_option("--lr", tr.train.lr, "learning rate");
  sub_tr->add_option("--alpha", tr.train.alpha, "reward regularizer weight");
  sub_tr->add_option("--gamma", tr.train.gamma, "discount factor");
  sub_tr->add_option("--seed", tr.train.seed, "training seed");
  sub_tr->add_option("--eval-every", tr.train.eval_every, "epochs between evaluations");
  sub_tr->add_option("--hidden", tr.train.hidden, "hidden width");
  sub_tr->add_option("--weight-decay", tr.train.weight_decay, "optimizer weight decay");
  sub_tr->add_option("--threads", tr.threads, "worker cap");
  sub_tr->add_option("--config", tr.config_path, "JSON config file");
  sub_tr->add_flag("--json", tr.json_out, "machine-readable output");

  EvalRewardArgs er;
  auto* sub_er = app.add_subcommand("eval-reward", "evaluate reward accuracy on a dataset");
  sub_er->add_option("--checkpoint", er.checkpoint_path, "reward checkpoint")->required();
  sub_er->add_option("--dataset", er.dataset_path, "validation .eimset.jsonl")->required();
  sub_er->add_option("--netlist", er.netlist_path, "matching .netlist.json")->required();
  sub_er->add_option("-o,--out", er.out, "write the report JSON here");
  sub_er->add_option("--config", er.config_path, "JSON config file");
  sub_er->add_flag("--json", er.json_out, "machine-readable output");

  TrainPolicyArgs tp;
  auto* sub_tp = app.add_subcommand("train-policy", "train a placement policy with PPO");
  sub_tp->add_option("--reward", tp.reward, "hpwl | eim_d | eim_p")->required();
  sub_tp->add_option("--reward-checkpoint", tp.reward_checkpoint, "learned reward checkpoint");
  sub_tp->add_option("--netlist", tp.netlist_path, "input .netlist.json")->required();
  sub_tp->add_option("-o,--out", tp.out_dir, "run directory");
  sub_tp->add_option("--updates", tp.ppo.total_updates, "PPO updates");
  sub_tp->add_option("--rollout-episodes", tp.ppo.rollout_episodes, "episodes per update");
  sub_tp->add_option("--epochs-per-update", tp.ppo.epochs_per_update, "passes per update");
  sub_tp->add_option("--clip", tp.ppo.clip, "clip epsilon");
  sub_tp->add_option("--gae-lambda", tp.ppo.gae_lambda, "GAE lambda");
  sub_tp->add_option("--gamma", tp.ppo.gamma, "discount factor");
  sub_tp->add_option("--entropy-coef", tp.ppo.entropy_coef, "entropy bonus weight");
  sub_tp->add_option("--value-coef", tp.ppo.value_coef, "value loss weight");
  sub_tp->add_option("--lr", tp.ppo.lr, "learning rate");
  sub_tp->add_option("--seed", tp.ppo.seed, "training seed");
  sub_tp->add_option("--hidden", tp.ppo.hidden, "hidden width");
  sub_tp->add_option("--eval-episodes", tp.eval_episodes, "final evaluation episodes");
  sub_tp->add_option("--threads", tp.ppo.threads, "worker cap");
  sub_tp->add_flag("--standardize,!--no-standardize", tp.ppo.reward_standardize,
                   "standardize learned rewards");
  sub_tp->add_option("--config", tp.config_path, "JSON config file");
  sub_tp->add_flag("--json", tp.json_out, "machine-readable output");

  EvalPolicyArgs ep;
  auto* sub_ep = app.add_subcommand("eval-policy", "roll out a trained policy");
  sub_ep->add_option("--checkpoint", ep.checkpoint_path, "policy checkpoint")->required();
  sub_ep->add_option("--netlist", ep.netlist_path, "input .netlist.json")->required();
  sub_ep->add_option("--episodes", ep.episodes, "evaluation episodes");
  sub_ep->add_option("--seed", ep.seed, "rollout seed");
  sub_ep->add_option("-o,--out", ep.out, "write the report JSON here");
  sub_ep->add_option("--threads", ep.threads, "worker cap");
  sub_ep->add_option("--config", ep.config_path, "JSON config file");
  sub_ep->add_flag("--json", ep.json_out, "machine-readable output");

  RenderArgs rd;
  auto* sub_rd = app.add_subcommand("render", "render a layout to SVG");
  sub_rd->add_option("--layout", rd.layout_path, "input .layout.json")->required();
  sub_rd->add_option("--netlist", rd.netlist_path, "matching .netlist.json")->required();
  sub_rd->add_option("-o,--out", rd.out, "output .svg path")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    std::cerr << "run with --help for usage\n";
    return 1;
  }

  try {
    if (sub_gd->parsed()) return cmd_gen_design(gd, RunConfig::load(gd.config_path), sub_gd);
    if (sub_ge->parsed()) return cmd_gen_expert(ge, RunConfig::load(ge.config_path), sub_ge);
    if (sub_tr->parsed()) return cmd_train_reward(tr, RunConfig::load(tr.config_path), sub_tr);
    if (sub_er->parsed()) return cmd_eval_reward(er, RunConfig::load(er.config_path), sub_er);
    if (sub_tp->parsed()) return cmd_train_policy(tp, RunConfig::load(tp.config_path), sub_tp);
    if (sub_ep->parsed()) return cmd_eval_policy(ep, RunConfig::load(ep.config_path), sub_ep);
    if (sub_rd->parsed()) return cmd_render(rd);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace eim::cli
