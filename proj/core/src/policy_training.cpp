#include "eimplace/policy_training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "eimplace/errors.hpp"
#include "eimplace/parallel.hpp"
#include "eimplace/rng.hpp"

namespace eim {

using nlohmann::json;

const char* to_string(RewardSource source) {
  switch (source) {
    case RewardSource::hpwl: return "hpwl";
    case RewardSource::eim_d: return "eim_d";
    case RewardSource::eim_p: return "eim_p";
  }
  return "hpwl";
}

RewardSource reward_source_from_string(const std::string& s) {
  if (s == "hpwl") return RewardSource::hpwl;
  if (s == "eim_d") return RewardSource::eim_d;
  if (s == "eim_p") return RewardSource::eim_p;
  throw ParseError("unknown reward source '" + s + "'");
}

double EpisodeRecord::reward_sum() const {
  double sum = 0.0;
  for (const StepRecord& s : steps) sum += s.reward;
  return sum;
}

void RunningStat::add(double x) {
  ++count;
  const double delta = x - mean;
  mean += delta / static_cast<double>(count);
  m2 += delta * (x - mean);
}

double RunningStat::stddev() const {
  if (count < 2) return 0.0;
  return std::sqrt(m2 / static_cast<double>(count));
}

double RunningStat::standardize(double x) {
  add(x);
  return (x - mean) / std::max(stddev(), 1e-8);
}

PolicyModel init_policy(int grid_n, int hidden, std::uint64_t seed) {
  PolicyModel p;
  p.actor = init_model(Arch{grid_n, FeatureMaps::kChannels, hidden, 0},
                       rng::derive_seed(seed, 0xac70));
  p.critic = init_model(Arch{grid_n, FeatureMaps::kChannels, hidden, 1},
                        rng::derive_seed(seed, 0xc217));
  return p;
}

namespace {

// Masked softmax + log-partition over legal cells. Returns pi (0 on illegal)
// and writes max_logit + log(sum exp) to *log_z for log-prob queries.
std::vector<double> masked_softmax(const std::vector<double>& logits,
                                   const std::vector<std::uint8_t>& legal, double* log_z) {
  double max_l = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (legal[i]) max_l = std::max(max_l, logits[i]);
  if (max_l == -std::numeric_limits<double>::infinity())
    throw NoLegalActionError("policy_distribution: no legal action");
  std::vector<double> p(logits.size(), 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!legal[i]) continue;
    p[i] = std::exp(logits[i] - max_l);
    z += p[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (legal[i]) p[i] /= z;
  if (log_z) *log_z = max_l + std::log(z);
  return p;
}

std::vector<std::uint8_t> legal_from_position(const FeatureMaps& f) {
  std::vector<std::uint8_t> legal(f.position.size());
  for (std::size_t i = 0; i < legal.size(); ++i) legal[i] = f.position[i] > 0.5 ? 1 : 0;
  return legal;
}

}  // namespace

std::vector<double> policy_distribution(const PolicyModel& p, const PlacementState& s) {
  const FeatureMaps f = s.feature_maps();
  const auto logits = forward(p.actor, f.flatten());
  return masked_softmax(logits, legal_from_position(f), nullptr);
}

std::vector<EpisodeRecord> collect_rollouts(const PolicyModel& p,
                                            const std::shared_ptr<const Netlist>& netlist,
                                            RewardSource source, const RewardModel* rm, int count,
                                            std::uint64_t seed, RunningStat* standardizer,
                                            int threads) {
  if (source != RewardSource::hpwl && rm == nullptr)
    throw ConfigError("collect_rollouts: learned reward source requires a reward model");
  if (source == RewardSource::eim_d && rm && rm->kind != RewardKind::demonstration)
    throw ConfigError("collect_rollouts: eim_d source requires a demonstration-kind model");
  if (source == RewardSource::eim_p && rm && rm->kind != RewardKind::preference)
    throw ConfigError("collect_rollouts: eim_p source requires a preference-kind model");

  std::vector<EpisodeRecord> episodes(count);
  parallel_for(static_cast<std::size_t>(count), threads, [&](std::size_t ep) {
    auto engine = rng::make_engine(rng::derive_seed(seed, 0xe9 + ep));
    EpisodeRecord rec;
    PlacementState s = reset(netlist);
    std::vector<double> hpwl_seq{s.hpwl()};
    while (!s.finished()) {
      const FeatureMaps f = s.feature_maps();
      StepRecord step;
      step.features = f.flatten();
      step.legal = legal_from_position(f);

      const auto logits = forward(p.actor, step.features);
      double log_z = 0.0;
      std::vector<double> pi;
      try {
        pi = masked_softmax(logits, step.legal, &log_z);
      } catch (const NoLegalActionError&) {
        rec.failed = true;
        break;
      }
      const double u = rng::uniform_real(engine);
      double acc = 0.0;
      int cell = -1;
      for (std::size_t i = 0; i < pi.size(); ++i) {
        if (!step.legal[i]) continue;
        acc += pi[i];
        if (u < acc) {
          cell = static_cast<int>(i);
          break;
        }
      }
      if (cell < 0) {  // numerical tail: fall back to the last legal cell
        for (int i = static_cast<int>(pi.size()) - 1; i >= 0; --i)
          if (step.legal[i]) {
            cell = i;
            break;
          }
      }
      step.action = Action{cell};
      step.log_prob = logits[cell] - log_z;
      step.value = forward(p.critic, step.features)[0];
      step.done = s.apply(step.action);
      hpwl_seq.push_back(s.hpwl());
      rec.steps.push_back(std::move(step));
    }
    if (!rec.failed) {
      // Rewards are filled after the roll: they do not influence sampling.
      for (std::size_t t = 0; t < rec.steps.size(); ++t) {
        StepRecord& step = rec.steps[t];
        switch (source) {
          case RewardSource::hpwl:
            step.reward = -(hpwl_seq[t + 1] - hpwl_seq[t]);
            break;
          case RewardSource::eim_p:
            step.reward = forward(rm->model, step.features)[step.action.cell];
            break;
          case RewardSource::eim_d: {
            const double q_sa = forward(rm->model, step.features)[step.action.cell];
            double v_next = 0.0;
            if (!step.done) {
              const auto& nf = rec.steps[t + 1].features;
              const auto q_next = forward(rm->model, nf);
              v_next = soft_value(q_next, rec.steps[t + 1].legal);
            }
            step.reward = q_sa - rm->gamma * v_next;
            break;
          }
        }
      }
      rec.final_hpwl = s.hpwl();
      rec.periphery_occupancy = boundary_macro_fraction(s);
    }
    episodes[ep] = std::move(rec);
  });

  if (standardizer && source != RewardSource::hpwl) {
    for (EpisodeRecord& rec : episodes) {
      if (rec.failed) continue;
      for (StepRecord& step : rec.steps) step.reward = standardizer->standardize(step.reward);
    }
  }
  return episodes;
}

GaeResult gae_advantages(const EpisodeRecord& ep, double gamma, double lambda) {
  const std::size_t n = ep.steps.size();
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_adv = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const StepRecord& s = ep.steps[i];
    const double nonterminal = s.done ? 0.0 : 1.0;
    const double next_value = (i + 1 < n) ? ep.steps[i + 1].value : 0.0;
    const double delta = s.reward + gamma * next_value * nonterminal - s.value;
    next_adv = delta + gamma * lambda * nonterminal * next_adv;
    out.advantages[i] = next_adv;
    out.returns[i] = next_adv + s.value;
  }
  return out;
}

PPOBatch make_ppo_batch(const std::vector<EpisodeRecord>& episodes, double gamma, double lambda) {
  PPOBatch batch;
  for (const EpisodeRecord& ep : episodes) {
    if (ep.failed) continue;
    const GaeResult gae = gae_advantages(ep, gamma, lambda);
    for (std::size_t i = 0; i < ep.steps.size(); ++i) {
      batch.steps.push_back(&ep.steps[i]);
      batch.advantages.push_back(gae.advantages[i]);
      batch.returns.push_back(gae.returns[i]);
    }
  }
  return batch;
}

double ppo_composite_loss(const PolicyModel& p, const PPOBatch& batch,
                          const std::vector<double>& advantages, const PPOConfig& cfg,
                          std::vector<double>* actor_grad, std::vector<double>* critic_grad) {
  const std::size_t n = batch.steps.size();
  if (n == 0) throw ValidationError("ppo loss: empty batch");
  const int out_dim = p.actor.arch.output_dim();
  const std::size_t in_dim = batch.steps[0]->features.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<double> x(in_dim * n);
  for (std::size_t i = 0; i < n; ++i)
    std::copy(batch.steps[i]->features.begin(), batch.steps[i]->features.end(),
              x.begin() + i * in_dim);
  const auto logits = forward_batch(p.actor, x, static_cast<int>(n));
  const auto values = forward_batch(p.critic, x, static_cast<int>(n));

  double surrogate = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  std::vector<double> ga, gc;
  if (actor_grad) ga.assign(logits.size(), 0.0);
  if (critic_grad) gc.assign(values.size(), 0.0);

  for (std::size_t i = 0; i < n; ++i) {
    const StepRecord& step = *batch.steps[i];
    std::vector<double> col(logits.begin() + i * out_dim, logits.begin() + (i + 1) * out_dim);
    double log_z = 0.0;
    const auto pi = masked_softmax(col, step.legal, &log_z);
    const double lp = col[step.action.cell] - log_z;
    const double ratio = std::exp(lp - step.log_prob);
    const double adv = advantages[i];
    const double unclipped = ratio * adv;
    const double clipped = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * adv;
    surrogate += -std::min(unclipped, clipped) * inv_n;

    double h = 0.0;
    for (std::size_t b = 0; b < pi.size(); ++b)
      if (pi[b] > 0.0) h -= pi[b] * std::log(pi[b]);
    entropy += h * inv_n;

    const double v = values[i];
    const double vdiff = v - batch.returns[i];
    value_loss += vdiff * vdiff * inv_n;

    if (actor_grad) {
      // Policy gradient flows only through the unclipped branch.
      const double dsurr_dlp = (unclipped <= clipped) ? -adv * ratio * inv_n : 0.0;
      double* gcol = ga.data() + i * out_dim;
      for (int b = 0; b < out_dim; ++b) {
        if (!step.legal[b]) continue;
        const double dlp = (b == step.action.cell ? 1.0 : 0.0) - pi[b];
        gcol[b] += dsurr_dlp * dlp;
        // - entropy_coef * H contributes entropy_coef * pi (log pi + H).
        if (pi[b] > 0.0)
          gcol[b] += cfg.entropy_coef * inv_n * pi[b] * (std::log(pi[b]) + h);
      }
    }
    if (critic_grad) gc[i] = 2.0 * cfg.value_coef * vdiff * inv_n;
  }

  if (actor_grad) backward_batch_accumulate(p.actor, x, static_cast<int>(n), ga, *actor_grad);
  if (critic_grad) backward_batch_accumulate(p.critic, x, static_cast<int>(n), gc, *critic_grad);
  return surrogate + cfg.value_coef * value_loss - cfg.entropy_coef * entropy;
}

PPOStats ppo_update(PolicyModel& p, OptimizerState& actor_opt, OptimizerState& critic_opt,
                    const PPOBatch& batch, const PPOConfig& cfg) {
  const std::size_t n = batch.steps.size();
  if (n == 0) throw ValidationError("ppo_update: empty batch");

  // Normalize advantages over the batch.
  double mean = 0.0;
  for (double a : batch.advantages) mean += a;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double a : batch.advantages) var += (a - mean) * (a - mean);
  var /= static_cast<double>(n);
  const double stddev = std::max(std::sqrt(var), 1e-8);
  std::vector<double> adv(n);
  for (std::size_t i = 0; i < n; ++i) adv[i] = (batch.advantages[i] - mean) / stddev;

  // Stale-batch check: stored log-probs must replay under current params.
  {
    const std::size_t in_dim = batch.steps[0]->features.size();
    std::vector<double> x(in_dim * n);
    for (std::size_t i = 0; i < n; ++i)
      std::copy(batch.steps[i]->features.begin(), batch.steps[i]->features.end(),
                x.begin() + i * in_dim);
    const auto logits = forward_batch(p.actor, x, static_cast<int>(n));
    const int out_dim = p.actor.arch.output_dim();
    for (std::size_t i = 0; i < n; ++i) {
      const StepRecord& step = *batch.steps[i];
      std::vector<double> col(logits.begin() + i * out_dim, logits.begin() + (i + 1) * out_dim);
      double log_z = 0.0;
      masked_softmax(col, step.legal, &log_z);
      const double lp = col[step.action.cell] - log_z;
      if (std::abs(lp - step.log_prob) > 1e-6)
        throw ValidationError("ppo_update: stale batch, log-prob mismatch " +
                              std::to_string(std::abs(lp - step.log_prob)) + " at sample " +
                              std::to_string(i));
    }
  }

  PPOStats stats;
  std::vector<double> actor_grad(p.actor.params.size());
  std::vector<double> critic_grad(p.critic.params.size());
  for (int epoch = 0; epoch < cfg.epochs_per_update; ++epoch) {
    std::fill(actor_grad.begin(), actor_grad.end(), 0.0);
    std::fill(critic_grad.begin(), critic_grad.end(), 0.0);
    stats.loss = ppo_composite_loss(p, batch, adv, cfg, &actor_grad, &critic_grad);
    adam_step(actor_opt, p.actor, actor_grad);
    adam_step(critic_opt, p.critic, critic_grad);
  }

  // Diagnostics under the post-update policy.
  {
    const std::size_t in_dim = batch.steps[0]->features.size();
    std::vector<double> x(in_dim * n);
    for (std::size_t i = 0; i < n; ++i)
      std::copy(batch.steps[i]->features.begin(), batch.steps[i]->features.end(),
                x.begin() + i * in_dim);
    const auto logits = forward_batch(p.actor, x, static_cast<int>(n));
    const int out_dim = p.actor.arch.output_dim();
    double kl = 0.0;
    double ent = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const StepRecord& step = *batch.steps[i];
      std::vector<double> col(logits.begin() + i * out_dim, logits.begin() + (i + 1) * out_dim);
      double log_z = 0.0;
      const auto pi = masked_softmax(col, step.legal, &log_z);
      const double lp = col[step.action.cell] - log_z;
      const double log_ratio = lp - step.log_prob;
      kl += (std::exp(log_ratio) - 1.0) - log_ratio;
      for (std::size_t b = 0; b < pi.size(); ++b)
        if (pi[b] > 0.0) ent -= pi[b] * std::log(pi[b]);
    }
    stats.approx_kl = kl / static_cast<double>(n);
    stats.entropy = ent / static_cast<double>(n);
  }
  return stats;
}

double boundary_macro_fraction(const PlacementState& s) {
  const int n = s.grid_n();
  int placed = 0;
  int touching = 0;
  for (int id = 0; id < s.macro_count(); ++id) {
    if (!s.is_placed(id)) continue;
    ++placed;
    const auto [x, y] = s.placement_of(id);
    const Macro& m = s.netlist().macros[id];
    if (x == 0 || y == 0 || x + m.width_cells == n || y + m.height_cells == n) ++touching;
  }
  if (placed == 0) return 0.0;
  return static_cast<double>(touching) / static_cast<double>(placed);
}

double boundary_macro_fraction(const Netlist& n, const Layout& layout) {
  if (layout.placements.empty()) return 0.0;
  int touching = 0;
  for (const auto& p : layout.placements) {
    const Macro& m = n.macros.at(p.macro_id);
    if (p.x == 0 || p.y == 0 || p.x + m.width_cells == n.grid_n ||
        p.y + m.height_cells == n.grid_n)
      ++touching;
  }
  return static_cast<double>(touching) / static_cast<double>(layout.placements.size());
}

EvalReport evaluate_policy(const PolicyModel& p, const std::shared_ptr<const Netlist>& netlist,
                           int episodes, std::uint64_t seed, int threads) {
  const auto rollouts =
      collect_rollouts(p, netlist, RewardSource::hpwl, nullptr, episodes, seed, nullptr, threads);
  EvalReport report;
  report.episodes = episodes;
  double sum = 0.0;
  double sum_sq = 0.0;
  double boundary = 0.0;
  int ok = 0;
  for (const EpisodeRecord& ep : rollouts) {
    if (ep.failed) {
      ++report.failures;
      continue;
    }
    ++ok;
    sum += ep.final_hpwl;
    sum_sq += ep.final_hpwl * ep.final_hpwl;
    boundary += ep.periphery_occupancy;
    report.reward_sums.push_back(ep.reward_sum());
  }
  if (ok > 0) {
    report.mean_final_hpwl = sum / ok;
    const double var = std::max(0.0, sum_sq / ok - report.mean_final_hpwl * report.mean_final_hpwl);
    report.std_final_hpwl = std::sqrt(var);
    report.mean_periphery_occupancy = boundary / ok;
  }
  return report;
}

PolicyTrainResult train_policy(const std::shared_ptr<const Netlist>& netlist, const PPOConfig& cfg,
                               const RewardModel* rm) {
  if (cfg.clip <= 0.0 || cfg.clip >= 1.0) throw ConfigError("ppo clip must lie in (0, 1)");
  if (cfg.total_updates < 1 || cfg.rollout_episodes < 1 || cfg.epochs_per_update < 1)
    throw ConfigError("ppo counts must be positive");
  if (cfg.reward_source != RewardSource::hpwl && rm == nullptr)
    throw ConfigError("train_policy: learned reward source requires a reward model");

  PolicyTrainResult result;
  result.policy = init_policy(netlist->grid_n, cfg.hidden, cfg.seed);
  OptimizerState actor_opt = init_optimizer(result.policy.actor, {cfg.lr});
  OptimizerState critic_opt = init_optimizer(result.policy.critic, {cfg.lr});
  RunningStat stat;
  RunningStat* standardizer =
      (cfg.reward_standardize && cfg.reward_source != RewardSource::hpwl) ? &stat : nullptr;

  for (int update = 1; update <= cfg.total_updates; ++update) {
    const auto start = std::chrono::steady_clock::now();
    const auto episodes =
        collect_rollouts(result.policy, netlist, cfg.reward_source, rm, cfg.rollout_episodes,
                         rng::derive_seed(cfg.seed, 0x6000 + static_cast<std::uint64_t>(update)),
                         standardizer, cfg.threads);
    PPOBatch batch = make_ppo_batch(episodes, cfg.gamma, cfg.gae_lambda);

    PolicyUpdateMetrics row;
    row.update = update;
    double reward_sum = 0.0;
    double hpwl_sum = 0.0;
    double boundary = 0.0;
    int ok = 0;
    for (const EpisodeRecord& ep : episodes) {
      if (ep.failed) {
        ++row.failures;
        continue;
      }
      ++ok;
      reward_sum += ep.reward_sum();
      hpwl_sum += ep.final_hpwl;
      boundary += ep.periphery_occupancy;
    }
    if (ok > 0) {
      row.mean_reward_sum = reward_sum / ok;
      row.mean_final_hpwl = hpwl_sum / ok;
      row.mean_periphery_occupancy = boundary / ok;
    }
    if (!batch.steps.empty()) {
      const PPOStats stats = ppo_update(result.policy, actor_opt, critic_opt, batch, cfg);
      row.loss = stats.loss;
      row.approx_kl = stats.approx_kl;
      row.entropy = stats.entropy;
    }
    row.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(row);
  }
  return result;
}

std::string save_policy(const PolicyModel& p) {
  json doc;
  doc["actor"] = json::parse(save_model(p.actor));
  doc["critic"] = json::parse(save_model(p.critic));
  return doc.dump(2) + "\n";
}

PolicyModel load_policy(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("policy checkpoint: ") + e.what());
  }
  PolicyModel p;
  p.actor = load_model(doc.at("actor").dump());
  p.critic = load_model(doc.at("critic").dump());
  return p;
}

}  // namespace eim
