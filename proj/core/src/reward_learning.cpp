#include "eimplace/reward_learning.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "eimplace/errors.hpp"
#include "eimplace/rng.hpp"

namespace eim {

using nlohmann::json;

const char* to_string(RewardKind kind) {
  return kind == RewardKind::demonstration ? "demonstration" : "preference";
}

RewardKind reward_kind_from_string(const std::string& s) {
  if (s == "demonstration") return RewardKind::demonstration;
  if (s == "preference") return RewardKind::preference;
  throw ParseError("unknown reward kind '" + s + "'");
}

double soft_value(std::span<const double> q, std::span<const std::uint8_t> legal) {
  double max_q = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < q.size(); ++i)
    if (legal[i]) max_q = std::max(max_q, q[i]);
  if (max_q == -std::numeric_limits<double>::infinity())
    throw NoLegalActionError("soft_value: no legal action in a non-terminal state");
  double sum = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i)
    if (legal[i]) sum += std::exp(q[i] - max_q);
  return max_q + std::log(sum);
}

std::vector<double> policy_from_q(std::span<const double> q, std::span<const std::uint8_t> legal) {
  double max_q = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < q.size(); ++i)
    if (legal[i]) max_q = std::max(max_q, q[i]);
  if (max_q == -std::numeric_limits<double>::infinity())
    throw NoLegalActionError("policy_from_q: no legal action");
  std::vector<double> p(q.size(), 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (!legal[i]) continue;
    p[i] = std::exp(q[i] - max_q);
    z += p[i];
  }
  for (std::size_t i = 0; i < q.size(); ++i)
    if (legal[i]) p[i] /= z;
  return p;
}

double extract_reward(const RewardModel& rm, const PlacementState& s, Action a,
                      const PlacementState& s_next) {
  if (rm.kind != RewardKind::demonstration)
    throw ValidationError("extract_reward applies to demonstration-kind models");
  auto [expected, done] = s.step(a);
  if (!(expected == s_next))
    throw TransitionMismatchError("extract_reward: s' is not step(s, a) for cell " +
                                  std::to_string(a.cell));
  const double q_sa = forward(rm.model, s.feature_maps())[a.cell];
  if (done) return q_sa;  // terminal V* = 0
  const auto q_next = forward(rm.model, s_next.feature_maps());
  const auto legal_next = s_next.position_mask();
  return q_sa - rm.gamma * soft_value(q_next, legal_next);
}

FeatureCache::FeatureCache(std::shared_ptr<const Netlist> netlist,
                           const std::vector<Trajectory>* trajectories)
    : netlist_(std::move(netlist)), trajectories_(trajectories) {
  cache_.resize(trajectories_->size());
}

void FeatureCache::build(int traj) {
  TrajCache& tc = cache_.at(traj);
  if (tc.built) return;
  const Trajectory& t = (*trajectories_)[traj];
  PlacementState s = reset(netlist_);
  tc.states.reserve(t.actions.size() + 1);
  tc.features.reserve(t.actions.size());
  tc.legal.reserve(t.actions.size());
  tc.states.push_back(s);
  for (Action a : t.actions) {
    tc.features.push_back(tc.states.back().feature_maps().flatten());
    tc.legal.push_back(tc.states.back().position_mask());
    s = tc.states.back();
    s.apply(a);
    tc.states.push_back(s);
  }
  tc.built = true;
}

const PlacementState& FeatureCache::state(int traj, int step) {
  build(traj);
  return cache_[traj].states.at(step);
}

const std::vector<double>& FeatureCache::features(int traj, int step) {
  build(traj);
  return cache_[traj].features.at(step);
}

const std::vector<std::uint8_t>& FeatureCache::legal(int traj, int step) {
  build(traj);
  return cache_[traj].legal.at(step);
}

int FeatureCache::traj_length(int traj) const {
  return (*trajectories_)[traj].length();
}

const FeatureCache::AfterState& FeatureCache::after(int traj, int step, int cell) {
  const std::uint64_t key = (static_cast<std::uint64_t>(traj) << 40) |
                            (static_cast<std::uint64_t>(step) << 20) |
                            static_cast<std::uint64_t>(cell);
  auto it = after_.find(key);
  if (it != after_.end()) return it->second;
  auto [next, done] = state(traj, step).step(Action{cell});
  AfterState as;
  as.terminal = done;
  if (!done) {
    as.features = next.feature_maps().flatten();
    as.legal = next.position_mask();
  }
  return after_.emplace(key, std::move(as)).first->second;
}

namespace {

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

// Gathers pointers to feature vectors into a column-major batch matrix.
std::vector<double> gather(const std::vector<const std::vector<double>*>& feats) {
  if (feats.empty()) return {};
  const std::size_t dim = feats[0]->size();
  std::vector<double> x(dim * feats.size());
  for (std::size_t i = 0; i < feats.size(); ++i)
    std::copy(feats[i]->begin(), feats[i]->end(), x.begin() + i * dim);
  return x;
}

}  // namespace

double iq_objective(const RewardModel& rm, std::span<const TransitionSample> batch,
                    std::span<const StateSample> initial_states, std::vector<double>* grad) {
  if (batch.empty()) throw ValidationError("iq_objective: empty batch");
  if (initial_states.empty()) throw ValidationError("iq_objective: no initial states");
  const int out_dim = rm.model.arch.output_dim();
  const double gamma = rm.gamma;
  const double alpha = rm.alpha;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const double inv_k = 1.0 / static_cast<double>(initial_states.size());

  // Batched forwards: states, non-terminal next states, initial states.
  std::vector<const std::vector<double>*> feats_s, feats_next, feats_init;
  feats_s.reserve(batch.size());
  std::vector<int> next_col(batch.size(), -1);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    feats_s.push_back(batch[i].feat_s);
    if (batch[i].feat_next) {
      next_col[i] = static_cast<int>(feats_next.size());
      feats_next.push_back(batch[i].feat_next);
    }
  }
  for (const StateSample& s : initial_states) feats_init.push_back(s.feat);

  const auto xs = gather(feats_s);
  const auto xn = gather(feats_next);
  const auto xi = gather(feats_init);
  const auto qs = forward_batch(rm.model, xs, static_cast<int>(feats_s.size()));
  const auto qn = feats_next.empty()
                      ? std::vector<double>{}
                      : forward_batch(rm.model, xn, static_cast<int>(feats_next.size()));
  const auto qi = forward_batch(rm.model, xi, static_cast<int>(feats_init.size()));

  double reward_term = 0.0;
  std::vector<double> r(batch.size());
  std::vector<std::vector<double>> pi_next(feats_next.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double q_sa = qs[i * out_dim + batch[i].action];
    double v_next = 0.0;
    if (next_col[i] >= 0) {
      std::span<const double> q_col(qn.data() + static_cast<std::size_t>(next_col[i]) * out_dim,
                                    out_dim);
      v_next = soft_value(q_col, *batch[i].legal_next);
      if (grad) pi_next[next_col[i]] = policy_from_q(q_col, *batch[i].legal_next);
    }
    r[i] = q_sa - gamma * v_next;
    reward_term += r[i] - alpha * r[i] * r[i];
  }
  reward_term *= inv_b;

  double init_term = 0.0;
  std::vector<std::vector<double>> pi_init(initial_states.size());
  for (std::size_t k = 0; k < initial_states.size(); ++k) {
    std::span<const double> q_col(qi.data() + k * out_dim, out_dim);
    init_term += soft_value(q_col, *initial_states[k].legal);
    if (grad) pi_init[k] = policy_from_q(q_col, *initial_states[k].legal);
  }
  init_term *= inv_k;

  const double loss = -(reward_term - (1.0 - gamma) * init_term);

  if (grad) {
    // dL/dQ(s_i, a_i) = -(1 - 2 alpha r_i)/B; the next-state and initial
    // soft values route through the legal softmax.
    std::vector<double> gs(qs.size(), 0.0);
    std::vector<double> gn(qn.size(), 0.0);
    std::vector<double> gi(qi.size(), 0.0);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const double coef = (1.0 - 2.0 * alpha * r[i]) * inv_b;
      gs[i * out_dim + batch[i].action] += -coef;
      if (next_col[i] >= 0) {
        const auto& pi = pi_next[next_col[i]];
        double* col = gn.data() + static_cast<std::size_t>(next_col[i]) * out_dim;
        for (int b = 0; b < out_dim; ++b) col[b] += gamma * coef * pi[b];
      }
    }
    for (std::size_t k = 0; k < initial_states.size(); ++k) {
      const double coef = (1.0 - gamma) * inv_k;
      const auto& pi = pi_init[k];
      double* col = gi.data() + k * out_dim;
      for (int b = 0; b < out_dim; ++b) col[b] += coef * pi[b];
    }
    backward_batch_accumulate(rm.model, xs, static_cast<int>(feats_s.size()), gs, *grad);
    if (!feats_next.empty())
      backward_batch_accumulate(rm.model, xn, static_cast<int>(feats_next.size()), gn, *grad);
    backward_batch_accumulate(rm.model, xi, static_cast<int>(feats_init.size()), gi, *grad);
  }
  return loss;
}

double pref_loss(const RewardModel& rm, std::span<const PreferenceSample> batch, double alpha,
                 std::vector<double>* grad) {
  if (batch.empty()) throw ValidationError("pref_loss: empty batch");
  const int out_dim = rm.model.arch.output_dim();
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  std::vector<const std::vector<double>*> feats;
  feats.reserve(batch.size());
  for (const PreferenceSample& s : batch) feats.push_back(s.feat_s);
  const auto x = gather(feats);
  const auto q = forward_batch(rm.model, x, static_cast<int>(batch.size()));

  double loss = 0.0;
  std::vector<double> g;
  if (grad) g.assign(q.size(), 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double r_c = q[i * out_dim + batch[i].chosen];
    const double r_r = q[i * out_dim + batch[i].rejected];
    const double z = r_c - r_r;
    loss += softplus(-z) * inv_b;
    loss += alpha * (r_c * r_c + r_r * r_r) * inv_b;
    if (grad) {
      const double sig = stable_sigmoid(z);
      g[i * out_dim + batch[i].chosen] += ((sig - 1.0) + 2.0 * alpha * r_c) * inv_b;
      g[i * out_dim + batch[i].rejected] += ((1.0 - sig) + 2.0 * alpha * r_r) * inv_b;
    }
  }
  if (grad) backward_batch_accumulate(rm.model, x, static_cast<int>(batch.size()), g, *grad);
  return loss;
}

double reward_accuracy(const RewardModel& rm, const std::vector<ValidationTuple>& validation,
                       FeatureCache& cache) {
  if (validation.empty()) throw ValidationError("reward_accuracy: empty validation set");
  const int out_dim = rm.model.arch.output_dim();

  // Scores of the tuple's own state give Q(s, a) for every candidate.
  std::vector<const std::vector<double>*> feats;
  feats.reserve(validation.size());
  for (const ValidationTuple& vt : validation) feats.push_back(&cache.features(vt.traj_id, vt.step));
  const auto xs = gather(feats);
  const auto qs = forward_batch(rm.model, xs, static_cast<int>(validation.size()));

  // Demonstration kind additionally needs V* of each candidate's next state.
  std::vector<double> v_next;  // per (tuple, candidate), laid out tuple-major
  std::vector<int> v_offset(validation.size() + 1, 0);
  if (rm.kind == RewardKind::demonstration) {
    std::vector<const std::vector<double>*> after_feats;
    std::vector<const std::vector<std::uint8_t>*> after_legal;
    std::vector<int> flat_index;  // -1 = terminal next state
    for (std::size_t i = 0; i < validation.size(); ++i) {
      const ValidationTuple& vt = validation[i];
      auto add = [&](Action a) {
        const auto& as = cache.after(vt.traj_id, vt.step, a.cell);
        if (as.terminal) {
          flat_index.push_back(-1);
        } else {
          flat_index.push_back(static_cast<int>(after_feats.size()));
          after_feats.push_back(&as.features);
          after_legal.push_back(&as.legal);
        }
      };
      add(vt.expert_action);
      for (Action a : vt.distractors) add(a);
      v_offset[i + 1] = static_cast<int>(flat_index.size());
    }
    const auto xa = gather(after_feats);
    const auto qa = after_feats.empty()
                        ? std::vector<double>{}
                        : forward_batch(rm.model, xa, static_cast<int>(after_feats.size()));
    v_next.resize(flat_index.size(), 0.0);
    for (std::size_t j = 0; j < flat_index.size(); ++j) {
      if (flat_index[j] < 0) continue;
      std::span<const double> q_col(qa.data() + static_cast<std::size_t>(flat_index[j]) * out_dim,
                                    out_dim);
      v_next[j] = soft_value(q_col, *after_legal[flat_index[j]]);
    }
  }

  int correct = 0;
  for (std::size_t i = 0; i < validation.size(); ++i) {
    const ValidationTuple& vt = validation[i];
    const double* q_col = qs.data() + i * out_dim;
    auto score = [&](Action a, int candidate) {
      double v = 0.0;
      if (rm.kind == RewardKind::demonstration) v = v_next[v_offset[i] + candidate];
      return q_col[a.cell] - (rm.kind == RewardKind::demonstration ? rm.gamma * v : 0.0);
    };
    const double expert_score = score(vt.expert_action, 0);
    // Strictly greater than every distractor; vacuously true when the step
    // had a single legal action.
    bool strict_max = true;
    for (std::size_t d = 0; d < vt.distractors.size() && strict_max; ++d)
      strict_max = expert_score > score(vt.distractors[d], static_cast<int>(d) + 1);
    if (strict_max) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(validation.size());
}

namespace {

struct EpochTimer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

template <class MakeBatchLoss>
RewardTrainResult run_training(RewardModel rm, std::size_t sample_count,
                               const ExpertDataset& ds, FeatureCache& cache,
                               const TrainConfig& cfg, MakeBatchLoss&& batch_loss) {
  if (sample_count == 0) throw ValidationError("training dataset is empty");
  if (ds.validation.empty()) throw ValidationError("dataset has no validation tuples");

  AdamHyper hyper;
  hyper.lr = cfg.lr;
  hyper.weight_decay = cfg.weight_decay;
  OptimizerState opt = init_optimizer(rm.model, hyper);
  auto shuffle_engine = rng::make_engine(rng::derive_seed(cfg.seed, 0x7e57));

  RewardTrainResult result;
  result.model = rm;
  result.best_accuracy = -1.0;
  result.best_epoch = 0;

  std::vector<std::size_t> indices(sample_count);
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  std::vector<double> grad(rm.model.params.size());

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochTimer timer;
    rng::shuffle(indices, shuffle_engine);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < sample_count; start += cfg.batch_size) {
      const std::size_t stop = std::min(sample_count, start + cfg.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      const double loss =
          batch_loss(rm, std::span<const std::size_t>(indices.data() + start, stop - start), &grad);
      adam_step(opt, rm.model, grad);
      loss_sum += loss * static_cast<double>(stop - start);
    }
    MetricsRow row;
    row.epoch = epoch;
    row.loss = loss_sum / static_cast<double>(sample_count);
    if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
      const double acc = reward_accuracy(rm, ds.validation, cache);
      row.val_accuracy = acc;
      if (acc > result.best_accuracy) {
        result.best_accuracy = acc;
        result.best_epoch = epoch;
        result.model = rm;
      }
    }
    row.wall_ms = timer.elapsed_ms();
    result.log.push_back(row);
  }
  if (result.best_epoch == 0) {  // no eval ran; fall back to the final model
    result.model = rm;
    result.best_accuracy = reward_accuracy(rm, ds.validation, cache);
    result.best_epoch = cfg.epochs;
  }
  return result;
}

}  // namespace

RewardTrainResult train_eim_d(const ExpertDataset& ds, std::shared_ptr<const Netlist> netlist,
                              const TrainConfig& cfg) {
  FeatureCache cache(netlist, &ds.trajectories);

  struct Ref {
    int traj;
    int step;
  };
  std::vector<Ref> transitions;
  for (int id : ds.train_ids())
    for (int t = 0; t < ds.trajectories[id].length(); ++t) transitions.push_back({id, t});
  if (transitions.empty()) throw ValidationError("train_eim_d: dataset has no trajectories");

  // Materialize cache entries and sample views up front.
  std::vector<TransitionSample> samples(transitions.size());
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    const auto [traj, t] = transitions[i];
    TransitionSample s;
    s.feat_s = &cache.features(traj, t);
    s.action = ds.trajectories[traj].actions[t].cell;
    if (t + 1 < cache.traj_length(traj)) {
      s.feat_next = &cache.features(traj, t + 1);
      s.legal_next = &cache.legal(traj, t + 1);
    }
    samples[i] = s;
  }
  const int first_traj = ds.train_ids().front();
  const StateSample init{&cache.features(first_traj, 0), &cache.legal(first_traj, 0)};

  RewardModel rm;
  rm.kind = RewardKind::demonstration;
  rm.gamma = cfg.gamma;
  rm.alpha = cfg.alpha;
  rm.model = init_model(Arch{ds.grid_n, FeatureMaps::kChannels, cfg.hidden, 0}, cfg.seed);

  auto batch_loss = [&](const RewardModel& model, std::span<const std::size_t> idx,
                        std::vector<double>* grad) {
    std::vector<TransitionSample> batch(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) batch[i] = samples[idx[i]];
    return iq_objective(model, batch, std::span<const StateSample>(&init, 1), grad);
  };
  return run_training(std::move(rm), samples.size(), ds, cache, cfg, batch_loss);
}

RewardTrainResult train_eim_p(const ExpertDataset& ds, std::shared_ptr<const Netlist> netlist,
                              const TrainConfig& cfg) {
  FeatureCache cache(netlist, &ds.trajectories);
  if (ds.preferences.empty()) throw ValidationError("train_eim_p: dataset has no preference tuples");

  std::vector<PreferenceSample> samples(ds.preferences.size());
  for (std::size_t i = 0; i < ds.preferences.size(); ++i) {
    const PreferenceTuple& p = ds.preferences[i];
    samples[i] = {&cache.features(p.traj_id, p.step), p.chosen.cell, p.rejected.cell};
  }

  RewardModel rm;
  rm.kind = RewardKind::preference;
  rm.gamma = cfg.gamma;
  rm.alpha = cfg.alpha;
  rm.model = init_model(Arch{ds.grid_n, FeatureMaps::kChannels, cfg.hidden, 0}, cfg.seed);

  auto batch_loss = [&](const RewardModel& model, std::span<const std::size_t> idx,
                        std::vector<double>* grad) {
    std::vector<PreferenceSample> batch(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) batch[i] = samples[idx[i]];
    return pref_loss(model, batch, cfg.alpha, grad);
  };
  return run_training(std::move(rm), samples.size(), ds, cache, cfg, batch_loss);
}

std::string save_reward_model(const RewardModel& rm) {
  json doc = json::parse(save_model(rm.model));
  doc["kind"] = to_string(rm.kind);
  doc["gamma"] = rm.gamma;
  doc["alpha"] = rm.alpha;
  return doc.dump(2) + "\n";
}

RewardModel load_reward_model(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("reward checkpoint: ") + e.what());
  }
  RewardModel rm;
  rm.model = load_model(text);
  rm.kind = reward_kind_from_string(doc.at("kind").get<std::string>());
  rm.gamma = doc.at("gamma").get<double>();
  rm.alpha = doc.at("alpha").get<double>();
  return rm;
}

}  // namespace eim
