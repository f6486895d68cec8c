#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "eimplace/placement_env.hpp"

namespace eim {

// Two-layer dense map over flattened feature channels:
//   out = W2 * tanh(W1 * x + b1) + b2.
// out_dim is N^2 for Q/reward/policy-logit maps and 1 for the critic head.
struct Arch {
  int grid_n = 16;
  int channels = FeatureMaps::kChannels;
  int hidden = 256;
  int out_dim = 0;  // 0 = default to grid_n^2

  int input_dim() const { return channels * grid_n * grid_n; }
  int output_dim() const { return out_dim > 0 ? out_dim : grid_n * grid_n; }
  std::int64_t param_count() const {
    const std::int64_t in = input_dim();
    const std::int64_t out = output_dim();
    return static_cast<std::int64_t>(hidden) * in + hidden + out * hidden + out;
  }
  friend bool operator==(const Arch&, const Arch&) = default;
};

// Parameter layout (flat, in order): W1 row-major (hidden x input), b1,
// W2 row-major (out x hidden), b2.
struct QMapModel {
  Arch arch;
  std::vector<double> params;
  std::uint64_t init_seed = 0;

  friend bool operator==(const QMapModel&, const QMapModel&) = default;
};

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled (AdamW-style), applied to weights and biases
};

struct OptimizerState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t step_count = 0;
  AdamHyper hyper;
};

// Glorot-uniform weights, zero biases; deterministic per seed.
QMapModel init_model(const Arch& arch, std::uint64_t seed);

OptimizerState init_optimizer(const QMapModel& model, const AdamHyper& hyper = {});

// out = W2 * tanh(W1 * input + b1) + b2. `input` must have arch.input_dim()
// entries. Throws ValidationError on shape mismatch.
std::vector<double> forward(const QMapModel& model, const std::vector<double>& input);
std::vector<double> forward(const QMapModel& model, const FeatureMaps& features);

// Gradient of out_grad . output with respect to every parameter.
std::vector<double> backward(const QMapModel& model, const std::vector<double>& input,
                             const std::vector<double>& out_grad);

// Accumulating form used by the trainers: adds the gradient contribution
// into `accum` (sized param_count) without allocating.
void backward_accumulate(const QMapModel& model, const double* input, const double* out_grad,
                         std::vector<double>& accum);

// Batched forward: `inputs` holds `batch` concatenated input vectors
// (column-major, input_dim x batch); returns out_dim x batch, column-major.
// Matches per-sample forward() to floating-point reassociation tolerance.
std::vector<double> forward_batch(const QMapModel& model, const std::vector<double>& inputs,
                                  int batch);

// Batched counterpart of backward_accumulate: adds the gradient of
// sum_i out_grads[:,i] . output(inputs[:,i]) into `accum`.
void backward_batch_accumulate(const QMapModel& model, const std::vector<double>& inputs,
                               int batch, const std::vector<double>& out_grads,
                               std::vector<double>& accum);

// Standard bias-corrected adaptive-moment update, in place.
void adam_step(OptimizerState& opt, QMapModel& model, const std::vector<double>& grad);

// Central-difference gradient audit: compares `analytic_grad` against
// (loss(p+h) - loss(p-h)) / 2h on `probes` randomly sampled parameter
// coordinates; returns the max relative error with denominator
// max(|analytic|, |numeric|, 1e-8). `loss` must be a pure function of the
// model parameters.
double finite_diff_check(QMapModel model, const std::function<double(const QMapModel&)>& loss,
                         const std::vector<double>& analytic_grad, int probes, std::uint64_t seed,
                         double h = 1e-5);

// Checkpoint `.qmap.json`: {"arch": {...}, "params": base64 little-endian
// doubles, "param_count": int, "seed": int}.
std::string save_model(const QMapModel& model);
QMapModel load_model(const std::string& text);

}  // namespace eim
