#include "eimplace/approximator.hpp"

#include <cmath>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "eimplace/errors.hpp"
#include "eimplace/io.hpp"
#include "eimplace/rng.hpp"

namespace eim {

using nlohmann::json;

namespace {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

struct Slices {
  std::size_t w1, b1, w2, b2;  // offsets into the flat parameter vector
  int in, hidden, out;
};

Slices slices(const Arch& a) {
  Slices s;
  s.in = a.input_dim();
  s.hidden = a.hidden;
  s.out = a.output_dim();
  s.w1 = 0;
  s.b1 = s.w1 + static_cast<std::size_t>(s.hidden) * s.in;
  s.w2 = s.b1 + s.hidden;
  s.b2 = s.w2 + static_cast<std::size_t>(s.out) * s.hidden;
  return s;
}

void check_input(const QMapModel& model, std::size_t got) {
  if (static_cast<std::size_t>(model.arch.input_dim()) != got)
    throw ValidationError("forward: input has " + std::to_string(got) + " entries, expected " +
                          std::to_string(model.arch.input_dim()));
}

}  // namespace

QMapModel init_model(const Arch& arch, std::uint64_t seed) {
  if (arch.grid_n < 1 || arch.channels < 1 || arch.hidden < 1)
    throw ConfigError("init_model: arch dimensions must be positive");
  QMapModel model;
  model.arch = arch;
  model.init_seed = seed;
  model.params.assign(static_cast<std::size_t>(arch.param_count()), 0.0);
  const Slices s = slices(arch);

  auto engine = rng::make_engine(rng::derive_seed(seed, 0xa5a5));
  const double a1 = std::sqrt(6.0 / (s.in + s.hidden));
  for (std::size_t i = 0; i < static_cast<std::size_t>(s.hidden) * s.in; ++i)
    model.params[s.w1 + i] = (2.0 * rng::uniform_real(engine) - 1.0) * a1;
  const double a2 = std::sqrt(6.0 / (s.hidden + s.out));
  for (std::size_t i = 0; i < static_cast<std::size_t>(s.out) * s.hidden; ++i)
    model.params[s.w2 + i] = (2.0 * rng::uniform_real(engine) - 1.0) * a2;
  // Biases stay zero.
  return model;
}

OptimizerState init_optimizer(const QMapModel& model, const AdamHyper& hyper) {
  OptimizerState opt;
  opt.first_moment.assign(model.params.size(), 0.0);
  opt.second_moment.assign(model.params.size(), 0.0);
  opt.step_count = 0;
  opt.hyper = hyper;
  return opt;
}

std::vector<double> forward(const QMapModel& model, const std::vector<double>& input) {
  check_input(model, input.size());
  const Slices s = slices(model.arch);
  const double* p = model.params.data();
  ConstMatMap w1(p + s.w1, s.hidden, s.in);
  ConstVecMap b1(p + s.b1, s.hidden);
  ConstMatMap w2(p + s.w2, s.out, s.hidden);
  ConstVecMap b2(p + s.b2, s.out);
  ConstVecMap x(input.data(), s.in);

  Eigen::VectorXd h = ((w1 * x) + b1).array().tanh();
  std::vector<double> out(s.out);
  VecMap(out.data(), s.out) = (w2 * h) + b2;
  return out;
}

std::vector<double> forward(const QMapModel& model, const FeatureMaps& features) {
  if (features.grid_n != model.arch.grid_n)
    throw ValidationError("forward: feature grid " + std::to_string(features.grid_n) +
                          " does not match model grid " + std::to_string(model.arch.grid_n));
  return forward(model, features.flatten());
}

std::vector<double> forward_batch(const QMapModel& model, const std::vector<double>& inputs,
                                  int batch) {
  if (batch <= 0) return {};
  check_input(model, inputs.size() / batch);
  const Slices s = slices(model.arch);
  const double* p = model.params.data();
  ConstMatMap w1(p + s.w1, s.hidden, s.in);
  ConstVecMap b1(p + s.b1, s.hidden);
  ConstMatMap w2(p + s.w2, s.out, s.hidden);
  ConstVecMap b2(p + s.b2, s.out);
  Eigen::Map<const Eigen::MatrixXd> x(inputs.data(), s.in, batch);

  Eigen::MatrixXd h = ((w1 * x).colwise() + b1).array().tanh();
  std::vector<double> out(static_cast<std::size_t>(s.out) * batch);
  Eigen::Map<Eigen::MatrixXd>(out.data(), s.out, batch) = (w2 * h).colwise() + b2;
  return out;
}

void backward_accumulate(const QMapModel& model, const double* input, const double* out_grad,
                         std::vector<double>& accum) {
  const Slices s = slices(model.arch);
  const double* p = model.params.data();
  ConstMatMap w1(p + s.w1, s.hidden, s.in);
  ConstVecMap b1(p + s.b1, s.hidden);
  ConstMatMap w2(p + s.w2, s.out, s.hidden);
  ConstVecMap x(input, s.in);
  ConstVecMap g(out_grad, s.out);

  Eigen::VectorXd h = ((w1 * x) + b1).array().tanh();
  Eigen::VectorXd gz = (w2.transpose() * g).array() * (1.0 - h.array().square());

  double* a = accum.data();
  MatMap(a + s.w1, s.hidden, s.in).noalias() += gz * x.transpose();
  VecMap(a + s.b1, s.hidden).noalias() += gz;
  MatMap(a + s.w2, s.out, s.hidden).noalias() += g * h.transpose();
  VecMap(a + s.b2, s.out).noalias() += g;
}

void backward_batch_accumulate(const QMapModel& model, const std::vector<double>& inputs,
                               int batch, const std::vector<double>& out_grads,
                               std::vector<double>& accum) {
  if (batch <= 0) return;
  check_input(model, inputs.size() / batch);
  const Slices s = slices(model.arch);
  const double* p = model.params.data();
  ConstMatMap w1(p + s.w1, s.hidden, s.in);
  ConstVecMap b1(p + s.b1, s.hidden);
  ConstMatMap w2(p + s.w2, s.out, s.hidden);
  Eigen::Map<const Eigen::MatrixXd> x(inputs.data(), s.in, batch);
  Eigen::Map<const Eigen::MatrixXd> g(out_grads.data(), s.out, batch);

  Eigen::MatrixXd h = ((w1 * x).colwise() + b1).array().tanh();
  Eigen::MatrixXd gz = (w2.transpose() * g).array() * (1.0 - h.array().square());

  double* a = accum.data();
  MatMap(a + s.w1, s.hidden, s.in).noalias() += gz * x.transpose();
  VecMap(a + s.b1, s.hidden).noalias() += gz.rowwise().sum();
  MatMap(a + s.w2, s.out, s.hidden).noalias() += g * h.transpose();
  VecMap(a + s.b2, s.out).noalias() += g.rowwise().sum();
}

std::vector<double> backward(const QMapModel& model, const std::vector<double>& input,
                             const std::vector<double>& out_grad) {
  check_input(model, input.size());
  if (out_grad.size() != static_cast<std::size_t>(model.arch.output_dim()))
    throw ValidationError("backward: out_grad has " + std::to_string(out_grad.size()) +
                          " entries, expected " + std::to_string(model.arch.output_dim()));
  std::vector<double> grad(model.params.size(), 0.0);
  backward_accumulate(model, input.data(), out_grad.data(), grad);
  return grad;
}

void adam_step(OptimizerState& opt, QMapModel& model, const std::vector<double>& grad) {
  if (grad.size() != model.params.size())
    throw ValidationError("adam_step: gradient size mismatch");
  const AdamHyper& h = opt.hyper;
  opt.step_count += 1;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(opt.step_count));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(opt.step_count));
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double g = grad[i];
    opt.first_moment[i] = h.beta1 * opt.first_moment[i] + (1.0 - h.beta1) * g;
    opt.second_moment[i] = h.beta2 * opt.second_moment[i] + (1.0 - h.beta2) * g * g;
    const double m_hat = opt.first_moment[i] / bc1;
    const double v_hat = opt.second_moment[i] / bc2;
    model.params[i] -= h.lr * (m_hat / (std::sqrt(v_hat) + h.eps) + h.weight_decay * model.params[i]);
  }
}

double finite_diff_check(QMapModel model, const std::function<double(const QMapModel&)>& loss,
                         const std::vector<double>& analytic_grad, int probes, std::uint64_t seed,
                         double h) {
  if (analytic_grad.size() != model.params.size())
    throw ValidationError("finite_diff_check: gradient size mismatch");
  auto engine = rng::make_engine(rng::derive_seed(seed, 0xfd1f));
  double max_rel = 0.0;
  const auto count = static_cast<std::int64_t>(model.params.size());
  for (int k = 0; k < probes; ++k) {
    const auto i = static_cast<std::size_t>(rng::uniform_int(engine, 0, count - 1));
    const double saved = model.params[i];
    model.params[i] = saved + h;
    const double up = loss(model);
    model.params[i] = saved - h;
    const double down = loss(model);
    model.params[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = analytic_grad[i];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
  }
  return max_rel;
}

std::string save_model(const QMapModel& model) {
  json doc;
  doc["arch"] = {{"grid_n", model.arch.grid_n},
                 {"channels", model.arch.channels},
                 {"hidden", model.arch.hidden},
                 {"out_dim", model.arch.output_dim()},
                 {"activation", "tanh"}};
  doc["param_count"] = model.arch.param_count();
  doc["params"] = io::encode_doubles_base64(model.params);
  doc["seed"] = model.init_seed;
  return doc.dump(2) + "\n";
}

QMapModel load_model(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  QMapModel model;
  const json& arch = doc.at("arch");
  model.arch.grid_n = arch.at("grid_n").get<int>();
  model.arch.channels = arch.at("channels").get<int>();
  model.arch.hidden = arch.at("hidden").get<int>();
  model.arch.out_dim = arch.at("out_dim").get<int>();
  model.init_seed = doc.at("seed").get<std::uint64_t>();
  model.params = io::decode_doubles_base64(doc.at("params").get<std::string>());
  const auto expected = doc.at("param_count").get<std::int64_t>();
  if (expected != model.arch.param_count() ||
      model.params.size() != static_cast<std::size_t>(expected))
    throw ValidationError("checkpoint: parameter count " + std::to_string(model.params.size()) +
                          " does not match arch (" + std::to_string(model.arch.param_count()) + ")");
  return model;
}

}  // namespace eim
