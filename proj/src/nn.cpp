#include "vaeprobe/nn.hpp"

#include <cmath>
#include <random>
#include <utility>

namespace vaeprobe::nn {

namespace {

void check_chain(const std::vector<LayerSpec>& layers) {
  if (layers.empty()) throw ShapeError("network needs at least one layer");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].input_width < 1 || layers[l].output_width < 1)
      throw ShapeError("layer " + std::to_string(l) + " has non-positive width");
    if (l > 0 && layers[l].input_width != layers[l - 1].output_width)
      throw ShapeError("layer " + std::to_string(l) + " input width " +
                       std::to_string(layers[l].input_width) +
                       " does not match previous output width " +
                       std::to_string(layers[l - 1].output_width));
  }
}

Mat apply_activation(Activation act, Mat z) {
  switch (act) {
    case Activation::kTanh:
      return z.array().tanh().matrix();
    case Activation::kIdentity:
      return z;
  }
  throw ShapeError("unknown activation");
}

}  // namespace

std::vector<LayerSpec> chain_layers(int input_width,
                                    const std::vector<int>& hidden_widths,
                                    int output_width) {
  std::vector<LayerSpec> layers;
  int in = input_width;
  for (int h : hidden_widths) {
    layers.push_back({in, h, Activation::kTanh});
    in = h;
  }
  layers.push_back({in, output_width, Activation::kIdentity});
  check_chain(layers);
  return layers;
}

std::int64_t parameter_count(const std::vector<LayerSpec>& layers) {
  std::int64_t n = 0;
  for (const auto& l : layers)
    n += static_cast<std::int64_t>(l.input_width) * l.output_width + l.output_width;
  return n;
}

DenseNet make_net(std::vector<LayerSpec> layers, std::uint64_t seed) {
  check_chain(layers);
  DenseNet net;
  net.layers = std::move(layers);
  std::mt19937_64 rng(seed);
  for (const auto& l : net.layers) {
    const double limit = std::sqrt(6.0 / (l.input_width + l.output_width));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Mat w(l.output_width, l.input_width);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Vec::Zero(l.output_width));
  }
  return net;
}

void GradientBuffer::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

bool GradientBuffer::all_zero() const {
  for (const auto& w : weights)
    if ((w.array() != 0.0).any()) return false;
  for (const auto& b : biases)
    if ((b.array() != 0.0).any()) return false;
  return true;
}

bool GradientBuffer::all_finite() const {
  for (const auto& w : weights)
    if (!w.allFinite()) return false;
  for (const auto& b : biases)
    if (!b.allFinite()) return false;
  return true;
}

GradientBuffer zeros_like(const DenseNet& net) {
  GradientBuffer g;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    g.weights.push_back(Mat::Zero(net.weights[l].rows(), net.weights[l].cols()));
    g.biases.push_back(Vec::Zero(net.biases[l].size()));
  }
  return g;
}

Mat forward(const DenseNet& net, const Mat& input, Tape* tape) {
  if (input.rows() != net.input_width())
    throw ShapeError("forward: input has " + std::to_string(input.rows()) +
                     " rows, net expects " + std::to_string(net.input_width()));
  if (tape) {
    tape->acts.clear();
    tape->acts.push_back(input);
  }
  Mat a = input;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    Mat z = net.weights[l] * a;
    z.colwise() += net.biases[l];
    a = apply_activation(net.layers[l].activation, std::move(z));
    if (tape) tape->acts.push_back(a);
  }
  return a;
}

Vec forward(const DenseNet& net, const Vec& input, Tape* tape) {
  return forward(net, Mat(input), tape).col(0);
}

Mat backward(const DenseNet& net, const Tape& tape, const Mat& output_gradient,
             GradientBuffer& grads) {
  const std::size_t num_layers = net.layers.size();
  if (tape.acts.size() != num_layers + 1)
    throw ShapeError("backward: tape does not match net (got " +
                     std::to_string(tape.acts.size()) + " records, want " +
                     std::to_string(num_layers + 1) + ")");
  if (grads.weights.size() != num_layers)
    throw ShapeError("backward: gradient buffer does not match net");
  if (output_gradient.rows() != net.output_width() ||
      output_gradient.cols() != tape.acts.back().cols())
    throw ShapeError("backward: output gradient shape mismatch");

  Mat g = output_gradient;
  for (std::size_t li = num_layers; li-- > 0;) {
    const Mat& out_act = tape.acts[li + 1];
    if (out_act.rows() != g.rows())
      throw ShapeError("backward: stale tape at layer " + std::to_string(li));
    Mat dz;
    switch (net.layers[li].activation) {
      case Activation::kTanh:
        dz = (g.array() * (1.0 - out_act.array().square())).matrix();
        break;
      case Activation::kIdentity:
        dz = g;
        break;
    }
    grads.weights[li].noalias() += dz * tape.acts[li].transpose();
    grads.biases[li] += dz.rowwise().sum();
    g.noalias() = net.weights[li].transpose() * dz;
  }
  return g;
}

AdamState make_adam(const DenseNet& net, const AdamConfig& config) {
  if (config.beta1 < 0.0 || config.beta1 >= 1.0 || config.beta2 < 0.0 ||
      config.beta2 >= 1.0 || config.epsilon <= 0.0)
    throw ConfigError("invalid Adam hyperparameters");
  AdamState s;
  s.first_moment = zeros_like(net);
  s.second_moment = zeros_like(net);
  s.config = config;
  return s;
}

void adam_step(DenseNet& net, const GradientBuffer& grads, AdamState& state) {
  const std::size_t num_layers = net.layers.size();
  if (grads.weights.size() != num_layers ||
      state.first_moment.weights.size() != num_layers)
    throw ShapeError("adam_step: shape mismatch between net, grads and state");
  for (std::size_t l = 0; l < num_layers; ++l) {
    if (!grads.weights[l].allFinite() || !grads.biases[l].allFinite())
      throw NumericError("adam_step: non-finite gradient at layer " +
                         std::to_string(l));
  }

  const auto& cfg = state.config;
  state.step_count += 1;

  // An exactly-zero gradient leaves the parameters untouched (moments still
  // decay, matching the g = 0 recurrence).
  if (grads.all_zero()) {
    for (std::size_t l = 0; l < num_layers; ++l) {
      state.first_moment.weights[l] *= cfg.beta1;
      state.first_moment.biases[l] *= cfg.beta1;
      state.second_moment.weights[l] *= cfg.beta2;
      state.second_moment.biases[l] *= cfg.beta2;
    }
    return;
  }

  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);

  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = (cfg.beta2 * v.array() + (1.0 - cfg.beta2) * g.array().square()).matrix();
    param.array() -= cfg.learning_rate * (m.array() / bc1) /
                     ((v.array() / bc2).sqrt() + cfg.epsilon);
  };

  for (std::size_t l = 0; l < num_layers; ++l) {
    update(net.weights[l], grads.weights[l], state.first_moment.weights[l],
           state.second_moment.weights[l]);
    update(net.biases[l], grads.biases[l], state.first_moment.biases[l],
           state.second_moment.biases[l]);
  }
}

namespace {

double rel_discrepancy(double analytic, double fd) {
  const double denom = std::max({1.0, std::abs(analytic), std::abs(fd)});
  return std::abs(analytic - fd) / denom;
}

}  // namespace

FiniteDiffReport compare_gradients(
    const DenseNet& net, const GradientBuffer& analytic,
    const std::function<double(const Vec&)>& loss, const Vec& input,
    double step, double tolerance) {
  FiniteDiffReport report;
  report.tolerance = tolerance;
  DenseNet probe = net;

  auto eval = [&]() { return loss(forward(probe, input)); };

  auto consider = [&](double a, double* slot, int layer, bool is_bias,
                      Eigen::Index r, Eigen::Index c) {
    const double orig = *slot;
    *slot = orig + step;
    const double up = eval();
    *slot = orig - step;
    const double down = eval();
    *slot = orig;
    const double fd = (up - down) / (2.0 * step);
    const double d = rel_discrepancy(a, fd);
    if (d > report.max_rel_discrepancy) {
      report.max_rel_discrepancy = d;
      report.worst_layer = layer;
      report.worst_is_bias = is_bias;
      report.worst_row = r;
      report.worst_col = c;
    }
  };

  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    for (Eigen::Index r = 0; r < net.weights[l].rows(); ++r)
      for (Eigen::Index c = 0; c < net.weights[l].cols(); ++c)
        consider(analytic.weights[l](r, c), &probe.weights[l](r, c),
                 static_cast<int>(l), false, r, c);
    for (Eigen::Index r = 0; r < net.biases[l].size(); ++r)
      consider(analytic.biases[l](r), &probe.biases[l](r),
               static_cast<int>(l), true, r, 0);
  }
  report.passed = report.max_rel_discrepancy < tolerance;
  return report;
}

FiniteDiffReport finite_diff_check(
    const DenseNet& net, const std::function<double(const Vec&)>& loss,
    const std::function<Vec(const Vec&)>& loss_grad, const Vec& input,
    double step, double tolerance) {
  Tape tape;
  const Vec out = forward(net, input, &tape);
  GradientBuffer grads = zeros_like(net);
  backward(net, tape, Mat(loss_grad(out)), grads);
  return compare_gradients(net, grads, loss, input, step, tolerance);
}

}  // namespace vaeprobe::nn
