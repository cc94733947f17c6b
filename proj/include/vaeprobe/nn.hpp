#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "vaeprobe/common.hpp"

namespace vaeprobe::nn {

enum class Activation { kTanh, kIdentity };

struct LayerSpec {
  int input_width = 0;
  int output_width = 0;
  Activation activation = Activation::kTanh;
};

/// Builds the layer list for an MLP: tanh on every hidden layer, identity head.
std::vector<LayerSpec> chain_layers(int input_width,
                                    const std::vector<int>& hidden_widths,
                                    int output_width);

std::int64_t parameter_count(const std::vector<LayerSpec>& layers);

/// Feedforward MLP. weights[l] is (output_width x input_width), biases[l] is
/// (output_width). Layer widths must chain.
struct DenseNet {
  std::vector<LayerSpec> layers;
  std::vector<Mat> weights;
  std::vector<Vec> biases;

  int input_width() const { return layers.front().input_width; }
  int output_width() const { return layers.back().output_width; }
};

/// Xavier-uniform weights, zero biases, drawn from a seeded generator.
DenseNet make_net(std::vector<LayerSpec> layers, std::uint64_t seed);

/// Parameter-shaped accumulator for d(loss)/d(parameter).
struct GradientBuffer {
  std::vector<Mat> weights;
  std::vector<Vec> biases;

  void set_zero();
  bool all_finite() const;
  bool all_zero() const;
};

GradientBuffer zeros_like(const DenseNet& net);

/// Post-activation record from a forward pass. acts[0] is the input batch
/// (columns are examples), acts[l + 1] the output of layer l.
struct Tape {
  std::vector<Mat> acts;
};

/// Batched forward: each column of `input` is one example.
Mat forward(const DenseNet& net, const Mat& input, Tape* tape = nullptr);
Vec forward(const DenseNet& net, const Vec& input, Tape* tape = nullptr);

/// Exact reverse-mode pass. `output_gradient` is d(loss)/d(output), one column
/// per example. Parameter gradients are accumulated (summed over columns) into
/// `grads`; the return value is d(loss)/d(input).
Mat backward(const DenseNet& net, const Tape& tape, const Mat& output_gradient,
             GradientBuffer& grads);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::int64_t step_count = 0;
  GradientBuffer first_moment;
  GradientBuffer second_moment;
  AdamConfig config;
};

AdamState make_adam(const DenseNet& net, const AdamConfig& config);

/// Standard Adam update with bias correction; increments step_count.
/// Non-finite gradient entries raise NumericError naming the layer.
void adam_step(DenseNet& net, const GradientBuffer& grads, AdamState& state);

struct FiniteDiffReport {
  double max_rel_discrepancy = 0.0;
  double tolerance = 0.0;
  int worst_layer = -1;
  bool worst_is_bias = false;
  Eigen::Index worst_row = -1;
  Eigen::Index worst_col = -1;
  bool passed = false;
};

/// Central-difference check of `analytic` against (loss(forward(net+h, x)) -
/// loss(forward(net-h, x))) / 2h for every parameter. Per-parameter
/// discrepancy is |analytic - fd| / max(1, |analytic|, |fd|); the report
/// carries the max.
FiniteDiffReport compare_gradients(
    const DenseNet& net, const GradientBuffer& analytic,
    const std::function<double(const Vec&)>& loss, const Vec& input,
    double step, double tolerance);

/// Runs backward with d(loss)/d(output) = `loss_grad(output)` and compares
/// the result against central finite differences of `loss`.
FiniteDiffReport finite_diff_check(
    const DenseNet& net, const std::function<double(const Vec&)>& loss,
    const std::function<Vec(const Vec&)>& loss_grad, const Vec& input,
    double step = 1e-6, double tolerance = 1e-6);

}  // namespace vaeprobe::nn
