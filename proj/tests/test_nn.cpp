#include <doctest.h>

#include <cmath>
#include <random>

#include "support/test_util.hpp"
#include "vaeprobe/nn.hpp"
#include "vaeprobe/vae.hpp"

using namespace vaeprobe;
using nn::Activation;

namespace {

nn::DenseNet single_layer(Mat w, Vec b, Activation act) {
  nn::DenseNet net;
  net.layers = {{static_cast<int>(w.cols()), static_cast<int>(w.rows()), act}};
  net.weights = {std::move(w)};
  net.biases = {std::move(b)};
  return net;
}

}  // namespace

TEST_SUITE_BEGIN("nn");

TEST_CASE("forward identity layer passes input through") {
  auto net = single_layer(Mat::Identity(2, 2), Vec::Zero(2), Activation::kIdentity);
  Vec x(2);
  x << 1.0, 2.0;
  const Vec y = nn::forward(net, x);
  CHECK(y(0) == 1.0);
  CHECK(y(1) == 2.0);
}

TEST_CASE("forward affine map") {
  Mat w(2, 2);
  w << 2.0, 0.0, 0.0, 3.0;
  Vec b(2);
  b << 1.0, -1.0;
  auto net = single_layer(w, b, Activation::kIdentity);
  Vec x(2);
  x << 1.0, 1.0;
  const Vec y = nn::forward(net, x);
  CHECK(y(0) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(y(1) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("tanh layer with zero weights yields zero output") {
  auto net = single_layer(Mat::Zero(3, 4), Vec::Zero(3), Activation::kTanh);
  std::mt19937_64 rng(7);
  const Vec x = testutil::random_normal_vec(4, rng);
  const Vec y = nn::forward(net, x);
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(y(i) == 0.0);
}

TEST_CASE("forward rejects dimension mismatch") {
  auto net = single_layer(Mat::Identity(2, 2), Vec::Zero(2), Activation::kIdentity);
  Vec x(3);
  x.setZero();
  CHECK_THROWS_AS(nn::forward(net, x), ShapeError);
}

TEST_CASE("forward is pure") {
  std::mt19937_64 rng(11);
  auto net = nn::make_net(nn::chain_layers(5, {7, 3}, 4), 99);
  const Vec x = testutil::random_normal_vec(5, rng);
  const Vec a = nn::forward(net, x);
  const Vec b = nn::forward(net, x);
  CHECK(a == b);
}

TEST_CASE("backward identity layer gives outer-product weight gradient") {
  auto net = single_layer(Mat::Identity(3, 3) * 0.5, Vec::Zero(3),
                          Activation::kIdentity);
  std::mt19937_64 rng(3);
  const Vec x = testutil::random_normal_vec(3, rng);
  const Vec g = testutil::random_normal_vec(3, rng);
  nn::Tape tape;
  nn::forward(net, x, &tape);
  auto grads = nn::zeros_like(net);
  nn::backward(net, tape, Mat(g), grads);
  const Mat expected = g * x.transpose();
  CHECK((grads.weights[0] - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((grads.biases[0] - g).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("backward with zero output gradient yields zero buffer") {
  auto net = nn::make_net(nn::chain_layers(4, {6}, 3), 5);
  std::mt19937_64 rng(5);
  nn::Tape tape;
  nn::forward(net, testutil::random_normal_vec(4, rng), &tape);
  auto grads = nn::zeros_like(net);
  nn::backward(net, tape, Mat(Vec::Zero(3)), grads);
  for (const auto& w : grads.weights) CHECK(w.cwiseAbs().maxCoeff() == 0.0);
  for (const auto& b : grads.biases) CHECK(b.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward rejects mismatched tape") {
  auto net = nn::make_net(nn::chain_layers(4, {6}, 3), 5);
  auto other = nn::make_net(nn::chain_layers(4, {5, 6}, 3), 5);
  std::mt19937_64 rng(5);
  nn::Tape tape;
  nn::forward(other, testutil::random_normal_vec(4, rng), &tape);
  auto grads = nn::zeros_like(net);
  CHECK_THROWS_AS(nn::backward(net, tape, Mat(Vec::Zero(3)), grads), ShapeError);
}

TEST_CASE("random 3-layer net matches finite differences") {
  std::mt19937_64 rng(17);
  auto net = nn::make_net(nn::chain_layers(6, {8, 5}, 4), 21);
  testutil::randomize_params(net, rng);  // N(0, 0.01)
  const Vec x = testutil::random_normal_vec(6, rng);
  const Vec target = testutil::random_normal_vec(4, rng);
  auto loss = [&](const Vec& out) { return 0.5 * (out - target).squaredNorm(); };
  auto loss_grad = [&](const Vec& out) { return Vec(out - target); };
  const auto report = nn::finite_diff_check(net, loss, loss_grad, x);
  CHECK(report.passed);
  CHECK(report.max_rel_discrepancy < 1e-6);
}

TEST_CASE("quadratic loss on identity net has tiny discrepancy") {
  auto net = single_layer(Mat::Identity(3, 3), Vec::Zero(3), Activation::kIdentity);
  std::mt19937_64 rng(23);
  const Vec x = testutil::random_normal_vec(3, rng);
  auto loss = [](const Vec& out) { return 0.5 * out.squaredNorm(); };
  auto loss_grad = [](const Vec& out) { return out; };
  const auto report = nn::finite_diff_check(net, loss, loss_grad, x, 1e-6, 1e-8);
  CHECK(report.passed);
  CHECK(report.max_rel_discrepancy < 1e-8);
}

TEST_CASE("tanh net with BCE head matches finite differences") {
  std::mt19937_64 rng(29);
  auto net = nn::make_net(nn::chain_layers(5, {8}, 6), 31);
  testutil::randomize_params(net, rng);
  const Vec x = testutil::random_normal_vec(5, rng);
  const Vec target = testutil::random_vec(6, rng);
  auto loss = [&](const Vec& logits) { return vae::bce_from_logits(target, logits); };
  auto loss_grad = [&](const Vec& logits) {
    return Vec((1.0 / (1.0 + (-logits.array()).exp())) - target.array());
  };
  const auto report = nn::finite_diff_check(net, loss, loss_grad, x);
  CHECK(report.passed);
  CHECK(report.max_rel_discrepancy < 1e-6);
}

TEST_CASE("corrupted analytic gradient fails the check") {
  auto net = single_layer(Mat::Identity(3, 3), Vec::Zero(3), Activation::kIdentity);
  Vec x(3);
  x << 2.0, -1.5, 1.0;
  auto loss = [](const Vec& out) { return 0.5 * out.squaredNorm(); };
  nn::Tape tape;
  const Vec out = nn::forward(net, x, &tape);
  auto grads = nn::zeros_like(net);
  nn::backward(net, tape, Mat(out), grads);

  // Double the largest-magnitude weight gradient.
  Eigen::Index r = 0, c = 0;
  grads.weights[0].cwiseAbs().maxCoeff(&r, &c);
  grads.weights[0](r, c) *= 2.0;
  const auto report = nn::compare_gradients(net, grads, loss, x, 1e-6, 1e-6);
  CHECK_FALSE(report.passed);
}

TEST_CASE("adam with zero gradients is a parameter no-op") {
  std::mt19937_64 rng(37);
  auto net = nn::make_net(nn::chain_layers(4, {5}, 3), 41);
  testutil::randomize_params(net, rng);
  auto state = nn::make_adam(net, {});
  // Exercise a non-fresh state too.
  auto grads = nn::zeros_like(net);
  grads.weights[0](0, 0) = 0.5;
  nn::adam_step(net, grads, state);
  const auto before = net;
  grads.set_zero();
  nn::adam_step(net, grads, state);
  CHECK(testutil::nets_equal(net, before));
  CHECK(state.step_count == 2);
}

TEST_CASE("first adam step moves a unit-gradient parameter by -lr") {
  auto net = single_layer(Mat::Zero(1, 1), Vec::Zero(1), Activation::kIdentity);
  nn::AdamConfig cfg;
  cfg.learning_rate = 0.1;
  auto state = nn::make_adam(net, cfg);
  auto grads = nn::zeros_like(net);
  grads.weights[0](0, 0) = 1.0;
  grads.biases[0](0) = 1.0;
  nn::adam_step(net, grads, state);
  CHECK(net.weights[0](0, 0) == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(net.biases[0](0) == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(state.step_count == 1);
}

TEST_CASE("adam is deterministic") {
  std::mt19937_64 rng(43);
  auto net1 = nn::make_net(nn::chain_layers(4, {5}, 3), 47);
  testutil::randomize_params(net1, rng);
  auto net2 = net1;
  auto grads = nn::zeros_like(net1);
  std::mt19937_64 grng(53);
  for (auto& w : grads.weights)
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        w(r, c) = std::normal_distribution<double>()(grng);
  auto s1 = nn::make_adam(net1, {});
  auto s2 = nn::make_adam(net2, {});
  for (int i = 0; i < 5; ++i) {
    nn::adam_step(net1, grads, s1);
    nn::adam_step(net2, grads, s2);
  }
  CHECK(testutil::nets_equal(net1, net2));
}

TEST_CASE("adam rejects non-finite gradients naming the layer") {
  auto net = nn::make_net(nn::chain_layers(4, {5}, 3), 59);
  auto state = nn::make_adam(net, {});
  auto grads = nn::zeros_like(net);
  grads.weights[1](0, 0) = std::nan("");
  CHECK_THROWS_WITH_AS(nn::adam_step(net, grads, state),
                       doctest::Contains("layer 1"), NumericError);
}

TEST_CASE("parameter_count counts weights and biases") {
  CHECK(nn::parameter_count(nn::chain_layers(784, {400}, 100)) == 354100);
  CHECK(nn::parameter_count(nn::chain_layers(2, {3}, 1)) == 2 * 3 + 3 + 3 + 1);
}

TEST_CASE("chain_layers rejects bad widths") {
  CHECK_THROWS_AS(nn::chain_layers(0, {4}, 2), ShapeError);
  CHECK_THROWS_AS(nn::chain_layers(4, {0}, 2), ShapeError);
}

TEST_SUITE_END();
