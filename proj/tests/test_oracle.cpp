#include <doctest.h>

#include <cmath>
#include <random>

#include "support/oracles.hpp"
#include "support/test_util.hpp"
#include "vaeprobe/oracle.hpp"
#include "vaeprobe/synth.hpp"

using namespace vaeprobe;
using testutil::brute_force_weights;
using testutil::profile_from_weights;

TEST_SUITE_BEGIN("oracle");

TEST_CASE("gaussian log density closed-form anchors") {
  Vec z(1), m(1), lv(1);
  z << 0.0;
  m << 0.0;
  lv << 0.0;
  const double at_mode = oracle::gaussian_log_density(z, {m, lv});
  CHECK(at_mode == doctest::Approx(-0.9189385332046727).epsilon(1e-12));

  z << 1.0;
  CHECK(oracle::gaussian_log_density(z, {m, lv}) ==
        doctest::Approx(-1.4189385332046727).epsilon(1e-12));
}

TEST_CASE("gaussian log density decays monotonically from the mean") {
  std::mt19937_64 rng(3);
  const Vec m = testutil::random_normal_vec(4, rng);
  const Vec lv = testutil::random_normal_vec(4, rng);
  double prev = oracle::gaussian_log_density(m, {m, lv});
  for (int step = 1; step <= 5; ++step) {
    Vec z = m;
    z(2) += 0.3 * step;
    const double d = oracle::gaussian_log_density(z, {m, lv});
    CHECK(d < prev);
    prev = d;
  }
}

TEST_CASE("weights for a single posterior are exactly one") {
  auto cache = oracle::cache_from_posteriors(Mat::Zero(3, 1), Mat::Zero(3, 1));
  const auto profile = oracle::compute_weights(Vec::Ones(3), cache);
  CHECK(profile.weights(0) == 1.0);
  CHECK(profile.log_weights(0) == 0.0);
}

TEST_CASE("symmetric posteriors split the weight evenly") {
  Mat means(1, 2);
  means << -1.0, 1.0;
  auto cache = oracle::cache_from_posteriors(means, Mat::Zero(1, 2));
  const auto profile = oracle::compute_weights(Vec::Zero(1), cache);
  CHECK(profile.weights(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(profile.weights(1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("two unit posteriors at 0 and 2 match the density ratio") {
  Mat means(1, 2);
  means << 0.0, 2.0;
  auto cache = oracle::cache_from_posteriors(means, Mat::Zero(1, 2));
  const auto profile = oracle::compute_weights(Vec::Zero(1), cache);
  const double r = std::exp(-2.0);
  CHECK(profile.weights(0) == doctest::Approx(1.0 / (1.0 + r)).epsilon(1e-12));
  CHECK(profile.weights(1) == doctest::Approx(r / (1.0 + r)).epsilon(1e-12));
}

TEST_CASE("compute_weights matches the extended-precision brute force") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 10);
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng() % 4);
    Mat means(k, n), lvs(k, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      means.col(i) = testutil::random_normal_vec(k, rng, 3.0);
      lvs.col(i) = testutil::random_normal_vec(k, rng, 1.0);
    }
    auto cache = oracle::cache_from_posteriors(means, lvs);
    const Vec z = testutil::random_normal_vec(k, rng, 3.0);
    const auto profile = oracle::compute_weights(z, cache);
    const Vec expect = brute_force_weights(z, means, lvs);
    CHECK((profile.weights - expect).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(std::abs(profile.weights.sum() - 1.0) < 1e-9);
    CHECK(profile.weights.minCoeff() >= 0.0);
  }
}

TEST_CASE("normalization survives log-density spreads beyond 700") {
  // Tiny variances at spread-out means force astronomically different
  // densities; naive exponentiation would under/overflow.
  Mat means(1, 4), lvs(1, 4);
  means << 0.0, 10.0, 20.0, 30.0;
  lvs << -10.0, -10.0, -10.0, -10.0;
  auto cache = oracle::cache_from_posteriors(means, lvs);
  Vec z(1);
  z << 0.05;
  const auto profile = oracle::compute_weights(z, cache);
  const Vec expect = brute_force_weights(z, means, lvs);
  CHECK(std::abs(profile.weights.sum() - 1.0) < 1e-9);
  CHECK((profile.weights - expect).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(profile.weights(0) == doctest::Approx(1.0).epsilon(1e-12));
  // Far components flush to exact zero in the reported weights but keep
  // their log-space information.
  CHECK(profile.weights(3) == 0.0);
  CHECK(profile.log_weights(3) < -700.0);
  CHECK(std::isfinite(profile.log_weights(3)));
}

TEST_CASE("weight profile is shift invariant") {
  std::mt19937_64 rng(11);
  Mat means(2, 6), lvs(2, 6);
  for (Eigen::Index i = 0; i < 6; ++i) {
    means.col(i) = testutil::random_normal_vec(2, rng, 2.0);
    lvs.col(i) = testutil::random_normal_vec(2, rng);
  }
  auto cache = oracle::cache_from_posteriors(means, lvs);
  const Vec z = testutil::random_normal_vec(2, rng);
  const auto base = oracle::compute_weights(z, cache);

  // Shifting every log density by the same constant (via the cached
  // log-determinant term) must leave the profile unchanged.
  auto shifted = cache;
  shifted.log_det_term.array() += 123.456;
  const auto moved = oracle::compute_weights(z, shifted);
  CHECK((moved.weights - base.weights).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("weighted average anchors and brute force") {
  std::mt19937_64 rng(13);
  Mat pixels(784, 5);
  for (Eigen::Index i = 0; i < 5; ++i)
    pixels.col(i) = testutil::random_vec(784, rng);

  // One-hot profile returns the image exactly.
  Vec onehot = Vec::Zero(5);
  onehot(3) = 1.0;
  const Vec mu = oracle::weighted_average(profile_from_weights(onehot), pixels);
  CHECK(mu == pixels.col(3));

  // Uniform over two images is their pixelwise mean.
  Vec two = Vec::Zero(5);
  two(0) = 0.5;
  two(1) = 0.5;
  const Vec mu2 = oracle::weighted_average(profile_from_weights(two), pixels);
  CHECK((mu2 - 0.5 * (pixels.col(0) + pixels.col(1))).cwiseAbs().maxCoeff() <
        1e-15);

  // Random weights vs the naive double loop.
  Vec w = testutil::random_vec(5, rng);
  w /= w.sum();
  const Vec fast = oracle::weighted_average(profile_from_weights(w), pixels);
  Vec slow = Vec::Zero(784);
  for (Eigen::Index j = 0; j < 784; ++j)
    for (Eigen::Index i = 0; i < 5; ++i) slow(j) += w(i) * pixels(j, i);
  CHECK((fast - slow).cwiseAbs().maxCoeff() < 1e-12);

  // Convexity: every pixel stays inside the per-pixel min/max.
  for (Eigen::Index j = 0; j < 784; ++j) {
    CHECK(fast(j) >= pixels.row(j).minCoeff() - 1e-12);
    CHECK(fast(j) <= pixels.row(j).maxCoeff() + 1e-12);
  }
}

TEST_CASE("perplexity anchors") {
  Vec onehot = Vec::Zero(6);
  onehot(2) = 1.0;
  CHECK(oracle::perplexity(profile_from_weights(onehot)) == 1.0);

  const Vec uniform = Vec::Constant(250, 1.0 / 250.0);
  CHECK(oracle::perplexity(profile_from_weights(uniform)) ==
        doctest::Approx(250.0).epsilon(1e-12));

  Vec w(3);
  w << 0.5, 0.25, 0.25;
  CHECK(oracle::perplexity(profile_from_weights(w)) ==
        doctest::Approx(std::pow(2.0, 1.5)).epsilon(1e-12));
}

TEST_CASE("perplexity stays within [1, N] for random profiles") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 50);
    Vec w = testutil::random_vec(n, rng, 1e-12, 1.0);
    w /= w.sum();
    const double p = oracle::perplexity(profile_from_weights(w));
    CHECK(p >= 1.0);
    CHECK(p <= static_cast<double>(n));
  }
}

TEST_CASE("top_k ordering and tie rules") {
  Vec onehot = Vec::Zero(5);
  onehot(2) = 1.0;
  const auto top = oracle::top_k(profile_from_weights(onehot), 3);
  REQUIRE(top.size() == 3);
  CHECK(top[0] == std::pair<Eigen::Index, double>{2, 1.0});
  CHECK(top[1].first == 0);  // zero-weight ties break by index
  CHECK(top[2].first == 1);

  const Vec uniform = Vec::Constant(4, 0.25);
  const auto top2 = oracle::top_k(profile_from_weights(uniform), 2);
  CHECK(top2[0].first == 0);
  CHECK(top2[1].first == 1);

  CHECK_THROWS_AS(oracle::top_k(profile_from_weights(uniform), 5), ConfigError);
  CHECK_THROWS_AS(oracle::top_k(profile_from_weights(uniform), 0), ConfigError);
}

TEST_CASE("top-1 equals the brute-force density argmax") {
  std::mt19937_64 rng(19);
  Mat means(3, 12), lvs(3, 12);
  for (Eigen::Index i = 0; i < 12; ++i) {
    means.col(i) = testutil::random_normal_vec(3, rng, 2.0);
    lvs.col(i) = testutil::random_normal_vec(3, rng);
  }
  auto cache = oracle::cache_from_posteriors(means, lvs);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec z = testutil::random_normal_vec(3, rng, 2.0);
    const auto profile = oracle::compute_weights(z, cache);
    const auto top = oracle::top_k(profile, 1);

    Eigen::Index argmax = 0;
    double best = -1e300;
    for (Eigen::Index i = 0; i < 12; ++i) {
      const double d =
          oracle::gaussian_log_density(z, {means.col(i), lvs.col(i)});
      if (d > best) {
        best = d;
        argmax = i;
      }
    }
    CHECK(top[0].first == argmax);
  }
}

TEST_CASE("build_cache rejects a mismatched training set") {
  auto corpus = synth::make_corpus(20, 21);
  vae::VaeSpec spec;
  spec.latent_dim = 2;
  spec.encoder_hidden = {8};
  spec.decoder_hidden = {8};
  auto model = vae::init_model(spec);
  model.train_set_id = mnist::dataset_id(corpus);
  CHECK_NOTHROW(oracle::build_cache(model, corpus));
  corpus.pop_back();
  CHECK_THROWS_AS(oracle::build_cache(model, corpus), ConfigError);
}

TEST_CASE("build_cache posteriors match per-image encoding") {
  const auto corpus = synth::make_corpus(15, 23);
  vae::VaeSpec spec;
  spec.latent_dim = 3;
  spec.encoder_hidden = {10};
  spec.decoder_hidden = {10};
  auto model = vae::init_model(spec);
  const auto cache = oracle::build_cache(model, corpus);
  REQUIRE(cache.size() == 15);
  for (Eigen::Index i = 0; i < cache.size(); ++i) {
    const auto post = vae::encode(model, corpus[static_cast<std::size_t>(i)].pixels);
    CHECK((cache.posterior_mean.col(i) - post.mean).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((cache.posterior_log_var.col(i) - post.log_variance)
              .cwiseAbs()
              .maxCoeff() < 1e-12);
  }
}

TEST_SUITE_END();
