#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "vaeprobe/common.hpp"
#include "vaeprobe/mnist.hpp"
#include "vaeprobe/vae.hpp"

namespace vaeprobe::oracle {

/// Hash over a model's parameters and architecture; ties caches to the model
/// they were built from.
std::uint64_t model_id(const vae::VaeModel& model);

/// Per-training-set cache of everything the weight computation needs: the
/// posterior of every training image (encoded once) plus the raw pixels.
/// Column i belongs to training image i.
struct TrainCache {
  Mat posterior_mean;     // latent_dim x N
  Mat posterior_log_var;  // latent_dim x N
  Mat inv_var;            // exp(-log_var), cached for the density loop
  Vec log_det_term;       // per-image sum of log-variances
  Mat pixels;             // 784 x N
  std::vector<int> labels;
  std::uint64_t model_id = 0;
  std::uint64_t train_set_id = 0;

  Eigen::Index size() const { return posterior_mean.cols(); }
  vae::GaussianPosterior posterior(Eigen::Index i) const {
    return {posterior_mean.col(i), posterior_log_var.col(i)};
  }
};

/// Encodes every training image through the model. When the model carries a
/// train_set_id it must match the given images (ConfigError otherwise).
TrainCache build_cache(const vae::VaeModel& model,
                       const std::vector<mnist::Image>& train_set);

/// Assembles a cache directly from posterior parameters (derived fields
/// filled in consistently). Pixels/labels may be empty when only weights are
/// needed.
TrainCache cache_from_posteriors(Mat means, Mat log_vars, Mat pixels = {},
                                 std::vector<int> labels = {});

/// The normalized latent-proximity weights w_i(z) over one training set.
struct WeightProfile {
  Vec weights;      // N, sums to 1; entries below 1e-300 reported as exactly 0
  Vec log_weights;  // N, full information
  Vec source_z;
  std::uint64_t train_set_id = 0;
};

/// log N(z; mean, diag(var)).
double gaussian_log_density(const Vec& z, const vae::GaussianPosterior& post);

/// Softmax over the N posterior log densities at z, via max-shifted
/// log-sum-exp with a fixed sequential reduction order.
WeightProfile compute_weights(const Vec& z, const TrainCache& cache);

/// mu_j = sum_i w_i * pixels(j, i).
Vec weighted_average(const WeightProfile& profile, const Mat& pixels);

/// exp of the Shannon entropy of the weights; 0 log 0 reads as 0. Clamped to
/// [1, N] (the mathematical range) against last-ulp rounding.
double perplexity(const WeightProfile& profile);

/// k largest weights, descending; exact ties break toward the lower index.
std::vector<std::pair<Eigen::Index, double>> top_k(const WeightProfile& profile,
                                                   int k);

}  // namespace vaeprobe::oracle
