#include "vaeprobe/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vaeprobe::oracle {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)
constexpr double kWeightFlushThreshold = 1e-300;

std::uint64_t hash_net(const nn::DenseNet& net, std::uint64_t h) {
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    h = fnv1a_u64(static_cast<std::uint64_t>(net.layers[l].input_width), h);
    h = fnv1a_u64(static_cast<std::uint64_t>(net.layers[l].output_width), h);
    h = fnv1a(net.weights[l].data(),
              sizeof(double) * static_cast<std::size_t>(net.weights[l].size()), h);
    h = fnv1a(net.biases[l].data(),
              sizeof(double) * static_cast<std::size_t>(net.biases[l].size()), h);
  }
  return h;
}

}  // namespace

std::uint64_t model_id(const vae::VaeModel& model) {
  std::uint64_t h = fnv1a_u64(static_cast<std::uint64_t>(model.spec.latent_dim),
                              0xcbf29ce484222325ULL);
  h = hash_net(model.encoder, h);
  h = hash_net(model.decoder, h);
  return h;
}

TrainCache build_cache(const vae::VaeModel& model,
                       const std::vector<mnist::Image>& train_set) {
  if (train_set.empty()) throw ConfigError("build_cache: empty training set");
  const std::uint64_t set_id = mnist::dataset_id(train_set);
  if (model.train_set_id != 0 && model.train_set_id != set_id)
    throw ConfigError(
        "build_cache: training set does not match the model's train_set_id");

  const int k = model.spec.latent_dim;
  const auto n = static_cast<Eigen::Index>(train_set.size());
  TrainCache cache;
  cache.posterior_mean.resize(k, n);
  cache.posterior_log_var.resize(k, n);
  cache.pixels.resize(mnist::kImagePixels, n);
  cache.labels.reserve(train_set.size());

  // Encode in batches; one forward pass over the whole set.
  constexpr Eigen::Index kBatch = 512;
  for (Eigen::Index start = 0; start < n; start += kBatch) {
    const Eigen::Index b = std::min(kBatch, n - start);
    Mat block(mnist::kImagePixels, b);
    for (Eigen::Index j = 0; j < b; ++j)
      block.col(j) = train_set[static_cast<std::size_t>(start + j)].pixels;
    const Mat h = nn::forward(model.encoder, block);
    cache.posterior_mean.middleCols(start, b) = h.topRows(k);
    cache.posterior_log_var.middleCols(start, b) = h.bottomRows(k);
    cache.pixels.middleCols(start, b) = block;
  }
  for (const auto& im : train_set) cache.labels.push_back(im.label);

  cache.inv_var = (-cache.posterior_log_var.array()).exp().matrix();
  cache.log_det_term = cache.posterior_log_var.colwise().sum();
  cache.model_id = model_id(model);
  cache.train_set_id = set_id;
  return cache;
}

TrainCache cache_from_posteriors(Mat means, Mat log_vars, Mat pixels,
                                 std::vector<int> labels) {
  if (means.rows() != log_vars.rows() || means.cols() != log_vars.cols())
    throw ShapeError("cache_from_posteriors: mean/log-variance shape mismatch");
  TrainCache cache;
  cache.inv_var = (-log_vars.array()).exp().matrix();
  cache.log_det_term = log_vars.colwise().sum();
  cache.posterior_mean = std::move(means);
  cache.posterior_log_var = std::move(log_vars);
  cache.pixels = std::move(pixels);
  cache.labels = std::move(labels);
  return cache;
}

double gaussian_log_density(const Vec& z, const vae::GaussianPosterior& post) {
  if (z.size() != post.mean.size())
    throw ShapeError("gaussian_log_density: dimension mismatch");
  const auto diff = (z - post.mean).array();
  return -0.5 * (static_cast<double>(z.size()) * kLog2Pi +
                 post.log_variance.sum() +
                 (diff.square() * (-post.log_variance.array()).exp()).sum());
}

WeightProfile compute_weights(const Vec& z, const TrainCache& cache) {
  const Eigen::Index n = cache.size();
  if (n < 1) throw ConfigError("compute_weights: empty cache");
  if (z.size() != cache.posterior_mean.rows())
    throw ShapeError("compute_weights: z dimension mismatch");

  const double dim_term = static_cast<double>(z.size()) * kLog2Pi;
  Vec log_density =
      -0.5 *
      ((((-cache.posterior_mean).colwise() + z).array().square() *
        cache.inv_var.array())
           .colwise()
           .sum()
           .transpose()
           .matrix() +
       cache.log_det_term + Vec::Constant(n, dim_term));

  const double shift = log_density.maxCoeff();
  if (!std::isfinite(shift))
    throw NumericError("compute_weights: non-finite log density");

  // Fixed sequential order keeps the reduction reproducible.
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) sum += std::exp(log_density(i) - shift);
  const double log_norm = shift + std::log(sum);

  WeightProfile profile;
  profile.log_weights = log_density.array() - log_norm;
  profile.weights = profile.log_weights.array().exp();
  for (Eigen::Index i = 0; i < n; ++i)
    if (profile.weights(i) < kWeightFlushThreshold) profile.weights(i) = 0.0;
  profile.source_z = z;
  profile.train_set_id = cache.train_set_id;
  return profile;
}

Vec weighted_average(const WeightProfile& profile, const Mat& pixels) {
  if (pixels.cols() != profile.weights.size())
    throw ShapeError("weighted_average: image count mismatch");
  return pixels * profile.weights;
}

double perplexity(const WeightProfile& profile) {
  double entropy = 0.0;
  for (Eigen::Index i = 0; i < profile.weights.size(); ++i) {
    const double w = profile.weights(i);
    if (w > 0.0) entropy -= w * profile.log_weights(i);
  }
  const double p = std::exp(entropy);
  return std::clamp(p, 1.0, static_cast<double>(profile.weights.size()));
}

std::vector<std::pair<Eigen::Index, double>> top_k(const WeightProfile& profile,
                                                   int k) {
  const Eigen::Index n = profile.weights.size();
  if (k < 1 || k > n)
    throw ConfigError("top_k: k = " + std::to_string(k) +
                      " out of range for N = " + std::to_string(n));
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(),
                    [&](Eigen::Index a, Eigen::Index b) {
                      if (profile.weights(a) != profile.weights(b))
                        return profile.weights(a) > profile.weights(b);
                      return a < b;
                    });
  std::vector<std::pair<Eigen::Index, double>> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) out.emplace_back(idx[i], profile.weights(idx[i]));
  return out;
}

}  // namespace vaeprobe::oracle
