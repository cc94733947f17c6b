#include "vaeprobe/latent_map.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace vaeprobe::latent_map {

std::vector<PosteriorPoint> posterior_points(const oracle::TrainCache& cache) {
  if (cache.posterior_mean.rows() != 2)
    throw ShapeError("posterior_points: cache latent dimension is not 2");
  std::vector<PosteriorPoint> pts;
  pts.reserve(static_cast<std::size_t>(cache.size()));
  for (Eigen::Index i = 0; i < cache.size(); ++i) {
    PosteriorPoint p;
    p.mean_x = cache.posterior_mean(0, i);
    p.mean_y = cache.posterior_mean(1, i);
    p.std_x = std::exp(0.5 * cache.posterior_log_var(0, i));
    p.std_y = std::exp(0.5 * cache.posterior_log_var(1, i));
    p.label = cache.labels[static_cast<std::size_t>(i)];
    pts.push_back(p);
  }
  return pts;
}

Bounds fit_bounds(const std::vector<PosteriorPoint>& points, double margin) {
  if (points.empty()) throw ConfigError("fit_bounds: no points");
  Bounds b{points[0].mean_x, points[0].mean_x, points[0].mean_y, points[0].mean_y};
  for (const auto& p : points) {
    b.x_min = std::min(b.x_min, p.mean_x);
    b.x_max = std::max(b.x_max, p.mean_x);
    b.y_min = std::min(b.y_min, p.mean_y);
    b.y_max = std::max(b.y_max, p.mean_y);
  }
  auto expand = [margin](double& lo, double& hi) {
    const double size = hi - lo;
    lo -= margin * size;
    hi += margin * size;
    if (hi - lo <= 0.0) {  // degenerate axis
      const double center = 0.5 * (lo + hi);
      lo = center - 1.0;
      hi = center + 1.0;
    }
  };
  expand(b.x_min, b.x_max);
  expand(b.y_min, b.y_max);
  return b;
}

namespace {

double lerp_index(double lo, double hi, int idx, int count) {
  if (count <= 1) return 0.5 * (lo + hi);
  return lo + (hi - lo) * static_cast<double>(idx) / (count - 1);
}

}  // namespace

std::pair<double, double> LatentGrid::cell_to_latent(int row, int col) const {
  const double x = lerp_index(spec.bounds.x_min, spec.bounds.x_max, col, spec.cols);
  const double y = lerp_index(spec.bounds.y_max, spec.bounds.y_min, row, spec.rows);
  return {x, y};
}

std::pair<double, double> LatentGrid::latent_to_cell(double z_x, double z_y) const {
  const double col = spec.cols <= 1
                         ? 0.0
                         : (z_x - spec.bounds.x_min) /
                               (spec.bounds.x_max - spec.bounds.x_min) *
                               (spec.cols - 1);
  const double row = spec.rows <= 1
                         ? 0.0
                         : (spec.bounds.y_max - z_y) /
                               (spec.bounds.y_max - spec.bounds.y_min) *
                               (spec.rows - 1);
  return {row, col};
}

LatentGrid grid_max_weight(const vae::VaeModel& model,
                           const oracle::TrainCache& cache,
                           const GridSpec& spec) {
  if (model.spec.latent_dim != 2)
    throw ShapeError("grid_max_weight: model latent dimension is " +
                     std::to_string(model.spec.latent_dim) + ", need 2");
  if (cache.model_id != oracle::model_id(model))
    throw ConfigError("grid_max_weight: cache was built from a different model");
  if (spec.rows < 1 || spec.cols < 1)
    throw ConfigError("grid_max_weight: grid resolution must be positive");
  if (!(spec.bounds.x_min < spec.bounds.x_max) ||
      !(spec.bounds.y_min < spec.bounds.y_max))
    throw ConfigError("grid_max_weight: bounds must have min < max per axis");

  LatentGrid grid;
  grid.spec = spec;
  grid.values.resize(spec.rows, spec.cols);
  Vec z(2);
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      const auto [x, y] = grid.cell_to_latent(r, c);
      z(0) = x;
      z(1) = y;
      const oracle::WeightProfile profile = oracle::compute_weights(z, cache);
      grid.values(r, c) = profile.weights.maxCoeff();
    }
  }
  return grid;
}

StratifiedDecode stratified_decode(const vae::VaeModel& model,
                                   const oracle::TrainCache& cache,
                                   const LatentGrid& grid,
                                   const std::vector<WeightBand>& bands,
                                   int per_stratum, std::uint64_t seed) {
  if (per_stratum < 0) throw ConfigError("stratified_decode: negative count");
  StratifiedDecode out;
  if (per_stratum == 0) return out;

  for (std::size_t band_idx = 0; band_idx < bands.size(); ++band_idx) {
    const WeightBand& band = bands[band_idx];
    std::vector<std::pair<int, int>> members;
    for (int r = 0; r < grid.spec.rows; ++r)
      for (int c = 0; c < grid.spec.cols; ++c) {
        const double v = grid.values(r, c);
        if (v > band.lo && v <= band.hi) members.emplace_back(r, c);
      }
    if (members.empty()) {
      out.empty_bands.push_back(static_cast<int>(band_idx));
      continue;
    }
    std::mt19937_64 rng(mix_seed(seed, band_idx));
    const int take = static_cast<int>(
        std::min<std::size_t>(members.size(), static_cast<std::size_t>(per_stratum)));
    for (int k = 0; k < take; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, members.size() - 1);
      std::swap(members[static_cast<std::size_t>(k)], members[pick(rng)]);
      const auto [r, c] = members[static_cast<std::size_t>(k)];
      StratumSample s;
      s.band = static_cast<int>(band_idx);
      const auto [x, y] = grid.cell_to_latent(r, c);
      s.z_x = x;
      s.z_y = y;
      s.max_weight = grid.values(r, c);
      Vec z(2);
      z << x, y;
      s.decoded = vae::decode(model, z);
      const oracle::WeightProfile profile = oracle::compute_weights(z, cache);
      const auto top = oracle::top_k(profile, 1);
      s.top1_index = top[0].first;
      s.top1_weight = top[0].second;
      s.perplexity = oracle::perplexity(profile);
      out.samples.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace vaeprobe::latent_map
