#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "vaeprobe/common.hpp"
#include "vaeprobe/oracle.hpp"
#include "vaeprobe/vae.hpp"

namespace vaeprobe::latent_map {

struct Bounds {
  double x_min = 0, x_max = 0, y_min = 0, y_max = 0;
};

struct PosteriorPoint {
  double mean_x = 0, mean_y = 0;
  double std_x = 0, std_y = 0;
  int label = 0;
};

/// The 2-D posteriors of every cached training image (latent_dim must be 2).
std::vector<PosteriorPoint> posterior_points(const oracle::TrainCache& cache);

/// Axis-aligned bounding box of the posterior means, expanded per side by
/// margin * (box size on that axis). A degenerate axis expands to half-width
/// 1.0 around its center.
Bounds fit_bounds(const std::vector<PosteriorPoint>& points, double margin);

struct GridSpec {
  Bounds bounds;
  int rows = 200;
  int cols = 200;
};

/// rows x cols samples of max_i w_i(z). Row 0 is the top of the rendered
/// heatmap (largest y); columns run left to right (smallest to largest x).
struct LatentGrid {
  GridSpec spec;
  Mat values;  // rows x cols

  /// Latent coordinates of a cell center.
  std::pair<double, double> cell_to_latent(int row, int col) const;
  /// Inverse of cell_to_latent, as fractional indices.
  std::pair<double, double> latent_to_cell(double z_x, double z_y) const;
};

LatentGrid grid_max_weight(const vae::VaeModel& model,
                           const oracle::TrainCache& cache,
                           const GridSpec& spec);

struct WeightBand {
  double lo = 0, hi = 1;  // covers (lo, hi]
};

struct StratumSample {
  int band = 0;
  double z_x = 0, z_y = 0;
  double max_weight = 0;
  Vec decoded;  // 784 Bernoulli means
  Eigen::Index top1_index = -1;
  double top1_weight = 0;
  double perplexity = 0;
};

struct StratifiedDecode {
  std::vector<StratumSample> samples;
  std::vector<int> empty_bands;  // bands with no grid points, skipped
};

inline std::vector<WeightBand> default_bands() {
  return {{0.0, 0.5}, {0.5, 0.9}, {0.9, 1.0}};
}

/// Samples per_stratum grid points uniformly (without replacement, seeded)
/// from each max-weight band and decodes their cell centers.
StratifiedDecode stratified_decode(const vae::VaeModel& model,
                                   const oracle::TrainCache& cache,
                                   const LatentGrid& grid,
                                   const std::vector<WeightBand>& bands,
                                   int per_stratum, std::uint64_t seed);

}  // namespace vaeprobe::latent_map
