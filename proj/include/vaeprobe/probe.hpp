#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vaeprobe/common.hpp"
#include "vaeprobe/mnist.hpp"
#include "vaeprobe/oracle.hpp"
#include "vaeprobe/vae.hpp"

namespace vaeprobe::probe {

enum class ZMode { kMean, kSample };

/// Everything the evaluation records about one test example: latent code,
/// decoder output, Theorem-style weighted average, the two BCE comparisons,
/// and the dominant training neighbors.
struct ProbeResult {
  mnist::Image input;
  Vec z;
  Vec reconstruction;   // decoder Bernoulli means
  Vec weighted_avg;
  double bce_input_recon = 0.0;  // BCE(input, reconstruction)
  double bce_avg_recon = 0.0;    // BCE(weighted_avg, reconstruction)
  double perplexity = 0.0;
  std::vector<std::pair<Eigen::Index, double>> top3;
};

/// Integer-width perplexity bins [1,2), [2,3), ..., [19,20), then overflow.
struct PerplexityHistogram {
  static constexpr int kBins = 20;
  std::array<std::int64_t, kBins> counts{};

  void add(double perplexity);
  std::int64_t total() const;
  /// Index of the most populated bin (ties toward the lower bin).
  int modal_bin() const;
};

struct ProbeSummary {
  std::vector<ProbeResult> results;
  PerplexityHistogram histogram;
  double fraction_recon_closer_to_input = 0.0;
};

/// Encodes x (mean or sampled z), decodes, and evaluates the oracle at the
/// same z. The cache must have been built from this model (identifier check).
ProbeResult probe_example(const vae::VaeModel& model,
                          const oracle::TrainCache& cache,
                          const mnist::Image& input, ZMode z_mode,
                          std::uint64_t sample_seed = 0);

ProbeSummary probe_dataset(const vae::VaeModel& model,
                           const oracle::TrainCache& cache,
                           const std::vector<mnist::Image>& test_set,
                           ZMode z_mode, std::uint64_t sample_seed = 0);

/// Per-example CSV; the summary aggregates are recomputable from these rows.
void write_probe_csv(const ProbeSummary& summary, const std::string& path);

}  // namespace vaeprobe::probe
