#include "vaeprobe/probe.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "vaeprobe/render.hpp"

namespace vaeprobe::probe {

void PerplexityHistogram::add(double perplexity) {
  int bin = static_cast<int>(std::floor(perplexity)) - 1;
  bin = std::clamp(bin, 0, kBins - 1);
  counts[static_cast<std::size_t>(bin)] += 1;
}

std::int64_t PerplexityHistogram::total() const {
  std::int64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

int PerplexityHistogram::modal_bin() const {
  int best = 0;
  for (int i = 1; i < kBins; ++i)
    if (counts[static_cast<std::size_t>(i)] > counts[static_cast<std::size_t>(best)])
      best = i;
  return best;
}

ProbeResult probe_example(const vae::VaeModel& model,
                          const oracle::TrainCache& cache,
                          const mnist::Image& input, ZMode z_mode,
                          std::uint64_t sample_seed) {
  if (cache.model_id != oracle::model_id(model))
    throw ConfigError("probe_example: cache was built from a different model");

  ProbeResult r;
  r.input = input;
  const vae::GaussianPosterior post = vae::encode(model, input.pixels);
  if (z_mode == ZMode::kMean) {
    r.z = post.mean;
  } else {
    std::mt19937_64 rng(sample_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vec noise(post.mean.size());
    for (Eigen::Index d = 0; d < noise.size(); ++d) noise(d) = normal(rng);
    r.z = vae::reparameterize(post, noise);
  }

  const Vec logits = vae::decode_logits(model, r.z);
  r.reconstruction = (1.0 / (1.0 + (-logits.array()).exp())).matrix();

  const oracle::WeightProfile profile = oracle::compute_weights(r.z, cache);
  r.weighted_avg = oracle::weighted_average(profile, cache.pixels);
  r.perplexity = oracle::perplexity(profile);
  r.top3 = oracle::top_k(profile, static_cast<int>(std::min<Eigen::Index>(3, cache.size())));

  r.bce_input_recon = vae::bce_from_logits(input.pixels, logits);
  r.bce_avg_recon = vae::bce_from_logits(r.weighted_avg, logits);
  return r;
}

ProbeSummary probe_dataset(const vae::VaeModel& model,
                           const oracle::TrainCache& cache,
                           const std::vector<mnist::Image>& test_set,
                           ZMode z_mode, std::uint64_t sample_seed) {
  if (test_set.empty()) throw ConfigError("probe_dataset: empty test set");
  ProbeSummary summary;
  summary.results.reserve(test_set.size());
  std::int64_t closer_to_input = 0;
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    ProbeResult r = probe_example(model, cache, test_set[i], z_mode,
                                  mix_seed(sample_seed, i));
    summary.histogram.add(r.perplexity);
    if (r.bce_input_recon < r.bce_avg_recon) ++closer_to_input;
    summary.results.push_back(std::move(r));
  }
  summary.fraction_recon_closer_to_input =
      static_cast<double>(closer_to_input) /
      static_cast<double>(summary.results.size());
  return summary;
}

void write_probe_csv(const ProbeSummary& summary, const std::string& path) {
  render::CsvWriter csv(path);
  csv.header({"test_index", "label", "bce_input_recon", "bce_avg_recon",
              "perplexity", "top1_index", "top1_weight", "top2_index",
              "top2_weight", "top3_index", "top3_weight"});
  for (std::size_t i = 0; i < summary.results.size(); ++i) {
    const ProbeResult& r = summary.results[i];
    csv.field(static_cast<std::int64_t>(i));
    csv.field(static_cast<std::int64_t>(r.input.label));
    csv.field(r.bce_input_recon);
    csv.field(r.bce_avg_recon);
    csv.field(r.perplexity);
    for (int t = 0; t < 3; ++t) {
      if (t < static_cast<int>(r.top3.size())) {
        csv.field(static_cast<std::int64_t>(r.top3[static_cast<std::size_t>(t)].first));
        csv.field(r.top3[static_cast<std::size_t>(t)].second);
      } else {
        csv.field(static_cast<std::int64_t>(-1));
        csv.field(0.0);
      }
    }
    csv.end_row();
  }
}

}  // namespace vaeprobe::probe
