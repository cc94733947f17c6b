#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vaeprobe/common.hpp"
#include "vaeprobe/mnist.hpp"
#include "vaeprobe/vae.hpp"

namespace vaeprobe::sweep {

/// Architecture family for one capacity study. Every cell shares the base
/// hyperparameters; per-cell seeds derive from the sweep seed.
struct SweepConfig {
  std::vector<vae::VaeSpec> architectures;
  std::string preset_id;  // recorded in outputs, e.g. "paper17-v1"
  int held_out = 9;
  int probe_count = 8;
  std::int64_t subset = -1;  // -1: full training half
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct SweepCell {
  std::string spec_id;
  vae::VaeSpec spec;
  int layer_count = 0;            // hidden layers in the encoder
  std::int64_t parameter_count = 0;  // encoder + decoder
  std::uint64_t cell_seed = 0;
  double bce_input_recon = 0.0;  // means over the shared probe inputs
  double bce_avg_recon = 0.0;
  double perplexity = 0.0;
  bool failed = false;
  std::string error;
  std::string checkpoint_path;
  std::vector<Vec> reconstructions;  // one per probe input
  std::vector<Vec> weighted_avgs;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::vector<std::size_t> probe_indices;  // into the held-out-digit test set
  std::vector<mnist::Image> probe_inputs;
};

/// "paper17": 8 one-hidden-layer widths {25..3200}, 6 three-layer pyramids
/// {w, w/2, w/4}, and 3 constant-width three-layer nets — 17 architectures.
/// "single": just the one-hidden-layer 400 net.
std::vector<vae::VaeSpec> enumerate_configs(const std::string& preset,
                                            const vae::VaeSpec& base);

/// Versioned identifier for a preset ("paper17-v1"); bump when a preset's
/// architecture list changes so sweep outputs are never conflated.
std::string preset_version(const std::string& preset);

std::string spec_id(const vae::VaeSpec& spec);

using CellCallback = std::function<void(const SweepCell&)>;

/// Trains every architecture on the holdout split (per-cell derived seeds),
/// probes each against the same fixed held-out-digit inputs, and — when
/// out_dir is non-empty — writes sweep.csv, montage.pgm, per-cell
/// checkpoints, and a JSON manifest. Cell failures are recorded, not fatal.
SweepResult run_sweep(const SweepConfig& config, const mnist::DatasetSplit& data,
                      const std::string& out_dir,
                      const CellCallback& on_cell = nullptr);

void write_sweep_csv(const SweepConfig& config, const SweepResult& result,
                     const std::string& path);

}  // namespace vaeprobe::sweep
