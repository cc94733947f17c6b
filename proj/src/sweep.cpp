#include "vaeprobe/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <thread>

#include <json.hpp>

#include "vaeprobe/oracle.hpp"
#include "vaeprobe/probe.hpp"
#include "vaeprobe/render.hpp"

namespace vaeprobe::sweep {

namespace fs = std::filesystem;

std::vector<vae::VaeSpec> enumerate_configs(const std::string& preset,
                                            const vae::VaeSpec& base) {
  auto with_hidden = [&base](std::vector<int> enc) {
    vae::VaeSpec s = base;
    std::vector<int> dec(enc.rbegin(), enc.rend());
    s.encoder_hidden = std::move(enc);
    s.decoder_hidden = std::move(dec);
    return s;
  };

  if (preset == "single") return {with_hidden({400})};

  if (preset == "paper17") {
    std::vector<vae::VaeSpec> specs;
    for (int w : {25, 50, 100, 200, 400, 800, 1600, 3200})
      specs.push_back(with_hidden({w}));
    for (int w : {100, 200, 400, 800, 1600, 3200})
      specs.push_back(with_hidden({w, w / 2, w / 4}));
    for (int w : {400, 800, 1600})
      specs.push_back(with_hidden({w, w, w}));
    return specs;
  }
  throw ConfigError("unknown sweep preset: " + preset);
}

std::string preset_version(const std::string& preset) {
  if (preset == "paper17" || preset == "single") return preset + "-v1";
  throw ConfigError("unknown sweep preset: " + preset);
}

std::string spec_id(const vae::VaeSpec& spec) {
  std::string id = "h";
  for (std::size_t i = 0; i < spec.encoder_hidden.size(); ++i) {
    if (i) id += "-";
    id += std::to_string(spec.encoder_hidden[i]);
  }
  return id;
}

namespace {

SweepCell run_cell(const vae::VaeSpec& spec, std::uint64_t cell_seed,
                   const std::vector<mnist::Image>& train_set,
                   const std::vector<mnist::Image>& probe_inputs,
                   int held_out, std::int64_t subset,
                   const std::string& checkpoint_path) {
  SweepCell cell;
  cell.spec = spec;
  cell.spec.seed = cell_seed;
  cell.spec_id = spec_id(spec);
  cell.layer_count = static_cast<int>(spec.encoder_hidden.size());
  cell.cell_seed = cell_seed;
  cell.parameter_count =
      nn::parameter_count(nn::chain_layers(mnist::kImagePixels, spec.encoder_hidden,
                                           2 * spec.latent_dim)) +
      nn::parameter_count(nn::chain_layers(spec.latent_dim, spec.decoder_hidden,
                                           mnist::kImagePixels));

  vae::TrainResult trained = vae::train(cell.spec, train_set);
  trained.model.held_out = held_out;
  trained.model.subset = subset;

  const oracle::TrainCache cache = oracle::build_cache(trained.model, train_set);
  double bce_in = 0.0, bce_avg = 0.0, perp = 0.0;
  for (const auto& input : probe_inputs) {
    const probe::ProbeResult r =
        probe::probe_example(trained.model, cache, input, probe::ZMode::kMean);
    bce_in += r.bce_input_recon;
    bce_avg += r.bce_avg_recon;
    perp += r.perplexity;
    cell.reconstructions.push_back(r.reconstruction);
    cell.weighted_avgs.push_back(r.weighted_avg);
  }
  const double count = static_cast<double>(probe_inputs.size());
  cell.bce_input_recon = bce_in / count;
  cell.bce_avg_recon = bce_avg / count;
  cell.perplexity = perp / count;

  if (!checkpoint_path.empty()) {
    vae::save_checkpoint(trained.model, checkpoint_path);
    cell.checkpoint_path = checkpoint_path;
  }
  return cell;
}

render::ImageGrid montage_grid(const SweepResult& result) {
  const int cols = static_cast<int>(result.probe_inputs.size());
  const int num_cells = static_cast<int>(result.cells.size());
  render::ImageGrid grid;
  grid.rows = 1 + 2 * num_cells;
  grid.cols = cols;
  grid.tiles.reserve(static_cast<std::size_t>(grid.rows) * cols);
  for (const auto& im : result.probe_inputs) grid.tiles.push_back(im.pixels);
  const Vec blank = Vec::Zero(mnist::kImagePixels);
  for (const auto& cell : result.cells)
    for (int c = 0; c < cols; ++c)
      grid.tiles.push_back(cell.failed ? blank
                                       : cell.reconstructions[static_cast<std::size_t>(c)]);
  for (const auto& cell : result.cells)
    for (int c = 0; c < cols; ++c)
      grid.tiles.push_back(cell.failed ? blank
                                       : cell.weighted_avgs[static_cast<std::size_t>(c)]);
  return grid;
}

}  // namespace

void write_sweep_csv(const SweepConfig& config, const SweepResult& result,
                     const std::string& path) {
  render::CsvWriter csv(path);
  csv.header({"spec_id", "preset", "encoder_hidden", "decoder_hidden",
              "latent_dim", "layer_count", "parameter_count", "cell_seed",
              "learning_rate", "beta1", "beta2", "epsilon", "batch_size",
              "epochs", "subset", "held_out", "probe_count", "bce_input_recon",
              "bce_avg_recon", "perplexity", "status", "checkpoint"});
  auto widths = [](const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += "-";
      s += std::to_string(v[i]);
    }
    return s;
  };
  for (const auto& cell : result.cells) {
    csv.field(cell.spec_id);
    csv.field(config.preset_id);
    csv.field(widths(cell.spec.encoder_hidden));
    csv.field(widths(cell.spec.decoder_hidden));
    csv.field(static_cast<std::int64_t>(cell.spec.latent_dim));
    csv.field(static_cast<std::int64_t>(cell.layer_count));
    csv.field(cell.parameter_count);
    csv.field(static_cast<std::int64_t>(cell.cell_seed));
    csv.field(cell.spec.adam.learning_rate);
    csv.field(cell.spec.adam.beta1);
    csv.field(cell.spec.adam.beta2);
    csv.field(cell.spec.adam.epsilon);
    csv.field(static_cast<std::int64_t>(cell.spec.batch_size));
    csv.field(static_cast<std::int64_t>(cell.spec.epochs));
    csv.field(config.subset);
    csv.field(static_cast<std::int64_t>(config.held_out));
    csv.field(static_cast<std::int64_t>(config.probe_count));
    csv.field(cell.bce_input_recon);
    csv.field(cell.bce_avg_recon);
    csv.field(cell.perplexity);
    csv.field(cell.failed ? ("error: " + cell.error) : std::string("ok"));
    csv.field(cell.checkpoint_path);
    csv.end_row();
  }
}

SweepResult run_sweep(const SweepConfig& config, const mnist::DatasetSplit& data,
                      const std::string& out_dir, const CellCallback& on_cell) {
  if (config.architectures.empty())
    throw ConfigError("run_sweep: no architectures");
  if (config.probe_count < 1) throw ConfigError("run_sweep: probe_count < 1");
  if (data.descriptor.held_out != config.held_out)
    throw ConfigError("run_sweep: data partition held_out=" +
                      std::to_string(data.descriptor.held_out) +
                      " does not match config held_out=" +
                      std::to_string(config.held_out));

  const std::vector<mnist::Image> digit_test =
      mnist::select_digit(data.test, config.held_out);
  if (digit_test.empty())
    throw ConfigError("run_sweep: test set has no images of digit " +
                      std::to_string(config.held_out));

  SweepResult result;
  // One fixed probe panel for every cell.
  {
    std::vector<std::size_t> idx(digit_test.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::mt19937_64 rng(mix_seed(config.seed, 0x9805e));
    const std::size_t take =
        std::min<std::size_t>(static_cast<std::size_t>(config.probe_count), idx.size());
    for (std::size_t k = 0; k < take; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, idx.size() - 1);
      std::swap(idx[k], idx[pick(rng)]);
      result.probe_indices.push_back(idx[k]);
      result.probe_inputs.push_back(digit_test[idx[k]]);
    }
  }

  const std::vector<mnist::Image> train_set =
      mnist::training_subset(data.train, config.subset, config.seed);

  std::string checkpoint_dir;
  if (!out_dir.empty()) {
    checkpoint_dir = (fs::path(out_dir) / "checkpoints").string();
    fs::create_directories(checkpoint_dir);
  }

  const std::size_t num_cells = config.architectures.size();
  result.cells.resize(num_cells);
  std::atomic<std::size_t> next{0};
  std::mutex callback_mutex;

  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= num_cells) return;
      const vae::VaeSpec& spec = config.architectures[i];
      const std::uint64_t cell_seed = mix_seed(config.seed, i);
      const std::string ckpt =
          checkpoint_dir.empty()
              ? std::string()
              : (fs::path(checkpoint_dir) / (spec_id(spec) + ".vaec")).string();
      SweepCell cell;
      try {
        cell = run_cell(spec, cell_seed, train_set, result.probe_inputs,
                        config.held_out, config.subset, ckpt);
      } catch (const std::exception& e) {
        cell.spec = spec;
        cell.spec.seed = cell_seed;
        cell.spec_id = spec_id(spec);
        cell.layer_count = static_cast<int>(spec.encoder_hidden.size());
        cell.cell_seed = cell_seed;
        cell.failed = true;
        cell.error = e.what();
      }
      {
        std::lock_guard<std::mutex> lock(callback_mutex);
        if (on_cell) on_cell(cell);
      }
      result.cells[i] = std::move(cell);
    }
  };

  const int jobs = std::max(1, std::min<int>(config.jobs, static_cast<int>(num_cells)));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(jobs));
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_sweep_csv(config, result, (fs::path(out_dir) / "sweep.csv").string());
    render::write_pgm(montage_grid(result),
                      (fs::path(out_dir) / "montage.pgm").string());

    nlohmann::json manifest;
    manifest["preset"] = config.preset_id;
    manifest["held_out"] = config.held_out;
    manifest["subset"] = config.subset;
    manifest["seed"] = config.seed;
    manifest["probe_count"] = config.probe_count;
    manifest["probe_indices"] = result.probe_indices;
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& cell : result.cells) {
      cells.push_back({{"spec_id", cell.spec_id},
                       {"cell_seed", cell.cell_seed},
                       {"checkpoint", cell.checkpoint_path},
                       {"status", cell.failed ? cell.error : "ok"}});
    }
    manifest["cells"] = cells;
    std::ofstream f((fs::path(out_dir) / "sweep_manifest.json").string());
    if (!f) throw IoError("cannot write sweep manifest");
    f << manifest.dump(2) << "\n";
  }
  return result;
}

}  // namespace vaeprobe::sweep
