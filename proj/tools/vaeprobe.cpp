// vaeprobe: train small MLP VAEs on MNIST-format data and probe how closely
// their decoders track the latent-proximity weighted average of the training
// images. Subcommands map one-to-one onto experiment stages; everything
// composes through files (IDX datasets, VAEC checkpoints, CSV/PGM outputs)
// so runs are scriptable and reproducible.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vaeprobe/latent_map.hpp"
#include "vaeprobe/mnist.hpp"
#include "vaeprobe/oracle.hpp"
#include "vaeprobe/probe.hpp"
#include "vaeprobe/render.hpp"
#include "vaeprobe/sweep.hpp"
#include "vaeprobe/vae.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vaeprobe;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<char> bytes{std::istreambuf_iterator<char>(in),
                          std::istreambuf_iterator<char>()};
  return fnv1a(bytes.data(), bytes.size());
}

/// Run provenance: resolved flags, input digests, output list. Written last.
class Manifest {
 public:
  explicit Manifest(std::string subcommand) {
    j_["toolkit_version"] = kToolkitVersion;
    j_["subcommand"] = std::move(subcommand);
    j_["flags"] = json::object();
    j_["inputs"] = json::array();
    j_["outputs"] = json::array();
  }

  template <typename T>
  void flag(const std::string& name, const T& value) {
    j_["flags"][name] = value;
  }
  void input(const std::string& path) {
    j_["inputs"].push_back({{"path", path}, {"fnv1a64", hex64(file_digest(path))}});
  }
  void output(const std::string& path) { j_["outputs"].push_back(path); }
  void extra(const std::string& key, const json& value) { j_[key] = value; }

  void write(const std::string& path) {
    j_["outputs"].push_back(path);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j_.dump(2) << "\n";
  }

 private:
  json j_;
};

int parse_holdout(const std::string& s) {
  if (s == "none") return -1;
  const int d = std::stoi(s);
  if (d < 0 || d > 9) throw ConfigError("--holdout must be a digit or 'none'");
  return d;
}

std::int64_t parse_subset(const std::string& s) {
  if (s == "full") return -1;
  const std::int64_t n = std::stoll(s);
  if (n < 1) throw ConfigError("--subset must be a positive count or 'full'");
  return n;
}

std::vector<int> parse_arch(const std::string& s) {
  if (s == "shallow") return {400};
  if (s == "deep") return {400, 200, 100};
  std::vector<int> widths;
  std::string token;
  std::stringstream ss(s);
  while (std::getline(ss, token, ',')) {
    const int w = std::stoi(token);
    if (w < 1) throw ConfigError("--arch widths must be >= 1");
    widths.push_back(w);
  }
  if (widths.empty()) throw ConfigError("--arch has no widths");
  return widths;
}

std::pair<int, int> parse_grid(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw ConfigError("--grid must look like 200x200");
  const int rows = std::stoi(s.substr(0, x));
  const int cols = std::stoi(s.substr(x + 1));
  if (rows < 1 || cols < 1) throw ConfigError("--grid must be positive");
  return {rows, cols};
}

struct DataFlags {
  std::string train_images, train_labels, test_images, test_labels;
};

void add_train_flags(CLI::App* cmd, DataFlags& data) {
  cmd->add_option("--train-images", data.train_images, "IDX image file (magic 2051)")
      ->required();
  cmd->add_option("--train-labels", data.train_labels, "IDX label file (magic 2049)")
      ->required();
}

void add_test_flags(CLI::App* cmd, DataFlags& data) {
  cmd->add_option("--test-images", data.test_images, "IDX image file for probing")
      ->required();
  cmd->add_option("--test-labels", data.test_labels, "IDX label file for probing")
      ->required();
}

/// Rebuilds the exact training set a checkpoint was fitted on.
std::vector<mnist::Image> derive_train_set(const vae::VaeModel& model,
                                           const DataFlags& data) {
  auto all_train = mnist::load_idx(data.train_images, data.train_labels);
  auto split = mnist::partition(std::move(all_train), {}, model.held_out);
  return mnist::training_subset(split.train, model.subset, model.spec.seed);
}

render::ImageGrid probe_gallery(const probe::ProbeSummary& summary,
                                const oracle::TrainCache& cache,
                                const std::vector<std::size_t>& picks) {
  render::ImageGrid grid;
  grid.rows = 6;  // input, reconstruction, weighted average, top-3 neighbors
  grid.cols = static_cast<int>(picks.size());
  grid.tiles.resize(static_cast<std::size_t>(grid.rows) * grid.cols);
  for (std::size_t c = 0; c < picks.size(); ++c) {
    const probe::ProbeResult& r = summary.results[picks[c]];
    grid.tiles[c] = r.input.pixels;
    grid.tiles[picks.size() + c] = r.reconstruction;
    grid.tiles[2 * picks.size() + c] = r.weighted_avg;
    for (std::size_t t = 0; t < 3; ++t) {
      const Vec neighbor =
          t < r.top3.size() ? Vec(cache.pixels.col(r.top3[t].first))
                            : Vec(Vec::Zero(mnist::kImagePixels));
      grid.tiles[(3 + t) * picks.size() + c] = neighbor;
    }
  }
  return grid;
}

json histogram_json(const probe::PerplexityHistogram& hist) {
  json bins = json::array();
  for (int b = 0; b < probe::PerplexityHistogram::kBins; ++b) {
    const bool overflow = b == probe::PerplexityHistogram::kBins - 1;
    bins.push_back({{"lo", b + 1},
                    {"hi", overflow ? json() : json(b + 2)},
                    {"count", hist.counts[static_cast<std::size_t>(b)]}});
  }
  return bins;
}

// ---------------------------------------------------------------------------

int cmd_train(const DataFlags& data, const std::string& holdout_str,
              const std::string& arch_str, int latent_dim, int epochs, int batch,
              double lr, std::uint64_t seed, const std::string& subset_str,
              const std::string& out_dir, bool quiet) {
  const int holdout = parse_holdout(holdout_str);
  const std::int64_t subset = parse_subset(subset_str);
  const auto enc_hidden = parse_arch(arch_str);

  fs::create_directories(out_dir);
  Manifest manifest("train");
  manifest.input(data.train_images);
  manifest.input(data.train_labels);
  manifest.flag("train-images", data.train_images);
  manifest.flag("train-labels", data.train_labels);
  manifest.flag("holdout", holdout_str);
  manifest.flag("arch", arch_str);
  manifest.flag("latent-dim", latent_dim);
  manifest.flag("epochs", epochs);
  manifest.flag("batch", batch);
  manifest.flag("lr", lr);
  manifest.flag("seed", seed);
  manifest.flag("subset", subset_str);
  manifest.flag("out", out_dir);

  auto all_train = mnist::load_idx(data.train_images, data.train_labels);
  auto split = mnist::partition(std::move(all_train), {}, holdout);
  const auto train_set = mnist::training_subset(split.train, subset, seed);

  vae::VaeSpec spec;
  spec.latent_dim = latent_dim;
  spec.encoder_hidden = enc_hidden;
  spec.decoder_hidden = std::vector<int>(enc_hidden.rbegin(), enc_hidden.rend());
  spec.seed = seed;
  spec.epochs = epochs;
  spec.batch_size = batch;
  spec.adam.learning_rate = lr;

  auto trained = vae::train(spec, train_set, [&](int epoch, const vae::ElboTerms& t) {
    if (!quiet)
      std::fprintf(stderr, "epoch %d  recon_bce %.3f  kl %.3f  neg_elbo %.3f\n",
                   epoch, t.reconstruction_bce, t.kl, t.negative_elbo());
  });
  trained.model.held_out = holdout;
  trained.model.subset = subset;

  const std::string ckpt = (fs::path(out_dir) / "model.vaec").string();
  const std::string history = (fs::path(out_dir) / "history.csv").string();
  vae::save_checkpoint(trained.model, ckpt);
  vae::write_history_csv(trained.history, history);
  manifest.output(ckpt);
  manifest.output(history);
  manifest.extra("train_set_id", hex64(trained.model.train_set_id));
  manifest.extra("train_set_size", train_set.size());
  manifest.write((fs::path(out_dir) / "manifest.json").string());
  return 0;
}

int cmd_probe(const std::string& checkpoint, const DataFlags& data,
              const std::string& test_digit, const std::string& z_mode_str,
              std::uint64_t sample_seed, int gallery_count,
              const std::string& out_dir) {
  const auto model = vae::load_checkpoint(checkpoint);
  const probe::ZMode z_mode =
      z_mode_str == "sample" ? probe::ZMode::kSample : probe::ZMode::kMean;

  fs::create_directories(out_dir);
  Manifest manifest("probe");
  manifest.input(checkpoint);
  manifest.input(data.train_images);
  manifest.input(data.train_labels);
  manifest.input(data.test_images);
  manifest.input(data.test_labels);
  manifest.flag("checkpoint", checkpoint);
  manifest.flag("train-images", data.train_images);
  manifest.flag("train-labels", data.train_labels);
  manifest.flag("test-images", data.test_images);
  manifest.flag("test-labels", data.test_labels);
  manifest.flag("test-digit", test_digit);
  manifest.flag("z-mode", z_mode_str);
  manifest.flag("sample-seed", sample_seed);
  manifest.flag("gallery", gallery_count);
  manifest.flag("out", out_dir);

  const auto train_set = derive_train_set(model, data);
  const auto cache = oracle::build_cache(model, train_set);

  auto test_set = mnist::load_idx(data.test_images, data.test_labels);
  if (test_digit != "all") {
    const int d = std::stoi(test_digit);
    if (d < 0 || d > 9) throw ConfigError("--test-digit must be a digit or 'all'");
    test_set = mnist::select_digit(test_set, d);
    if (test_set.empty())
      throw ConfigError("test set has no images of digit " + test_digit);
  }

  const auto summary = probe::probe_dataset(model, cache, test_set, z_mode, sample_seed);

  const std::string csv = (fs::path(out_dir) / "probe.csv").string();
  probe::write_probe_csv(summary, csv);
  manifest.output(csv);

  // Seeded pick of gallery columns.
  std::vector<std::size_t> picks;
  {
    std::vector<std::size_t> idx(summary.results.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::mt19937_64 rng(mix_seed(sample_seed, 0x9a11e57));
    const std::size_t take =
        std::min<std::size_t>(static_cast<std::size_t>(gallery_count), idx.size());
    for (std::size_t k = 0; k < take; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, idx.size() - 1);
      std::swap(idx[k], idx[pick(rng)]);
      picks.push_back(idx[k]);
    }
  }
  const std::string gallery = (fs::path(out_dir) / "gallery.pgm").string();
  render::write_pgm(probe_gallery(summary, cache, picks), gallery);
  manifest.output(gallery);

  json sj;
  sj["examples"] = summary.results.size();
  sj["fraction_recon_closer_to_input"] = summary.fraction_recon_closer_to_input;
  sj["perplexity_histogram"] = histogram_json(summary.histogram);
  sj["gallery_indices"] = picks;
  const std::string summary_path = (fs::path(out_dir) / "summary.json").string();
  std::ofstream sf(summary_path);
  sf << sj.dump(2) << "\n";
  manifest.output(summary_path);

  manifest.write((fs::path(out_dir) / "manifest.json").string());
  std::printf("probed %zu examples: fraction_recon_closer_to_input %.4f\n",
              summary.results.size(), summary.fraction_recon_closer_to_input);
  return 0;
}

int cmd_latent_map(const std::string& checkpoint, const DataFlags& data,
                   const std::string& grid_str, double margin, int per_stratum,
                   std::uint64_t seed, const std::string& out_dir) {
  const auto model = vae::load_checkpoint(checkpoint);
  const auto [rows, cols] = parse_grid(grid_str);

  fs::create_directories(out_dir);
  Manifest manifest("latent-map");
  manifest.input(checkpoint);
  manifest.input(data.train_images);
  manifest.input(data.train_labels);
  manifest.flag("checkpoint", checkpoint);
  manifest.flag("train-images", data.train_images);
  manifest.flag("train-labels", data.train_labels);
  manifest.flag("grid", grid_str);
  manifest.flag("margin", margin);
  manifest.flag("per-stratum", per_stratum);
  manifest.flag("seed", seed);
  manifest.flag("out", out_dir);

  const auto train_set = derive_train_set(model, data);
  const auto cache = oracle::build_cache(model, train_set);
  const auto points = latent_map::posterior_points(cache);

  latent_map::GridSpec gs;
  gs.bounds = latent_map::fit_bounds(points, margin);
  gs.rows = rows;
  gs.cols = cols;
  const auto grid = latent_map::grid_max_weight(model, cache, gs);

  const std::string grid_csv = (fs::path(out_dir) / "grid.csv").string();
  {
    render::CsvWriter csv(grid_csv);
    csv.header({"row", "col", "z_x", "z_y", "max_weight"});
    for (int r = 0; r < gs.rows; ++r)
      for (int c = 0; c < gs.cols; ++c) {
        const auto [x, y] = grid.cell_to_latent(r, c);
        csv.field(static_cast<std::int64_t>(r));
        csv.field(static_cast<std::int64_t>(c));
        csv.field(x);
        csv.field(y);
        csv.field(grid.values(r, c));
        csv.end_row();
      }
  }
  manifest.output(grid_csv);

  const std::string heatmap = (fs::path(out_dir) / "heatmap.pgm").string();
  render::write_heatmap(grid.values, heatmap);
  manifest.output(heatmap);
  manifest.output(heatmap + ".json");

  const std::string scatter = (fs::path(out_dir) / "scatter.csv").string();
  {
    render::CsvWriter csv(scatter);
    csv.header({"mean_x", "mean_y", "std_x", "std_y", "label"});
    for (const auto& p : points) {
      csv.field(p.mean_x);
      csv.field(p.mean_y);
      csv.field(p.std_x);
      csv.field(p.std_y);
      csv.field(static_cast<std::int64_t>(p.label));
      csv.end_row();
    }
  }
  manifest.output(scatter);

  const auto sd = latent_map::stratified_decode(model, cache, grid,
                                                latent_map::default_bands(),
                                                per_stratum, seed);
  const std::string strata_csv = (fs::path(out_dir) / "strata.csv").string();
  {
    render::CsvWriter csv(strata_csv);
    csv.header({"band", "z_x", "z_y", "max_weight", "top1_index", "top1_weight",
                "perplexity"});
    for (const auto& s : sd.samples) {
      csv.field(static_cast<std::int64_t>(s.band));
      csv.field(s.z_x);
      csv.field(s.z_y);
      csv.field(s.max_weight);
      csv.field(static_cast<std::int64_t>(s.top1_index));
      csv.field(s.top1_weight);
      csv.field(s.perplexity);
      csv.end_row();
    }
  }
  manifest.output(strata_csv);

  if (!sd.samples.empty()) {
    render::ImageGrid gallery;
    gallery.cols = per_stratum;
    gallery.rows =
        static_cast<int>((sd.samples.size() + per_stratum - 1) / per_stratum);
    gallery.tiles.assign(static_cast<std::size_t>(gallery.rows) * gallery.cols,
                         Vec::Zero(mnist::kImagePixels));
    for (std::size_t i = 0; i < sd.samples.size(); ++i)
      gallery.tiles[i] = sd.samples[i].decoded;
    const std::string strata_pgm = (fs::path(out_dir) / "strata.pgm").string();
    render::write_pgm(gallery, strata_pgm);
    manifest.output(strata_pgm);
  }
  for (int band : sd.empty_bands)
    std::fprintf(stderr, "note: stratum %d is empty, skipped\n", band);

  manifest.extra("bounds", {{"x_min", gs.bounds.x_min},
                            {"x_max", gs.bounds.x_max},
                            {"y_min", gs.bounds.y_min},
                            {"y_max", gs.bounds.y_max}});
  manifest.extra("empty_bands", sd.empty_bands);
  manifest.write((fs::path(out_dir) / "manifest.json").string());
  return 0;
}

int cmd_sweep(const std::string& preset, const DataFlags& data, int holdout,
              bool all_digits, const std::string& subset_str, int probe_count,
              int latent_dim, int epochs, int batch, double lr,
              std::uint64_t seed, int jobs, const std::string& out_dir,
              bool quiet) {
  vae::VaeSpec base;
  base.latent_dim = latent_dim;
  base.epochs = epochs;
  base.batch_size = batch;
  base.adam.learning_rate = lr;
  const auto architectures = sweep::enumerate_configs(preset, base);
  const std::int64_t subset = parse_subset(subset_str);

  const auto all_train = mnist::load_idx(data.train_images, data.train_labels);
  const auto all_test = mnist::load_idx(data.test_images, data.test_labels);

  std::vector<int> digits;
  if (all_digits)
    for (int d = 0; d <= 8; ++d) digits.push_back(d);
  else
    digits.push_back(holdout);

  fs::create_directories(out_dir);
  Manifest manifest("sweep");
  manifest.input(data.train_images);
  manifest.input(data.train_labels);
  manifest.input(data.test_images);
  manifest.input(data.test_labels);
  manifest.flag("preset", preset);
  manifest.flag("train-images", data.train_images);
  manifest.flag("train-labels", data.train_labels);
  manifest.flag("test-images", data.test_images);
  manifest.flag("test-labels", data.test_labels);
  manifest.flag("holdout", holdout);
  manifest.flag("all-digits", all_digits);
  manifest.flag("subset", subset_str);
  manifest.flag("probe-count", probe_count);
  manifest.flag("latent-dim", latent_dim);
  manifest.flag("epochs", epochs);
  manifest.flag("batch", batch);
  manifest.flag("lr", lr);
  manifest.flag("seed", seed);
  manifest.flag("jobs", jobs);
  manifest.flag("out", out_dir);

  for (int digit : digits) {
    const auto split = mnist::partition(all_train, all_test, digit);
    sweep::SweepConfig config;
    config.architectures = architectures;
    config.preset_id = sweep::preset_version(preset);
    config.held_out = digit;
    config.probe_count = probe_count;
    config.subset = subset;
    config.seed = mix_seed(seed, static_cast<std::uint64_t>(digit));
    config.jobs = jobs;

    const std::string digit_dir =
        (fs::path(out_dir) / ("digit-" + std::to_string(digit))).string();
    sweep::run_sweep(config, split, digit_dir, [&](const sweep::SweepCell& cell) {
      if (!quiet)
        std::fprintf(stderr, "digit %d cell %-16s %s\n", digit,
                     cell.spec_id.c_str(),
                     cell.failed ? cell.error.c_str() : "done");
    });
    manifest.output((fs::path(digit_dir) / "sweep.csv").string());
    manifest.output((fs::path(digit_dir) / "montage.pgm").string());
    manifest.output((fs::path(digit_dir) / "sweep_manifest.json").string());
  }
  manifest.write((fs::path(out_dir) / "manifest.json").string());
  return 0;
}

int cmd_mini_mnist(const DataFlags& data, int per_digit, std::uint64_t seed,
                   const std::string& out_dir) {
  fs::create_directories(out_dir);
  Manifest manifest("mini-mnist");
  manifest.input(data.train_images);
  manifest.input(data.train_labels);
  manifest.flag("train-images", data.train_images);
  manifest.flag("train-labels", data.train_labels);
  manifest.flag("per-digit", per_digit);
  manifest.flag("seed", seed);
  manifest.flag("out", out_dir);

  const auto all_train = mnist::load_idx(data.train_images, data.train_labels);
  const auto mini = mnist::mini_mnist(all_train, per_digit, seed);
  const std::string img = (fs::path(out_dir) / "mini-images-idx3-ubyte").string();
  const std::string lab = (fs::path(out_dir) / "mini-labels-idx1-ubyte").string();
  mnist::write_idx(mini, img, lab);
  manifest.output(img);
  manifest.output(lab);
  manifest.write((fs::path(out_dir) / "manifest.json").string());
  std::printf("wrote %zu images (%d per digit)\n", mini.size(), per_digit);
  return 0;
}

int default_jobs() {
  if (const char* env = std::getenv("VAEPROBE_THREADS")) {
    const int j = std::atoi(env);
    if (j >= 1) return j;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MNIST VAE toolkit: trains MLP VAEs and tests how closely the "
               "decoder tracks the latent-proximity weighted average of the "
               "training set"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "train a VAE and write a checkpoint");
  DataFlags train_data;
  std::string train_holdout = "none", train_arch = "shallow",
              train_subset = "full", train_out;
  int train_latent = 50, train_epochs = 50, train_batch = 100;
  double train_lr = 1e-3;
  std::uint64_t train_seed = 0;
  bool train_quiet = false;
  add_train_flags(train, train_data);
  train->add_option("--holdout", train_holdout, "digit to drop from training, or 'none'");
  train->add_option("--arch", train_arch, "shallow | deep | w1[,w2,...]");
  train->add_option("--latent-dim", train_latent)->check(CLI::PositiveNumber);
  train->add_option("--epochs", train_epochs)->check(CLI::NonNegativeNumber);
  train->add_option("--batch", train_batch)->check(CLI::PositiveNumber);
  train->add_option("--lr", train_lr);
  train->add_option("--seed", train_seed);
  train->add_option("--subset", train_subset, "first n shuffled train images, or 'full'");
  train->add_option("--out", train_out, "output directory")->required();
  train->add_flag("--quiet", train_quiet, "suppress per-epoch logs");

  // probe
  auto* probe_cmd = app.add_subcommand("probe", "probe a checkpoint against a test set");
  DataFlags probe_data;
  std::string probe_checkpoint, probe_digit = "all", probe_zmode = "mean", probe_out;
  std::uint64_t probe_seed = 0;
  int probe_gallery_n = 8;
  probe_cmd->add_option("--checkpoint", probe_checkpoint)->required();
  add_train_flags(probe_cmd, probe_data);
  add_test_flags(probe_cmd, probe_data);
  probe_cmd->add_option("--test-digit", probe_digit, "digit to probe, or 'all'");
  probe_cmd->add_option("--z-mode", probe_zmode)
      ->check(CLI::IsMember({"mean", "sample"}));
  probe_cmd->add_option("--sample-seed", probe_seed);
  probe_cmd->add_option("--gallery", probe_gallery_n)->check(CLI::PositiveNumber);
  probe_cmd->add_option("--out", probe_out)->required();

  // latent-map
  auto* lm = app.add_subcommand("latent-map", "max-weight grid over a 2-D latent space");
  DataFlags lm_data;
  std::string lm_checkpoint, lm_grid = "200x200", lm_out;
  double lm_margin = 0.25;
  int lm_per_stratum = 4;
  std::uint64_t lm_seed = 0;
  lm->add_option("--checkpoint", lm_checkpoint)->required();
  add_train_flags(lm, lm_data);
  lm->add_option("--grid", lm_grid, "rows x cols, e.g. 200x200");
  lm->add_option("--margin", lm_margin);
  lm->add_option("--per-stratum", lm_per_stratum)->check(CLI::NonNegativeNumber);
  lm->add_option("--seed", lm_seed);
  lm->add_option("--out", lm_out)->required();

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "architecture capacity sweep");
  DataFlags sweep_data;
  std::string sweep_preset = "paper17", sweep_subset = "full", sweep_out;
  int sweep_holdout = 9, sweep_probe_count = 8, sweep_latent = 50,
      sweep_epochs = 50, sweep_batch = 100;
  double sweep_lr = 1e-3;
  std::uint64_t sweep_seed = 0;
  int sweep_jobs = default_jobs();
  bool sweep_all_digits = false, sweep_quiet = false;
  sweep_cmd->add_option("--preset", sweep_preset, "paper17 | single");
  add_train_flags(sweep_cmd, sweep_data);
  add_test_flags(sweep_cmd, sweep_data);
  sweep_cmd->add_option("--holdout", sweep_holdout)->check(CLI::Range(0, 9));
  sweep_cmd->add_flag("--all-digits", sweep_all_digits,
                      "run one sweep per held-out digit 0..8");
  sweep_cmd->add_option("--subset", sweep_subset);
  sweep_cmd->add_option("--probe-count", sweep_probe_count)->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--latent-dim", sweep_latent)->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--epochs", sweep_epochs)->check(CLI::NonNegativeNumber);
  sweep_cmd->add_option("--batch", sweep_batch)->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--lr", sweep_lr);
  sweep_cmd->add_option("--seed", sweep_seed);
  sweep_cmd->add_option("--jobs", sweep_jobs, "parallel cells (env VAEPROBE_THREADS)")
      ->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--out", sweep_out)->required();
  sweep_cmd->add_flag("--quiet", sweep_quiet);

  // mini-mnist
  auto* mini = app.add_subcommand("mini-mnist", "sample a per-digit subset as IDX files");
  DataFlags mini_data;
  int mini_per_digit = 10;
  std::uint64_t mini_seed = 0;
  std::string mini_out;
  add_train_flags(mini, mini_data);
  mini->add_option("--per-digit", mini_per_digit)->check(CLI::PositiveNumber);
  mini->add_option("--seed", mini_seed);
  mini->add_option("--out", mini_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(train))
      return cmd_train(train_data, train_holdout, train_arch, train_latent,
                       train_epochs, train_batch, train_lr, train_seed,
                       train_subset, train_out, train_quiet);
    if (app.got_subcommand(probe_cmd))
      return cmd_probe(probe_checkpoint, probe_data, probe_digit, probe_zmode,
                       probe_seed, probe_gallery_n, probe_out);
    if (app.got_subcommand(lm))
      return cmd_latent_map(lm_checkpoint, lm_data, lm_grid, lm_margin,
                            lm_per_stratum, lm_seed, lm_out);
    if (app.got_subcommand(sweep_cmd))
      return cmd_sweep(sweep_preset, sweep_data, sweep_holdout, sweep_all_digits,
                       sweep_subset, sweep_probe_count, sweep_latent,
                       sweep_epochs, sweep_batch, sweep_lr, sweep_seed,
                       sweep_jobs, sweep_out, sweep_quiet);
    if (app.got_subcommand(mini))
      return cmd_mini_mnist(mini_data, mini_per_digit, mini_seed, mini_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
