// Deterministic stand-in corpus generator: renders MNIST-shaped IDX files
// (28x28 grayscale digits, labels 0-9) from procedural stroke skeletons.
// Useful as a fixture when the canonical MNIST files are not on disk.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "vaeprobe/synth.hpp"

int main(int argc, char** argv) {
  CLI::App app{"render a deterministic MNIST-format digit corpus"};
  std::size_t train_count = 60000, test_count = 10000;
  std::uint64_t seed = 0;
  std::string out_dir;
  app.add_option("--train-count", train_count)->check(CLI::PositiveNumber);
  app.add_option("--test-count", test_count)->check(CLI::PositiveNumber);
  app.add_option("--seed", seed);
  app.add_option("--out", out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto paths =
        vaeprobe::synth::write_corpus_idx(out_dir, train_count, test_count, seed);
    for (const auto& p : paths) std::printf("%s\n", p.c_str());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
