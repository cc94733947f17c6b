#pragma once

#include <cstdint>
#include <vector>

#include "vaeprobe/mnist.hpp"

namespace vaeprobe::synth {

/// Renders one 28x28 grayscale digit from a per-class stroke skeleton with
/// seeded control-point jitter, affine warp, and stroke-thickness variation.
/// Same (digit, seed) always yields the same bitmap.
mnist::Image render_digit(int digit, std::uint64_t seed);

/// A labeled corpus of `count` rendered digits (labels drawn uniformly).
/// Deterministic given the seed; images are independent across indices.
std::vector<mnist::Image> make_corpus(std::size_t count, std::uint64_t seed);

/// Writes a train/test IDX file quadruple under `dir`, mirroring the standard
/// MNIST file names. Returns the four paths in the order
/// train-images, train-labels, test-images, test-labels.
std::vector<std::string> write_corpus_idx(const std::string& dir,
                                          std::size_t train_count,
                                          std::size_t test_count,
                                          std::uint64_t seed);

}  // namespace vaeprobe::synth
