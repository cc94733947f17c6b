#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vaeprobe/common.hpp"

namespace vaeprobe::mnist {

inline constexpr int kImagePixels = 28 * 28;

/// One 28x28 grayscale bitmap, flattened row-major, intensities in [0,1].
struct Image {
  Vec pixels;  // length 784
  int label = 0;
};

struct PartitionDescriptor {
  int held_out = -1;  // -1: no digit withheld
  std::string source;
};

struct DatasetSplit {
  std::vector<Image> train;
  std::vector<Image> test;
  PartitionDescriptor descriptor;
};

/// Parses a paired IDX image/label stream (big-endian magics 2051/2049,
/// 28x28, counts matching). Pixels are scaled by 1/255. Malformed input
/// raises ParseError naming the byte offset.
std::vector<Image> parse_idx(const std::vector<unsigned char>& image_bytes,
                             const std::vector<unsigned char>& label_bytes);

/// Serializes back to IDX; pixel p becomes round(p * 255).
std::pair<std::vector<unsigned char>, std::vector<unsigned char>> serialize_idx(
    const std::vector<Image>& images);

std::vector<Image> load_idx(const std::string& image_path,
                            const std::string& label_path);
void write_idx(const std::vector<Image>& images, const std::string& image_path,
               const std::string& label_path);

/// held_out = -1 keeps the full training set; held_out = d drops every
/// train image with label d. The test half passes through unchanged.
DatasetSplit partition(std::vector<Image> all_train, std::vector<Image> all_test,
                       int held_out);

/// All images of one digit, in input order.
std::vector<Image> select_digit(const std::vector<Image>& set, int digit);

/// per_digit images of every digit, sampled uniformly without replacement.
std::vector<Image> mini_mnist(const std::vector<Image>& all_train, int per_digit,
                              std::uint64_t seed);

/// Storage-order-independent content ordering: by label, then by pixel bytes.
std::vector<Image> canonical_order(std::vector<Image> images);

/// Content hash over the canonical ordering; identifies a training set
/// regardless of how it was stored.
std::uint64_t dataset_id(const std::vector<Image>& images);

/// The "--subset n" selector: canonical order, one seeded shuffle, first n.
/// subset_n < 0 or >= size keeps everything (still reshuffled).
std::vector<Image> training_subset(const std::vector<Image>& train,
                                   std::int64_t subset_n, std::uint64_t seed);

}  // namespace vaeprobe::mnist
