#include "vaeprobe/mnist.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

namespace vaeprobe::mnist {

namespace {

constexpr std::uint32_t kImageMagic = 2051;
constexpr std::uint32_t kLabelMagic = 2049;

class BigEndianReader {
 public:
  BigEndianReader(const std::vector<unsigned char>& bytes, std::string name)
      : bytes_(bytes), name_(std::move(name)) {}

  std::uint32_t read_u32() {
    require(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | bytes_[offset_ + i];
    offset_ += 4;
    return v;
  }

  unsigned char read_u8() {
    require(1);
    return bytes_[offset_++];
  }

  const unsigned char* read_block(std::size_t n) {
    require(n);
    const unsigned char* p = bytes_.data() + offset_;
    offset_ += n;
    return p;
  }

  std::size_t offset() const { return offset_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(name_ + ": " + what + " at byte offset " +
                     std::to_string(offset_));
  }

 private:
  void require(std::size_t n) const {
    if (offset_ + n > bytes_.size())
      throw ParseError(name_ + ": truncated stream, needed " +
                       std::to_string(n) + " bytes at byte offset " +
                       std::to_string(offset_));
  }

  const std::vector<unsigned char>& bytes_;
  std::string name_;
  std::size_t offset_ = 0;
};

void append_u32_be(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
  out.push_back(static_cast<unsigned char>(v & 0xff));
}

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::vector<Image> parse_idx(const std::vector<unsigned char>& image_bytes,
                             const std::vector<unsigned char>& label_bytes) {
  BigEndianReader img(image_bytes, "image stream");
  BigEndianReader lab(label_bytes, "label stream");

  const std::uint32_t img_magic = img.read_u32();
  if (img_magic != kImageMagic)
    throw ParseError("image stream: bad magic " + std::to_string(img_magic) +
                     " (want 2051) at byte offset 0");
  const std::uint32_t lab_magic = lab.read_u32();
  if (lab_magic != kLabelMagic)
    throw ParseError("label stream: bad magic " + std::to_string(lab_magic) +
                     " (want 2049) at byte offset 0");

  const std::uint32_t img_count = img.read_u32();
  const std::uint32_t rows = img.read_u32();
  const std::uint32_t cols = img.read_u32();
  if (rows != 28 || cols != 28)
    img.fail("unexpected dimensions " + std::to_string(rows) + "x" +
             std::to_string(cols) + " (want 28x28)");
  const std::uint32_t lab_count = lab.read_u32();
  if (img_count != lab_count)
    throw ParseError("count mismatch: " + std::to_string(img_count) +
                     " images vs " + std::to_string(lab_count) + " labels");

  std::vector<Image> out;
  out.reserve(img_count);
  for (std::uint32_t i = 0; i < img_count; ++i) {
    const unsigned char* px = img.read_block(kImagePixels);
    Image im;
    im.pixels.resize(kImagePixels);
    for (int j = 0; j < kImagePixels; ++j) im.pixels(j) = px[j] / 255.0;
    const unsigned char l = lab.read_u8();
    if (l > 9)
      throw ParseError("label stream: label " + std::to_string(int(l)) +
                       " out of range at byte offset " +
                       std::to_string(lab.offset() - 1));
    im.label = l;
    out.push_back(std::move(im));
  }
  return out;
}

std::pair<std::vector<unsigned char>, std::vector<unsigned char>> serialize_idx(
    const std::vector<Image>& images) {
  std::vector<unsigned char> img_bytes, lab_bytes;
  img_bytes.reserve(16 + images.size() * kImagePixels);
  lab_bytes.reserve(8 + images.size());
  append_u32_be(img_bytes, kImageMagic);
  append_u32_be(img_bytes, static_cast<std::uint32_t>(images.size()));
  append_u32_be(img_bytes, 28);
  append_u32_be(img_bytes, 28);
  append_u32_be(lab_bytes, kLabelMagic);
  append_u32_be(lab_bytes, static_cast<std::uint32_t>(images.size()));
  for (const auto& im : images) {
    for (int j = 0; j < kImagePixels; ++j) {
      const double v = std::floor(im.pixels(j) * 255.0 + 0.5);
      img_bytes.push_back(static_cast<unsigned char>(
          std::clamp(v, 0.0, 255.0)));
    }
    lab_bytes.push_back(static_cast<unsigned char>(im.label));
  }
  return {std::move(img_bytes), std::move(lab_bytes)};
}

std::vector<Image> load_idx(const std::string& image_path,
                            const std::string& label_path) {
  return parse_idx(read_file(image_path), read_file(label_path));
}

void write_idx(const std::vector<Image>& images, const std::string& image_path,
               const std::string& label_path) {
  auto [img_bytes, lab_bytes] = serialize_idx(images);
  std::ofstream img(image_path, std::ios::binary);
  if (!img) throw IoError("cannot write " + image_path);
  img.write(reinterpret_cast<const char*>(img_bytes.data()),
            static_cast<std::streamsize>(img_bytes.size()));
  std::ofstream lab(label_path, std::ios::binary);
  if (!lab) throw IoError("cannot write " + label_path);
  lab.write(reinterpret_cast<const char*>(lab_bytes.data()),
            static_cast<std::streamsize>(lab_bytes.size()));
}

DatasetSplit partition(std::vector<Image> all_train, std::vector<Image> all_test,
                       int held_out) {
  DatasetSplit split;
  split.descriptor.held_out = held_out;
  split.descriptor.source = held_out < 0
                                ? "train=all digits"
                                : "train=all digits except " + std::to_string(held_out);
  if (held_out < 0) {
    split.train = std::move(all_train);
  } else {
    split.train.reserve(all_train.size());
    for (auto& im : all_train)
      if (im.label != held_out) split.train.push_back(std::move(im));
  }
  split.test = std::move(all_test);
  return split;
}

std::vector<Image> select_digit(const std::vector<Image>& set, int digit) {
  std::vector<Image> out;
  for (const auto& im : set)
    if (im.label == digit) out.push_back(im);
  return out;
}

std::vector<Image> mini_mnist(const std::vector<Image>& all_train, int per_digit,
                              std::uint64_t seed) {
  if (per_digit < 1) throw ConfigError("per_digit must be >= 1");
  std::vector<std::vector<std::size_t>> by_digit(10);
  for (std::size_t i = 0; i < all_train.size(); ++i)
    by_digit[all_train[i].label].push_back(i);

  std::vector<Image> out;
  out.reserve(static_cast<std::size_t>(per_digit) * 10);
  for (int d = 0; d < 10; ++d) {
    auto& pool = by_digit[d];
    if (pool.size() < static_cast<std::size_t>(per_digit))
      throw ConfigError("digit " + std::to_string(d) + " has only " +
                        std::to_string(pool.size()) + " images, need " +
                        std::to_string(per_digit));
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(d)));
    // Partial Fisher-Yates: the first per_digit slots are a uniform
    // without-replacement sample.
    for (int k = 0; k < per_digit; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
      std::swap(pool[k], pool[pick(rng)]);
      out.push_back(all_train[pool[k]]);
    }
  }
  return out;
}

std::vector<Image> canonical_order(std::vector<Image> images) {
  std::sort(images.begin(), images.end(), [](const Image& a, const Image& b) {
    if (a.label != b.label) return a.label < b.label;
    return std::lexicographical_compare(a.pixels.data(),
                                        a.pixels.data() + a.pixels.size(),
                                        b.pixels.data(),
                                        b.pixels.data() + b.pixels.size());
  });
  return images;
}

std::uint64_t dataset_id(const std::vector<Image>& images) {
  const std::vector<Image> ordered = canonical_order(images);
  std::uint64_t h = fnv1a_u64(ordered.size(), 0xcbf29ce484222325ULL);
  for (const auto& im : ordered) {
    h = fnv1a_u64(static_cast<std::uint64_t>(im.label), h);
    h = fnv1a(im.pixels.data(), sizeof(double) * im.pixels.size(), h);
  }
  return h;
}

std::vector<Image> training_subset(const std::vector<Image>& train,
                                   std::int64_t subset_n, std::uint64_t seed) {
  std::vector<Image> ordered = canonical_order(train);
  std::mt19937_64 rng(mix_seed(seed, 0x5b5e7ULL));
  for (std::size_t i = ordered.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(ordered[i - 1], ordered[pick(rng)]);
  }
  if (subset_n >= 0 && static_cast<std::size_t>(subset_n) < ordered.size())
    ordered.resize(static_cast<std::size_t>(subset_n));
  return ordered;
}

}  // namespace vaeprobe::mnist
