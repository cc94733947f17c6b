#pragma once

#include <string>
#include <vector>

#include "vaeprobe/common.hpp"

namespace vaeprobe::render {

/// Grid of 28x28 tiles laid out row-major, with an optional 1-pixel
/// separator between tiles.
struct ImageGrid {
  int rows = 0;
  int cols = 0;
  std::vector<Vec> tiles;  // rows*cols entries of length 784, values in [0,1]
  bool separator = true;
  double separator_intensity = 0.35;
};

/// Flattens the grid into one intensity bitmap (row-major Mat in [0,1]).
Mat compose_grid(const ImageGrid& grid);

/// Binary PGM ("P5", maxval 255); intensity i maps to floor(i*255 + 0.5).
std::vector<unsigned char> pgm_bytes(const Mat& intensities);
void write_pgm(const ImageGrid& grid, const std::string& path);
void write_pgm(const Mat& intensities, const std::string& path);

/// Minimal P5 reader for round-trip tests; returns intensities in [0,1].
Mat parse_pgm(const std::vector<unsigned char>& bytes);

struct HeatmapSidecar {
  double min = 0.0;
  double max = 0.0;
  std::string note;
};

/// Linear [min,max] -> [0,255] grayscale PGM plus a JSON sidecar at
/// path + ".json" recording the mapping. A constant grid maps to mid-gray
/// 128 and the sidecar says so.
HeatmapSidecar write_heatmap(const Mat& values, const std::string& path);

/// RFC-4180-style CSV writer: header row, comma separation, quoting only
/// when a field needs it. Doubles print round-trip exact (%.17g).
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);
  ~CsvWriter();

  void header(const std::vector<std::string>& names);
  CsvWriter& field(const std::string& value);
  CsvWriter& field(double value);
  CsvWriter& field(std::int64_t value);
  void end_row();

 private:
  struct Impl;
  Impl* impl_;
};

}  // namespace vaeprobe::render
