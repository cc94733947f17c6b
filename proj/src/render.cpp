#include "vaeprobe/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace vaeprobe::render {

namespace {

constexpr int kTile = 28;

unsigned char to_byte(double intensity) {
  const double v = std::floor(intensity * 255.0 + 0.5);
  return static_cast<unsigned char>(std::clamp(v, 0.0, 255.0));
}

void write_bytes(const std::vector<unsigned char>& bytes, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

Mat compose_grid(const ImageGrid& grid) {
  if (grid.rows < 1 || grid.cols < 1)
    throw ShapeError("compose_grid: grid must have at least one tile");
  if (grid.tiles.size() != static_cast<std::size_t>(grid.rows) * grid.cols)
    throw ShapeError("compose_grid: tile count does not match rows*cols");
  const int sep = grid.separator ? 1 : 0;
  const int height = grid.rows * kTile + (grid.rows - 1) * sep;
  const int width = grid.cols * kTile + (grid.cols - 1) * sep;
  Mat out = Mat::Constant(height, width, grid.separator_intensity);
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      const Vec& tile = grid.tiles[static_cast<std::size_t>(r) * grid.cols + c];
      if (tile.size() != kTile * kTile)
        throw ShapeError("compose_grid: tile is not 28x28");
      const int r0 = r * (kTile + sep);
      const int c0 = c * (kTile + sep);
      for (int i = 0; i < kTile; ++i)
        for (int j = 0; j < kTile; ++j)
          out(r0 + i, c0 + j) = tile(i * kTile + j);
    }
  }
  return out;
}

std::vector<unsigned char> pgm_bytes(const Mat& intensities) {
  const auto h = intensities.rows();
  const auto w = intensities.cols();
  std::string header = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.reserve(out.size() + static_cast<std::size_t>(h * w));
  for (Eigen::Index r = 0; r < h; ++r)
    for (Eigen::Index c = 0; c < w; ++c) out.push_back(to_byte(intensities(r, c)));
  return out;
}

void write_pgm(const ImageGrid& grid, const std::string& path) {
  write_bytes(pgm_bytes(compose_grid(grid)), path);
}

void write_pgm(const Mat& intensities, const std::string& path) {
  write_bytes(pgm_bytes(intensities), path);
}

Mat parse_pgm(const std::vector<unsigned char>& bytes) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos]))
      t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  if (token() != "P5") throw FormatError("parse_pgm: not a P5 stream");
  const long w = std::stol(token());
  const long h = std::stol(token());
  const long maxval = std::stol(token());
  if (maxval != 255) throw FormatError("parse_pgm: unsupported maxval");
  ++pos;  // single whitespace after maxval
  if (pos + static_cast<std::size_t>(w * h) > bytes.size())
    throw FormatError("parse_pgm: truncated pixel data");
  Mat out(h, w);
  for (long r = 0; r < h; ++r)
    for (long c = 0; c < w; ++c) out(r, c) = bytes[pos++] / 255.0;
  return out;
}

HeatmapSidecar write_heatmap(const Mat& values, const std::string& path) {
  if (!values.allFinite()) throw NumericError("write_heatmap: non-finite values");
  HeatmapSidecar sidecar;
  sidecar.min = values.minCoeff();
  sidecar.max = values.maxCoeff();

  Mat intensities(values.rows(), values.cols());
  if (sidecar.max == sidecar.min) {
    intensities.setConstant(128.0 / 255.0);
    sidecar.note = "constant grid; mapped to mid-gray 128";
  } else {
    const double range = sidecar.max - sidecar.min;
    intensities = ((values.array() - sidecar.min) / range).matrix();
  }
  write_bytes(pgm_bytes(intensities), path);

  nlohmann::json j{{"min", sidecar.min}, {"max", sidecar.max}};
  if (!sidecar.note.empty()) j["note"] = sidecar.note;
  std::ofstream f(path + ".json");
  if (!f) throw IoError("cannot write " + path + ".json");
  f << j.dump(2) << "\n";
  return sidecar;
}

struct CsvWriter::Impl {
  std::ofstream out;
  bool row_started = false;
};

CsvWriter::CsvWriter(const std::string& path) : impl_(new Impl) {
  impl_->out.open(path);
  if (!impl_->out) {
    delete impl_;
    throw IoError("cannot write " + path);
  }
}

CsvWriter::~CsvWriter() { delete impl_; }

void CsvWriter::header(const std::vector<std::string>& names) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) impl_->out << ',';
    impl_->out << names[i];
  }
  impl_->out << '\n';
}

CsvWriter& CsvWriter::field(const std::string& value) {
  if (impl_->row_started) impl_->out << ',';
  impl_->row_started = true;
  if (value.find_first_of(",\"\n") != std::string::npos) {
    impl_->out << '"';
    for (char ch : value) {
      if (ch == '"') impl_->out << '"';
      impl_->out << ch;
    }
    impl_->out << '"';
  } else {
    impl_->out << value;
  }
  return *this;
}

CsvWriter& CsvWriter::field(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return field(std::string(buf));
}

CsvWriter& CsvWriter::field(std::int64_t value) {
  return field(std::to_string(value));
}

void CsvWriter::end_row() {
  impl_->out << '\n';
  impl_->row_started = false;
}

}  // namespace vaeprobe::render
