#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "support/test_util.hpp"
#include "vaeprobe/render.hpp"

using namespace vaeprobe;

namespace {

std::vector<unsigned char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_SUITE_BEGIN("render");

TEST_CASE("single zero tile produces the golden byte stream") {
  render::ImageGrid grid;
  grid.rows = 1;
  grid.cols = 1;
  grid.tiles = {Vec::Zero(784)};
  const auto bytes = render::pgm_bytes(render::compose_grid(grid));

  std::vector<unsigned char> expect;
  const std::string header = "P5\n28 28\n255\n";
  expect.insert(expect.end(), header.begin(), header.end());
  expect.insert(expect.end(), 784, 0);
  CHECK(bytes == expect);
}

TEST_CASE("intensity bytes follow round-half-up") {
  Mat m(1, 3);
  m << 1.0, 0.5, 0.0;
  const auto bytes = render::pgm_bytes(m);
  const std::size_t data = bytes.size() - 3;
  CHECK(bytes[data + 0] == 255);
  CHECK(bytes[data + 1] == 128);
  CHECK(bytes[data + 2] == 0);
}

TEST_CASE("grid dimensions include separators") {
  render::ImageGrid grid;
  grid.rows = 2;
  grid.cols = 3;
  grid.tiles.assign(6, Vec::Constant(784, 0.25));
  const Mat composed = render::compose_grid(grid);
  CHECK(composed.rows() == 2 * 28 + 1);
  CHECK(composed.cols() == 3 * 28 + 2);

  grid.separator = false;
  const Mat packed = render::compose_grid(grid);
  CHECK(packed.rows() == 56);
  CHECK(packed.cols() == 84);
}

TEST_CASE("pgm write/parse round trip stays within the quantization bound") {
  std::mt19937_64 rng(3);
  render::ImageGrid grid;
  grid.rows = 1;
  grid.cols = 2;
  grid.tiles = {testutil::random_vec(784, rng), testutil::random_vec(784, rng)};
  const std::string path = "render_roundtrip.pgm";
  render::write_pgm(grid, path);
  const Mat back = render::parse_pgm(slurp(path));
  const Mat original = render::compose_grid(grid);
  REQUIRE(back.rows() == original.rows());
  REQUIRE(back.cols() == original.cols());
  CHECK((back - original).cwiseAbs().maxCoeff() <= 1.0 / 510.0 + 1e-12);
  std::filesystem::remove(path);
}

TEST_CASE("same grid writes byte-identical files") {
  std::mt19937_64 rng(5);
  render::ImageGrid grid;
  grid.rows = 1;
  grid.cols = 1;
  grid.tiles = {testutil::random_vec(784, rng)};
  render::write_pgm(grid, "golden_a.pgm");
  render::write_pgm(grid, "golden_b.pgm");
  CHECK(slurp("golden_a.pgm") == slurp("golden_b.pgm"));
  std::filesystem::remove("golden_a.pgm");
  std::filesystem::remove("golden_b.pgm");
}

TEST_CASE("constant heatmap maps to mid-gray with a sidecar note") {
  const std::string path = "heatmap_const.pgm";
  const auto sidecar = render::write_heatmap(Mat::Constant(4, 4, 0.7), path);
  CHECK(sidecar.min == 0.7);
  CHECK(sidecar.max == 0.7);
  CHECK_FALSE(sidecar.note.empty());
  const auto bytes = slurp(path);
  for (std::size_t i = bytes.size() - 16; i < bytes.size(); ++i)
    CHECK(bytes[i] == 128);

  std::ifstream sj(path + ".json");
  nlohmann::json j;
  sj >> j;
  CHECK(j.contains("note"));
  CHECK(j["min"].get<double>() == 0.7);
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".json");
}

TEST_CASE("two-value heatmap spans the full byte range") {
  Mat values(1, 2);
  values << 0.5, 1.0;
  const std::string path = "heatmap_two.pgm";
  const auto sidecar = render::write_heatmap(values, path);
  const auto bytes = slurp(path);
  CHECK(bytes[bytes.size() - 2] == 0);
  CHECK(bytes[bytes.size() - 1] == 255);

  // Reconstructing from the sidecar recovers values within the bound.
  const Mat back = render::parse_pgm(bytes);
  const double range = sidecar.max - sidecar.min;
  for (Eigen::Index c = 0; c < 2; ++c) {
    const double rec = sidecar.min + back(0, c) * range;
    CHECK(std::abs(rec - values(0, c)) <= range / 510.0 + 1e-12);
  }
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".json");
}

TEST_CASE("csv writer quotes only when needed") {
  const std::string path = "csv_test.csv";
  {
    render::CsvWriter csv(path);
    csv.header({"a", "b"});
    csv.field(std::string("plain")).field(std::string("with,comma"));
    csv.end_row();
    csv.field(1.5).field(static_cast<std::int64_t>(-3));
    csv.end_row();
  }
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "a,b");
  std::getline(in, line);
  CHECK(line == "plain,\"with,comma\"");
  std::getline(in, line);
  CHECK(line == "1.5,-3");
  std::filesystem::remove(path);
}

TEST_SUITE_END();
