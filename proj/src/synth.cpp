#include "vaeprobe/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

namespace vaeprobe::synth {

namespace {

struct P2 {
  double x = 0, y = 0;
};

struct Stroke {
  std::vector<P2> pts;  // control points, unit square, y up
  bool closed = false;
};

std::vector<P2> ring(double cx, double cy, double rx, double ry, int n = 12) {
  std::vector<P2> pts;
  pts.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * M_PI * i / n;
    pts.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  return pts;
}

// Hand-placed control skeletons; Catmull-Rom smoothing fills in the curves.
std::vector<Stroke> skeleton(int digit) {
  switch (digit) {
    case 0:
      return {{ring(0.50, 0.50, 0.26, 0.36), true}};
    case 1:
      return {{{{0.36, 0.70}, {0.52, 0.88}}, false},
              {{{0.52, 0.88}, {0.52, 0.50}, {0.52, 0.12}}, false}};
    case 2:
      return {{{{0.28, 0.70},
                {0.38, 0.86},
                {0.58, 0.88},
                {0.72, 0.72},
                {0.62, 0.52},
                {0.42, 0.34},
                {0.26, 0.14}},
               false},
              {{{0.26, 0.14}, {0.50, 0.14}, {0.76, 0.14}}, false}};
    case 3:
      return {{{{0.30, 0.82},
                {0.52, 0.90},
                {0.70, 0.74},
                {0.52, 0.55},
                {0.72, 0.38},
                {0.56, 0.13},
                {0.30, 0.20}},
               false}};
    case 4:
      return {{{{0.58, 0.88}, {0.40, 0.62}, {0.26, 0.42}, {0.80, 0.42}}, false},
              {{{0.62, 0.70}, {0.62, 0.40}, {0.62, 0.10}}, false}};
    case 5:
      return {{{{0.72, 0.88}, {0.32, 0.88}, {0.30, 0.56}}, false},
              {{{0.30, 0.56},
                {0.54, 0.60},
                {0.71, 0.43},
                {0.58, 0.16},
                {0.30, 0.21}},
               false}};
    case 6:
      return {{{{0.64, 0.88},
                {0.45, 0.70},
                {0.33, 0.45},
                {0.36, 0.22},
                {0.55, 0.12},
                {0.69, 0.26},
                {0.61, 0.42},
                {0.38, 0.40}},
               false}};
    case 7:
      return {{{{0.26, 0.86}, {0.50, 0.86}, {0.74, 0.86}}, false},
              {{{0.74, 0.86}, {0.58, 0.50}, {0.44, 0.12}}, false}};
    case 8:
      return {{ring(0.50, 0.69, 0.17, 0.16, 10), true},
              {ring(0.50, 0.30, 0.20, 0.19, 10), true}};
    case 9:
      return {{ring(0.50, 0.66, 0.19, 0.18, 10), true},
              {{{0.69, 0.64}, {0.66, 0.40}, {0.58, 0.12}}, false}};
    default:
      throw ConfigError("digit out of range: " + std::to_string(digit));
  }
}

P2 catmull(const P2& p0, const P2& p1, const P2& p2, const P2& p3, double u) {
  const double u2 = u * u, u3 = u2 * u;
  auto coord = [&](double a, double b, double c, double d) {
    return 0.5 * (2.0 * b + (-a + c) * u + (2.0 * a - 5.0 * b + 4.0 * c - d) * u2 +
                  (-a + 3.0 * b - 3.0 * c + d) * u3);
  };
  return {coord(p0.x, p1.x, p2.x, p3.x), coord(p0.y, p1.y, p2.y, p3.y)};
}

std::vector<P2> smooth(const Stroke& s, int per_segment = 8) {
  const auto& p = s.pts;
  const int n = static_cast<int>(p.size());
  std::vector<P2> out;
  if (n == 1) return {p[0]};
  const int nseg = s.closed ? n : n - 1;
  auto at = [&](int i) {
    if (s.closed) return p[((i % n) + n) % n];
    return p[std::clamp(i, 0, n - 1)];
  };
  for (int seg = 0; seg < nseg; ++seg) {
    for (int j = 0; j < per_segment; ++j) {
      const double u = static_cast<double>(j) / per_segment;
      out.push_back(catmull(at(seg - 1), at(seg), at(seg + 1), at(seg + 2), u));
    }
  }
  out.push_back(s.closed ? out.front() : p[n - 1]);
  return out;
}

double dist_to_polyline(double x, double y, const std::vector<P2>& pts) {
  double best = 1e30;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double ax = pts[i].x, ay = pts[i].y;
    const double bx = pts[i + 1].x, by = pts[i + 1].y;
    const double dx = bx - ax, dy = by - ay;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0 ? ((x - ax) * dx + (y - ay) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double ex = x - (ax + t * dx), ey = y - (ay + t * dy);
    best = std::min(best, ex * ex + ey * ey);
  }
  return std::sqrt(best);
}

double clipped_normal(std::mt19937_64& rng, double mean, double sigma,
                      double lo, double hi) {
  std::normal_distribution<double> d(mean, sigma);
  return std::clamp(d(rng), lo, hi);
}

}  // namespace

mnist::Image render_digit(int digit, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Stroke> strokes = skeleton(digit);

  // Per-sample shape parameters.
  const double rot = clipped_normal(rng, 0.0, 0.09, -0.22, 0.22);
  const double shear = clipped_normal(rng, 0.0, 0.09, -0.25, 0.25);
  const double sx = clipped_normal(rng, 1.0, 0.07, 0.82, 1.15);
  const double sy = clipped_normal(rng, 1.0, 0.07, 0.82, 1.15);
  const double tx = clipped_normal(rng, 0.0, 0.035, -0.08, 0.08);
  const double ty = clipped_normal(rng, 0.0, 0.035, -0.08, 0.08);
  const double half_width =
      std::exp(clipped_normal(rng, std::log(1.05), 0.18, std::log(0.7), std::log(1.7)));
  const double ink = 1.0 - std::abs(clipped_normal(rng, 0.0, 0.06, -0.2, 0.2));

  std::normal_distribution<double> jitter(0.0, 0.018);
  const double cr = std::cos(rot), sr = std::sin(rot);
  for (auto& s : strokes) {
    for (auto& p : s.pts) {
      p.x += jitter(rng);
      p.y += jitter(rng);
      double x = p.x - 0.5, y = p.y - 0.5;
      x += shear * y;
      x *= sx;
      y *= sy;
      const double xr = cr * x - sr * y, yr = sr * x + cr * y;
      p.x = 0.5 + xr + tx;
      p.y = 0.5 + yr + ty;
    }
  }

  // Unit square maps to the 22px core of the 28px cell, y flipped.
  std::vector<std::vector<P2>> polylines;
  for (const auto& s : strokes) {
    auto pts = smooth(s);
    for (auto& p : pts) {
      p.x = 3.0 + 22.0 * p.x;
      p.y = 3.0 + 22.0 * (1.0 - p.y);
    }
    polylines.push_back(std::move(pts));
  }

  const double aa = 0.9;
  mnist::Image im;
  im.label = digit;
  im.pixels.resize(mnist::kImagePixels);
  for (int r = 0; r < 28; ++r) {
    for (int c = 0; c < 28; ++c) {
      const double px = c + 0.5, py = r + 0.5;
      double d = 1e30;
      for (const auto& pl : polylines)
        d = std::min(d, dist_to_polyline(px, py, pl));
      const double v = std::clamp((half_width + aa / 2 - d) / aa, 0.0, 1.0);
      im.pixels(r * 28 + c) = ink * v;
    }
  }
  return im;
}

std::vector<mnist::Image> make_corpus(std::size_t count, std::uint64_t seed) {
  std::vector<mnist::Image> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::mt19937_64 pick(mix_seed(seed, i * 2));
    const int digit = static_cast<int>(pick() % 10);
    out.push_back(render_digit(digit, mix_seed(seed, i * 2 + 1)));
  }
  return out;
}

std::vector<std::string> write_corpus_idx(const std::string& dir,
                                          std::size_t train_count,
                                          std::size_t test_count,
                                          std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const auto train = make_corpus(train_count, mix_seed(seed, 0xA11CE));
  const auto test = make_corpus(test_count, mix_seed(seed, 0xB0B));
  std::vector<std::string> paths = {
      (fs::path(dir) / "train-images-idx3-ubyte").string(),
      (fs::path(dir) / "train-labels-idx1-ubyte").string(),
      (fs::path(dir) / "t10k-images-idx3-ubyte").string(),
      (fs::path(dir) / "t10k-labels-idx1-ubyte").string(),
  };
  mnist::write_idx(train, paths[0], paths[1]);
  mnist::write_idx(test, paths[2], paths[3]);
  return paths;
}

}  // namespace vaeprobe::synth
