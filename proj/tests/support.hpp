#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include "warpmetrics/geometry.hpp"
#include "warpmetrics/synth.hpp"

namespace testsupport {

using warpmetrics::Grid2D;
using warpmetrics::ImageBuffer;
using warpmetrics::UVGrid;
using warpmetrics::Vec2;

inline std::mt19937_64 make_rng(uint64_t seed) { return std::mt19937_64(seed); }

/// Uniform axis-aligned mesh spanning [0,extent_x] x [0,extent_y].
inline Grid2D uniform_mesh(int h, int w, double extent_x, double extent_y) {
  Grid2D g(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      g.at(r, c) = {extent_x * c / (w - 1), extent_y * r / (h - 1)};
  return g;
}

/// Smoothly perturbed non-degenerate mesh. A corner-turn cross product of a
/// jittered uniform cell is bounded below by cx*cy*(1-4r) for jitter radius
/// r*cell, so r = 0.2 keeps every cell strictly convex.
inline Grid2D random_smooth_mesh(int h, int w, std::mt19937_64& rng,
                                 double extent_x = 100.0,
                                 double extent_y = 80.0) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double cx = extent_x / (w - 1);
  const double cy = extent_y / (h - 1);
  Grid2D g = uniform_mesh(h, w, extent_x, extent_y);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      g.at(r, c).x += 0.2 * cx * unit(rng);
      g.at(r, c).y += 0.2 * cy * unit(rng);
    }
  return g;
}

/// Strictly convex quad with a consistent (positive) orientation, as the
/// corners of a 2x2 mesh.
inline Grid2D random_convex_quad_mesh(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(-0.2, 0.2);
  Grid2D g(2, 2);
  g.at(0, 0) = {0.0 + jitter(rng), 0.0 + jitter(rng)};
  g.at(0, 1) = {1.0 + jitter(rng), 0.0 + jitter(rng)};
  g.at(1, 0) = {0.0 + jitter(rng), 1.0 + jitter(rng)};
  g.at(1, 1) = {1.0 + jitter(rng), 1.0 + jitter(rng)};
  return g;
}

/// Band-limited test image (sum of low-frequency sinusoids). Geometry
/// round-trip tests use this so interpolation error stays near zero;
/// make_synthetic_page keeps its sharp lines for texture-dependent tests.
inline ImageBuffer smooth_test_image(int h, int w, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> period(35.0, 70.0);
  std::uniform_real_distribution<double> amp(0.04, 0.11);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  struct Term {
    double px, py, p, a;
  };
  std::vector<Term> terms(4);
  for (Term& t : terms) t = {period(rng), period(rng), phase(rng), amp(rng)};
  ImageBuffer img(h, w, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double v = 0.5;
      for (const Term& t : terms)
        v += t.a * std::sin(2.0 * std::numbers::pi * (x / t.px + y / t.py) +
                            t.p);
      img.at(y, x) = static_cast<float>(std::clamp(v, 0.02, 0.98));
    }
  return img;
}

inline double psnr(const ImageBuffer& a, const ImageBuffer& b) {
  double mse = 0.0;
  const auto sa = a.samples(), sb = b.samples();
  for (size_t i = 0; i < sa.size(); ++i) {
    const double d = sa[i] - sb[i];
    mse += d * d;
  }
  mse /= sa.size();
  if (mse <= 0.0) return 1e9;
  return 10.0 * std::log10(1.0 / mse);
}

/// Brute-force minimum enclosing-rectangle area: scan over angles with the
/// given step, then ternary-refine around the best orientation.
inline double min_rect_area_scan(std::span<const Vec2> pts, double step_deg) {
  auto bbox_area = [&](double deg) {
    const double rad = deg * std::numbers::pi / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    double minu = 1e300, maxu = -1e300, minv = 1e300, maxv = -1e300;
    for (const Vec2& p : pts) {
      const double u = c * p.x + s * p.y;
      const double v = -s * p.x + c * p.y;
      minu = std::min(minu, u);
      maxu = std::max(maxu, u);
      minv = std::min(minv, v);
      maxv = std::max(maxv, v);
    }
    return (maxu - minu) * (maxv - minv);
  };
  double best = 1e300, best_deg = 0.0;
  for (double d = 0.0; d < 90.0; d += step_deg) {
    const double a = bbox_area(d);
    if (a < best) {
      best = a;
      best_deg = d;
    }
  }
  double lo = best_deg - step_deg, hi = best_deg + step_deg;
  for (int it = 0; it < 200; ++it) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (bbox_area(m1) < bbox_area(m2))
      hi = m2;
    else
      lo = m1;
  }
  return std::min(best, bbox_area((lo + hi) / 2.0));
}

/// Unique temp directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    auto base = std::filesystem::temp_directory_path();
    for (int i = 0;; ++i) {
      path_ = base / (tag + "_" + std::to_string(::getpid()) + "_" +
                      std::to_string(i));
      if (std::filesystem::create_directory(path_)) break;
    }
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testsupport
