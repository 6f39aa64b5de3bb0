#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"
#include "warpmetrics/losses.hpp"

using namespace warpmetrics;
using namespace testsupport;

TEST_CASE("population_variance basics") {
  const std::vector<double> c3{0.37, 0.37, 0.37};
  CHECK(population_variance(c3) == 0.0);
  const std::vector<double> two{0.0, 0.1};
  CHECK(population_variance(two) == doctest::Approx(0.0025).epsilon(1e-12));
  CHECK_THROWS_AS(population_variance(std::vector<double>{}),
                  InvalidInputError);
}

TEST_CASE("population_variance matches the pairwise oracle") {
  auto rng = make_rng(2024);
  std::uniform_real_distribution<double> unit(-3.0, 7.0);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> v(100);
    for (double& x : v) x = unit(rng);
    double pair_acc = 0.0;
    for (size_t a = 0; a < v.size(); ++a)
      for (size_t b = a + 1; b < v.size(); ++b) {
        const double d = v[a] - v[b];
        pair_acc += d * d;
      }
    const double oracle = pair_acc / (v.size() * v.size());
    CHECK(population_variance(v) == doctest::Approx(oracle).epsilon(1e-12));
  }
}

TEST_CASE("axis_aligned_loss zero on the uniform grid") {
  const UVGrid q = make_uniform_uv_grid(9, 7);
  const LossBreakdown l = axis_aligned_loss(q);
  CHECK(l.l_hor == 0.0);
  CHECK(l.l_ver == 0.0);
  CHECK(l.l_al == 0.0);
}

TEST_CASE("axis_aligned_loss single perturbation closed form") {
  const int h = 6, w = 9;
  const double delta = 0.013;
  UVGrid q = make_uniform_uv_grid(h, w);
  q.at(2, 4).y += delta;  // one v entry in a row of width w
  const LossBreakdown l = axis_aligned_loss(q);
  CHECK(l.l_hor ==
        doctest::Approx(delta * delta * (w - 1) / double(w) / w).epsilon(1e-12));
  CHECK(l.l_ver == 0.0);

  // perturbing the u of the same point adds the column's symmetric term
  q.at(2, 4).x += delta;
  const LossBreakdown l2 = axis_aligned_loss(q);
  CHECK(l2.l_hor == doctest::Approx(l.l_hor).epsilon(1e-12));
  CHECK(l2.l_ver ==
        doctest::Approx(delta * delta * (h - 1) / double(h) / h).epsilon(1e-12));
  CHECK(l2.l_al == doctest::Approx(l2.l_hor + l2.l_ver).epsilon(1e-15));
}

TEST_CASE("axis_aligned_loss ignores shifts and spacing") {
  // rows with constant v, columns with constant u, non-uniform spacing
  const int h = 5, w = 6;
  UVGrid q(h, w);
  const double us[] = {0.0, 0.05, 0.3, 0.31, 0.8, 1.0};
  const double vs[] = {0.0, 0.4, 0.45, 0.9, 1.0};
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) q.at(r, c) = {us[c], vs[r]};
  const LossBreakdown l = axis_aligned_loss(q);
  CHECK(l.l_al == 0.0);
}

TEST_CASE("axis_aligned_loss row/column shift invariance") {
  auto rng = make_rng(31);
  std::uniform_real_distribution<double> unit(-0.05, 0.05);
  const int h = 7, w = 5;
  UVGrid q = make_uniform_uv_grid(h, w);
  for (auto& p : q.points()) {
    p.x += unit(rng);
    p.y += unit(rng);
  }
  const LossBreakdown base = axis_aligned_loss(q);
  UVGrid shifted = q;
  std::uniform_real_distribution<double> shift(-0.2, 0.2);
  std::vector<double> row_shift(h), col_shift(w);
  for (double& s : row_shift) s = shift(rng);
  for (double& s : col_shift) s = shift(rng);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      shifted.at(r, c).y += row_shift[r];   // per-row constant on v
      shifted.at(r, c).x += col_shift[c];   // per-column constant on u
    }
  const LossBreakdown moved = axis_aligned_loss(shifted);
  CHECK(moved.l_hor == doctest::Approx(base.l_hor).epsilon(1e-9));
  CHECK(moved.l_ver == doctest::Approx(base.l_ver).epsilon(1e-9));
}

TEST_CASE("axis_aligned_loss mean reduction divides by line count") {
  UVGrid q = make_uniform_uv_grid(4, 5);
  q.at(1, 2).y += 0.1;
  const LossBreakdown sum = axis_aligned_loss(q, VarianceReduction::Sum);
  const LossBreakdown mean = axis_aligned_loss(q, VarianceReduction::Mean);
  CHECK(mean.l_hor == doctest::Approx(sum.l_hor / 4).epsilon(1e-12));
  CHECK(mean.l_ver == doctest::Approx(sum.l_ver / 5).epsilon(1e-12));
}

TEST_CASE("axis_aligned_loss_from_prediction identity is exactly zero") {
  auto rng = make_rng(77);
  for (int k = 0; k < 10; ++k) {
    const Grid2D mesh = random_smooth_mesh(6, 7, rng);
    const UVGrid uv = make_uniform_uv_grid(6, 7);
    const LossBreakdown l = axis_aligned_loss_from_prediction(mesh, mesh, uv);
    CHECK(l.l_al == 0.0);
  }
}

TEST_CASE("axis_aligned_loss_from_prediction shift on a linear mesh is zero") {
  const Grid2D mesh = uniform_mesh(6, 7, 60.0, 50.0);
  const UVGrid uv = make_uniform_uv_grid(6, 7);
  Grid2D shifted(6, 7);
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 7; ++c)
      shifted.at(r, c) = mesh.at(r, c) + Vec2{3.7, 0.0};
  const LossBreakdown l = axis_aligned_loss_from_prediction(shifted, mesh, uv);
  CHECK(l.l_al == doctest::Approx(0.0).epsilon(1e-18));
}

TEST_CASE("axis_aligned_loss_from_prediction single displacement is positive") {
  auto rng = make_rng(15);
  const Grid2D mesh = random_smooth_mesh(6, 7, rng);
  const UVGrid uv = make_uniform_uv_grid(6, 7);
  Grid2D pred = mesh;
  pred.at(3, 3) = pred.at(3, 3) + Vec2{1.5, -0.8};
  const LossBreakdown l = axis_aligned_loss_from_prediction(pred, mesh, uv);
  CHECK(l.l_al > 0.0);
  // brute-force recombination through uv_map + variance
  const UVGrid q = uv_map(pred, mesh, uv);
  const LossBreakdown direct = axis_aligned_loss(q);
  CHECK(l.l_al == doctest::Approx(direct.l_al).epsilon(1e-15));
}

namespace {

// Central finite differences of the loss wrt each predicted coordinate.
std::vector<Vec2> fd_gradient(const Grid2D& pred, const Grid2D& mesh,
                              const UVGrid& uv, double step) {
  std::vector<Vec2> g(pred.points().size());
  Grid2D work = pred;
  size_t i = 0;
  for (int r = 0; r < pred.rows(); ++r)
    for (int c = 0; c < pred.cols(); ++c, ++i) {
      for (int axis = 0; axis < 2; ++axis) {
        double& coord = axis == 0 ? work.at(r, c).x : work.at(r, c).y;
        const double saved = coord;
        coord = saved + step;
        const double hi = axis_aligned_loss_from_prediction(work, mesh, uv).l_al;
        coord = saved - step;
        const double lo = axis_aligned_loss_from_prediction(work, mesh, uv).l_al;
        coord = saved;
        (axis == 0 ? g[i].x : g[i].y) = (hi - lo) / (2.0 * step);
      }
    }
  return g;
}

}  // namespace

TEST_CASE("axis_aligned_loss_grad matches finite differences") {
  auto rng = make_rng(400);
  std::uniform_real_distribution<double> st(0.1, 0.9);
  std::uniform_int_distribution<int> pick(0, 1000);
  const int h = 6, w = 5;
  for (int k = 0; k < 15; ++k) {
    const Grid2D mesh = random_smooth_mesh(h, w, rng);
    const UVGrid uv = make_uniform_uv_grid(h, w);
    Grid2D pred(h, w);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        pred.at(r, c) = bilinear_in_cell(mesh, pick(rng) % (h - 1),
                                         pick(rng) % (w - 1), st(rng), st(rng));
    const auto analytic = axis_aligned_loss_grad(pred, mesh, uv);
    const auto fd = fd_gradient(pred, mesh, uv, 1e-5);
    double ref = 1e-9, err = 0.0;
    for (size_t i = 0; i < analytic.size(); ++i) {
      ref = std::max({ref, std::abs(fd[i].x), std::abs(fd[i].y)});
      err = std::max({err, std::abs(analytic[i].x - fd[i].x),
                      std::abs(analytic[i].y - fd[i].y)});
    }
    CHECK(err / ref <= 1e-4);
  }
}

TEST_CASE("axis_aligned_loss_grad is zero at the exact minimum") {
  const Grid2D mesh = uniform_mesh(5, 6, 50.0, 40.0);
  const UVGrid uv = make_uniform_uv_grid(5, 6);
  const auto g = axis_aligned_loss_grad(mesh, mesh, uv);
  for (const Vec2& v : g) {
    CHECK(std::abs(v.x) < 1e-15);
    CHECK(std::abs(v.y) < 1e-15);
  }
}

TEST_CASE("axis_aligned_loss_grad sparsity on a linear mesh") {
  const int h = 6, w = 7;
  const Grid2D mesh = uniform_mesh(h, w, 60.0, 50.0);
  const UVGrid uv = make_uniform_uv_grid(h, w);
  Grid2D pred = mesh;
  // perturb only the y coordinates of row 2
  for (int c = 0; c < w; ++c) pred.at(2, c).y += 0.3 * (c % 3);
  const auto g = axis_aligned_loss_grad(pred, mesh, uv);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const Vec2& v = g[static_cast<size_t>(r) * w + c];
      if (r == 2) {
        CHECK(std::abs(v.x) < 1e-12);  // v depends on y only here
      } else {
        CHECK(std::abs(v.x) < 1e-12);
        CHECK(std::abs(v.y) < 1e-12);
      }
    }
  double row_mass = 0.0;
  for (int c = 0; c < w; ++c)
    row_mass += std::abs(g[static_cast<size_t>(2) * w + c].y);
  CHECK(row_mass > 0.0);
}

TEST_CASE("axis_aligned_loss_grad flags ambiguous boundary points") {
  auto rng = make_rng(52);
  Grid2D mesh = uniform_mesh(5, 5, 40.0, 40.0);
  mesh.at(2, 2) = mesh.at(2, 2) + Vec2{3.0, 1.0};  // curved around (2,2)
  const UVGrid uv = make_uniform_uv_grid(5, 5);
  std::uniform_real_distribution<double> st(0.2, 0.8);
  Grid2D pred(5, 5);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c)
      pred.at(r, c) =
          bilinear_in_cell(mesh, r % 4, c % 4, st(rng), st(rng));
  pred.at(0, 0) = mesh.at(2, 2);  // exactly on the kinked vertex
  CHECK_THROWS_AS(axis_aligned_loss_grad(pred, mesh, uv),
                  NondifferentiablePointError);
}

TEST_CASE("l1_grid_loss") {
  auto rng = make_rng(8);
  const Grid2D a = random_smooth_mesh(4, 5, rng);
  CHECK(l1_grid_loss(a, a) == 0.0);

  Grid2D b = a;
  for (auto& p : b.points()) p += {0.5, 0.5};
  CHECK(l1_grid_loss(a, b) == doctest::Approx(0.5).epsilon(1e-12));

  // elementwise oracle
  Grid2D c = a;
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (auto& p : c.points()) p += {unit(rng), unit(rng)};
  double acc = 0.0;
  for (size_t i = 0; i < a.points().size(); ++i)
    acc += std::abs(a.points()[i].x - c.points()[i].x) +
           std::abs(a.points()[i].y - c.points()[i].y);
  CHECK(l1_grid_loss(a, c) ==
        doctest::Approx(acc / (a.points().size() * 2)).epsilon(1e-12));

  CHECK_THROWS_AS(l1_grid_loss(a, Grid2D(5, 5)), DimensionError);

  // metric properties on random triples
  for (int k = 0; k < 20; ++k) {
    Grid2D x = random_smooth_mesh(3, 4, rng);
    Grid2D y = random_smooth_mesh(3, 4, rng);
    Grid2D z = random_smooth_mesh(3, 4, rng);
    CHECK(l1_grid_loss(x, y) == doctest::Approx(l1_grid_loss(y, x)));
    CHECK(l1_grid_loss(x, z) <=
          l1_grid_loss(x, y) + l1_grid_loss(y, z) + 1e-12);
  }
}

TEST_CASE("ssim identity and checkerboard") {
  ImageBuffer img(32, 32, 1);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      img.at(y, x) = ((x / 4 + y / 4) % 2) ? 1.0f : 0.0f;
  CHECK(ssim(img, img) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ssim_loss(img, img) == doctest::Approx(0.0).epsilon(1e-12));

  ImageBuffer inv(32, 32, 1);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) inv.at(y, x) = 1.0f - img.at(y, x);
  CHECK(ssim(img, inv) < 0.1);
  CHECK(ssim(img, inv) == doctest::Approx(ssim(inv, img)).epsilon(1e-12));
}

TEST_CASE("ssim noise monotonicity") {
  const ImageBuffer base = make_synthetic_page(48, 48, 5);
  for (uint64_t seed = 0; seed < 20; ++seed) {
    auto rng = make_rng(seed);
    std::normal_distribution<double> n5(0.0, 0.05), n10(0.0, 0.1);
    ImageBuffer a = base, b = base;
    auto rng2 = rng;
    for (float& v : a.samples())
      v = static_cast<float>(std::clamp(v + n5(rng), 0.0, 1.0));
    for (float& v : b.samples())
      v = static_cast<float>(std::clamp(v + n10(rng2), 0.0, 1.0));
    CHECK(ssim(base, b) < ssim(base, a));
  }
}

TEST_CASE("ssim input validation") {
  const ImageBuffer a(8, 8, 1, 0.5f);
  CHECK_THROWS_AS(ssim(a, a), InvalidInputError);  // smaller than the window
  const ImageBuffer b(16, 16, 1, 0.5f);
  const ImageBuffer c(16, 17, 1, 0.5f);
  CHECK_THROWS_AS(ssim(b, c), DimensionError);
  SsimParams bad;
  bad.window = 10;
  const ImageBuffer d(32, 32, 1, 0.5f);
  CHECK_THROWS_AS(ssim(d, d, bad), ParameterError);
}

TEST_CASE("total_loss weighted sum") {
  CHECK(total_loss({0, 0, 0, 0}) == 0.0);
  CHECK(total_loss({1, 1, 1, 1}) == doctest::Approx(2.25).epsilon(1e-15));
  LossWeights zero{0, 0, 0, 0};
  CHECK(total_loss({0.3, 0.7, 2.0, 0.9}, zero) == 0.0);
  LossWeights neg;
  neg.alpha = -1.0;
  CHECK_THROWS_AS(total_loss({1, 1, 1, 1}, neg), ParameterError);
}
