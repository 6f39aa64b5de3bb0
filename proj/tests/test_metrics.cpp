#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"
#include "warpmetrics/metrics.hpp"

using namespace warpmetrics;
using namespace testsupport;

namespace {

GradientWeights make_weights(int h, int w, const std::vector<float>& gx,
                             const std::vector<float>& gy) {
  GradientWeights g;
  g.height = h;
  g.width = w;
  g.gx = gx;
  g.gy = gy;
  return g;
}

FlowField make_flow(int h, int w, const std::vector<float>& vx,
                    const std::vector<float>& vy) {
  FlowField f(h, w);
  f.vx = vx;
  f.vy = vy;
  return f;
}

}  // namespace

TEST_CASE("sobel_weights on constant and step images") {
  const ImageBuffer flat(8, 8, 1, 0.5f);
  const GradientWeights g = sobel_weights(flat);
  for (float v : g.gx) CHECK(v == 0.0f);
  for (float v : g.gy) CHECK(v == 0.0f);

  ImageBuffer step(8, 8, 1);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) step.at(y, x) = x < 4 ? 0.0f : 1.0f;
  const GradientWeights gs = sobel_weights(step);
  float max_col3 = 0.0f, max_gy = 0.0f;
  for (int y = 0; y < 8; ++y) {
    max_col3 = std::max(max_col3, gs.gx[gs.index(y, 3)]);
    for (int x = 0; x < 8; ++x) max_gy = std::max(max_gy, gs.gy[gs.index(y, x)]);
  }
  CHECK(max_col3 == 1.0f);  // edge column carries the max response
  CHECK(max_gy == 0.0f);    // no horizontal feature lines

  CHECK_THROWS_AS(sobel_weights(ImageBuffer(2, 8, 1)), InvalidInputError);
}

TEST_CASE("sobel_weights matches a direct convolution oracle") {
  ImageBuffer img(5, 5, 1);
  const float vals[5][5] = {{0.0f, 0.1f, 0.3f, 0.3f, 0.9f},
                            {0.2f, 0.3f, 0.1f, 0.5f, 0.6f},
                            {0.9f, 0.2f, 0.7f, 0.1f, 0.0f},
                            {0.4f, 0.4f, 0.4f, 0.8f, 0.2f},
                            {0.1f, 0.5f, 0.6f, 0.7f, 0.3f}};
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) img.at(y, x) = vals[y][x];
  const GradientWeights g = sobel_weights(img);

  const int kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  const int ky[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
  auto px = [&](int y, int x) {
    return double(vals[std::clamp(y, 0, 4)][std::clamp(x, 0, 4)]);
  };
  std::vector<double> ox(25), oy(25);
  double mx = 0, my = 0;
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) {
      double ax = 0, ay = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          ax += kx[dy + 1][dx + 1] * px(y + dy, x + dx);
          ay += ky[dy + 1][dx + 1] * px(y + dy, x + dx);
        }
      ox[y * 5 + x] = std::abs(ax);
      oy[y * 5 + x] = std::abs(ay);
      mx = std::max(mx, std::abs(ax));
      my = std::max(my, std::abs(ay));
    }
  for (int i = 0; i < 25; ++i) {
    CHECK(g.gx[i] == doctest::Approx(ox[i] / mx).epsilon(1e-6));
    CHECK(g.gy[i] == doctest::Approx(oy[i] / my).epsilon(1e-6));
  }
}

TEST_CASE("aad zero and constant flows") {
  const ImageBuffer page = make_synthetic_page(32, 32, 3);
  const FlowField zero(32, 32);
  const AadResult rz = aad(page, zero);
  CHECK(rz.aad == 0.0);
  CHECK(rz.aad_h == 0.0);
  CHECK(rz.aad_v == 0.0);
  for (float v : rz.d) CHECK(v == 0.0f);

  FlowField constant(32, 32);
  std::fill(constant.vx.begin(), constant.vx.end(), 3.0f);
  std::fill(constant.vy.begin(), constant.vy.end(), -2.0f);
  const AadResult rc = aad(page, constant);
  CHECK(rc.aad == 0.0);

  // LD is NOT invariant to the same translation; the pair is the contrast
  FlowField f34(32, 32);
  std::fill(f34.vx.begin(), f34.vx.end(), 3.0f);
  std::fill(f34.vy.begin(), f34.vy.end(), 4.0f);
  CHECK(aad(page, f34).aad == 0.0);
  CHECK(ld(f34) == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("aad hand-computed 4x4 worked example") {
  const std::vector<float> gy{1, 0, 0, 1,  0.5, 0.5, 0, 0,
                              0, 0, 0, 0,  1,   1,   1, 1};
  const std::vector<float> gx{1, 0, 0, 0.25, 0, 1, 0, 0.25,
                              0, 0, 0, 0.25, 1, 0, 0, 0.25};
  const std::vector<float> vy{1, 2, 3, 4, 0, 2, 0, 2, 5, 5, 5, 5, 1, 1, 2, 2};
  const std::vector<float> vx{2, 1, 0, 8, 0, 3, 1, 0, 4, 5, 6, 4, 2, 1, 1, 4};
  const AadResult r =
      aad(make_weights(4, 4, gx, gy), make_flow(4, 4, vx, vy));

  CHECK(r.row_means[0] == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(r.row_means[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.row_means[3] == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(r.col_means[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(r.col_means[1] == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(r.col_means[3] == doctest::Approx(4.0).epsilon(1e-15));

  const double expected_aad = (5.5 + std::sqrt(3.25)) / 16.0;
  CHECK(r.aad == doctest::Approx(expected_aad).epsilon(1e-12));
  CHECK(r.aad_h == doctest::Approx(0.375).epsilon(1e-12));
  CHECK(r.aad_v == doctest::Approx(0.125).epsilon(1e-12));
  // the per-pixel maps are stored as float; the scalar stays double-accurate
  CHECK(r.d[3] == doctest::Approx(std::sqrt(3.25)).epsilon(1e-6));
}

TEST_CASE("aad invariance classes and scaling") {
  auto rng = make_rng(1000);
  std::uniform_real_distribution<float> unit(-4.0f, 4.0f);
  for (uint64_t seed = 0; seed < 5; ++seed) {
    const ImageBuffer page = make_synthetic_page(40, 36, seed);
    // axis-preserving: vy constant per row, vx constant per column
    FlowField f(40, 36);
    std::vector<float> row_v(40), col_u(36);
    for (float& v : row_v) v = unit(rng);
    for (float& v : col_u) v = unit(rng);
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 36; ++x) {
        f.vy[f.index(y, x)] = row_v[y];
        f.vx[f.index(y, x)] = col_u[x];
      }
    CHECK(aad(page, f).aad == 0.0);

    // linear scaling on a generic flow
    FlowField g(40, 36);
    for (size_t i = 0; i < g.size(); ++i) {
      g.vx[i] = unit(rng);
      g.vy[i] = unit(rng);
    }
    const double base = aad(page, g).aad;
    // power-of-two scale: float scaling and the AAD pipeline commute exactly
    FlowField g2(40, 36);
    for (size_t i = 0; i < g.size(); ++i) {
      g2.vx[i] = 2.0f * g.vx[i];
      g2.vy[i] = 2.0f * g.vy[i];
    }
    CHECK(aad(page, g2).aad == doctest::Approx(2.0 * base).epsilon(1e-9));
    CHECK(base >= 0.0);
  }
}

TEST_CASE("aad is zero on a flat page for any flow") {
  const ImageBuffer flat(24, 24, 1, 0.7f);
  auto rng = make_rng(9);
  std::uniform_real_distribution<float> unit(-5.0f, 5.0f);
  FlowField f(24, 24);
  for (size_t i = 0; i < f.size(); ++i) {
    f.vx[i] = unit(rng);
    f.vy[i] = unit(rng);
  }
  CHECK(aad(flat, f).aad == 0.0);
}

TEST_CASE("aad component bounds") {
  auto rng = make_rng(77);
  std::uniform_real_distribution<float> unit(-3.0f, 3.0f);
  for (int k = 0; k < 10; ++k) {
    const ImageBuffer page = make_synthetic_page(30, 30, k + 40);
    FlowField f(30, 30);
    for (size_t i = 0; i < f.size(); ++i) {
      f.vx[i] = unit(rng);
      f.vy[i] = unit(rng);
    }
    const AadResult r = aad(page, f);
    CHECK(r.aad <= r.aad_h + r.aad_v + 1e-12);
    CHECK(r.aad >= std::max(r.aad_h, r.aad_v) - 1e-12);
  }
}

TEST_CASE("aad parameter and dimension errors") {
  const ImageBuffer page = make_synthetic_page(16, 16, 1);
  const FlowField f(16, 15);
  CHECK_THROWS_AS(aad(page, f), DimensionError);
  AadParams bad;
  bad.epsilon = 0.0;
  CHECK_THROWS_AS(aad(page, FlowField(16, 16), bad), ParameterError);
}

TEST_CASE("ld basics") {
  const FlowField zero(8, 8);
  CHECK(ld(zero) == 0.0);
  auto rng = make_rng(2);
  std::uniform_real_distribution<float> unit(-2.0f, 2.0f);
  FlowField f(8, 8);
  double acc = 0.0;
  for (size_t i = 0; i < f.size(); ++i) {
    f.vx[i] = unit(rng);
    f.vy[i] = unit(rng);
    acc += std::hypot(double(f.vx[i]), double(f.vy[i]));
  }
  CHECK(ld(f) == doctest::Approx(acc / f.size()).epsilon(1e-9));
  FlowField invalid(4, 4, false);
  CHECK_THROWS_AS(ld(invalid), InvalidInputError);
}

TEST_CASE("ad_approx removes global translation") {
  const ImageBuffer page = make_synthetic_page(24, 24, 11);
  const GradientWeights w = sobel_weights(page);
  CHECK(ad_approx(FlowField(24, 24), w).value == 0.0);

  FlowField t(24, 24);
  std::fill(t.vx.begin(), t.vx.end(), 2.5f);
  std::fill(t.vy.begin(), t.vy.end(), -1.0f);
  CHECK(ad_approx(t, w).value == doctest::Approx(0.0).epsilon(1e-6));

  // flow = t + r with w-weighted zero-mean residual
  auto rng = make_rng(5);
  std::uniform_real_distribution<float> unit(-1.0f, 1.0f);
  FlowField r(24, 24);
  double wx = 0.0, wy = 0.0, wsum = 0.0;
  for (size_t i = 0; i < r.size(); ++i) {
    r.vx[i] = unit(rng);
    r.vy[i] = unit(rng);
    const double wi = std::max(w.gx[i], w.gy[i]);
    wx += wi * r.vx[i];
    wy += wi * r.vy[i];
    wsum += wi;
  }
  REQUIRE(wsum > 0.0);
  double expect = 0.0;
  FlowField combined(24, 24);
  for (size_t i = 0; i < r.size(); ++i) {
    const float rx = r.vx[i] - static_cast<float>(wx / wsum);
    const float ry = r.vy[i] - static_cast<float>(wy / wsum);
    combined.vx[i] = 2.5f + rx;
    combined.vy[i] = -1.0f + ry;
    expect += std::max(w.gx[i], w.gy[i]) * std::hypot(double(rx), double(ry));
  }
  expect /= wsum;
  CHECK(ad_approx(combined, w).value == doctest::Approx(expect).epsilon(1e-4));

  // all-zero weights flag, never silently zero
  GradientWeights zero_w = w;
  std::fill(zero_w.gx.begin(), zero_w.gx.end(), 0.0f);
  std::fill(zero_w.gy.begin(), zero_w.gy.end(), 0.0f);
  const AdResult res = ad_approx(combined, zero_w);
  CHECK(res.degenerate);
  CHECK(res.value == 0.0);
}

TEST_CASE("ms_ssim identity, noise, and bounds") {
  const ImageBuffer page = make_synthetic_page(180, 180, 21);
  CHECK(ms_ssim(page, page) == doctest::Approx(1.0).epsilon(1e-9));

  ImageBuffer n1(180, 180, 1), n2(180, 180, 1);
  auto rng = make_rng(3);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  for (float& v : n1.samples()) v = unit(rng);
  for (float& v : n2.samples()) v = unit(rng);
  const double noisy = ms_ssim(n1, n2);
  CHECK(noisy < 0.2);
  CHECK(noisy >= 0.0);
  CHECK(ms_ssim(n1, n2) == doctest::Approx(ms_ssim(n2, n1)).epsilon(1e-12));
  CHECK(ms_ssim(page, n1) <= 1.0);

  CHECK_THROWS_WITH_AS(ms_ssim(ImageBuffer(64, 64, 1), ImageBuffer(64, 64, 1)),
                       doctest::Contains("176"), InvalidInputError);
}

TEST_CASE("edit_distance and cer") {
  CHECK(edit_distance("", "") == 0);
  CHECK(edit_distance("abc", "abc") == 0);
  CHECK(cer("abc", "abc") == 0.0);
  CHECK(edit_distance("kitten", "sitting") == 3);
  CHECK(edit_distance("", "ab") == 2);
  CHECK(cer("", "ab") == doctest::Approx(2.0).epsilon(1e-15));
  // multibyte codepoints count once
  CHECK(edit_distance("\xc3\xa9", "e") == 1);
}

TEST_CASE("edit_distance matches the exhaustive DP oracle") {
  auto rng = make_rng(808);
  std::uniform_int_distribution<int> len(0, 30);
  std::uniform_int_distribution<int> ch('a', 'e');
  auto dp_oracle = [](const std::string& a, const std::string& b) {
    std::vector<std::vector<long>> d(a.size() + 1,
                                     std::vector<long>(b.size() + 1));
    for (size_t i = 0; i <= a.size(); ++i) d[i][0] = long(i);
    for (size_t j = 0; j <= b.size(); ++j) d[0][j] = long(j);
    for (size_t i = 1; i <= a.size(); ++i)
      for (size_t j = 1; j <= b.size(); ++j)
        d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                            d[i - 1][j - 1] + (a[i - 1] != b[j - 1])});
    return d[a.size()][b.size()];
  };
  for (int k = 0; k < 300; ++k) {
    std::string a, b;
    for (int i = len(rng); i > 0; --i) a.push_back(char(ch(rng)));
    for (int i = len(rng); i > 0; --i) b.push_back(char(ch(rng)));
    CHECK(edit_distance(a, b) == dp_oracle(a, b));
  }
}

TEST_CASE("r_squared and normalized_std") {
  const std::vector<double> t{1.0, 2.0, 3.0, 4.0};
  CHECK(r_squared(t, t) == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<double> affine;
  for (double v : t) affine.push_back(2.0 * v + 1.0);
  CHECK(r_squared(t, affine) == doctest::Approx(1.0).epsilon(1e-12));
  const std::vector<double> flat{2.0, 2.0, 2.0, 2.0};
  CHECK_THROWS_AS(r_squared(t, flat), UndefinedStatisticError);

  CHECK(normalized_std(std::vector<double>{1.0, 1.0, 1.0}) == 0.0);
  const std::vector<double> v{1.0, 2.0, 3.0};
  // population std of {1,2,3} is sqrt(2/3); mean 2
  CHECK(normalized_std(v) ==
        doctest::Approx(std::sqrt(2.0 / 3.0) / 2.0).epsilon(1e-12));
  CHECK_THROWS_AS(normalized_std(std::vector<double>{-1.0, 0.0, 1.0}),
                  UndefinedStatisticError);
}
