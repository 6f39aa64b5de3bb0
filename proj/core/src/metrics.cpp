#include "warpmetrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "warpmetrics/losses.hpp"

namespace warpmetrics {

GradientWeights sobel_weights(const ImageBuffer& y) {
  if (y.height() < 3 || y.width() < 3)
    throw InvalidInputError("sobel_weights: image smaller than 3x3");
  const ImageBuffer g = y.to_gray();
  const int h = g.height(), w = g.width();
  GradientWeights out;
  out.height = h;
  out.width = w;
  out.gx.assign(static_cast<size_t>(h) * w, 0.0f);
  out.gy.assign(out.gx.size(), 0.0f);

  auto px = [&](int yy, int xx) {
    yy = std::clamp(yy, 0, h - 1);
    xx = std::clamp(xx, 0, w - 1);
    return static_cast<double>(g.at(yy, xx));
  };
  double max_x = 0.0, max_y = 0.0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double sx = (px(r - 1, c + 1) + 2.0 * px(r, c + 1) + px(r + 1, c + 1)) -
                        (px(r - 1, c - 1) + 2.0 * px(r, c - 1) + px(r + 1, c - 1));
      const double sy = (px(r + 1, c - 1) + 2.0 * px(r + 1, c) + px(r + 1, c + 1)) -
                        (px(r - 1, c - 1) + 2.0 * px(r - 1, c) + px(r - 1, c + 1));
      const size_t i = out.index(r, c);
      out.gx[i] = static_cast<float>(std::abs(sx));
      out.gy[i] = static_cast<float>(std::abs(sy));
      max_x = std::max(max_x, std::abs(sx));
      max_y = std::max(max_y, std::abs(sy));
    }
  }
  if (max_x > 0.0)
    for (float& v : out.gx) v = static_cast<float>(v / max_x);
  if (max_y > 0.0)
    for (float& v : out.gy) v = static_cast<float>(v / max_y);
  return out;
}

AadResult aad(const ImageBuffer& y, const FlowField& flow,
              const AadParams& params) {
  return aad(sobel_weights(y), flow, params);
}

AadResult aad(const GradientWeights& weights, const FlowField& flow,
              const AadParams& params) {
  if (params.epsilon <= 0.0) throw ParameterError("aad: epsilon must be > 0");
  if (weights.height != flow.height || weights.width != flow.width)
    throw DimensionError("aad: weight/flow dimensions differ");
  const int h = flow.height, w = flow.width;

  AadResult res;
  res.height = h;
  res.width = w;
  res.d_row.assign(static_cast<size_t>(h) * w, 0.0f);
  res.d_col.assign(res.d_row.size(), 0.0f);
  res.d.assign(res.d_row.size(), 0.0f);
  res.row_means.assign(h, 0.0);
  res.col_means.assign(w, 0.0);

  // Row-wise gy-weighted means of vy. A row whose weight mass is below
  // epsilon carries no feature-line evidence: its deviations stay zero.
  std::vector<uint8_t> row_ok(h, 0), col_ok(w, 0);
  for (int r = 0; r < h; ++r) {
    double num = 0.0, den = 0.0;
    float lo = flow.vy[flow.index(r, 0)], hi = lo;
    for (int c = 0; c < w; ++c) {
      const size_t i = flow.index(r, c);
      num += static_cast<double>(flow.vy[i]) * weights.gy[i];
      den += weights.gy[i];
      lo = std::min(lo, flow.vy[i]);
      hi = std::max(hi, flow.vy[i]);
    }
    if (den >= params.epsilon) {
      // constant rows get their exact value, not the fp-rounded quotient
      res.row_means[r] = (lo == hi) ? lo : num / den;
      row_ok[r] = 1;
    }
  }
  for (int c = 0; c < w; ++c) {
    double num = 0.0, den = 0.0;
    float lo = flow.vx[flow.index(0, c)], hi = lo;
    for (int r = 0; r < h; ++r) {
      const size_t i = flow.index(r, c);
      num += static_cast<double>(flow.vx[i]) * weights.gx[i];
      den += weights.gx[i];
      lo = std::min(lo, flow.vx[i]);
      hi = std::max(hi, flow.vx[i]);
    }
    if (den >= params.epsilon) {
      res.col_means[c] = (lo == hi) ? lo : num / den;
      col_ok[c] = 1;
    }
  }

  double sum_d = 0.0, sum_row = 0.0, sum_col = 0.0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const size_t i = flow.index(r, c);
      double dr = 0.0, dc = 0.0;
      if (row_ok[r])
        dr = weights.gy[i] * std::abs(static_cast<double>(flow.vy[i]) -
                                      res.row_means[r]);
      if (col_ok[c])
        dc = weights.gx[i] * std::abs(static_cast<double>(flow.vx[i]) -
                                      res.col_means[c]);
      const double dd = std::sqrt(dr * dr + dc * dc);
      res.d_row[i] = static_cast<float>(dr);
      res.d_col[i] = static_cast<float>(dc);
      res.d[i] = static_cast<float>(dd);
      sum_row += dr;
      sum_col += dc;
      sum_d += dd;
    }
  }
  const double n = static_cast<double>(h) * w;
  res.aad = sum_d / n;
  res.aad_h = sum_row / n;
  res.aad_v = sum_col / n;
  return res;
}

double ld(const FlowField& flow) {
  double acc = 0.0;
  size_t count = 0;
  for (size_t i = 0; i < flow.size(); ++i) {
    if (!flow.valid[i]) continue;
    acc += std::hypot(static_cast<double>(flow.vx[i]),
                      static_cast<double>(flow.vy[i]));
    ++count;
  }
  if (count == 0) throw InvalidInputError("ld: no valid flow pixels");
  return acc / count;
}

AdResult ad_approx(const FlowField& flow, const GradientWeights& weights) {
  if (weights.height != flow.height || weights.width != flow.width)
    throw DimensionError("ad_approx: weight/flow dimensions differ");
  double wsum = 0.0, tx = 0.0, ty = 0.0;
  for (size_t i = 0; i < flow.size(); ++i) {
    const double wgt = std::max(weights.gx[i], weights.gy[i]);
    wsum += wgt;
    tx += wgt * flow.vx[i];
    ty += wgt * flow.vy[i];
  }
  AdResult res;
  if (wsum <= 0.0) {
    res.degenerate = true;
    return res;
  }
  tx /= wsum;
  ty /= wsum;
  double acc = 0.0;
  for (size_t i = 0; i < flow.size(); ++i) {
    const double wgt = std::max(weights.gx[i], weights.gy[i]);
    acc += wgt * std::hypot(flow.vx[i] - tx, flow.vy[i] - ty);
  }
  res.value = acc / wsum;
  return res;
}

namespace {

ImageBuffer downsample2(const ImageBuffer& img) {
  const int oh = img.height() / 2;
  const int ow = img.width() / 2;
  ImageBuffer out(oh, ow, img.channels());
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x)
      for (int c = 0; c < img.channels(); ++c)
        out.at(y, x, c) = (img.at(2 * y, 2 * x, c) + img.at(2 * y, 2 * x + 1, c) +
                           img.at(2 * y + 1, 2 * x, c) +
                           img.at(2 * y + 1, 2 * x + 1, c)) /
                          4.0f;
  return out;
}

// Mean contrast-structure term of SSIM (the cs part).
double mean_cs(const ImageBuffer& a, const ImageBuffer& b,
               const SsimParams& p) {
  // Shares the Gaussian-window machinery with ssim via a local recompute;
  // the window is small so the duplicate filtering cost is negligible.
  const ImageBuffer ga = a.to_gray();
  const ImageBuffer gb = b.to_gray();
  const int h = ga.height(), w = ga.width();
  const int n = p.window;
  std::vector<double> k(n);
  {
    const double c = (n - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      k[i] = std::exp(-(i - c) * (i - c) / (2.0 * p.sigma * p.sigma));
      sum += k[i];
    }
    for (double& v : k) v /= sum;
  }
  const int ow = w - n + 1, oh = h - n + 1;
  auto filt = [&](auto&& get) {
    std::vector<double> tmp(static_cast<size_t>(h) * ow);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += k[i] * get(y, x + i);
        tmp[static_cast<size_t>(y) * ow + x] = acc;
      }
    std::vector<double> out(static_cast<size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
          acc += k[i] * tmp[static_cast<size_t>(y + i) * ow + x];
        out[static_cast<size_t>(y) * ow + x] = acc;
      }
    return out;
  };
  const auto mu_x = filt([&](int y, int x) { return (double)ga.at(y, x); });
  const auto mu_y = filt([&](int y, int x) { return (double)gb.at(y, x); });
  const auto sxx =
      filt([&](int y, int x) { return (double)ga.at(y, x) * ga.at(y, x); });
  const auto syy =
      filt([&](int y, int x) { return (double)gb.at(y, x) * gb.at(y, x); });
  const auto sxy =
      filt([&](int y, int x) { return (double)ga.at(y, x) * gb.at(y, x); });
  const double C2 = p.k2 * p.dynamic_range * p.k2 * p.dynamic_range;
  double acc = 0.0;
  for (size_t i = 0; i < mu_x.size(); ++i) {
    const double vx = sxx[i] - mu_x[i] * mu_x[i];
    const double vy = syy[i] - mu_y[i] * mu_y[i];
    const double cxy = sxy[i] - mu_x[i] * mu_y[i];
    acc += (2.0 * cxy + C2) / (vx + vy + C2);
  }
  return acc / mu_x.size();
}

}  // namespace

double ms_ssim(const ImageBuffer& a, const ImageBuffer& b) {
  if (a.height() != b.height() || a.width() != b.width())
    throw DimensionError("ms_ssim: image shapes differ");
  constexpr int kScales = 5;
  constexpr double kExponents[kScales] = {0.0448, 0.2856, 0.3001, 0.2363,
                                          0.1333};
  constexpr int kMinSide = 176;  // 11 * 2^(kScales-1)
  if (std::min(a.height(), a.width()) < kMinSide)
    throw InvalidInputError(
        "ms_ssim: min image side must be at least 176 px for 5 scales");

  SsimParams params;
  ImageBuffer ca = a, cb = b;
  double result = 1.0;
  for (int s = 0; s < kScales; ++s) {
    if (s == kScales - 1) {
      const double v = std::max(ssim(ca, cb, params), 0.0);
      result *= std::pow(v, kExponents[s]);
    } else {
      const double v = std::max(mean_cs(ca, cb, params), 0.0);
      result *= std::pow(v, kExponents[s]);
      ca = downsample2(ca);
      cb = downsample2(cb);
    }
  }
  return result;
}

namespace {

std::vector<uint32_t> decode_utf8(const std::string& s) {
  std::vector<uint32_t> out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    uint32_t cp = c;
    int extra = 0;
    if ((c & 0x80) == 0x00) extra = 0;
    else if ((c & 0xE0) == 0xC0) { extra = 1; cp = c & 0x1F; }
    else if ((c & 0xF0) == 0xE0) { extra = 2; cp = c & 0x0F; }
    else if ((c & 0xF8) == 0xF0) { extra = 3; cp = c & 0x07; }
    else { out.push_back(c); ++i; continue; }  // stray byte: one unit
    if (i + extra >= s.size()) { out.push_back(c); ++i; continue; }
    bool ok = true;
    uint32_t acc = cp;
    for (int k = 1; k <= extra; ++k) {
      const unsigned char cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) { ok = false; break; }
      acc = (acc << 6) | (cc & 0x3F);
    }
    if (!ok) { out.push_back(c); ++i; continue; }
    out.push_back(acc);
    i += extra + 1;
  }
  return out;
}

}  // namespace

long edit_distance(const std::string& a, const std::string& b) {
  const std::vector<uint32_t> x = decode_utf8(a);
  const std::vector<uint32_t> y = decode_utf8(b);
  const size_t n = x.size(), m = y.size();
  std::vector<long> prev(m + 1), cur(m + 1);
  std::iota(prev.begin(), prev.end(), 0L);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<long>(i);
    for (size_t j = 1; j <= m; ++j) {
      const long sub = prev[j - 1] + (x[i - 1] == y[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double cer(const std::string& reference, const std::string& hypothesis) {
  const long ed = edit_distance(reference, hypothesis);
  const size_t len = decode_utf8(reference).size();
  return static_cast<double>(ed) / static_cast<double>(std::max<size_t>(1, len));
}

double r_squared(std::span<const double> truth,
                 std::span<const double> estimate) {
  if (truth.size() != estimate.size())
    throw DimensionError("r_squared: list lengths differ");
  if (truth.size() < 3)
    throw InvalidInputError("r_squared: need at least 3 pairs");
  const double n = static_cast<double>(truth.size());
  const double mx = std::accumulate(truth.begin(), truth.end(), 0.0) / n;
  const double my = std::accumulate(estimate.begin(), estimate.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (size_t i = 0; i < truth.size(); ++i) {
    const double dx = truth[i] - mx;
    const double dy = estimate[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0)
    throw UndefinedStatisticError("r_squared: zero variance input");
  return (sxy * sxy) / (sxx * syy);
}

double normalized_std(std::span<const double> values) {
  if (values.size() < 3)
    throw InvalidInputError("normalized_std: need at least 3 values");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (mean == 0.0)
    throw UndefinedStatisticError("normalized_std: zero mean");
  if (*lo == *hi) return 0.0;  // constant input, exact zero
  double acc = 0.0;
  for (double v : values) acc += (v - mean) * (v - mean);
  return std::sqrt(acc / n) / mean;
}

}  // namespace warpmetrics
