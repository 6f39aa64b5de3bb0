#include "warpmetrics/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace warpmetrics {

namespace {

// Anchor points of the viridis map; intermediate values are interpolated.
constexpr float kViridis[][3] = {
    {0.267004f, 0.004874f, 0.329415f}, {0.282623f, 0.140926f, 0.457517f},
    {0.253935f, 0.265254f, 0.529983f}, {0.206756f, 0.371758f, 0.553117f},
    {0.163625f, 0.471133f, 0.558148f}, {0.127568f, 0.566949f, 0.550556f},
    {0.134692f, 0.658636f, 0.517649f}, {0.266941f, 0.748751f, 0.440573f},
    {0.477504f, 0.821444f, 0.318195f}, {0.741388f, 0.873449f, 0.149561f},
    {0.993248f, 0.906157f, 0.143936f}};
constexpr int kViridisN = sizeof(kViridis) / sizeof(kViridis[0]);

// 5x7 digit/symbol glyphs for the legend labels (columns of 7 bits).
struct Glyph {
  char ch;
  uint8_t cols[5];
};
constexpr Glyph kGlyphs[] = {
    {'0', {0x3e, 0x51, 0x49, 0x45, 0x3e}}, {'1', {0x00, 0x42, 0x7f, 0x40, 0x00}},
    {'2', {0x42, 0x61, 0x51, 0x49, 0x46}}, {'3', {0x21, 0x41, 0x45, 0x4b, 0x31}},
    {'4', {0x18, 0x14, 0x12, 0x7f, 0x10}}, {'5', {0x27, 0x45, 0x45, 0x45, 0x39}},
    {'6', {0x3c, 0x4a, 0x49, 0x49, 0x30}}, {'7', {0x01, 0x71, 0x09, 0x05, 0x03}},
    {'8', {0x36, 0x49, 0x49, 0x49, 0x36}}, {'9', {0x06, 0x49, 0x49, 0x29, 0x1e}},
    {'.', {0x00, 0x60, 0x60, 0x00, 0x00}}, {'-', {0x08, 0x08, 0x08, 0x08, 0x08}},
    {'+', {0x08, 0x08, 0x3e, 0x08, 0x08}}, {'e', {0x38, 0x54, 0x54, 0x54, 0x18}},
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00}}};

const uint8_t* glyph_for(char c) {
  for (const Glyph& g : kGlyphs)
    if (g.ch == c) return g.cols;
  return nullptr;
}

void draw_text(ImageBuffer& img, int x0, int y0, const std::string& text,
               float shade) {
  int x = x0;
  for (char c : text) {
    const uint8_t* cols = glyph_for(c);
    if (cols) {
      for (int cx = 0; cx < 5; ++cx)
        for (int cy = 0; cy < 7; ++cy)
          if (cols[cx] & (1 << cy)) {
            const int px = x + cx, py = y0 + cy;
            if (px >= 0 && px < img.width() && py >= 0 && py < img.height())
              for (int ch = 0; ch < img.channels(); ++ch)
                img.at(py, px, ch) = shade;
          }
    }
    x += 6;
  }
}

std::string format_value(double v) {
  char buf[32];
  if (v != 0.0 && (std::abs(v) < 0.01 || std::abs(v) >= 1000.0))
    std::snprintf(buf, sizeof(buf), "%.2e", v);
  else
    std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace

void colormap_viridis(double t, float& r, float& g, float& b) {
  t = std::clamp(t, 0.0, 1.0);
  const double pos = t * (kViridisN - 1);
  const int i = std::min(static_cast<int>(pos), kViridisN - 2);
  const double f = pos - i;
  r = static_cast<float>(kViridis[i][0] * (1 - f) + kViridis[i + 1][0] * f);
  g = static_cast<float>(kViridis[i][1] * (1 - f) + kViridis[i + 1][1] * f);
  b = static_cast<float>(kViridis[i][2] * (1 - f) + kViridis[i + 1][2] * f);
}

double heatmap_cap(const std::vector<float>& values, double percentile) {
  if (values.empty()) return 0.0;
  std::vector<float> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  const double pos =
      std::clamp(percentile, 0.0, 100.0) / 100.0 * (sorted.size() - 1);
  return sorted[static_cast<size_t>(pos)];
}

ImageBuffer render_heatmap_overlay(const ImageBuffer& base,
                                   const std::vector<float>& values,
                                   int values_h, int values_w, double cap,
                                   const HeatmapOptions& options) {
  if (base.empty()) throw InvalidInputError("render_heatmap_overlay: empty base");
  if (values.size() != static_cast<size_t>(values_h) * values_w)
    throw DimensionError("render_heatmap_overlay: map size mismatch");
  if (values_h != base.height() || values_w != base.width())
    throw DimensionError("render_heatmap_overlay: map/base dimensions differ");
  if (cap <= 0.0) cap = heatmap_cap(values, options.percentile);

  const int legend = options.legend_height > 0 ? options.legend_height : 0;
  ImageBuffer out(base.height() + legend, base.width(), 3);
  const double a = std::clamp(options.alpha, 0.0, 1.0);
  for (int y = 0; y < base.height(); ++y)
    for (int x = 0; x < base.width(); ++x) {
      const double t =
          cap > 0.0 ? values[static_cast<size_t>(y) * values_w + x] / cap : 0.0;
      float r, g, b;
      colormap_viridis(t, r, g, b);
      for (int c = 0; c < 3; ++c) {
        const float src = base.channels() == 3 ? base.at(y, x, c) : base.at(y, x);
        const float heat = c == 0 ? r : (c == 1 ? g : b);
        out.at(y, x, c) = static_cast<float>((1.0 - a) * src + a * heat);
      }
    }
  if (legend > 0) {
    const int y0 = base.height();
    for (int y = y0; y < out.height(); ++y)
      for (int x = 0; x < out.width(); ++x) {
        float r, g, b;
        colormap_viridis(static_cast<double>(x) / (out.width() - 1), r, g, b);
        out.at(y, x, 0) = r;
        out.at(y, x, 1) = g;
        out.at(y, x, 2) = b;
      }
    const int ty = y0 + std::max(0, (legend - 7) / 2);
    draw_text(out, 2, ty, "0", 1.0f);
    const std::string cap_text = format_value(cap);
    draw_text(out, out.width() - 6 * static_cast<int>(cap_text.size()) - 2, ty,
              cap_text, 0.0f);
  }
  return out;
}

}  // namespace warpmetrics
