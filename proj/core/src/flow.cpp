#include "warpmetrics/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace warpmetrics {

FlowField flow_from_warp(const ExpandedWarp& warp) {
  FlowField f(warp.height(), warp.width());
  for (int y = 0; y < warp.height(); ++y)
    for (int x = 0; x < warp.width(); ++x) {
      const Vec2 d =
          warp.displacement({static_cast<double>(x), static_cast<double>(y)});
      const size_t i = f.index(y, x);
      f.vx[i] = static_cast<float>(d.x);
      f.vy[i] = static_cast<float>(d.y);
    }
  return f;
}

FlowField flow_from_warp(const WarpSpec& spec, int height, int width) {
  return flow_from_warp(ExpandedWarp(spec, height, width));
}

// ---- dense SIFT -------------------------------------------------------------

DescriptorGrid dense_sift(const ImageBuffer& image,
                          const SiftFlowParams& params) {
  const int cs = params.cell_size;
  const int nbins = params.orientation_bins;
  if (cs < 1) throw ParameterError("dense_sift: cell_size must be >= 1");
  if (nbins < 2) throw ParameterError("dense_sift: need at least 2 bins");
  const ImageBuffer gray = image.to_gray();
  const int h = gray.height(), w = gray.width();
  if (h < 4 * cs + 1 || w < 4 * cs + 1)
    throw InvalidInputError("dense_sift: image smaller than one descriptor");

  auto px = [&](int y, int x) {
    return static_cast<double>(
        gray.at(std::clamp(y, 0, h - 1), std::clamp(x, 0, w - 1)));
  };

  // Soft orientation binning of central-difference gradients.
  const size_t n = static_cast<size_t>(h) * w;
  std::vector<float> bins(n * nbins, 0.0f);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double gx = (px(y, x + 1) - px(y, x - 1)) / 2.0;
      const double gy = (px(y + 1, x) - px(y - 1, x)) / 2.0;
      const double mag = std::hypot(gx, gy);
      if (mag <= 0.0) continue;
      double theta = std::atan2(gy, gx);
      if (theta < 0.0) theta += 2.0 * std::numbers::pi;
      const double pos = theta / (2.0 * std::numbers::pi) * nbins;
      int b0 = static_cast<int>(pos) % nbins;
      const double f = pos - std::floor(pos);
      const int b1 = (b0 + 1) % nbins;
      const size_t base = (static_cast<size_t>(y) * w + x) * nbins;
      bins[base + b0] += static_cast<float>(mag * (1.0 - f));
      bins[base + b1] += static_cast<float>(mag * f);
    }

  // Triangular spatial aggregation (separable), zero padding outside.
  const int half = cs - 1;  // kernel support [-half, half]
  std::vector<float> kern(2 * half + 1);
  for (int d = -half; d <= half; ++d)
    kern[d + half] = static_cast<float>(1.0 - std::abs(d) / static_cast<double>(cs));
  std::vector<float> tmp(n * nbins, 0.0f), pooled(n * nbins, 0.0f);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const size_t out = (static_cast<size_t>(y) * w + x) * nbins;
      for (int d = -half; d <= half; ++d) {
        const int xx = x + d;
        if (xx < 0 || xx >= w) continue;
        const float kv = kern[d + half];
        const size_t in = (static_cast<size_t>(y) * w + xx) * nbins;
        for (int b = 0; b < nbins; ++b) tmp[out + b] += kv * bins[in + b];
      }
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const size_t out = (static_cast<size_t>(y) * w + x) * nbins;
      for (int d = -half; d <= half; ++d) {
        const int yy = y + d;
        if (yy < 0 || yy >= h) continue;
        const float kv = kern[d + half];
        const size_t in = (static_cast<size_t>(yy) * w + x) * nbins;
        for (int b = 0; b < nbins; ++b) pooled[out + b] += kv * tmp[in + b];
      }
    }

  // Sample the pooled histograms at the 4x4 cell offsets. (a-1.5)*cs is an
  // integer for even cell sizes; odd sizes interpolate between neighbors.
  DescriptorGrid desc;
  desc.height = h;
  desc.width = w;
  desc.dims = 16 * nbins;
  desc.data.assign(n * desc.dims, 0);

  std::vector<double> raw(desc.dims);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::fill(raw.begin(), raw.end(), 0.0);
      for (int b_cell = 0; b_cell < 4; ++b_cell) {
        const double oy = (b_cell - 1.5) * cs;
        for (int a_cell = 0; a_cell < 4; ++a_cell) {
          const double ox = (a_cell - 1.5) * cs;
          const double sx = x + ox, sy = y + oy;
          const int x0 = static_cast<int>(std::floor(sx));
          const int y0 = static_cast<int>(std::floor(sy));
          const double fx = sx - x0, fy = sy - y0;
          auto cellval = [&](int yy, int xx, int b) -> double {
            if (yy < 0 || yy >= h || xx < 0 || xx >= w) return 0.0;
            return pooled[(static_cast<size_t>(yy) * w + xx) * nbins + b];
          };
          const size_t out = (static_cast<size_t>(b_cell) * 4 + a_cell) * nbins;
          for (int b = 0; b < nbins; ++b) {
            double v;
            if (fx == 0.0 && fy == 0.0) {
              v = cellval(y0, x0, b);
            } else {
              v = (1 - fx) * (1 - fy) * cellval(y0, x0, b) +
                  fx * (1 - fy) * cellval(y0, x0 + 1, b) +
                  (1 - fx) * fy * cellval(y0 + 1, x0, b) +
                  fx * fy * cellval(y0 + 1, x0 + 1, b);
            }
            raw[out + b] = v;
          }
        }
      }
      double norm = 0.0;
      for (double v : raw) norm += v * v;
      norm = std::sqrt(norm);
      uint8_t* out = desc.data.data() + (static_cast<size_t>(y) * w + x) * desc.dims;
      if (norm < 1e-12) continue;  // flat neighborhood: all-zero descriptor
      for (double& v : raw) v = std::min(v / norm, 0.2);
      norm = 0.0;
      for (double v : raw) norm += v * v;
      norm = std::sqrt(norm);
      for (int i = 0; i < desc.dims; ++i)
        out[i] = static_cast<uint8_t>(
            std::min(255L, std::lround(raw[i] / norm * 255.0)));
    }
  }
  return desc;
}

// ---- SIFT-flow --------------------------------------------------------------

namespace {

ImageBuffer downsample_blur2(const ImageBuffer& img) {
  // [1 2 1]/4 separable blur, then decimate by 2.
  const int h = img.height(), w = img.width();
  ImageBuffer blur(h, w, 1);
  auto px = [&](int y, int x) {
    return static_cast<double>(
        img.at(std::clamp(y, 0, h - 1), std::clamp(x, 0, w - 1)));
  };
  std::vector<double> tmp(static_cast<size_t>(h) * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      tmp[static_cast<size_t>(y) * w + x] =
          (px(y, x - 1) + 2.0 * px(y, x) + px(y, x + 1)) / 4.0;
  auto tpx = [&](int y, int x) {
    return tmp[static_cast<size_t>(std::clamp(y, 0, h - 1)) * w +
               std::clamp(x, 0, w - 1)];
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      blur.at(y, x) = static_cast<float>(
          std::clamp((tpx(y - 1, x) + 2.0 * tpx(y, x) + tpx(y + 1, x)) / 4.0,
                     0.0, 1.0));
  const int oh = (h + 1) / 2, ow = (w + 1) / 2;
  ImageBuffer out(oh, ow, 1);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x)
      out.at(y, x) = blur.at(std::min(2 * y, h - 1), std::min(2 * x, w - 1));
  return out;
}

int descriptor_sad(const uint8_t* a, const uint8_t* b, int dims) {
  int acc = 0;
  for (int i = 0; i < dims; ++i) acc += std::abs(int(a[i]) - int(b[i]));
  return acc;
}

// Truncated-L1 distance transform over a label line: out(k) = min over i of
// cost(i) + min(alpha*|i - k|, trunc), where k may lie outside [0, L).
struct LineDT {
  std::vector<float> dt;
  float floor_cost = 0.0f;

  void build(const float* cost, int L, float alpha) {
    std::copy(cost, cost + L, dt.begin());
    for (int i = 1; i < L; ++i) dt[i] = std::min(dt[i], dt[i - 1] + alpha);
    for (int i = L - 2; i >= 0; --i) dt[i] = std::min(dt[i], dt[i + 1] + alpha);
    floor_cost = *std::min_element(cost, cost + L);
  }

  float eval(int k, int L, float alpha, float trunc) const {
    float v;
    if (k < 0)
      v = dt[0] + alpha * static_cast<float>(-k);
    else if (k >= L)
      v = dt[L - 1] + alpha * static_cast<float>(k - L + 1);
    else
      v = dt[k];
    return std::min(v, floor_cost + trunc);
  }
};

struct BpLayer {
  // incoming messages per direction, N x L
  std::vector<float> from_left, from_right, from_top, from_bottom, inter;
  std::vector<int> center;  // per-pixel label-window center (absolute flow)

  void init(size_t n, int L) {
    from_left.assign(n * L, 0.0f);
    from_right.assign(n * L, 0.0f);
    from_top.assign(n * L, 0.0f);
    from_bottom.assign(n * L, 0.0f);
    inter.assign(n * L, 0.0f);
    center.assign(n, 0);
  }
};

struct BpContext {
  int h = 0, w = 0, L = 0, radius = 0;
  std::vector<float> data;  // N * L * L, data[p][i_u][j_v]
  BpLayer u, v;
  float alpha = 0, strunc = 0, gamma = 0;

  size_t idx(int y, int x) const { return static_cast<size_t>(y) * w + x; }

  float unary_u(size_t p, int i) const {
    return gamma * std::abs(static_cast<float>(u.center[p] + i - radius));
  }
  float unary_v(size_t p, int j) const {
    return gamma * std::abs(static_cast<float>(v.center[p] + j - radius));
  }
};

void update_inter(BpContext& c) {
  const int L = c.L;
  std::vector<float> belief(L);
  for (size_t p = 0; p < c.data.size() / (L * L); ++p) {
    const float* D = c.data.data() + p * L * L;
    // u -> v
    for (int i = 0; i < L; ++i)
      belief[i] = c.unary_u(p, i) + c.u.from_left[p * L + i] +
                  c.u.from_right[p * L + i] + c.u.from_top[p * L + i] +
                  c.u.from_bottom[p * L + i];
    float best = std::numeric_limits<float>::max();
    for (int j = 0; j < L; ++j) {
      float m = std::numeric_limits<float>::max();
      for (int i = 0; i < L; ++i) m = std::min(m, D[i * L + j] + belief[i]);
      c.v.inter[p * L + j] = m;
      best = std::min(best, m);
    }
    for (int j = 0; j < L; ++j) c.v.inter[p * L + j] -= best;
    // v -> u
    for (int j = 0; j < L; ++j)
      belief[j] = c.unary_v(p, j) + c.v.from_left[p * L + j] +
                  c.v.from_right[p * L + j] + c.v.from_top[p * L + j] +
                  c.v.from_bottom[p * L + j];
    best = std::numeric_limits<float>::max();
    for (int i = 0; i < L; ++i) {
      float m = std::numeric_limits<float>::max();
      for (int j = 0; j < L; ++j) m = std::min(m, D[i * L + j] + belief[j]);
      c.u.inter[p * L + i] = m;
      best = std::min(best, m);
    }
    for (int i = 0; i < L; ++i) c.u.inter[p * L + i] -= best;
  }
}

// Sends the smoothness message from pixel p into its neighbor q along one
// direction; `incoming_at_q` is the message slot (q, from p's side).
template <bool kIsU>
void send_message(BpContext& c, size_t p, size_t q, const float* exclude_at_p,
                  float* incoming_at_q, float* scratch, LineDT& dt) {
  const int L = c.L;
  const BpLayer& layer = kIsU ? c.u : c.v;
  for (int i = 0; i < L; ++i) {
    const float unary = kIsU ? c.unary_u(p, i) : c.unary_v(p, i);
    scratch[i] = unary + layer.inter[p * L + i] + layer.from_left[p * L + i] +
                 layer.from_right[p * L + i] + layer.from_top[p * L + i] +
                 layer.from_bottom[p * L + i] - exclude_at_p[p * L + i];
  }
  dt.build(scratch, L, c.alpha);
  const int shift = layer.center[p] - layer.center[q];
  float best = std::numeric_limits<float>::max();
  for (int k = 0; k < L; ++k) {
    const float m = dt.eval(k - shift, L, c.alpha, c.strunc);
    incoming_at_q[q * L + k] = m;
    best = std::min(best, m);
  }
  for (int k = 0; k < L; ++k) incoming_at_q[q * L + k] -= best;
}

template <bool kIsU>
void sweep_layer(BpContext& c) {
  BpLayer& layer = kIsU ? c.u : c.v;
  std::vector<float> scratch(c.L);
  LineDT dt;
  dt.dt.resize(c.L);
  // forward: push right and down
  for (int y = 0; y < c.h; ++y)
    for (int x = 0; x < c.w; ++x) {
      const size_t p = c.idx(y, x);
      if (x + 1 < c.w)
        send_message<kIsU>(c, p, c.idx(y, x + 1), layer.from_right.data(),
                           layer.from_left.data(), scratch.data(), dt);
      if (y + 1 < c.h)
        send_message<kIsU>(c, p, c.idx(y + 1, x), layer.from_bottom.data(),
                           layer.from_top.data(), scratch.data(), dt);
    }
  // backward: push left and up
  for (int y = c.h - 1; y >= 0; --y)
    for (int x = c.w - 1; x >= 0; --x) {
      const size_t p = c.idx(y, x);
      if (x > 0)
        send_message<kIsU>(c, p, c.idx(y, x - 1), layer.from_left.data(),
                           layer.from_right.data(), scratch.data(), dt);
      if (y > 0)
        send_message<kIsU>(c, p, c.idx(y - 1, x), layer.from_top.data(),
                           layer.from_bottom.data(), scratch.data(), dt);
    }
}

}  // namespace

FlowField estimate_sift_flow(const ImageBuffer& reference,
                             const ImageBuffer& target,
                             const SiftFlowParams& params) {
  if (reference.height() != target.height() ||
      reference.width() != target.width())
    throw DimensionError("estimate_sift_flow: image sizes differ");
  if (params.levels < 1)
    throw ParameterError("estimate_sift_flow: levels must be >= 1");
  if (params.coarsest_radius < 1)
    throw ParameterError("estimate_sift_flow: radius must be >= 1");
  if (params.iterations < 1)
    throw ParameterError("estimate_sift_flow: iterations must be >= 1");

  // Build gray pyramids, capping depth so the top level stays usable.
  std::vector<ImageBuffer> pyr_ref{reference.to_gray()};
  std::vector<ImageBuffer> pyr_tgt{target.to_gray()};
  for (int l = 1; l < params.levels; ++l) {
    const ImageBuffer& prev = pyr_ref.back();
    if (std::min(prev.height(), prev.width()) < 2 * (4 * params.cell_size + 2))
      break;
    pyr_ref.push_back(downsample_blur2(prev));
    pyr_tgt.push_back(downsample_blur2(pyr_tgt.back()));
  }
  const int levels = static_cast<int>(pyr_ref.size());

  std::vector<float> flow_u, flow_v;  // current estimate at previous level
  int prev_h = 0, prev_w = 0;

  for (int l = levels - 1; l >= 0; --l) {
    const ImageBuffer& ref = pyr_ref[l];
    const ImageBuffer& tgt = pyr_tgt[l];
    const int h = ref.height(), w = ref.width();
    const size_t n = static_cast<size_t>(h) * w;
    const int radius = std::max(1, params.coarsest_radius >> (levels - 1 - l));
    const int L = 2 * radius + 1;

    const DescriptorGrid d1 = dense_sift(ref, params);
    const DescriptorGrid d2 = dense_sift(tgt, params);

    BpContext c;
    c.h = h;
    c.w = w;
    c.L = L;
    c.radius = radius;
    c.alpha = static_cast<float>(params.regularization);
    c.strunc = static_cast<float>(params.smooth_truncation);
    c.gamma = static_cast<float>(params.small_displacement);
    c.u.init(n, L);
    c.v.init(n, L);

    // Window centers from the upsampled coarser flow.
    if (prev_h > 0) {
      const double sy = prev_h > 1 ? double(prev_h - 1) / (h - 1) : 0.0;
      const double sx = prev_w > 1 ? double(prev_w - 1) / (w - 1) : 0.0;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const double py = y * sy, px = x * sx;
          const int x0 = std::min(static_cast<int>(px), prev_w - 1);
          const int y0 = std::min(static_cast<int>(py), prev_h - 1);
          const int x1 = std::min(x0 + 1, prev_w - 1);
          const int y1 = std::min(y0 + 1, prev_h - 1);
          const double fx = px - x0, fy = py - y0;
          auto lerp2 = [&](const std::vector<float>& f) {
            const double top = (1 - fx) * f[size_t(y0) * prev_w + x0] +
                               fx * f[size_t(y0) * prev_w + x1];
            const double bot = (1 - fx) * f[size_t(y1) * prev_w + x0] +
                               fx * f[size_t(y1) * prev_w + x1];
            return (1 - fy) * top + fy * bot;
          };
          const size_t p = c.idx(y, x);
          c.u.center[p] = static_cast<int>(std::lround(2.0 * lerp2(flow_u)));
          c.v.center[p] = static_cast<int>(std::lround(2.0 * lerp2(flow_v)));
        }
    }

    // Data costs (truncated SAD; out-of-frame targets cost the truncation).
    const float dtrunc = static_cast<float>(params.data_truncation);
    c.data.assign(n * L * L, dtrunc);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const size_t p = c.idx(y, x);
        float* D = c.data.data() + p * L * L;
        const uint8_t* da = d1.at(y, x);
        for (int i = 0; i < L; ++i) {
          const int tx = x + c.u.center[p] + i - radius;
          if (tx < 0 || tx >= w) continue;
          for (int j = 0; j < L; ++j) {
            const int ty = y + c.v.center[p] + j - radius;
            if (ty < 0 || ty >= h) continue;
            const int sad = descriptor_sad(da, d2.at(ty, tx), d1.dims);
            D[i * L + j] = std::min(static_cast<float>(sad), dtrunc);
          }
        }
      }

    for (int it = 0; it < params.iterations; ++it) {
      update_inter(c);
      sweep_layer<true>(c);
      sweep_layer<false>(c);
    }
    update_inter(c);

    // Decode labels.
    flow_u.assign(n, 0.0f);
    flow_v.assign(n, 0.0f);
    for (size_t p = 0; p < n; ++p) {
      int best_i = 0, best_j = 0;
      float bu = std::numeric_limits<float>::max();
      float bv = bu;
      for (int i = 0; i < L; ++i) {
        const float cost = c.unary_u(p, i) + c.u.inter[p * L + i] +
                           c.u.from_left[p * L + i] + c.u.from_right[p * L + i] +
                           c.u.from_top[p * L + i] + c.u.from_bottom[p * L + i];
        if (cost < bu) {
          bu = cost;
          best_i = i;
        }
      }
      for (int j = 0; j < L; ++j) {
        const float cost = c.unary_v(p, j) + c.v.inter[p * L + j] +
                           c.v.from_left[p * L + j] + c.v.from_right[p * L + j] +
                           c.v.from_top[p * L + j] + c.v.from_bottom[p * L + j];
        if (cost < bv) {
          bv = cost;
          best_j = j;
        }
      }
      flow_u[p] = static_cast<float>(c.u.center[p] + best_i - radius);
      flow_v[p] = static_cast<float>(c.v.center[p] + best_j - radius);
    }
    prev_h = h;
    prev_w = w;
  }

  FlowField out(reference.height(), reference.width());
  out.vx = std::move(flow_u);
  out.vy = std::move(flow_v);
  return out;
}

}  // namespace warpmetrics
