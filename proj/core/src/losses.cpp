#include "warpmetrics/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace warpmetrics {

double population_variance(std::span<const double> values) {
  if (values.empty())
    throw InvalidInputError("population_variance: empty input");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*lo == *hi) return 0.0;  // constant input, exact zero
  const double mean =
      std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  double acc = 0.0;
  for (double v : values) {
    const double d = v - mean;
    acc += d * d;
  }
  return acc / values.size();
}

LossBreakdown axis_aligned_loss(const UVGrid& q, VarianceReduction reduction) {
  const int h = q.rows(), w = q.cols();
  for (const Vec2& p : q.points())
    if (!p.finite())
      throw InvalidInputError("axis_aligned_loss: non-finite UV point");

  LossBreakdown out;
  std::vector<double> line;
  line.reserve(std::max(h, w));
  for (int r = 0; r < h; ++r) {
    line.clear();
    for (int c = 0; c < w; ++c) line.push_back(q.at(r, c).y);
    out.l_hor += population_variance(line);
  }
  for (int c = 0; c < w; ++c) {
    line.clear();
    for (int r = 0; r < h; ++r) line.push_back(q.at(r, c).x);
    out.l_ver += population_variance(line);
  }
  if (reduction == VarianceReduction::Mean) {
    out.l_hor /= h;
    out.l_ver /= w;
  }
  out.l_al = out.l_hor + out.l_ver;
  return out;
}

LossBreakdown axis_aligned_loss_from_prediction(const Grid2D& pred,
                                                const Grid2D& mesh_gt,
                                                const UVGrid& uv_gt,
                                                VarianceReduction reduction) {
  return axis_aligned_loss(uv_map(pred, mesh_gt, uv_gt), reduction);
}

namespace {

// 2x2 Jacobian dq/dp = J_Q * J_P^{-1} at one mesh location.
struct Jac2 {
  double a = 0, b = 0, c = 0, d = 0;  // [du/dx du/dy; dv/dx dv/dy]
};

Jac2 uv_jacobian(const Grid2D& mesh, const UVGrid& uv, int row, int col,
                 double s, double t) {
  auto corner = [&](const auto& g) {
    struct {
      Vec2 a, b, c, d;
    } q{g.at(row, col), g.at(row, col + 1), g.at(row + 1, col),
        g.at(row + 1, col + 1)};
    return q;
  };
  const auto mp = corner(mesh);
  const auto mq = corner(uv);
  const Vec2 p_s{(mp.b.x - mp.a.x) * (1 - t) + (mp.d.x - mp.c.x) * t,
                 (mp.b.y - mp.a.y) * (1 - t) + (mp.d.y - mp.c.y) * t};
  const Vec2 p_t{(mp.c.x - mp.a.x) * (1 - s) + (mp.d.x - mp.b.x) * s,
                 (mp.c.y - mp.a.y) * (1 - s) + (mp.d.y - mp.b.y) * s};
  const Vec2 q_s{(mq.b.x - mq.a.x) * (1 - t) + (mq.d.x - mq.c.x) * t,
                 (mq.b.y - mq.a.y) * (1 - t) + (mq.d.y - mq.c.y) * t};
  const Vec2 q_t{(mq.c.x - mq.a.x) * (1 - s) + (mq.d.x - mq.b.x) * s,
                 (mq.c.y - mq.a.y) * (1 - s) + (mq.d.y - mq.b.y) * s};
  const double det = p_s.x * p_t.y - p_s.y * p_t.x;
  if (std::abs(det) < 1e-300)
    throw InvalidMeshError("uv_jacobian: singular mesh cell");
  // J_P^{-1} rows
  const double i00 = p_t.y / det, i01 = -p_t.x / det;
  const double i10 = -p_s.y / det, i11 = p_s.x / det;
  Jac2 j;
  j.a = q_s.x * i00 + q_t.x * i10;
  j.b = q_s.x * i01 + q_t.x * i11;
  j.c = q_s.y * i00 + q_t.y * i10;
  j.d = q_s.y * i01 + q_t.y * i11;
  return j;
}

constexpr double kBoundaryTol = 1e-6;

bool near_edge(double v) {
  return std::abs(v) <= kBoundaryTol || std::abs(v - 1.0) <= kBoundaryTol;
}

}  // namespace

std::vector<Vec2> axis_aligned_loss_grad(const Grid2D& pred,
                                         const Grid2D& mesh_gt,
                                         const UVGrid& uv_gt,
                                         VarianceReduction reduction) {
  std::vector<MeshLocation> locs;
  const UVGrid q = uv_map_detailed(pred, mesh_gt, uv_gt, locs);
  const int h = q.rows(), w = q.cols();

  std::vector<double> row_mean(h, 0.0), col_mean(w, 0.0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      row_mean[r] += q.at(r, c).y;
      col_mean[c] += q.at(r, c).x;
    }
  }
  for (double& m : row_mean) m /= w;
  for (double& m : col_mean) m /= h;

  const double hor_scale = reduction == VarianceReduction::Mean ? 1.0 / h : 1.0;
  const double ver_scale = reduction == VarianceReduction::Mean ? 1.0 / w : 1.0;

  std::vector<Vec2> grad(static_cast<size_t>(h) * w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const MeshLocation& loc = locs[static_cast<size_t>(r) * w + c];
      const double dl_du =
          ver_scale * 2.0 / h * (q.at(r, c).x - col_mean[c]);
      const double dl_dv =
          hor_scale * 2.0 / w * (q.at(r, c).y - row_mean[r]);

      Jac2 j;
      if (!near_edge(loc.s) && !near_edge(loc.t)) {
        j = uv_jacobian(mesh_gt, uv_gt, loc.row, loc.col, loc.s, loc.t);
      } else {
        // The piecewise map is differentiable at a cell boundary only when
        // every incident cell yields the same Jacobian (affine meshes do).
        struct Cand {
          int row, col;
          double s, t;
        };
        std::vector<Cand> cands;
        std::vector<std::pair<int, double>> srange{{loc.col, loc.s}};
        std::vector<std::pair<int, double>> trange{{loc.row, loc.t}};
        if (std::abs(loc.s) <= kBoundaryTol && loc.col > 0)
          srange.push_back({loc.col - 1, loc.s + 1.0});
        if (std::abs(loc.s - 1.0) <= kBoundaryTol && loc.col + 2 < w)
          srange.push_back({loc.col + 1, loc.s - 1.0});
        if (std::abs(loc.t) <= kBoundaryTol && loc.row > 0)
          trange.push_back({loc.row - 1, loc.t + 1.0});
        if (std::abs(loc.t - 1.0) <= kBoundaryTol && loc.row + 2 < h)
          trange.push_back({loc.row + 1, loc.t - 1.0});
        for (const auto& [cc, ss] : srange)
          for (const auto& [rr, tt] : trange)
            cands.push_back({rr, cc, ss, tt});
        j = uv_jacobian(mesh_gt, uv_gt, cands[0].row, cands[0].col, cands[0].s,
                        cands[0].t);
        for (size_t k = 1; k < cands.size(); ++k) {
          const Jac2 jk = uv_jacobian(mesh_gt, uv_gt, cands[k].row,
                                      cands[k].col, cands[k].s, cands[k].t);
          const double scale = std::max({std::abs(j.a), std::abs(j.b),
                                         std::abs(j.c), std::abs(j.d), 1.0});
          if (std::abs(jk.a - j.a) > 1e-7 * scale ||
              std::abs(jk.b - j.b) > 1e-7 * scale ||
              std::abs(jk.c - j.c) > 1e-7 * scale ||
              std::abs(jk.d - j.d) > 1e-7 * scale)
            throw NondifferentiablePointError(
                "axis_aligned_loss_grad: point on a cell boundary with "
                "disagreeing Jacobians (jitter the point)");
        }
      }
      grad[static_cast<size_t>(r) * w + c] = {dl_du * j.a + dl_dv * j.c,
                                              dl_du * j.b + dl_dv * j.d};
    }
  }
  return grad;
}

double l1_grid_loss(const Grid2D& g, const Grid2D& gt) {
  if (!g.same_shape(gt)) throw DimensionError("l1_grid_loss: shape mismatch");
  double acc = 0.0;
  const auto a = g.points(), b = gt.points();
  for (size_t i = 0; i < a.size(); ++i)
    acc += std::abs(a[i].x - b[i].x) + std::abs(a[i].y - b[i].y);
  return acc / (a.size() * 2);
}

double l1_grid_loss(const Grid3D& g, const Grid3D& gt) {
  if (!g.same_shape(gt)) throw DimensionError("l1_grid_loss: shape mismatch");
  double acc = 0.0;
  const auto a = g.points(), b = gt.points();
  for (size_t i = 0; i < a.size(); ++i)
    acc += std::abs(a[i].x - b[i].x) + std::abs(a[i].y - b[i].y) +
           std::abs(a[i].z - b[i].z);
  return acc / (a.size() * 3);
}

namespace {

std::vector<double> gaussian_kernel(int window, double sigma) {
  std::vector<double> k(window);
  const double c = (window - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < window; ++i) {
    k[i] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable valid-region correlation of a single-channel image.
std::vector<double> filter_valid(const std::vector<double>& img, int h, int w,
                                 const std::vector<double>& k, int& oh,
                                 int& ow) {
  const int n = static_cast<int>(k.size());
  ow = w - n + 1;
  oh = h - n + 1;
  std::vector<double> tmp(static_cast<size_t>(h) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += k[i] * img[static_cast<size_t>(y) * w + x + i];
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
}

std::vector<double> to_double_gray(const ImageBuffer& img) {
  const ImageBuffer g = img.to_gray();
  std::vector<double> out(g.samples().begin(), g.samples().end());
  return out;
}

}  // namespace

double ssim(const ImageBuffer& a, const ImageBuffer& b,
            const SsimParams& params) {
  if (a.height() != b.height() || a.width() != b.width())
    throw DimensionError("ssim: image shapes differ");
  if (params.window < 3 || params.window % 2 == 0)
    throw ParameterError("ssim: window must be odd and >= 3");
  if (params.k1 <= 0.0 || params.k2 <= 0.0)
    throw ParameterError("ssim: k1 and k2 must be positive");
  if (a.height() < params.window || a.width() < params.window)
    throw InvalidInputError("ssim: image smaller than the window");

  const int h = a.height(), w = a.width();
  const std::vector<double> x = to_double_gray(a);
  const std::vector<double> y = to_double_gray(b);
  const std::vector<double> k = gaussian_kernel(params.window, params.sigma);

  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  int oh = 0, ow = 0;
  const auto mu_x = filter_valid(x, h, w, k, oh, ow);
  const auto mu_y = filter_valid(y, h, w, k, oh, ow);
  const auto sxx = filter_valid(xx, h, w, k, oh, ow);
  const auto syy = filter_valid(yy, h, w, k, oh, ow);
  const auto sxy = filter_valid(xy, h, w, k, oh, ow);

  const double c1 = params.k1 * params.dynamic_range;
  const double c2 = params.k2 * params.dynamic_range;
  const double C1 = c1 * c1, C2 = c2 * c2;
  double acc = 0.0;
  for (size_t i = 0; i < mu_x.size(); ++i) {
    const double vx = sxx[i] - mu_x[i] * mu_x[i];
    const double vy = syy[i] - mu_y[i] * mu_y[i];
    const double cxy = sxy[i] - mu_x[i] * mu_y[i];
    acc += ((2.0 * mu_x[i] * mu_y[i] + C1) * (2.0 * cxy + C2)) /
           ((mu_x[i] * mu_x[i] + mu_y[i] * mu_y[i] + C1) * (vx + vy + C2));
  }
  return acc / mu_x.size();
}

double ssim_loss(const ImageBuffer& a, const ImageBuffer& b,
                 const SsimParams& params) {
  return 1.0 - ssim(a, b, params);
}

double total_loss(const LossParts& parts, const LossWeights& w) {
  if (!std::isfinite(parts.l2d) || !std::isfinite(parts.l3d) ||
      !std::isfinite(parts.l_al) || !std::isfinite(parts.l_ssim))
    throw InvalidInputError("total_loss: non-finite component");
  if (w.alpha < 0 || w.beta < 0 || w.gamma < 0 || w.lambda < 0)
    throw ParameterError("total_loss: weights must be >= 0");
  return w.alpha * parts.l2d + w.beta * parts.l3d + w.gamma * parts.l_al +
         w.lambda * parts.l_ssim;
}

}  // namespace warpmetrics
