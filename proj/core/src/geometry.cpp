#include "warpmetrics/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <unordered_map>

namespace warpmetrics {

namespace {

constexpr double kNewtonTol = 1e-10;
constexpr int kNewtonMaxIter = 25;

struct CellCorners {
  Vec2 a, b, c, d;  // a=(r,c) b=(r,c+1) c=(r+1,c) d=(r+1,c+1)
};

CellCorners cell_corners(const Grid2D& g, int r, int c) {
  return {g.at(r, c), g.at(r, c + 1), g.at(r + 1, c), g.at(r + 1, c + 1)};
}

Vec2 bilinear(const CellCorners& q, double s, double t) {
  const double w00 = (1.0 - s) * (1.0 - t);
  const double w10 = s * (1.0 - t);
  const double w01 = (1.0 - s) * t;
  const double w11 = s * t;
  return {w00 * q.a.x + w10 * q.b.x + w01 * q.c.x + w11 * q.d.x,
          w00 * q.a.y + w10 * q.b.y + w01 * q.c.y + w11 * q.d.y};
}

// Columns of the 2x2 Jacobian d(bilinear)/d(s,t).
void bilinear_jacobian(const CellCorners& q, double s, double t, Vec2& ds,
                       Vec2& dt) {
  ds = {(q.b.x - q.a.x) * (1.0 - t) + (q.d.x - q.c.x) * t,
        (q.b.y - q.a.y) * (1.0 - t) + (q.d.y - q.c.y) * t};
  dt = {(q.c.x - q.a.x) * (1.0 - s) + (q.d.x - q.b.x) * s,
        (q.c.y - q.a.y) * (1.0 - s) + (q.d.y - q.b.y) * s};
}

// Newton solve for bilinear(q; s, t) == p. Returns false when the Jacobian
// goes singular before convergence.
bool invert_bilinear(const CellCorners& q, const Vec2& p, double& s,
                     double& t) {
  s = 0.5;
  t = 0.5;
  for (int it = 0; it < kNewtonMaxIter; ++it) {
    const Vec2 f = bilinear(q, s, t) - p;
    if (std::abs(f.x) <= kNewtonTol && std::abs(f.y) <= kNewtonTol) return true;
    Vec2 ds, dt;
    bilinear_jacobian(q, s, t, ds, dt);
    const double det = cross(ds, dt);
    if (std::abs(det) < 1e-300) return false;
    s -= (f.x * dt.y - f.y * dt.x) / det;
    t -= (ds.x * f.y - ds.y * f.x) / det;
  }
  const Vec2 f = bilinear(q, s, t) - p;
  return std::abs(f.x) <= kNewtonTol && std::abs(f.y) <= kNewtonTol;
}

bool point_in_quad(const CellCorners& q, const Vec2& p, double orient,
                   double tol) {
  // Polygon order a -> b -> d -> c; accept points within `tol` of the edge.
  const Vec2 poly[4] = {q.a, q.b, q.d, q.c};
  for (int i = 0; i < 4; ++i) {
    const Vec2& u = poly[i];
    const Vec2& v = poly[(i + 1) % 4];
    if (orient * cross(v - u, p - u) < -tol) return false;
  }
  return true;
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 <= 0.0) return (p - a).norm();
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

double point_quad_distance(const CellCorners& q, const Vec2& p) {
  const Vec2 poly[4] = {q.a, q.b, q.d, q.c};
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4; ++i)
    best = std::min(best, point_segment_distance(p, poly[i], poly[(i + 1) % 4]));
  return best;
}

double mesh_orientation(const Grid2D& mesh) {
  const CellCorners q = cell_corners(mesh, 0, 0);
  const double a =
      cross(q.b - q.a, q.d - q.a) + cross(q.d - q.a, q.c - q.a);
  return a >= 0.0 ? 1.0 : -1.0;
}

struct PointKey {
  uint64_t xb, yb;
  bool operator==(const PointKey& o) const { return xb == o.xb && yb == o.yb; }
};
struct PointKeyHash {
  size_t operator()(const PointKey& k) const {
    return std::hash<uint64_t>()(k.xb * 1000003ull ^ k.yb);
  }
};
PointKey make_key(const Vec2& p) {
  PointKey k;
  static_assert(sizeof(double) == sizeof(uint64_t));
  std::memcpy(&k.xb, &p.x, 8);
  std::memcpy(&k.yb, &p.y, 8);
  return k;
}

// Shared state for repeated lookups against one mesh.
class MeshLocator {
 public:
  explicit MeshLocator(const Grid2D& mesh) : mesh_(mesh) {
    validate_mesh(mesh);
    orient_ = mesh_orientation(mesh);
    vertex_index_.reserve(static_cast<size_t>(mesh.rows()) * mesh.cols());
    for (int r = 0; r < mesh.rows(); ++r)
      for (int c = 0; c < mesh.cols(); ++c)
        vertex_index_.emplace(make_key(mesh.at(r, c)), std::make_pair(r, c));
    // Inclusion tolerance scaled to the mesh extent.
    double span = 0.0;
    for (const Vec2& p : mesh.points())
      span = std::max({span, std::abs(p.x), std::abs(p.y)});
    tol_ = std::max(1e-12, span * 1e-12);
  }

  MeshLocation locate(const Vec2& p) const {
    if (!p.finite()) throw InvalidInputError("locate_in_mesh: non-finite point");
    // Exact vertex hit: return the bit-exact corner coordinates so that
    // identity correspondences reproduce the UV grid exactly.
    if (auto it = vertex_index_.find(make_key(p)); it != vertex_index_.end()) {
      auto [r, c] = it->second;
      MeshLocation loc;
      loc.row = std::min(r, mesh_.rows() - 2);
      loc.col = std::min(c, mesh_.cols() - 2);
      loc.s = (c == loc.col) ? 0.0 : 1.0;
      loc.t = (r == loc.row) ? 0.0 : 1.0;
      return loc;
    }

    for (int r = 0; r + 1 < mesh_.rows(); ++r) {
      for (int c = 0; c + 1 < mesh_.cols(); ++c) {
        const CellCorners q = cell_corners(mesh_, r, c);
        const double xmin = std::min({q.a.x, q.b.x, q.c.x, q.d.x});
        if (p.x < xmin - tol_) continue;
        const double xmax = std::max({q.a.x, q.b.x, q.c.x, q.d.x});
        if (p.x > xmax + tol_) continue;
        const double ymin = std::min({q.a.y, q.b.y, q.c.y, q.d.y});
        if (p.y < ymin - tol_) continue;
        const double ymax = std::max({q.a.y, q.b.y, q.c.y, q.d.y});
        if (p.y > ymax + tol_) continue;
        if (!point_in_quad(q, p, orient_, tol_ * 1e3)) continue;
        double s, t;
        if (!invert_bilinear(q, p, s, t)) continue;
        if (s < -1e-6 || s > 1.0 + 1e-6 || t < -1e-6 || t > 1.0 + 1e-6)
          continue;
        MeshLocation loc;
        loc.row = r;
        loc.col = c;
        loc.s = std::clamp(s, 0.0, 1.0);  // only trims the 1e-6 slack
        loc.t = std::clamp(t, 0.0, 1.0);
        return loc;
      }
    }

    // Outside the hull: extrapolate from the nearest boundary cell.
    double best = std::numeric_limits<double>::infinity();
    int br = 0, bc = 0;
    auto consider = [&](int r, int c) {
      const double d = point_quad_distance(cell_corners(mesh_, r, c), p);
      if (d < best) {
        best = d;
        br = r;
        bc = c;
      }
    };
    const int cr = mesh_.rows() - 2, cc = mesh_.cols() - 2;
    for (int c = 0; c <= cc; ++c) {
      consider(0, c);
      consider(cr, c);
    }
    for (int r = 1; r < cr; ++r) {
      consider(r, 0);
      consider(r, cc);
    }
    MeshLocation loc;
    loc.row = br;
    loc.col = bc;
    loc.extrapolated = true;
    double s, t;
    if (!invert_bilinear(cell_corners(mesh_, br, bc), p, s, t))
      throw InvalidMeshError(
          "locate_in_mesh: extrapolation failed to converge (near-degenerate "
          "boundary cell)");
    loc.s = s;
    loc.t = t;
    return loc;
  }

 private:
  const Grid2D& mesh_;
  double orient_ = 1.0;
  double tol_ = 1e-12;
  std::unordered_map<PointKey, std::pair<int, int>, PointKeyHash> vertex_index_;
};

}  // namespace

bool Grid2D::finite() const {
  for (const Vec2& p : points_)
    if (!p.finite()) return false;
  return true;
}

// ---- ImageBuffer -----------------------------------------------------------

ImageBuffer::ImageBuffer(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
  if (height <= 0 || width <= 0)
    throw InvalidInputError("image dimensions must be positive");
  if (channels != 1 && channels != 3)
    throw InvalidInputError("image channels must be 1 or 3");
  if (!std::isfinite(fill)) throw InvalidInputError("non-finite fill value");
  samples_.assign(static_cast<size_t>(height) * width * channels,
                  std::clamp(fill, 0.0f, 1.0f));
}

ImageBuffer::ImageBuffer(int height, int width, int channels,
                         std::vector<float> samples)
    : height_(height), width_(width), channels_(channels),
      samples_(std::move(samples)) {
  if (height <= 0 || width <= 0)
    throw InvalidInputError("image dimensions must be positive");
  if (channels != 1 && channels != 3)
    throw InvalidInputError("image channels must be 1 or 3");
  if (samples_.size() != static_cast<size_t>(height) * width * channels)
    throw InvalidInputError("sample count does not match dimensions");
  clamp_and_validate();
}

void ImageBuffer::clamp_and_validate() {
  for (float& v : samples_) {
    if (!std::isfinite(v)) throw InvalidInputError("non-finite image sample");
    v = std::clamp(v, 0.0f, 1.0f);
  }
}

ImageBuffer ImageBuffer::to_gray() const {
  if (channels_ == 1) return *this;
  ImageBuffer out(height_, width_, 1);
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x)
      out.at(y, x) = static_cast<float>(0.299 * at(y, x, 0) +
                                        0.587 * at(y, x, 1) +
                                        0.114 * at(y, x, 2));
  return out;
}

float ImageBuffer::sample_bilinear(double x, double y, int c) const {
  // Snap near-integer coordinates so identity grids reproduce inputs
  // bit-exactly.
  const double rx = std::round(x);
  const double ry = std::round(y);
  if (std::abs(x - rx) < 1e-9) x = rx;
  if (std::abs(y - ry) < 1e-9) y = ry;
  x = std::clamp(x, 0.0, static_cast<double>(width_ - 1));
  y = std::clamp(y, 0.0, static_cast<double>(height_ - 1));
  const int x0 = std::min(static_cast<int>(x), width_ - 1);
  const int y0 = std::min(static_cast<int>(y), height_ - 1);
  const int x1 = std::min(x0 + 1, width_ - 1);
  const int y1 = std::min(y0 + 1, height_ - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = (1.0 - fx) * at(y0, x0, c) + fx * at(y0, x1, c);
  const double bot = (1.0 - fx) * at(y1, x0, c) + fx * at(y1, x1, c);
  return static_cast<float>((1.0 - fy) * top + fy * bot);
}

// ---- RotatedRect -----------------------------------------------------------

std::array<Vec2, 4> RotatedRect::corners() const {
  const double rad = angle_deg * std::numbers::pi / 180.0;
  const Vec2 ux{std::cos(rad), std::sin(rad)};
  const Vec2 uy{-std::sin(rad), std::cos(rad)};
  const Vec2 hw = ux * (width / 2.0);
  const Vec2 hh = uy * (height / 2.0);
  return {center - hw - hh, center + hw - hh, center + hw + hh,
          center - hw + hh};
}

RotatedRect RotatedRect::canonical() const {
  RotatedRect r = *this;
  if (r.width < r.height) {
    std::swap(r.width, r.height);
    r.angle_deg += 90.0;
  }
  while (r.angle_deg >= 90.0) r.angle_deg -= 180.0;
  while (r.angle_deg < -90.0) r.angle_deg += 180.0;
  return r;
}

// ---- FrameTransform --------------------------------------------------------

FrameTransform::FrameTransform() : m_{1, 0, 0, 0, 1, 0, 0, 0, 1} {}

FrameTransform::FrameTransform(const std::array<double, 9>& row_major)
    : m_(row_major) {
  validate();
}

void FrameTransform::validate() const {
  if (m_[6] != 0.0 || m_[7] != 0.0 || m_[8] != 1.0)
    throw InvalidInputError("FrameTransform: bottom row must be (0,0,1)");
  const double s2 = m_[0] * m_[0] + m_[3] * m_[3];
  if (!(s2 > 0.0) || !std::isfinite(s2))
    throw InvalidInputError("FrameTransform: singular matrix");
  // rotation+scale block must be of the form [a -b; b a]
  if (std::abs(m_[0] - m_[4]) > 1e-9 * std::sqrt(s2) ||
      std::abs(m_[1] + m_[3]) > 1e-9 * std::sqrt(s2))
    throw InvalidInputError("FrameTransform: shear/reflection not allowed");
}

FrameTransform FrameTransform::identity() { return FrameTransform(); }

FrameTransform FrameTransform::translation(double tx, double ty) {
  FrameTransform t;
  t.m_ = {1, 0, tx, 0, 1, ty, 0, 0, 1};
  return t;
}

FrameTransform FrameTransform::rotation_about(const Vec2& center,
                                              double angle_deg, double scale) {
  const double rad = angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(rad) * scale;
  const double s = std::sin(rad) * scale;
  FrameTransform t;
  t.m_ = {c, -s, center.x - c * center.x + s * center.y,
          s, c,  center.y - s * center.x - c * center.y,
          0, 0,  1};
  return t;
}

Vec2 FrameTransform::apply(const Vec2& p) const {
  return {m_[0] * p.x + m_[1] * p.y + m_[2],
          m_[3] * p.x + m_[4] * p.y + m_[5]};
}

FrameTransform FrameTransform::compose(const FrameTransform& inner) const {
  FrameTransform out;
  const auto& a = m_;
  const auto& b = inner.m_;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      out.m_[i * 3 + j] = a[i * 3] * b[j] + a[i * 3 + 1] * b[3 + j] +
                          a[i * 3 + 2] * b[6 + j];
  return out;
}

FrameTransform FrameTransform::inverse() const {
  const double det = m_[0] * m_[4] - m_[1] * m_[3];
  if (std::abs(det) < 1e-300)
    throw InvalidInputError("FrameTransform: not invertible");
  const double ia = m_[4] / det, ib = -m_[1] / det;
  const double ic = -m_[3] / det, id = m_[0] / det;
  FrameTransform out;
  out.m_ = {ia, ib, -(ia * m_[2] + ib * m_[5]),
            ic, id, -(ic * m_[2] + id * m_[5]),
            0,  0,  1};
  return out;
}

double FrameTransform::scale() const { return std::hypot(m_[0], m_[3]); }

// ---- grid operations -------------------------------------------------------

UVGrid make_uniform_uv_grid(int h, int w) {
  if (h < 2 || w < 2)
    throw DimensionError("make_uniform_uv_grid: dimensions must be >= 2");
  UVGrid g(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      g.at(r, c) = {static_cast<double>(c) / (w - 1),
                    static_cast<double>(r) / (h - 1)};
  return g;
}

void validate_mesh(const Grid2D& mesh) {
  if (mesh.rows() < 2 || mesh.cols() < 2)
    throw InvalidMeshError("mesh must be at least 2x2");
  if (!mesh.finite()) throw InvalidMeshError("mesh has non-finite coordinates");
  double sign = 0.0;
  for (int r = 0; r + 1 < mesh.rows(); ++r) {
    for (int c = 0; c + 1 < mesh.cols(); ++c) {
      const CellCorners q = cell_corners(mesh, r, c);
      // Signed polygon area of a -> b -> d -> c, doubled.
      const double area2 = cross(q.b - q.a, q.d - q.a) +
                           cross(q.d - q.a, q.c - q.a);
      if (std::abs(area2) < 1e-12)
        throw InvalidMeshError("mesh has a zero-area cell");
      const double s = area2 > 0 ? 1.0 : -1.0;
      // All four corner turns must agree with the cell orientation; this
      // rejects folded and non-convex cells in one pass.
      const Vec2 poly[4] = {q.a, q.b, q.d, q.c};
      for (int k = 0; k < 4; ++k) {
        const Vec2 e0 = poly[(k + 1) % 4] - poly[k];
        const Vec2 e1 = poly[(k + 2) % 4] - poly[(k + 1) % 4];
        if (cross(e0, e1) * s <= 0.0)
          throw InvalidMeshError("mesh has a folded or non-convex cell");
      }
      if (sign == 0.0)
        sign = s;
      else if (sign != s)
        throw InvalidMeshError("mesh cells have inconsistent orientation");
    }
  }
}

MeshLocation locate_in_mesh(const Vec2& p, const Grid2D& mesh) {
  return MeshLocator(mesh).locate(p);
}

Vec2 bilinear_in_cell(const Grid2D& g, int row, int col, double s, double t) {
  return bilinear({g.at(row, col), g.at(row, col + 1), g.at(row + 1, col),
                   g.at(row + 1, col + 1)},
                  s, t);
}

Vec2 bilinear_in_cell(const UVGrid& g, int row, int col, double s, double t) {
  return bilinear({g.at(row, col), g.at(row, col + 1), g.at(row + 1, col),
                   g.at(row + 1, col + 1)},
                  s, t);
}

UVGrid uv_map_detailed(const Grid2D& pred, const Grid2D& mesh_gt,
                       const UVGrid& uv_gt, std::vector<MeshLocation>& locs) {
  if (!pred.same_shape(mesh_gt) || pred.rows() != uv_gt.rows() ||
      pred.cols() != uv_gt.cols())
    throw DimensionError("uv_map: grids must share one shape");
  MeshLocator locator(mesh_gt);
  UVGrid out(pred.rows(), pred.cols());
  locs.clear();
  locs.reserve(pred.points().size());
  for (int r = 0; r < pred.rows(); ++r) {
    for (int c = 0; c < pred.cols(); ++c) {
      const MeshLocation loc = locator.locate(pred.at(r, c));
      locs.push_back(loc);
      out.at(r, c) = bilinear_in_cell(uv_gt, loc.row, loc.col, loc.s, loc.t);
    }
  }
  return out;
}

UVGrid uv_map(const Grid2D& pred, const Grid2D& mesh_gt, const UVGrid& uv_gt) {
  std::vector<MeshLocation> locs;
  return uv_map_detailed(pred, mesh_gt, uv_gt, locs);
}

ImageBuffer remap_image(const ImageBuffer& image, const Grid2D& grid,
                        int out_h, int out_w) {
  if (image.empty()) throw InvalidInputError("remap_image: empty image");
  if (out_h < 2 || out_w < 2)
    throw DimensionError("remap_image: output must be at least 2x2");
  const int h = grid.rows(), w = grid.cols();
  ImageBuffer out(out_h, out_w, image.channels());
  for (int y = 0; y < out_h; ++y) {
    const double gy = static_cast<double>(y) * (h - 1) / (out_h - 1);
    int r0 = std::min(static_cast<int>(gy), h - 2);
    const double ty = gy - r0;
    for (int x = 0; x < out_w; ++x) {
      const double gx = static_cast<double>(x) * (w - 1) / (out_w - 1);
      int c0 = std::min(static_cast<int>(gx), w - 2);
      const double sx = gx - c0;
      const Vec2 src = bilinear_in_cell(grid, r0, c0, sx, ty);
      for (int ch = 0; ch < image.channels(); ++ch)
        out.at(y, x, ch) = image.sample_bilinear(src.x, src.y, ch);
    }
  }
  return out;
}

namespace {

std::vector<Vec2> convex_hull(std::span<const Vec2> pts) {
  std::vector<Vec2> p(pts.begin(), pts.end());
  std::sort(p.begin(), p.end(), [](const Vec2& a, const Vec2& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  p.erase(std::unique(p.begin(), p.end(),
                      [](const Vec2& a, const Vec2& b) {
                        return a.x == b.x && a.y == b.y;
                      }),
          p.end());
  const int n = static_cast<int>(p.size());
  if (n < 3) return p;
  std::vector<Vec2> hull(2 * n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 1] - hull[k - 2], p[i] - hull[k - 2]) <= 0)
      --k;
    hull[k++] = p[i];
  }
  const int lower = k + 1;
  for (int i = n - 2; i >= 0; --i) {
    while (k >= lower &&
           cross(hull[k - 1] - hull[k - 2], p[i] - hull[k - 2]) <= 0)
      --k;
    hull[k++] = p[i];
  }
  hull.resize(k - 1);
  return hull;
}

}  // namespace

RotatedRect min_area_rect(std::span<const Vec2> points) {
  if (points.size() < 3)
    throw DegenerateInputError("min_area_rect: need at least 3 points");
  for (const Vec2& p : points)
    if (!p.finite())
      throw InvalidInputError("min_area_rect: non-finite point");
  const std::vector<Vec2> hull = convex_hull(points);
  if (hull.size() < 3)
    throw DegenerateInputError("min_area_rect: points are collinear");

  double best_area = std::numeric_limits<double>::infinity();
  RotatedRect best;
  const int n = static_cast<int>(hull.size());
  for (int i = 0; i < n; ++i) {
    const Vec2 e = hull[(i + 1) % n] - hull[i];
    const double len = e.norm();
    if (len < 1e-300) continue;
    const Vec2 ux{e.x / len, e.y / len};
    const Vec2 uy{-ux.y, ux.x};
    double minu = std::numeric_limits<double>::infinity(), maxu = -minu;
    double minv = minu, maxv = -minu;
    for (const Vec2& p : hull) {
      const double u = dot(p, ux);
      const double v = dot(p, uy);
      minu = std::min(minu, u);
      maxu = std::max(maxu, u);
      minv = std::min(minv, v);
      maxv = std::max(maxv, v);
    }
    const double area = (maxu - minu) * (maxv - minv);
    if (area < best_area) {
      best_area = area;
      const double cu = (minu + maxu) / 2.0;
      const double cv = (minv + maxv) / 2.0;
      best.center = {cu * ux.x + cv * uy.x, cu * ux.y + cv * uy.y};
      best.width = maxu - minu;
      best.height = maxv - minv;
      best.angle_deg = std::atan2(ux.y, ux.x) * 180.0 / std::numbers::pi;
    }
  }
  if (!(best_area < std::numeric_limits<double>::infinity()) ||
      best.width * best.height <= 0.0)
    throw DegenerateInputError("min_area_rect: degenerate hull");
  return best.canonical();
}

std::pair<ImageBuffer, FrameTransform> rotate_and_crop(const ImageBuffer& image,
                                                       const RotatedRect& rect,
                                                       double margin) {
  if (margin < 0.0) throw ParameterError("rotate_and_crop: margin must be >= 0");
  const RotatedRect r = rect.canonical();
  if (r.area() <= 0.0)
    throw DegenerateInputError("rotate_and_crop: zero-area rect");
  const double m = margin * std::max(r.width, r.height);
  const int out_w = static_cast<int>(std::lround(r.width + 2.0 * m)) + 1;
  const int out_h = static_cast<int>(std::lround(r.height + 2.0 * m)) + 1;
  // crop pixel (0,0) sits at this point of the de-rotated frame
  const Vec2 origin{r.center.x - (out_w - 1) / 2.0,
                    r.center.y - (out_h - 1) / 2.0};
  const FrameTransform T = FrameTransform::rotation_about(r.center, r.angle_deg)
                               .compose(FrameTransform::translation(origin.x,
                                                                    origin.y));
  ImageBuffer out(out_h, out_w, image.channels());
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x) {
      const Vec2 src = T.apply({static_cast<double>(x), static_cast<double>(y)});
      for (int ch = 0; ch < image.channels(); ++ch)
        out.at(y, x, ch) = image.sample_bilinear(src.x, src.y, ch);
    }
  return {std::move(out), T};
}

Grid2D apply_transform(const Grid2D& grid, const FrameTransform& T) {
  Grid2D out(grid.rows(), grid.cols());
  for (int r = 0; r < grid.rows(); ++r)
    for (int c = 0; c < grid.cols(); ++c) out.at(r, c) = T.apply(grid.at(r, c));
  return out;
}

ImageBuffer resize_bilinear(const ImageBuffer& image, int out_h, int out_w) {
  if (image.empty()) throw InvalidInputError("resize_bilinear: empty image");
  if (out_h < 1 || out_w < 1)
    throw DimensionError("resize_bilinear: invalid output size");
  if (out_h == image.height() && out_w == image.width()) return image;
  ImageBuffer out(out_h, out_w, image.channels());
  const double sy =
      out_h > 1 ? static_cast<double>(image.height() - 1) / (out_h - 1) : 0.0;
  const double sx =
      out_w > 1 ? static_cast<double>(image.width() - 1) / (out_w - 1) : 0.0;
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x)
      for (int c = 0; c < image.channels(); ++c)
        out.at(y, x, c) = image.sample_bilinear(x * sx, y * sy, c);
  return out;
}

}  // namespace warpmetrics
