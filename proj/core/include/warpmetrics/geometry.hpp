#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "warpmetrics/error.hpp"

namespace warpmetrics {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  double norm() const { return std::hypot(x, y); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

namespace detail {
template <typename T>
class GridBase {
 public:
  GridBase() = default;
  GridBase(int rows, int cols) : rows_(rows), cols_(cols) {
    if (rows < 2 || cols < 2)
      throw DimensionError("grid dimensions must be at least 2x2");
    points_.resize(static_cast<size_t>(rows) * cols);
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  T& at(int r, int c) { return points_[static_cast<size_t>(r) * cols_ + c]; }
  const T& at(int r, int c) const {
    return points_[static_cast<size_t>(r) * cols_ + c];
  }
  std::span<const T> points() const { return points_; }
  std::span<T> points() { return points_; }
  bool same_shape(const GridBase& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

 protected:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> points_;
};
}  // namespace detail

/// h x w backward-mapping control grid; coordinates in source-image pixels.
/// Convention (fixed project-wide): pixel centers at integer coordinates,
/// origin top-left, x rightward, y downward.
class Grid2D : public detail::GridBase<Vec2> {
 public:
  using GridBase::GridBase;
  bool finite() const;
};

/// h x w grid of 3D surface coordinates in normalized surface units.
class Grid3D : public detail::GridBase<Vec3> {
 public:
  using GridBase::GridBase;
};

/// h x w points in the unit UV plane (u horizontal, v vertical).
class UVGrid : public detail::GridBase<Vec2> {
 public:
  using GridBase::GridBase;
};

/// H x W x C raster, samples in [0,1]. C is 1 (gray) or 3 (RGB), row-major
/// interleaved. Construction clamps to [0,1] and rejects non-finite samples.
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(int height, int width, int channels, float fill = 0.0f);
  ImageBuffer(int height, int width, int channels, std::vector<float> samples);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  bool empty() const { return height_ == 0 || width_ == 0; }

  float& at(int y, int x, int c = 0) {
    return samples_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
  }
  float at(int y, int x, int c = 0) const {
    return samples_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
  }
  std::span<const float> samples() const { return samples_; }
  std::span<float> samples() { return samples_; }

  /// Luma conversion with weights (0.299, 0.587, 0.114); no-op copy when C==1.
  ImageBuffer to_gray() const;

  /// Bilinear sample with edge clamping, one channel.
  float sample_bilinear(double x, double y, int c) const;

  void clamp_and_validate();

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> samples_;
};

/// Rectangle of arbitrary orientation. Canonical form: width >= height,
/// angle in [-90, 90) degrees measuring the long-axis direction from +x.
struct RotatedRect {
  Vec2 center;
  double width = 0.0;
  double height = 0.0;
  double angle_deg = 0.0;

  double area() const { return width * height; }
  std::array<Vec2, 4> corners() const;
  RotatedRect canonical() const;
};

/// 3x3 homogeneous transform restricted to rotation + uniform scale +
/// translation (no shear, no perspective).
class FrameTransform {
 public:
  FrameTransform();  // identity
  explicit FrameTransform(const std::array<double, 9>& row_major);

  static FrameTransform identity();
  static FrameTransform translation(double tx, double ty);
  /// Rotation by angle_deg (counterclockwise in the y-down pixel frame,
  /// i.e. standard matrix form) about `center`, with optional uniform scale.
  static FrameTransform rotation_about(const Vec2& center, double angle_deg,
                                       double scale = 1.0);

  Vec2 apply(const Vec2& p) const;
  FrameTransform compose(const FrameTransform& inner) const;  // this ∘ inner
  FrameTransform inverse() const;
  const std::array<double, 9>& matrix() const { return m_; }
  double scale() const;

 private:
  std::array<double, 9> m_;
  void validate() const;
};

/// Result of locating a point inside (or nearest to) a quad mesh.
struct MeshLocation {
  int row = 0;  ///< cell row in [0, h-2]
  int col = 0;  ///< cell col in [0, w-2]
  double s = 0.0;  ///< local coordinate along the column axis (x-ish)
  double t = 0.0;  ///< local coordinate along the row axis (y-ish)
  bool extrapolated = false;  ///< true when p fell outside the mesh hull
};

// ---- operations ------------------------------------------------------------

/// Exact uniform unit-square grid: u = col/(w-1), v = row/(h-1).
UVGrid make_uniform_uv_grid(int h, int w);

/// Throws InvalidMeshError unless every quad cell has strictly positive area
/// and all cells share one orientation.
void validate_mesh(const Grid2D& mesh);

/// Inverse-bilinear point location. Interior points land in their containing
/// cell with (s,t) in [0,1]^2; exterior points are assigned the nearest
/// boundary cell with (s,t) extended beyond [0,1] and `extrapolated` set.
MeshLocation locate_in_mesh(const Vec2& p, const Grid2D& mesh);

/// Bilinear evaluation of a grid cell at local coordinates.
Vec2 bilinear_in_cell(const Grid2D& g, int row, int col, double s, double t);
Vec2 bilinear_in_cell(const UVGrid& g, int row, int col, double s, double t);

/// Maps predicted image-space points into UV space through the ground-truth
/// mesh correspondence: each point of `pred` is located in `mesh_gt` and
/// `uv_gt` is interpolated at the recovered local coordinates.
UVGrid uv_map(const Grid2D& pred, const Grid2D& mesh_gt, const UVGrid& uv_gt);

/// Same as uv_map but also returns the per-point mesh locations (used by the
/// loss gradient).
UVGrid uv_map_detailed(const Grid2D& pred, const Grid2D& mesh_gt,
                       const UVGrid& uv_gt, std::vector<MeshLocation>& locs);

/// Backward-grid remap: the grid is bilinearly upsampled to out_h x out_w and
/// the source image is bilinearly sampled at each upsampled coordinate with
/// edge clamping.
ImageBuffer remap_image(const ImageBuffer& image, const Grid2D& grid,
                        int out_h, int out_w);

/// Minimum-area enclosing rectangle via rotating calipers over the convex
/// hull. Throws DegenerateInputError on <3 points or collinear input.
RotatedRect min_area_rect(std::span<const Vec2> points);

/// Rotates the image so the rect's long axis becomes horizontal and crops the
/// rect expanded by margin*max(width,height) per side (edge clamped). Returns
/// the crop plus the transform from cropped-frame to original-frame
/// coordinates.
std::pair<ImageBuffer, FrameTransform> rotate_and_crop(const ImageBuffer& image,
                                                       const RotatedRect& rect,
                                                       double margin);

/// Maps every grid point through T.
Grid2D apply_transform(const Grid2D& grid, const FrameTransform& T);

/// Bilinear resize (align-corners sampling) used for canonicalization.
ImageBuffer resize_bilinear(const ImageBuffer& image, int out_h, int out_w);

}  // namespace warpmetrics
