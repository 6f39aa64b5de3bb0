#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "warpmetrics/flow_field.hpp"
#include "warpmetrics/geometry.hpp"

namespace warpmetrics {

/// A grid as stored on disk: coordinates normalized to [0,1] relative to
/// (W-1, H-1) of the image it refers to (dim 2), or raw surface units (dim 3).
struct StoredGrid {
  int h = 0;
  int w = 0;
  int dim = 2;
  std::vector<double> values;  // h*w*dim, row-major

  Grid2D to_pixels(int image_h, int image_w) const;
  Grid3D to_grid3d() const;
  static StoredGrid from_pixels(const Grid2D& grid, int image_h, int image_w);
  static StoredGrid from_grid3d(const Grid3D& grid);
};

/// "AAGRID1" binary format: magic "AAGRID1\0", u32le h, u32le w, u8 dim,
/// then h*w*dim f32le row-major normalized coordinates.
void write_grid_file(const std::filesystem::path& path, const StoredGrid& g);

/// JSON mirror: {"h":..,"w":..,"dim":..,"points":[...]} with the same
/// normalization. write_grid_json emits it; read_grid_file accepts either
/// format (sniffed by the magic bytes).
void write_grid_json(const std::filesystem::path& path, const StoredGrid& g);
StoredGrid read_grid_file(const std::filesystem::path& path);

/// "AAFLOW1" binary format: magic "AAFLOW1\0", u32le H, u32le W, then H*W
/// packed records (f32le vx, f32le vy, u8 valid).
void write_flow_file(const std::filesystem::path& path, const FlowField& f);
FlowField read_flow_file(const std::filesystem::path& path);

/// 8-bit PNG, gray or RGB (alpha is dropped on read).
ImageBuffer read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const ImageBuffer& image);

}  // namespace warpmetrics
