#pragma once

#include "warpmetrics/flow_field.hpp"
#include "warpmetrics/geometry.hpp"
#include "warpmetrics/warp.hpp"

namespace warpmetrics {

/// SIFT-flow configuration. Costs are expressed in quantized-descriptor
/// units (descriptors are uint8 after SIFT normalization and x255 scaling).
struct SiftFlowParams {
  int levels = 4;              ///< pyramid levels
  int cell_size = 2;           ///< px per descriptor cell
  int orientation_bins = 8;    ///< histogram bins over [0, 2pi)
  int coarsest_radius = 8;     ///< search radius at the top level, halved per finer level (min 1)
  int iterations = 40;         ///< message-passing sweeps per level
  double regularization = 300.0;      ///< alpha: smoothness per px of label difference
  double smooth_truncation = 3000.0;  ///< d: smoothness cap
  double data_truncation = 2000.0;    ///< t: data term cap (also out-of-bounds cost)
  double small_displacement = 2.0;    ///< gamma: |flow| prior per px
};

/// Dense per-pixel SIFT descriptors (row-major, `dims` bytes per pixel).
struct DescriptorGrid {
  int height = 0;
  int width = 0;
  int dims = 0;
  std::vector<uint8_t> data;

  const uint8_t* at(int y, int x) const {
    return data.data() + (static_cast<size_t>(y) * width + x) * dims;
  }
};

/// Exact analytic flow of every pixel under a synthetic warp.
FlowField flow_from_warp(const WarpSpec& spec, int height, int width);
FlowField flow_from_warp(const ExpandedWarp& warp);

/// Unit-normalized orientation-histogram descriptors on a dense grid
/// (4x4 cell block, bilinear spatial pooling, SIFT 0.2 clamping).
DescriptorGrid dense_sift(const ImageBuffer& image,
                          const SiftFlowParams& params = {});

/// Coarse-to-fine dual-layer message passing over dense SIFT descriptors.
/// Returns the integer-label flow from `reference` to `target`; deterministic
/// for fixed inputs and params.
FlowField estimate_sift_flow(const ImageBuffer& reference,
                             const ImageBuffer& target,
                             const SiftFlowParams& params = {});

}  // namespace warpmetrics
