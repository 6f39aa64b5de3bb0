#pragma once

#include <cstdint>
#include <vector>

#include "warpmetrics/error.hpp"

namespace warpmetrics {

/// Per-pixel displacement field from a reference image to a comparison image,
/// stored at reference-pixel locations. Positive vx means the corresponding
/// content in the target lies to the right of its reference position.
struct FlowField {
  int height = 0;
  int width = 0;
  std::vector<float> vx;
  std::vector<float> vy;
  std::vector<uint8_t> valid;

  FlowField() = default;
  FlowField(int h, int w, bool all_valid = true)
      : height(h), width(w),
        vx(static_cast<size_t>(h) * w, 0.0f),
        vy(static_cast<size_t>(h) * w, 0.0f),
        valid(static_cast<size_t>(h) * w, all_valid ? 1 : 0) {
    if (h <= 0 || w <= 0)
      throw InvalidInputError("FlowField: dimensions must be positive");
  }

  size_t index(int y, int x) const { return static_cast<size_t>(y) * width + x; }
  size_t size() const { return vx.size(); }
};

}  // namespace warpmetrics
