#pragma once

#include <string>
#include <vector>

#include "warpmetrics/geometry.hpp"

namespace warpmetrics {

struct HeatmapOptions {
  double alpha = 0.6;        ///< overlay opacity
  double percentile = 99.0;  ///< color scale cap, percentile of the d map
  int legend_height = 18;    ///< px; 0 disables the legend strip
};

/// Viridis lookup for t in [0,1].
void colormap_viridis(double t, float& r, float& g, float& b);

/// Alpha-blends the colorized `values` map over `base` and appends a legend
/// strip showing the color ramp and the [0, cap] scale. `cap` <= 0 derives
/// the cap from the configured percentile of `values`.
ImageBuffer render_heatmap_overlay(const ImageBuffer& base,
                                   const std::vector<float>& values,
                                   int values_h, int values_w, double cap,
                                   const HeatmapOptions& options = {});

/// The shared color cap for a set of maps: percentile of `values`.
double heatmap_cap(const std::vector<float>& values, double percentile);

}  // namespace warpmetrics
