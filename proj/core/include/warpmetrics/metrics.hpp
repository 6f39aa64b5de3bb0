#pragma once

#include <optional>
#include <string>

#include "warpmetrics/flow_field.hpp"
#include "warpmetrics/geometry.hpp"

namespace warpmetrics {

/// Max-normalized absolute Sobel responses of the ground-truth image.
/// gx responds to vertical feature lines, gy to horizontal ones.
struct GradientWeights {
  int height = 0;
  int width = 0;
  std::vector<float> gx;
  std::vector<float> gy;

  size_t index(int y, int x) const { return static_cast<size_t>(y) * width + x; }
};

struct AadParams {
  /// Rows/columns whose total gradient weight falls below epsilon carry no
  /// feature-line evidence and contribute zero deviations.
  double epsilon = 1e-8;
};

struct AadResult {
  double aad = 0.0;    ///< mean of d over all N pixels
  double aad_h = 0.0;  ///< mean of d_row (horizontal component)
  double aad_v = 0.0;  ///< mean of d_col (vertical component)
  int height = 0;
  int width = 0;
  std::vector<float> d_row;  ///< gy-weighted |vy - row mean|
  std::vector<float> d_col;  ///< gx-weighted |vx - col mean|
  std::vector<float> d;      ///< sqrt(d_row^2 + d_col^2)
  std::vector<double> row_means;  ///< m_i
  std::vector<double> col_means;  ///< n_j
};

struct AdResult {
  double value = 0.0;
  bool degenerate = false;  ///< all-zero weights
};

/// One evaluation record. Absent OCR results stay unset, never zero.
struct MetricReport {
  std::string image_id;
  double aad = 0.0;
  double aad_h = 0.0;
  double aad_v = 0.0;
  double ld = 0.0;
  double ad_approx = 0.0;
  bool ad_degenerate = false;
  double ms_ssim = 0.0;
  std::optional<long> ed;
  std::optional<double> cer;
  std::string flow_source;  ///< "ground-truth" | "estimated" | "imported"
  std::string fingerprint;  ///< config content hash
};

GradientWeights sobel_weights(const ImageBuffer& y);

/// Axis-Aligned Distortion of `flow` against the ground-truth image `y`:
/// gradient-weighted deviations of vy from per-row weighted means and of vx
/// from per-column weighted means, combined Euclideanly and averaged.
AadResult aad(const ImageBuffer& y, const FlowField& flow,
              const AadParams& params = {});
AadResult aad(const GradientWeights& weights, const FlowField& flow,
              const AadParams& params = {});

/// Local distortion: mean flow magnitude over valid pixels.
double ld(const FlowField& flow);

/// Translation-removed, gradient-weighted mean flow deviation. This is a
/// documented approximation of the aligned-distortion metric, not the
/// original formulation.
AdResult ad_approx(const FlowField& flow, const GradientWeights& weights);

/// Standard 5-scale MS-SSIM with exponents
/// (0.0448, 0.2856, 0.3001, 0.2363, 0.1333) over dyadic downsampling.
double ms_ssim(const ImageBuffer& a, const ImageBuffer& b);

/// Levenshtein distance with unit costs over Unicode codepoints (invalid
/// UTF-8 bytes count as single units).
long edit_distance(const std::string& a, const std::string& b);

/// edit_distance / max(1, |reference|).
double cer(const std::string& reference, const std::string& hypothesis);

/// Squared Pearson correlation of two paired lists.
double r_squared(std::span<const double> truth, std::span<const double> estimate);

/// Coefficient of variation: population std / mean.
double normalized_std(std::span<const double> values);

}  // namespace warpmetrics
