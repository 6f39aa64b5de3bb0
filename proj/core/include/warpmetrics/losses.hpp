#pragma once

#include <span>

#include "warpmetrics/geometry.hpp"

namespace warpmetrics {

/// Axis-aligned constraint loss split into its two directional terms.
struct LossBreakdown {
  double l_hor = 0.0;  ///< sum over rows of Var(v along the row)
  double l_ver = 0.0;  ///< sum over columns of Var(u down the column)
  double l_al = 0.0;   ///< l_hor + l_ver
};

/// Weights of the combined training loss; defaults (1, 1, 0.2, 0.05).
struct LossWeights {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 0.2;
  double lambda = 0.05;
};

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

/// How per-row/per-column variances are reduced into the loss. The written
/// form sums them; Mean divides by the number of rows (resp. columns).
enum class VarianceReduction { Sum, Mean };

/// Population variance: mean of squared deviations from the mean.
double population_variance(std::span<const double> values);

LossBreakdown axis_aligned_loss(const UVGrid& q,
                                VarianceReduction reduction =
                                    VarianceReduction::Sum);

/// axis_aligned_loss of uv_map(pred, mesh_gt, uv_gt).
LossBreakdown axis_aligned_loss_from_prediction(const Grid2D& pred,
                                                const Grid2D& mesh_gt,
                                                const UVGrid& uv_gt,
                                                VarianceReduction reduction =
                                                    VarianceReduction::Sum);

/// Analytic d(l_al)/d(pred point) for every grid point, row-major. Points on
/// a cell boundary are accepted when all incident cells agree on the local
/// Jacobian (e.g. affine meshes); otherwise NondifferentiablePointError.
std::vector<Vec2> axis_aligned_loss_grad(const Grid2D& pred,
                                         const Grid2D& mesh_gt,
                                         const UVGrid& uv_gt,
                                         VarianceReduction reduction =
                                             VarianceReduction::Sum);

/// Mean absolute elementwise difference.
double l1_grid_loss(const Grid2D& g, const Grid2D& gt);
double l1_grid_loss(const Grid3D& g, const Grid3D& gt);

/// Mean local SSIM over a Gaussian-weighted sliding window (valid region).
/// 3-channel inputs are converted to luma first.
double ssim(const ImageBuffer& a, const ImageBuffer& b,
            const SsimParams& params = {});
double ssim_loss(const ImageBuffer& a, const ImageBuffer& b,
                 const SsimParams& params = {});

struct LossParts {
  double l2d = 0.0;
  double l3d = 0.0;
  double l_al = 0.0;
  double l_ssim = 0.0;
};

/// alpha*l2d + beta*l3d + gamma*l_al + lambda*l_ssim.
double total_loss(const LossParts& parts, const LossWeights& w = {});

}  // namespace warpmetrics
