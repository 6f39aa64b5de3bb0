#pragma once

#include <functional>
#include <memory>
#include <string>

#include "warpmetrics/geometry.hpp"
#include "warpmetrics/warp.hpp"

namespace warpmetrics {

/// Frame context handed to predictors: which image this is, how the current
/// frame maps back to the original one (identity on round 0), and the
/// original frame size (crops shrink the working frame).
struct PredictContext {
  std::string image_id;
  FrameTransform to_original;
  int original_height = 0;
  int original_width = 0;
};

/// Produces a backward-mapping grid for an image, in that image's pixel
/// frame. Implementations must be deterministic per image.
class GridPredictor {
 public:
  virtual ~GridPredictor() = default;
  virtual Grid2D predict(const ImageBuffer& image,
                         const PredictContext& ctx) const = 0;
  virtual int grid_rows() const = 0;
  virtual int grid_cols() const = 0;
};

/// Loads per-image grids from AAGRID1/JSON files. The template's "{}" is
/// replaced by the image id; grids are denormalized against the given image.
std::unique_ptr<GridPredictor> file_predictor(std::string path_template,
                                              int grid_rows = 45,
                                              int grid_cols = 31);

/// Exact inverse-warp grid computed analytically from the WarpSpec that
/// produced the distorted image. Handles preprocessing crops through the
/// frame context.
std::unique_ptr<GridPredictor> oracle_predictor(const WarpSpec& spec,
                                                int frame_h, int frame_w,
                                                int grid_rows = 45,
                                                int grid_cols = 31);

/// Oracle for a page pasted into a canvas through a similarity transform
/// (page frame -> canvas frame). page_h/page_w are the page raster size.
std::unique_ptr<GridPredictor> placement_predictor(
    const FrameTransform& page_to_canvas, int page_h, int page_w,
    int grid_rows = 45, int grid_cols = 31);

/// Runs `<command> <input-image-path> <output-grid-path>`; the command must
/// write an AAGRID1 grid and exit 0. Invocations are serialized.
std::unique_ptr<GridPredictor> command_predictor(std::string command,
                                                 int grid_rows = 45,
                                                 int grid_cols = 31);

/// Wraps a callable; used by tests and embedders.
std::unique_ptr<GridPredictor> function_predictor(
    std::function<Grid2D(const ImageBuffer&, const PredictContext&)> fn,
    int grid_rows = 45, int grid_cols = 31);

struct RoundRecord {
  RotatedRect rect;          ///< min-area rect detected this round
  FrameTransform transform;  ///< this round's crop frame -> previous frame
  double coverage = 0.0;     ///< rect area / frame area at detection time
};

struct PreprocessReport {
  int rounds_executed = 0;  ///< number of predictions made (preprocess + final)
  std::vector<RoundRecord> rounds;
  double residual_angle_deg = 0.0;  ///< final rect angle folded into [0, 45]
  double coverage = 0.0;            ///< final rect area / final frame area
  bool degenerate_fallback = false; ///< collinear grid forced a plain dewarp
};

struct DewarpResult {
  ImageBuffer image;
  Grid2D grid;  ///< in original-frame coordinates
  PreprocessReport report;
};

/// Single prediction + remap at the given output size.
std::pair<ImageBuffer, Grid2D> dewarp_once(const ImageBuffer& image,
                                           const GridPredictor& predictor,
                                           int out_h, int out_w,
                                           const std::string& image_id = "");

/// The axis-alignment inference loop: per round, predict a grid, fit the
/// min-area rect, rotate/crop with the margin, and continue on the crop.
/// After `rounds` preprocessing rounds a final prediction is mapped through
/// the composed transforms back to original-image coordinates and remapped
/// from the original image. rounds == 0 reduces to dewarp_once.
DewarpResult dewarp_with_axis_alignment(const ImageBuffer& image,
                                        const GridPredictor& predictor,
                                        int rounds, double margin, int out_h,
                                        int out_w,
                                        const std::string& image_id = "");

}  // namespace warpmetrics
