#include "warpmetrics/pipeline.hpp"

#include <unistd.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <mutex>

#include "warpmetrics/io.hpp"

namespace warpmetrics {

namespace {

std::string substitute_id(const std::string& tmpl, const std::string& id) {
  const size_t pos = tmpl.find("{}");
  if (pos == std::string::npos) return tmpl + id;
  std::string out = tmpl;
  out.replace(pos, 2, id);
  return out;
}

class FilePredictor final : public GridPredictor {
 public:
  FilePredictor(std::string tmpl, int rows, int cols)
      : tmpl_(std::move(tmpl)), rows_(rows), cols_(cols) {}

  Grid2D predict(const ImageBuffer& image,
                 const PredictContext& ctx) const override {
    const std::string path = substitute_id(tmpl_, ctx.image_id);
    if (!std::filesystem::exists(path))
      throw PredictorError("grid file not found: " + path, ctx.image_id);
    StoredGrid g;
    try {
      g = read_grid_file(path);
    } catch (const IoError& e) {
      throw PredictorError(std::string("garbled grid file: ") + e.what(),
                           ctx.image_id);
    }
    if (g.dim != 2)
      throw PredictorError("grid file is not 2D: " + path, ctx.image_id);
    return g.to_pixels(image.height(), image.width());
  }
  int grid_rows() const override { return rows_; }
  int grid_cols() const override { return cols_; }

 private:
  std::string tmpl_;
  int rows_, cols_;
};

class FunctionPredictor final : public GridPredictor {
 public:
  FunctionPredictor(
      std::function<Grid2D(const ImageBuffer&, const PredictContext&)> fn,
      int rows, int cols)
      : fn_(std::move(fn)), rows_(rows), cols_(cols) {}

  Grid2D predict(const ImageBuffer& image,
                 const PredictContext& ctx) const override {
    return fn_(image, ctx);
  }
  int grid_rows() const override { return rows_; }
  int grid_cols() const override { return cols_; }

 private:
  std::function<Grid2D(const ImageBuffer&, const PredictContext&)> fn_;
  int rows_, cols_;
};

class CommandPredictor final : public GridPredictor {
 public:
  CommandPredictor(std::string command, int rows, int cols)
      : command_(std::move(command)), rows_(rows), cols_(cols) {}

  Grid2D predict(const ImageBuffer& image,
                 const PredictContext& ctx) const override {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto dir = std::filesystem::temp_directory_path();
    static int counter = 0;
    const std::string stem =
        "warpmetrics_pred_" + std::to_string(::getpid()) + "_" +
        std::to_string(counter++);
    const auto img_path = dir / (stem + ".png");
    const auto grid_path = dir / (stem + ".grid");
    write_png(img_path, image);
    const std::string cmd =
        command_ + " '" + img_path.string() + "' '" + grid_path.string() + "'";
    const int rc = std::system(cmd.c_str());
    std::error_code ec;
    std::filesystem::remove(img_path, ec);
    if (rc != 0) {
      std::filesystem::remove(grid_path, ec);
      throw PredictorError("predictor command exited with status " +
                               std::to_string(rc),
                           ctx.image_id);
    }
    StoredGrid g;
    try {
      g = read_grid_file(grid_path);
    } catch (const IoError& e) {
      std::filesystem::remove(grid_path, ec);
      throw PredictorError(std::string("predictor wrote a garbled grid: ") +
                               e.what(),
                           ctx.image_id);
    }
    std::filesystem::remove(grid_path, ec);
    return g.to_pixels(image.height(), image.width());
  }
  int grid_rows() const override { return rows_; }
  int grid_cols() const override { return cols_; }

 private:
  std::string command_;
  int rows_, cols_;
  mutable std::mutex mutex_;
};

}  // namespace

std::unique_ptr<GridPredictor> file_predictor(std::string path_template,
                                              int grid_rows, int grid_cols) {
  return std::make_unique<FilePredictor>(std::move(path_template), grid_rows,
                                         grid_cols);
}

std::unique_ptr<GridPredictor> function_predictor(
    std::function<Grid2D(const ImageBuffer&, const PredictContext&)> fn,
    int grid_rows, int grid_cols) {
  return std::make_unique<FunctionPredictor>(std::move(fn), grid_rows,
                                             grid_cols);
}

std::unique_ptr<GridPredictor> command_predictor(std::string command,
                                                 int grid_rows, int grid_cols) {
  return std::make_unique<CommandPredictor>(std::move(command), grid_rows,
                                            grid_cols);
}

std::unique_ptr<GridPredictor> oracle_predictor(const WarpSpec& spec,
                                                int frame_h, int frame_w,
                                                int grid_rows, int grid_cols) {
  auto warp = std::make_shared<ExpandedWarp>(spec, frame_h, frame_w);
  auto fn = [warp, frame_h, frame_w, grid_rows, grid_cols](
                const ImageBuffer&, const PredictContext& ctx) {
    // The dewarped output spans the original reference frame uniformly;
    // its content sits at forward(q) in the warped original frame, which the
    // context maps into the current (possibly cropped) frame.
    const FrameTransform to_current = ctx.to_original.inverse();
    Grid2D g(grid_rows, grid_cols);
    for (int r = 0; r < grid_rows; ++r)
      for (int c = 0; c < grid_cols; ++c) {
        const Vec2 q{static_cast<double>(c) * (frame_w - 1) / (grid_cols - 1),
                     static_cast<double>(r) * (frame_h - 1) / (grid_rows - 1)};
        g.at(r, c) = to_current.apply(warp->forward(q));
      }
    return g;
  };
  return function_predictor(std::move(fn), grid_rows, grid_cols);
}

std::unique_ptr<GridPredictor> placement_predictor(
    const FrameTransform& page_to_canvas, int page_h, int page_w,
    int grid_rows, int grid_cols) {
  auto fn = [page_to_canvas, page_h, page_w, grid_rows, grid_cols](
                const ImageBuffer&, const PredictContext& ctx) {
    const FrameTransform full = ctx.to_original.inverse().compose(page_to_canvas);
    Grid2D g(grid_rows, grid_cols);
    for (int r = 0; r < grid_rows; ++r)
      for (int c = 0; c < grid_cols; ++c) {
        const Vec2 q{static_cast<double>(c) * (page_w - 1) / (grid_cols - 1),
                     static_cast<double>(r) * (page_h - 1) / (grid_rows - 1)};
        g.at(r, c) = full.apply(q);
      }
    return g;
  };
  return function_predictor(std::move(fn), grid_rows, grid_cols);
}

std::pair<ImageBuffer, Grid2D> dewarp_once(const ImageBuffer& image,
                                           const GridPredictor& predictor,
                                           int out_h, int out_w,
                                           const std::string& image_id) {
  PredictContext ctx{image_id, FrameTransform::identity(), image.height(),
                     image.width()};
  Grid2D grid = predictor.predict(image, ctx);
  ImageBuffer out = remap_image(image, grid, out_h, out_w);
  return {std::move(out), std::move(grid)};
}

namespace {

double fold_angle(double deg) {
  // distance of the rect angle from the nearest axis, in [0, 45]
  double a = std::fmod(std::abs(deg), 90.0);
  return std::min(a, 90.0 - a);
}

}  // namespace

DewarpResult dewarp_with_axis_alignment(const ImageBuffer& image,
                                        const GridPredictor& predictor,
                                        int rounds, double margin, int out_h,
                                        int out_w,
                                        const std::string& image_id) {
  if (rounds < 0) throw ParameterError("dewarp: rounds must be >= 0");
  if (margin < 0.0) throw ParameterError("dewarp: margin must be >= 0");

  DewarpResult res;
  FrameTransform to_original = FrameTransform::identity();
  ImageBuffer current = image;

  for (int round = 0; round < rounds; ++round) {
    const PredictContext ctx{image_id, to_original, image.height(),
                             image.width()};
    Grid2D grid = predictor.predict(current, ctx);
    res.report.rounds_executed++;
    RotatedRect rect;
    try {
      rect = min_area_rect(grid.points());
    } catch (const DegenerateInputError&) {
      // Preprocessing must never make output unavailable: fall back to a
      // plain dewarp of the original image.
      auto [img, g] = dewarp_once(image, predictor, out_h, out_w, image_id);
      res.image = std::move(img);
      res.grid = std::move(g);
      res.report.degenerate_fallback = true;
      res.report.rounds_executed++;
      res.report.residual_angle_deg = 0.0;
      res.report.coverage = 1.0;
      return res;
    }
    auto [crop, T] = rotate_and_crop(current, rect, margin);
    RoundRecord rec;
    rec.rect = rect;
    rec.transform = T;
    rec.coverage = std::min(
        1.0, rect.area() / (static_cast<double>(current.height()) *
                            current.width()));
    res.report.rounds.push_back(rec);
    to_original = to_original.compose(T);
    current = std::move(crop);
  }

  const PredictContext ctx{image_id, to_original, image.height(),
                           image.width()};
  Grid2D final_grid = predictor.predict(current, ctx);
  res.report.rounds_executed++;

  try {
    const RotatedRect final_rect = min_area_rect(final_grid.points());
    res.report.residual_angle_deg = fold_angle(final_rect.angle_deg);
    res.report.coverage = std::min(
        1.0, final_rect.area() /
                 (static_cast<double>(current.height()) * current.width()));
  } catch (const DegenerateInputError&) {
    res.report.residual_angle_deg = 0.0;
    res.report.coverage = 0.0;
  }

  res.grid = apply_transform(final_grid, to_original);
  res.image = remap_image(image, res.grid, out_h, out_w);
  return res;
}

}  // namespace warpmetrics
