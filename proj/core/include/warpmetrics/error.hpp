#pragma once

#include <stdexcept>
#include <string>

namespace warpmetrics {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Grid/image shape mismatch or a dimension below the supported minimum.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A ground-truth mesh violates the non-degenerate-cell invariant.
class InvalidMeshError : public Error {
 public:
  using Error::Error;
};

/// Fewer points than the operation needs, collinear input, zero-area rect.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Empty images, non-finite samples, inputs smaller than a kernel footprint.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// A parameter outside its documented domain (e.g. non-positive epsilon).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Gradient requested at a point where the piecewise UV map has no
/// unique derivative (cell-boundary point with disagreeing Jacobians).
class NondifferentiablePointError : public Error {
 public:
  using Error::Error;
};

/// R^2 / normalized-std requested on constant or zero-mean data.
class UndefinedStatisticError : public Error {
 public:
  using Error::Error;
};

/// Grid predictor failure; carries the image id it failed on.
class PredictorError : public Error {
 public:
  PredictorError(const std::string& message, std::string image_id)
      : Error(message), image_id_(std::move(image_id)) {}
  const std::string& image_id() const noexcept { return image_id_; }

 private:
  std::string image_id_;
};

/// File format or filesystem failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace warpmetrics
