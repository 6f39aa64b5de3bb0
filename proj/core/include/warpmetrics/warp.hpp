#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "warpmetrics/geometry.hpp"

namespace warpmetrics {

/// One sinusoidal component of a synthetic warp. Frequencies are in
/// cycles/image over the unit frame; the x-displacement runs along the
/// vertical position and the y-displacement along the horizontal position,
/// so the field bends feature lines instead of sliding them.
struct WarpTerm {
  double fx = 1.0;
  double fy = 1.0;
  double phase_x = 0.0;
  double phase_y = 0.0;
};

/// Parametric synthetic warp. Deterministically expandable from the seed.
struct WarpSpec {
  enum class Kind { Identity, Translation, Rotation, SinusoidalSum };

  Kind kind = Kind::Identity;
  double amplitude = 0.0;      ///< px; peak |d| for SinusoidalSum
  Vec2 translation{0.0, 0.0};  ///< Translation kind
  double rotation_deg = 0.0;   ///< Rotation kind, about the frame center
  std::vector<WarpTerm> terms; ///< SinusoidalSum kind
  uint64_t seed = 0;

  static WarpSpec identity();
  static WarpSpec make_translation(double tx, double ty);
  static WarpSpec make_rotation(double degrees);
  /// Draws 1..max_terms sinusoids with frequencies in [0.5, max_freq] and
  /// uniform phases from the seed.
  static WarpSpec random_sinusoidal(uint64_t seed, double amplitude,
                                    int max_terms = 4, double max_freq = 3.0);
};

std::string warp_spec_to_json(const WarpSpec& spec);
WarpSpec warp_spec_from_json(const std::string& json_text);

/// A warp bound to a pixel frame. `displacement` is the forward motion of
/// reference-pixel content; `inverse` solves forward(q) == p (closed form for
/// the rigid kinds, fixed-point iteration for sinusoids).
class ExpandedWarp {
 public:
  ExpandedWarp(const WarpSpec& spec, int height, int width);

  Vec2 displacement(const Vec2& p) const;
  Vec2 forward(const Vec2& p) const { return p + displacement(p); }
  Vec2 inverse(const Vec2& p) const;

  const WarpSpec& spec() const { return spec_; }
  int height() const { return height_; }
  int width() const { return width_; }
  /// Multiplier applied to the raw sinusoid sum so max |d| == amplitude.
  double sinusoid_scale() const { return scale_; }

 private:
  WarpSpec spec_;
  int height_ = 0;
  int width_ = 0;
  double scale_ = 1.0;
};

ExpandedWarp expand_warp(const WarpSpec& spec, int height, int width);

}  // namespace warpmetrics
