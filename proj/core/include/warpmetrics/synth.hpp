#pragma once

#include <utility>

#include "warpmetrics/flow.hpp"
#include "warpmetrics/warp.hpp"

namespace warpmetrics {

/// Robustness-study disturbance family. Set2 adds color jitter to Set1's
/// geometric warps; Set3 adds a random shadow to Set2.
struct DisturbanceSetting {
  enum class SetId { Set1, Set2, Set3 };

  SetId set = SetId::Set1;
  double amplitude_min = 0.5;  ///< px, start of the linear amplitude sweep
  double amplitude_max = 10.0; ///< px, end of the sweep
  double color_gain_spread = 0.2;  ///< gains drawn from [1-s, 1+s]
  double color_bias_spread = 0.1;  ///< biases from [-s, s]
  double shadow_strength = 0.6;    ///< max darkening; min luminance factor = 1-s
  bool vary_shape = false;  ///< true: new warp shape per sample; false: one
                            ///< shape per corpus, amplitude swept
  uint64_t seed = 0;
};

const char* set_id_name(DisturbanceSetting::SetId id);
DisturbanceSetting::SetId set_id_from_name(const std::string& name);

/// Backward-sampled warped image (edge clamped) plus the exact flow from the
/// unwarped to the warped frame.
std::pair<ImageBuffer, FlowField> apply_warp(const ImageBuffer& image,
                                             const WarpSpec& spec);

/// Per-channel affine jitter, clamped to [0,1]; deterministic per seed.
/// Zero spreads leave the image untouched.
ImageBuffer apply_color_disturbance(const ImageBuffer& image,
                                    const DisturbanceSetting& setting,
                                    uint64_t seed);

/// One smooth elliptical darkening field; strength 0 leaves the image
/// untouched. Deterministic per seed.
ImageBuffer apply_shadow(const ImageBuffer& image,
                         const DisturbanceSetting& setting, uint64_t seed);

struct CorpusSample {
  int index = 0;
  double amplitude = 0.0;
  WarpSpec spec;
  uint64_t color_seed = 0;
  uint64_t shadow_seed = 0;
  ImageBuffer image;
  FlowField gt_flow;
};

/// `count` disturbed copies of `base` with amplitudes swept linearly across
/// the schedule; per-sample seeds derive from the master seed, so generation
/// is reproducible sample-by-sample.
std::vector<CorpusSample> make_robustness_corpus(
    const ImageBuffer& base, const DisturbanceSetting& setting, int count);

/// Deterministic document-like test page: ruled lines, column rules and
/// word-like blocks. Used as the default corpus base and as a test fixture.
ImageBuffer make_synthetic_page(int height, int width, uint64_t seed);

/// Derives the per-sample stream seed used by make_robustness_corpus.
uint64_t derive_seed(uint64_t master, uint64_t stream, uint64_t index);

}  // namespace warpmetrics
