#include "warpmetrics/synth.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

namespace warpmetrics {

// ---- WarpSpec / ExpandedWarp ------------------------------------------------

WarpSpec WarpSpec::identity() { return WarpSpec{}; }

WarpSpec WarpSpec::make_translation(double tx, double ty) {
  WarpSpec s;
  s.kind = Kind::Translation;
  s.translation = {tx, ty};
  s.amplitude = std::hypot(tx, ty);
  return s;
}

WarpSpec WarpSpec::make_rotation(double degrees) {
  WarpSpec s;
  s.kind = Kind::Rotation;
  s.rotation_deg = degrees;
  return s;
}

WarpSpec WarpSpec::random_sinusoidal(uint64_t seed, double amplitude,
                                     int max_terms, double max_freq) {
  if (amplitude < 0.0)
    throw ParameterError("random_sinusoidal: amplitude must be >= 0");
  if (max_terms < 1) throw ParameterError("random_sinusoidal: max_terms < 1");
  WarpSpec s;
  s.kind = Kind::SinusoidalSum;
  s.amplitude = amplitude;
  s.seed = seed;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> nterms(1, max_terms);
  std::uniform_real_distribution<double> freq(0.5, max_freq);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const int n = nterms(rng);
  s.terms.reserve(n);
  for (int i = 0; i < n; ++i) {
    WarpTerm t;
    t.fx = freq(rng);
    t.fy = freq(rng);
    t.phase_x = phase(rng);
    t.phase_y = phase(rng);
    s.terms.push_back(t);
  }
  return s;
}

namespace {

const char* kind_name(WarpSpec::Kind k) {
  switch (k) {
    case WarpSpec::Kind::Identity: return "identity";
    case WarpSpec::Kind::Translation: return "translation";
    case WarpSpec::Kind::Rotation: return "rotation";
    case WarpSpec::Kind::SinusoidalSum: return "sinusoidal-sum";
  }
  return "identity";
}

WarpSpec::Kind kind_from_name(const std::string& name) {
  if (name == "identity") return WarpSpec::Kind::Identity;
  if (name == "translation") return WarpSpec::Kind::Translation;
  if (name == "rotation") return WarpSpec::Kind::Rotation;
  if (name == "sinusoidal-sum") return WarpSpec::Kind::SinusoidalSum;
  throw IoError("unknown warp kind: " + name);
}

// Raw (pre-scaling) sinusoid sums; x-displacement varies along y and vice
// versa, so the family bends rows and columns rather than sliding them.
double raw_dx(const WarpSpec& s, double unit_y) {
  double acc = 0.0;
  for (const WarpTerm& t : s.terms)
    acc += std::sin(2.0 * std::numbers::pi * (t.fx * unit_y) + t.phase_x);
  return acc;
}

double raw_dy(const WarpSpec& s, double unit_x) {
  double acc = 0.0;
  for (const WarpTerm& t : s.terms)
    acc += std::sin(2.0 * std::numbers::pi * (t.fy * unit_x) + t.phase_y);
  return acc;
}

// Maximum of |f| over [0,1]: dense scan plus local ternary refinement.
double max_abs_on_unit(const std::function<double(double)>& f) {
  constexpr int kSamples = 4096;
  double best = 0.0, best_t = 0.0;
  for (int i = 0; i <= kSamples; ++i) {
    const double t = static_cast<double>(i) / kSamples;
    const double v = std::abs(f(t));
    if (v > best) {
      best = v;
      best_t = t;
    }
  }
  double lo = std::max(0.0, best_t - 1.0 / kSamples);
  double hi = std::min(1.0, best_t + 1.0 / kSamples);
  for (int it = 0; it < 100; ++it) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (std::abs(f(m1)) < std::abs(f(m2)))
      lo = m1;
    else
      hi = m2;
  }
  return std::max(best, std::abs(f((lo + hi) / 2.0)));
}

}  // namespace

ExpandedWarp::ExpandedWarp(const WarpSpec& spec, int height, int width)
    : spec_(spec), height_(height), width_(width) {
  if (height < 2 || width < 2)
    throw DimensionError("ExpandedWarp: frame must be at least 2x2");
  if (spec_.kind == WarpSpec::Kind::SinusoidalSum && !spec_.terms.empty() &&
      spec_.amplitude > 0.0) {
    const double mx =
        max_abs_on_unit([&](double t) { return raw_dx(spec_, t); });
    const double my =
        max_abs_on_unit([&](double t) { return raw_dy(spec_, t); });
    // dx depends on y only and dy on x only, so the maxima are independent.
    const double peak = std::hypot(mx, my);
    scale_ = peak > 0.0 ? spec_.amplitude / peak : 0.0;
  } else if (spec_.kind == WarpSpec::Kind::SinusoidalSum) {
    scale_ = 0.0;
  }
}

Vec2 ExpandedWarp::displacement(const Vec2& p) const {
  switch (spec_.kind) {
    case WarpSpec::Kind::Identity:
      return {0.0, 0.0};
    case WarpSpec::Kind::Translation:
      return spec_.translation;
    case WarpSpec::Kind::Rotation: {
      const Vec2 center{(width_ - 1) / 2.0, (height_ - 1) / 2.0};
      const double rad = spec_.rotation_deg * std::numbers::pi / 180.0;
      const Vec2 d = p - center;
      return {d.x * std::cos(rad) - d.y * std::sin(rad) - d.x,
              d.x * std::sin(rad) + d.y * std::cos(rad) - d.y};
    }
    case WarpSpec::Kind::SinusoidalSum: {
      if (spec_.terms.empty() || scale_ == 0.0) return {0.0, 0.0};
      const double ux = p.x / (width_ - 1);
      const double uy = p.y / (height_ - 1);
      return {scale_ * raw_dx(spec_, uy), scale_ * raw_dy(spec_, ux)};
    }
  }
  return {0.0, 0.0};
}

Vec2 ExpandedWarp::inverse(const Vec2& p) const {
  switch (spec_.kind) {
    case WarpSpec::Kind::Identity:
      return p;
    case WarpSpec::Kind::Translation:
      return p - spec_.translation;
    case WarpSpec::Kind::Rotation: {
      const Vec2 center{(width_ - 1) / 2.0, (height_ - 1) / 2.0};
      const double rad = -spec_.rotation_deg * std::numbers::pi / 180.0;
      const Vec2 d = p - center;
      return {center.x + d.x * std::cos(rad) - d.y * std::sin(rad),
              center.y + d.x * std::sin(rad) + d.y * std::cos(rad)};
    }
    case WarpSpec::Kind::SinusoidalSum: {
      Vec2 q = p;
      for (int it = 0; it < 60; ++it) {
        const Vec2 next = p - displacement(q);
        if (std::abs(next.x - q.x) < 1e-12 && std::abs(next.y - q.y) < 1e-12) {
          return next;
        }
        q = next;
      }
      return q;
    }
  }
  return p;
}

ExpandedWarp expand_warp(const WarpSpec& spec, int height, int width) {
  return ExpandedWarp(spec, height, width);
}

std::string warp_spec_to_json(const WarpSpec& spec) {
  nlohmann::ordered_json j;
  j["kind"] = kind_name(spec.kind);
  j["amplitude"] = spec.amplitude;
  j["seed"] = spec.seed;
  if (spec.kind == WarpSpec::Kind::Translation)
    j["translation"] = {spec.translation.x, spec.translation.y};
  if (spec.kind == WarpSpec::Kind::Rotation)
    j["rotation_deg"] = spec.rotation_deg;
  if (spec.kind == WarpSpec::Kind::SinusoidalSum) {
    nlohmann::ordered_json terms = nlohmann::ordered_json::array();
    for (const WarpTerm& t : spec.terms)
      terms.push_back({{"fx", t.fx},
                       {"fy", t.fy},
                       {"phase_x", t.phase_x},
                       {"phase_y", t.phase_y}});
    j["terms"] = terms;
  }
  return j.dump();
}

WarpSpec warp_spec_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("warp spec: invalid JSON (") + e.what() + ")");
  }
  WarpSpec s;
  s.kind = kind_from_name(j.value("kind", "identity"));
  s.amplitude = j.value("amplitude", 0.0);
  s.seed = j.value("seed", 0ull);
  if (j.contains("translation")) {
    s.translation = {j["translation"][0].get<double>(),
                     j["translation"][1].get<double>()};
  }
  s.rotation_deg = j.value("rotation_deg", 0.0);
  if (j.contains("terms")) {
    for (const auto& t : j["terms"]) {
      WarpTerm term;
      term.fx = t.value("fx", 1.0);
      term.fy = t.value("fy", 1.0);
      term.phase_x = t.value("phase_x", 0.0);
      term.phase_y = t.value("phase_y", 0.0);
      s.terms.push_back(term);
    }
  }
  return s;
}

// ---- disturbances ------------------------------------------------------------

const char* set_id_name(DisturbanceSetting::SetId id) {
  switch (id) {
    case DisturbanceSetting::SetId::Set1: return "Set1";
    case DisturbanceSetting::SetId::Set2: return "Set2";
    case DisturbanceSetting::SetId::Set3: return "Set3";
  }
  return "Set1";
}

DisturbanceSetting::SetId set_id_from_name(const std::string& name) {
  if (name == "Set1" || name == "set1") return DisturbanceSetting::SetId::Set1;
  if (name == "Set2" || name == "set2") return DisturbanceSetting::SetId::Set2;
  if (name == "Set3" || name == "set3") return DisturbanceSetting::SetId::Set3;
  throw IoError("unknown disturbance set: " + name);
}

std::pair<ImageBuffer, FlowField> apply_warp(const ImageBuffer& image,
                                             const WarpSpec& spec) {
  const ExpandedWarp warp(spec, image.height(), image.width());
  const int h = image.height(), w = image.width();
  ImageBuffer out(h, w, image.channels());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Vec2 src =
          warp.inverse({static_cast<double>(x), static_cast<double>(y)});
      for (int c = 0; c < image.channels(); ++c)
        out.at(y, x, c) = image.sample_bilinear(src.x, src.y, c);
    }
  return {std::move(out), flow_from_warp(warp)};
}

ImageBuffer apply_color_disturbance(const ImageBuffer& image,
                                    const DisturbanceSetting& setting,
                                    uint64_t seed) {
  if (setting.color_gain_spread == 0.0 && setting.color_bias_spread == 0.0)
    return image;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> gain(1.0 - setting.color_gain_spread,
                                              1.0 + setting.color_gain_spread);
  std::uniform_real_distribution<double> bias(-setting.color_bias_spread,
                                              setting.color_bias_spread);
  double g[3], b[3];
  for (int c = 0; c < 3; ++c) {
    g[c] = gain(rng);
    b[c] = bias(rng);
  }
  ImageBuffer out = image;
  const int nch = image.channels();
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      for (int c = 0; c < nch; ++c)
        out.at(y, x, c) = static_cast<float>(
            std::clamp(g[c] * image.at(y, x, c) + b[c], 0.0, 1.0));
  return out;
}

ImageBuffer apply_shadow(const ImageBuffer& image,
                         const DisturbanceSetting& setting, uint64_t seed) {
  if (setting.shadow_strength <= 0.0) return image;
  const double strength = std::min(setting.shadow_strength, 0.6);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double cx = unit(rng) * (image.width() - 1);
  const double cy = unit(rng) * (image.height() - 1);
  const double ax = (0.15 + 0.35 * unit(rng)) * image.width();
  const double ay = (0.15 + 0.35 * unit(rng)) * image.height();
  const double theta = unit(rng) * std::numbers::pi;
  const double s = strength * (0.5 + 0.5 * unit(rng));

  const double ct = std::cos(theta), st = std::sin(theta);
  ImageBuffer out = image;
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      const double dx = x - cx, dy = y - cy;
      const double ex = (dx * ct + dy * st) / ax;
      const double ey = (-dx * st + dy * ct) / ay;
      const double factor = 1.0 - s * std::exp(-(ex * ex + ey * ey));
      for (int c = 0; c < image.channels(); ++c)
        out.at(y, x, c) = static_cast<float>(
            std::clamp(image.at(y, x, c) * factor, 0.0, 1.0));
    }
  return out;
}

uint64_t derive_seed(uint64_t master, uint64_t stream, uint64_t index) {
  // splitmix64 over a mixed key; independent streams per (stream, index)
  uint64_t z = master ^ (stream * 0x9E3779B97F4A7C15ull) ^
               (index * 0xBF58476D1CE4E5B9ull);
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::vector<CorpusSample> make_robustness_corpus(
    const ImageBuffer& base, const DisturbanceSetting& setting, int count) {
  if (count < 1)
    throw ParameterError("make_robustness_corpus: count must be >= 1");
  std::vector<CorpusSample> out;
  out.reserve(count);
  const uint64_t shape_seed = derive_seed(setting.seed, 1, 0);
  for (int i = 0; i < count; ++i) {
    CorpusSample sample;
    sample.index = i;
    sample.amplitude =
        count == 1 ? setting.amplitude_min
                   : setting.amplitude_min +
                         (setting.amplitude_max - setting.amplitude_min) * i /
                             (count - 1);
    const uint64_t warp_seed =
        setting.vary_shape ? derive_seed(setting.seed, 1, i) : shape_seed;
    sample.spec = sample.amplitude > 0.0
                      ? WarpSpec::random_sinusoidal(warp_seed, sample.amplitude)
                      : WarpSpec::identity();
    sample.color_seed = derive_seed(setting.seed, 2, i);
    sample.shadow_seed = derive_seed(setting.seed, 3, i);

    auto [warped, flow] = apply_warp(base, sample.spec);
    if (setting.set != DisturbanceSetting::SetId::Set1)
      warped = apply_color_disturbance(warped, setting, sample.color_seed);
    if (setting.set == DisturbanceSetting::SetId::Set3)
      warped = apply_shadow(warped, setting, sample.shadow_seed);
    sample.image = std::move(warped);
    sample.gt_flow = std::move(flow);
    out.push_back(std::move(sample));
  }
  return out;
}

ImageBuffer make_synthetic_page(int height, int width, uint64_t seed) {
  if (height < 8 || width < 8)
    throw DimensionError("make_synthetic_page: page must be at least 8x8");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  ImageBuffer page(height, width, 1, 0.94f);
  // ruled horizontal lines
  const int line_gap = std::max(8, height / 18);
  for (int y = line_gap; y < height - 2; y += line_gap)
    for (int x = 2; x < width - 2; ++x)
      page.at(y, x) = 0.25f;
  // a few vertical column rules
  const int col_gap = std::max(10, width / 6);
  for (int x = col_gap; x < width - 4; x += col_gap)
    for (int y = 2; y < height - 2; ++y)
      page.at(y, x) = 0.35f;
  // word-like dark blocks between the rules
  const int words = std::max(20, height * width / 900);
  for (int k = 0; k < words; ++k) {
    const int wy = 1 + static_cast<int>(unit(rng) * (height - 5));
    const int wx = 1 + static_cast<int>(unit(rng) * (width - 9));
    const int ww = 3 + static_cast<int>(unit(rng) * 6);
    const int wh = 1 + static_cast<int>(unit(rng) * 2);
    const float shade = static_cast<float>(0.05 + 0.25 * unit(rng));
    for (int y = wy; y < std::min(height, wy + wh); ++y)
      for (int x = wx; x < std::min(width, wx + ww); ++x)
        page.at(y, x) = shade;
  }
  // mild paper grain so flat regions are not exactly constant
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double n = (unit(rng) - 0.5) * 0.04;
      page.at(y, x) =
          static_cast<float>(std::clamp(page.at(y, x) + n, 0.0, 1.0));
    }
  return page;
}

}  // namespace warpmetrics
