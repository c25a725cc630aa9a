#pragma once

// 6D augmentation: in-plane rotation and scaling of an image about the
// principal point, with the annotated poses transformed so they still match
// the warped image. Also the color-space augmentation (geometry-free
// RandAugment subset plus channel-wise gaussian noise).

#include <posekit/frame.hpp>
#include <posekit/geometry.hpp>
#include <posekit/image.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string_view>

namespace posekit {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct IntRange {
  int lo = 0;
  int hi = 0;
};

/// Sampling ranges for augment_frame. Defaults are the training settings:
/// theta in [0, 360) degrees, scale in [0.7, 1.3], skip with probability 0.02,
/// n in [1, 3] color ops of strength m in [1, 14].
struct AugmentParams {
  Range theta_range{0.0, 360.0};
  Range scale_range{0.7, 1.3};
  double skip_probability = 0.02;
  IntRange color_n_range{1, 3};
  IntRange color_m_range{1, 14};
  bool rotate = true;
  bool scale = true;
  bool color = true;
};

inline void validate(const AugmentParams& p) {
  if (!(p.theta_range.lo <= p.theta_range.hi)) throw std::invalid_argument("AugmentParams: empty theta range");
  if (!(p.scale_range.lo > 0.0) || !(p.scale_range.lo <= p.scale_range.hi)) {
    throw std::invalid_argument("AugmentParams: scale range must be a non-empty subset of (0, inf)");
  }
  if (!(p.skip_probability >= 0.0 && p.skip_probability <= 1.0)) {
    throw std::invalid_argument("AugmentParams: skip probability outside [0, 1]");
  }
  if (p.color_n_range.lo > p.color_n_range.hi || p.color_n_range.lo < 0) {
    throw std::invalid_argument("AugmentParams: bad color n range");
  }
  if (p.color_m_range.lo > p.color_m_range.hi || p.color_m_range.lo < 0) {
    throw std::invalid_argument("AugmentParams: bad color m range");
  }
}

// ---------------------------------------------------------------------------
// Pose side

/// In-plane rotation about the camera z-axis, theta given in degrees.
inline AxisAngle rotation_delta(double theta_deg) {
  return AxisAngle(0.0, 0.0, theta_deg * std::numbers::pi / 180.0);
}

/// R_aug = dR * R, t_aug = dR * t, then t_z / f_scale.
inline Pose augment_pose(const Pose& pose, double theta_deg, double f_scale) {
  if (!(f_scale > 0.0) || !std::isfinite(f_scale)) {
    throw std::invalid_argument("augment_pose: f_scale must be positive");
  }
  Pose out = pose;
  if (std::fmod(theta_deg, 360.0) != 0.0) {
    const Mat3 delta = axis_angle_to_matrix(rotation_delta(theta_deg));
    out.rotation = matrix_to_axis_angle(delta * axis_angle_to_matrix(pose.rotation));
    out.translation = delta * pose.translation;
  }
  out.translation.z() /= f_scale;
  return out;
}

// ---------------------------------------------------------------------------
// Image side

/// 2x2 linear part of the pixel warp: F * Rz(theta) * F^-1 scaled by f_scale,
/// F = diag(fx, fy). Reduces to a plain rotation when fx == fy.
inline Eigen::Matrix2d warp_linear_part(double theta_deg, double f_scale, const CameraIntrinsics& k) {
  const double th = theta_deg * std::numbers::pi / 180.0;
  const double c = std::cos(th);
  const double s = std::sin(th);
  Eigen::Matrix2d a;
  a << c, -s * k.fx / k.fy,
       s * k.fy / k.fx, c;
  return f_scale * a;
}

/// Where a pixel of the source image lands after the warp.
inline Vec2 warp_point(const Vec2& u, double theta_deg, double f_scale, const CameraIntrinsics& k) {
  const Vec2 p(k.px, k.py);
  return p + warp_linear_part(theta_deg, f_scale, k) * (u - p);
}

namespace detail {

inline double snap_to_integer(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-9 ? r : v;
}

}  // namespace detail

/// Rotates by theta about the principal point, then scales by f_scale about
/// it, as one inverse-mapped affine with a single bilinear resample. Pixel
/// (x, y) has its center at coordinates (x, y). Samples falling outside the
/// source image are black.
inline ImageBuffer warp_image(const ImageBuffer& image, double theta_deg, double f_scale,
                              const CameraIntrinsics& k) {
  validate(k);
  if (!(f_scale > 0.0)) throw std::invalid_argument("warp_image: f_scale must be positive");
  const Eigen::Matrix2d inv = warp_linear_part(theta_deg, f_scale, k).inverse();
  const Vec2 p(k.px, k.py);
  ImageBuffer out(image.width, image.height);
  const double max_x = image.width - 1;
  const double max_y = image.height - 1;

  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const Vec2 src = p + inv * (Vec2(x, y) - p);
      double sx = detail::snap_to_integer(src.x());
      double sy = detail::snap_to_integer(src.y());
      if (sx < -0.5 || sy < -0.5 || sx > max_x + 0.5 || sy > max_y + 0.5) continue;
      sx = std::clamp(sx, 0.0, max_x);
      sy = std::clamp(sy, 0.0, max_y);
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const int x1 = std::min(x0 + 1, image.width - 1);
      const int y1 = std::min(y0 + 1, image.height - 1);
      const double wx = sx - x0;
      const double wy = sy - y0;
      for (int c = 0; c < 3; ++c) {
        const double top = (1.0 - wx) * image.at(x0, y0, c) + wx * image.at(x1, y0, c);
        const double bottom = (1.0 - wx) * image.at(x0, y1, c) + wx * image.at(x1, y1, c);
        const double v = (1.0 - wy) * top + wy * bottom;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Color-space augmentation

enum class ColorOp { brightness, contrast, equalize, posterize, solarize, gaussian_noise };

inline constexpr std::array<ColorOp, 6> kColorOps = {ColorOp::brightness, ColorOp::contrast,
                                                     ColorOp::equalize,   ColorOp::posterize,
                                                     ColorOp::solarize,   ColorOp::gaussian_noise};

/// Strength at which every op reaches its maximum; strength 0 is the identity.
inline constexpr double kMaxColorStrength = 30.0;

inline std::string_view to_string(ColorOp op) {
  switch (op) {
    case ColorOp::brightness: return "brightness";
    case ColorOp::contrast: return "contrast";
    case ColorOp::equalize: return "equalize";
    case ColorOp::posterize: return "posterize";
    case ColorOp::solarize: return "solarize";
    case ColorOp::gaussian_noise: return "gaussian_noise";
  }
  return "unknown";
}

/// Standard deviation of the additive noise at strength m: (m / 100) * 255.
inline double noise_sigma(int m) { return m / 100.0 * 255.0; }

namespace detail {

inline std::uint8_t clamp_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0)); }

// Per-channel histogram equalization lookup (same recipe as PIL's ImageOps).
inline std::array<std::uint8_t, 256> equalize_lut(const ImageBuffer& img, int channel) {
  std::array<long, 256> hist{};
  for (std::size_t i = static_cast<std::size_t>(channel); i < img.data.size(); i += 3) ++hist[img.data[i]];
  std::array<std::uint8_t, 256> lut{};
  for (int i = 0; i < 256; ++i) lut[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
  long total = 0;
  long last = 0;
  for (long h : hist) {
    total += h;
    if (h != 0) last = h;
  }
  const long step = (total - last) / 255;
  if (step == 0) return lut;
  long n = step / 2;
  for (std::size_t i = 0; i < 256; ++i) {
    lut[i] = static_cast<std::uint8_t>(std::min(255L, n / step));
    n += hist[i];
  }
  return lut;
}

}  // namespace detail

/// Applies one color op at strength m. Strength schedules are linear in m
/// from the identity (m = 0) to the maximum at m = 30:
///   brightness/contrast factor 1 +- 0.9 m/30 (random sign),
///   equalize blended with weight m/30, posterize to 8 - round(4 m/30) bits,
///   solarize above 256 - 256 m/30, gaussian noise sigma (m/100) * 255.
template <typename Rng>
ImageBuffer apply_color_op(const ImageBuffer& image, ColorOp op, int m, Rng& rng) {
  ImageBuffer out = image;
  const double level = std::clamp(m / kMaxColorStrength, 0.0, 1.0);
  switch (op) {
    case ColorOp::brightness:
    case ColorOp::contrast: {
      std::bernoulli_distribution coin(0.5);
      const double factor = 1.0 + (coin(rng) ? 0.9 : -0.9) * level;
      double pivot = 0.0;
      if (op == ColorOp::contrast && !image.data.empty()) {
        // mean luma, as PIL's contrast enhancer
        double sum = 0.0;
        for (std::size_t i = 0; i < image.data.size(); i += 3) {
          sum += 0.299 * image.data[i] + 0.587 * image.data[i + 1] + 0.114 * image.data[i + 2];
        }
        pivot = std::round(sum / static_cast<double>(image.data.size() / 3));
      }
      for (auto& v : out.data) v = detail::clamp_u8(pivot + factor * (v - pivot));
      break;
    }
    case ColorOp::equalize: {
      const std::array<std::array<std::uint8_t, 256>, 3> luts = {
          detail::equalize_lut(image, 0), detail::equalize_lut(image, 1), detail::equalize_lut(image, 2)};
      for (std::size_t i = 0; i < out.data.size(); ++i) {
        const double eq = luts[i % 3][image.data[i]];
        out.data[i] = detail::clamp_u8((1.0 - level) * image.data[i] + level * eq);
      }
      break;
    }
    case ColorOp::posterize: {
      const int bits = 8 - static_cast<int>(std::lround(4.0 * level));
      const auto mask = static_cast<std::uint8_t>(0xFF << (8 - bits));
      for (auto& v : out.data) v = static_cast<std::uint8_t>(v & mask);
      break;
    }
    case ColorOp::solarize: {
      const double threshold = 256.0 - 256.0 * level;
      for (auto& v : out.data) {
        if (v >= threshold) v = static_cast<std::uint8_t>(255 - v);
      }
      break;
    }
    case ColorOp::gaussian_noise: {
      const double sigma = noise_sigma(m);
      if (sigma <= 0.0) break;
      std::normal_distribution<double> noise(0.0, sigma);
      for (auto& v : out.data) v = detail::clamp_u8(v + noise(rng));
      break;
    }
  }
  return out;
}

/// Samples n from n_range and m from m_range, then applies n ops drawn with
/// replacement from the color-op menu. Never changes image geometry.
template <typename Rng>
ImageBuffer color_augment(const ImageBuffer& image, Rng& rng, IntRange n_range = {1, 3},
                          IntRange m_range = {1, 14}) {
  std::uniform_int_distribution<int> n_dist(n_range.lo, n_range.hi);
  std::uniform_int_distribution<int> m_dist(m_range.lo, m_range.hi);
  std::uniform_int_distribution<std::size_t> op_dist(0, kColorOps.size() - 1);
  const int n = n_dist(rng);
  const int m = m_dist(rng);
  ImageBuffer out = image;
  for (int i = 0; i < n; ++i) out = apply_color_op(out, kColorOps[op_dist(rng)], m, rng);
  return out;
}

// ---------------------------------------------------------------------------
// Whole-frame augmentation

struct AugmentRecord {
  AnnotatedFrame frame;
  bool skipped = false;
  double theta_deg = 0.0;
  double f_scale = 1.0;
};

/// Augments image and poses with one shared (theta, f_scale) sample.
template <typename Rng>
AugmentRecord augment_frame_with_record(const AnnotatedFrame& frame, const AugmentParams& params, Rng& rng) {
  validate(params);
  AugmentRecord rec;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) < params.skip_probability) {
    rec.frame = frame;
    rec.skipped = true;
    return rec;
  }
  if (params.rotate) {
    rec.theta_deg = std::uniform_real_distribution<double>(params.theta_range.lo, params.theta_range.hi)(rng);
  }
  if (params.scale) {
    rec.f_scale = std::uniform_real_distribution<double>(params.scale_range.lo, params.scale_range.hi)(rng);
  }
  rec.frame.intrinsics = frame.intrinsics;
  rec.frame.image = warp_image(frame.image, rec.theta_deg, rec.f_scale, frame.intrinsics);
  rec.frame.annotations.reserve(frame.annotations.size());
  for (const auto& ann : frame.annotations) {
    rec.frame.annotations.push_back({ann.model_id, augment_pose(ann.pose, rec.theta_deg, rec.f_scale)});
  }
  if (params.color) {
    rec.frame.image = color_augment(rec.frame.image, rng, params.color_n_range, params.color_m_range);
  }
  return rec;
}

template <typename Rng>
AnnotatedFrame augment_frame(const AnnotatedFrame& frame, const AugmentParams& params, Rng& rng) {
  return augment_frame_with_record(frame, params, rng).frame;
}

}  // namespace posekit
