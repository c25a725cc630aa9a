#pragma once

// Dense feature maps and the layers of the conv block: depthwise separable
// 3x3 convolution, group normalization and SiLU.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace posekit::head {

/// Height x width x channels tensor, channels innermost.
struct FeatureMap {
  int height = 0;
  int width = 0;
  int channels = 0;
  double stride = 1.0;
  std::vector<double> values;

  FeatureMap() = default;
  FeatureMap(int h, int w, int c, double stride_px = 1.0)
      : height(h), width(w), channels(c), stride(stride_px),
        values(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * static_cast<std::size_t>(c), 0.0) {
    if (h <= 0 || w <= 0 || c <= 0) throw std::invalid_argument("FeatureMap: dimensions must be positive");
    if (!(stride_px > 0.0)) throw std::invalid_argument("FeatureMap: stride must be positive");
  }

  std::size_t index(int i, int j, int c) const {
    return (static_cast<std::size_t>(i) * static_cast<std::size_t>(width) + static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(channels) +
           static_cast<std::size_t>(c);
  }
  double& at(int i, int j, int c) { return values[index(i, j, c)]; }
  double at(int i, int j, int c) const { return values[index(i, j, c)]; }
  std::size_t cells() const { return static_cast<std::size_t>(height) * static_cast<std::size_t>(width); }
};

/// Depthwise 3x3 kernels [c][ky][kx] with bias, then a 1x1 pointwise
/// projection [out][in] with bias.
struct SeparableConvWeights {
  int in_channels = 0;
  int out_channels = 0;
  std::vector<double> depthwise;
  std::vector<double> depthwise_bias;
  std::vector<double> pointwise;
  std::vector<double> pointwise_bias;

  SeparableConvWeights() = default;
  SeparableConvWeights(int in, int out)
      : in_channels(in), out_channels(out),
        depthwise(static_cast<std::size_t>(in) * 9, 0.0), depthwise_bias(static_cast<std::size_t>(in), 0.0),
        pointwise(static_cast<std::size_t>(in) * static_cast<std::size_t>(out), 0.0),
        pointwise_bias(static_cast<std::size_t>(out), 0.0) {}

  double& dw(int c, int ky, int kx) { return depthwise[static_cast<std::size_t>(c * 9 + ky * 3 + kx)]; }
  double dw(int c, int ky, int kx) const { return depthwise[static_cast<std::size_t>(c * 9 + ky * 3 + kx)]; }
  double& pw(int o, int i) { return pointwise[static_cast<std::size_t>(o * in_channels + i)]; }
  double pw(int o, int i) const { return pointwise[static_cast<std::size_t>(o * in_channels + i)]; }
};

struct ConvBlockWeights {
  SeparableConvWeights conv;
  std::vector<double> gamma;
  std::vector<double> beta;

  ConvBlockWeights() = default;
  ConvBlockWeights(int in, int out)
      : conv(in, out), gamma(static_cast<std::size_t>(out), 1.0), beta(static_cast<std::size_t>(out), 0.0) {}
};

inline void check_shapes(const SeparableConvWeights& w) {
  const auto in = static_cast<std::size_t>(w.in_channels);
  const auto out = static_cast<std::size_t>(w.out_channels);
  if (w.in_channels <= 0 || w.out_channels <= 0 || w.depthwise.size() != in * 9 || w.depthwise_bias.size() != in ||
      w.pointwise.size() != in * out || w.pointwise_bias.size() != out) {
    throw std::invalid_argument("separable conv weights have inconsistent shapes");
  }
}

/// Same-padded (zero) depthwise 3x3 followed by pointwise 1x1.
inline FeatureMap separable_conv(const FeatureMap& input, const SeparableConvWeights& w) {
  check_shapes(w);
  if (input.channels != w.in_channels) {
    throw std::invalid_argument("separable_conv: input has " + std::to_string(input.channels) +
                                " channels, weights expect " + std::to_string(w.in_channels));
  }
  FeatureMap depth(input.height, input.width, input.channels, input.stride);
  for (int i = 0; i < input.height; ++i) {
    for (int j = 0; j < input.width; ++j) {
      for (int c = 0; c < input.channels; ++c) {
        double acc = w.depthwise_bias[static_cast<std::size_t>(c)];
        for (int ky = 0; ky < 3; ++ky) {
          const int y = i + ky - 1;
          if (y < 0 || y >= input.height) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int x = j + kx - 1;
            if (x < 0 || x >= input.width) continue;
            acc += w.dw(c, ky, kx) * input.at(y, x, c);
          }
        }
        depth.at(i, j, c) = acc;
      }
    }
  }
  FeatureMap out(input.height, input.width, w.out_channels, input.stride);
  for (int i = 0; i < input.height; ++i) {
    for (int j = 0; j < input.width; ++j) {
      for (int o = 0; o < w.out_channels; ++o) {
        double acc = w.pointwise_bias[static_cast<std::size_t>(o)];
        for (int c = 0; c < w.in_channels; ++c) acc += w.pw(o, c) * depth.at(i, j, c);
        out.at(i, j, o) = acc;
      }
    }
  }
  return out;
}

inline constexpr double kGroupNormEps = 1e-5;

/// Normalizes each group of channels over (height, width, channels-in-group)
/// to zero mean and unit variance, then applies the per-channel affine.
inline FeatureMap group_norm(const FeatureMap& input, int n_groups, const std::vector<double>& gamma,
                             const std::vector<double>& beta, double eps = kGroupNormEps) {
  if (n_groups <= 0 || input.channels % n_groups != 0) {
    throw std::invalid_argument("group_norm: " + std::to_string(input.channels) +
                                " channels are not divisible into " + std::to_string(n_groups) + " groups");
  }
  const auto channels = static_cast<std::size_t>(input.channels);
  if (gamma.size() != channels || beta.size() != channels) {
    throw std::invalid_argument("group_norm: affine parameters do not match channel count");
  }
  const int per_group = input.channels / n_groups;
  FeatureMap out = input;
  const double count = static_cast<double>(input.cells()) * per_group;
  for (int g = 0; g < n_groups; ++g) {
    const int c0 = g * per_group;
    double mean = 0.0;
    for (std::size_t cell = 0; cell < input.cells(); ++cell) {
      for (int c = c0; c < c0 + per_group; ++c) mean += input.values[cell * channels + static_cast<std::size_t>(c)];
    }
    mean /= count;
    double var = 0.0;
    for (std::size_t cell = 0; cell < input.cells(); ++cell) {
      for (int c = c0; c < c0 + per_group; ++c) {
        const double d = input.values[cell * channels + static_cast<std::size_t>(c)] - mean;
        var += d * d;
      }
    }
    var /= count;
    const double inv_std = 1.0 / std::sqrt(var + eps);
    for (std::size_t cell = 0; cell < input.cells(); ++cell) {
      for (int c = c0; c < c0 + per_group; ++c) {
        double& v = out.values[cell * channels + static_cast<std::size_t>(c)];
        v = (v - mean) * inv_std * gamma[static_cast<std::size_t>(c)] + beta[static_cast<std::size_t>(c)];
      }
    }
  }
  return out;
}

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }

inline FeatureMap silu(FeatureMap map) {
  for (auto& v : map.values) v = silu(v);
  return map;
}

/// Depthwise separable conv -> group norm -> SiLU.
inline FeatureMap conv_block(const FeatureMap& input, const ConvBlockWeights& w, int n_groups) {
  if (n_groups <= 0 || w.conv.out_channels % n_groups != 0) {
    throw std::invalid_argument("conv_block: output channels not divisible by group count");
  }
  return silu(group_norm(separable_conv(input, w.conv), n_groups, w.gamma, w.beta));
}

/// Channel-wise concatenation [a, b].
inline FeatureMap concat_channels(const FeatureMap& a, const FeatureMap& b) {
  if (a.height != b.height || a.width != b.width) {
    throw std::invalid_argument("concat_channels: spatial sizes differ");
  }
  FeatureMap out(a.height, a.width, a.channels + b.channels, a.stride);
  for (int i = 0; i < a.height; ++i) {
    for (int j = 0; j < a.width; ++j) {
      for (int c = 0; c < a.channels; ++c) out.at(i, j, c) = a.at(i, j, c);
      for (int c = 0; c < b.channels; ++c) out.at(i, j, a.channels + c) = b.at(i, j, c);
    }
  }
  return out;
}

}  // namespace posekit::head
