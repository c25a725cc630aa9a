#pragma once

// Iterative rotation refinement: a small stack of conv blocks that reads the
// current rotation concatenated with the rotation subnet's features and
// regresses an additive correction, applied n_iter times with shared weights.

#include <posekit/head/feature_map.hpp>
#include <posekit/head/scaling.hpp>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace posekit::head {

inline constexpr int kRotationParams = 3;

struct RefinementWeights {
  std::vector<ConvBlockWeights> blocks;  // d_iter blocks
  SeparableConvWeights output;           // linear output layer -> delta r
};

/// Optional instrumentation for forward passes.
struct HeadCounters {
  int module_applications = 0;
  int conv_blocks = 0;
  int output_layers = 0;
};

/// Zero-initialized weights for `feature_channels` input features and
/// `anchors` rotation vectors per cell. The first block sees the features
/// plus the 3 * anchors rotation channels; all blocks output w_bifpn channels.
inline RefinementWeights make_refinement_weights(int feature_channels, int anchors, const ScalingConfig& cfg) {
  if (feature_channels <= 0 || anchors <= 0) throw std::invalid_argument("make_refinement_weights: bad sizes");
  RefinementWeights w;
  const int rot_channels = kRotationParams * anchors;
  int in = feature_channels + rot_channels;
  for (int b = 0; b < cfg.d_iter; ++b) {
    w.blocks.emplace_back(in, cfg.w_bifpn);
    in = cfg.w_bifpn;
  }
  w.output = SeparableConvWeights(in, rot_channels);
  return w;
}

namespace detail {

// float-representable values so the float32 weights file round-trips exactly
inline void fill_uniform(std::vector<double>& v, std::mt19937_64& rng, double limit) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& x : v) x = static_cast<double>(static_cast<float>(dist(rng)));
}

inline void fill_uniform(SeparableConvWeights& w, std::mt19937_64& rng, double limit) {
  fill_uniform(w.depthwise, rng, limit);
  fill_uniform(w.depthwise_bias, rng, limit);
  fill_uniform(w.pointwise, rng, limit);
  fill_uniform(w.pointwise_bias, rng, limit);
}

}  // namespace detail

/// Seeded uniform [-limit, limit] initialization of every conv parameter;
/// group-norm affine stays at (1, 0).
inline void init_uniform(RefinementWeights& w, std::uint64_t seed, double limit = 0.05) {
  std::mt19937_64 rng(seed);
  for (auto& block : w.blocks) detail::fill_uniform(block.conv, rng, limit);
  detail::fill_uniform(w.output, rng, limit);
}

/// One application of the refinement module; returns delta r.
inline FeatureMap apply_refinement_module(const FeatureMap& features, const FeatureMap& rotation,
                                          const RefinementWeights& w, int n_groups, HeadCounters* counters = nullptr) {
  FeatureMap x = concat_channels(rotation, features);
  for (const auto& block : w.blocks) {
    x = conv_block(x, block, n_groups);
    if (counters) ++counters->conv_blocks;
  }
  FeatureMap delta = separable_conv(x, w.output);
  if (counters) {
    ++counters->output_layers;
    ++counters->module_applications;
  }
  return delta;
}

/// r <- r_init, then n_iter times r <- r + delta_r(concat(r, features)).
inline FeatureMap refine_rotation(const FeatureMap& features, const FeatureMap& r_init, const RefinementWeights& w,
                                  const ScalingConfig& cfg, HeadCounters* counters = nullptr) {
  if (r_init.channels % kRotationParams != 0) {
    throw std::invalid_argument("refine_rotation: rotation map channels must be a multiple of 3");
  }
  if (r_init.height != features.height || r_init.width != features.width) {
    throw std::invalid_argument("refine_rotation: rotation and feature maps differ in spatial size");
  }
  if (static_cast<int>(w.blocks.size()) != cfg.d_iter) {
    throw std::invalid_argument("refine_rotation: expected " + std::to_string(cfg.d_iter) + " conv blocks, got " +
                                std::to_string(w.blocks.size()));
  }
  if (w.blocks.empty() || w.blocks.front().conv.in_channels != features.channels + r_init.channels) {
    throw std::invalid_argument("refine_rotation: first block expects " +
                                std::to_string(w.blocks.empty() ? 0 : w.blocks.front().conv.in_channels) +
                                " channels, have " + std::to_string(features.channels + r_init.channels));
  }
  if (w.output.out_channels != r_init.channels) {
    throw std::invalid_argument("refine_rotation: output layer does not produce the rotation channel count");
  }
  FeatureMap r = r_init;
  for (int it = 0; it < cfg.n_iter; ++it) {
    const FeatureMap delta = apply_refinement_module(features, r, w, cfg.n_groups, counters);
    for (std::size_t k = 0; k < r.values.size(); ++k) r.values[k] += delta.values[k];
  }
  return r;
}

}  // namespace posekit::head
