#include <selftest/head_oracles.hpp>

#include <posekit/headspec.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

using namespace posekit;
using namespace posekit::head;

using oracle::nms_reference;
using oracle::random_detections;
using oracle::random_map;

TEST(Scaling, TableOverAllPhi) {
  const int expected[8][2] = {{2, 1}, {2, 1}, {2, 1}, {3, 2}, {3, 2}, {3, 2}, {4, 3}, {4, 3}};
  for (int phi = 0; phi <= 7; ++phi) {
    const auto cfg = scaling_config(phi, 64);
    EXPECT_EQ(cfg.d_iter, expected[phi][0]) << phi;
    EXPECT_EQ(cfg.n_iter, expected[phi][1]) << phi;
  }
  EXPECT_EQ(scaling_config(0, 64).n_groups, 4);
  EXPECT_EQ(scaling_config(0, 88).n_groups, 5);
}

TEST(Scaling, RejectsOutOfRange) {
  EXPECT_THROW(scaling_config(-1, 64), std::invalid_argument);
  EXPECT_THROW(scaling_config(8, 64), std::invalid_argument);
  EXPECT_THROW(scaling_config(0, 8), std::invalid_argument);
}

TEST(Silu, Values) {
  EXPECT_EQ(silu(0.0), 0.0);
  EXPECT_NEAR(silu(1.0), 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(silu(-30.0), 0.0, 1e-11);
}

TEST(SeparableConv, DeltaKernelsReproduceInput) {
  const auto in = random_map(5, 7, 4, 1);
  SeparableConvWeights w(4, 4);
  for (int c = 0; c < 4; ++c) {
    w.dw(c, 1, 1) = 1.0;
    w.pw(c, c) = 1.0;
  }
  const auto out = separable_conv(in, w);
  for (std::size_t i = 0; i < in.values.size(); ++i) EXPECT_DOUBLE_EQ(out.values[i], in.values[i]);
}

TEST(SeparableConv, ShiftKernelUsesZeroPadding) {
  const auto in = random_map(4, 4, 1, 2);
  SeparableConvWeights w(1, 1);
  w.dw(0, 1, 2) = 1.0;  // reads the right-hand neighbour
  w.pw(0, 0) = 1.0;
  const auto out = separable_conv(in, w);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 3; ++j) EXPECT_EQ(out.at(i, j, 0), in.at(i, j + 1, 0));
    EXPECT_EQ(out.at(i, 3, 0), 0.0);
  }
}

TEST(SeparableConv, MatchesDirectSum) {
  const auto in = random_map(6, 5, 3, 3);
  SeparableConvWeights w(3, 2);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 1);
  for (auto* v : {&w.depthwise, &w.depthwise_bias, &w.pointwise, &w.pointwise_bias})
    for (auto& x : *v) x = n(rng);
  const auto out = separable_conv(in, w);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 5; ++j) {
      for (int o = 0; o < 2; ++o) {
        double acc = w.pointwise_bias[o];
        for (int c = 0; c < 3; ++c) {
          double dw = w.depthwise_bias[c];
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int y = i + ky - 1, x = j + kx - 1;
              if (y >= 0 && y < 6 && x >= 0 && x < 5) dw += w.dw(c, ky, kx) * in.at(y, x, c);
            }
          acc += w.pw(o, c) * dw;
        }
        EXPECT_NEAR(out.at(i, j, o), acc, 1e-12);
      }
    }
  }
}

TEST(SeparableConv, RejectsChannelMismatch) {
  EXPECT_THROW(separable_conv(random_map(2, 2, 3, 5), SeparableConvWeights(4, 4)), std::invalid_argument);
}

TEST(GroupNorm, PerGroupStatistics) {
  FeatureMap in = random_map(6, 6, 32, 6);
  for (std::size_t k = 0; k < in.values.size(); ++k) in.values[k] = 5.0 + 3.0 * in.values[k] * (1 + k % 7);
  const std::vector<double> ones(32, 1.0), zeros(32, 0.0);
  const auto out = group_norm(in, 2, ones, zeros);
  for (int g = 0; g < 2; ++g) {
    double mean = 0, sq = 0;
    const double count = 36.0 * 16;
    for (std::size_t cell = 0; cell < out.cells(); ++cell)
      for (int c = g * 16; c < (g + 1) * 16; ++c) mean += out.values[cell * 32 + c];
    mean /= count;
    for (std::size_t cell = 0; cell < out.cells(); ++cell)
      for (int c = g * 16; c < (g + 1) * 16; ++c) sq += std::pow(out.values[cell * 32 + c] - mean, 2);
    EXPECT_LT(std::abs(mean), 1e-6);
    EXPECT_NEAR(sq / count, 1.0, 1e-4);
  }
}

TEST(GroupNorm, AppliesAffinePerChannel) {
  const auto in = random_map(3, 3, 4, 7);
  const std::vector<double> ones(4, 1.0), zeros(4, 0.0);
  const auto base = group_norm(in, 2, ones, zeros);
  std::vector<double> gamma{2, 1, 1, 1}, beta{0, 0, 0, 3};
  const auto out = group_norm(in, 2, gamma, beta);
  for (std::size_t cell = 0; cell < 9; ++cell) {
    EXPECT_NEAR(out.values[cell * 4 + 0], 2 * base.values[cell * 4 + 0], 1e-12);
    EXPECT_NEAR(out.values[cell * 4 + 3], base.values[cell * 4 + 3] + 3, 1e-12);
  }
}

TEST(GroupNorm, RejectsIndivisibleChannels) {
  const std::vector<double> ones(6, 1.0), zeros(6, 0.0);
  EXPECT_THROW(group_norm(random_map(2, 2, 6, 8), 4, ones, zeros), std::invalid_argument);
}

TEST(ConvBlock, IsSiluOfNormalizedConv) {
  const auto in = random_map(4, 4, 16, 9);
  ConvBlockWeights w(16, 16);
  for (int c = 0; c < 16; ++c) {
    w.conv.dw(c, 1, 1) = 1.0;
    w.conv.pw(c, c) = 1.0;
  }
  const auto out = conv_block(in, w, 1);
  const auto ref = silu(group_norm(in, 1, w.gamma, w.beta));
  for (std::size_t i = 0; i < out.values.size(); ++i) EXPECT_NEAR(out.values[i], ref.values[i], 1e-14);
}

class RefinementTest : public ::testing::Test {
 protected:
  static constexpr int kFeat = 16;
  static constexpr int kAnchors = 2;
  FeatureMap features = random_map(4, 5, kFeat, 10);
  FeatureMap r_init = random_map(4, 5, 3 * kAnchors, 11);
};

TEST_F(RefinementTest, ZeroWeightsKeepInitialRotation) {
  for (int phi : {0, 3, 6}) {
    const auto cfg = scaling_config(phi, 32);
    const auto w = make_refinement_weights(kFeat, kAnchors, cfg);
    const auto out = refine_rotation(features, r_init, w, cfg);
    EXPECT_EQ(out.values, r_init.values) << phi;
  }
}

TEST_F(RefinementTest, InstrumentedCountsAtPhiThree) {
  const auto cfg = scaling_config(3, 32);
  auto w = make_refinement_weights(kFeat, kAnchors, cfg);
  init_uniform(w, 12);
  HeadCounters counters;
  refine_rotation(features, r_init, w, cfg, &counters);
  EXPECT_EQ(counters.module_applications, 2);
  EXPECT_EQ(counters.conv_blocks, 2 * 3);
  EXPECT_EQ(counters.output_layers, 2);
}

TEST_F(RefinementTest, SingleIterationEqualsOneManualApplication) {
  const auto cfg = scaling_config(0, 32);
  auto w = make_refinement_weights(kFeat, kAnchors, cfg);
  init_uniform(w, 13);
  const auto out = refine_rotation(features, r_init, w, cfg);
  const auto delta = apply_refinement_module(features, r_init, w, cfg.n_groups);
  for (std::size_t i = 0; i < out.values.size(); ++i) EXPECT_EQ(out.values[i], r_init.values[i] + delta.values[i]);
}

TEST_F(RefinementTest, TwoIterationsFeedBackTheRefinedRotation) {
  const auto cfg = scaling_config(3, 32);
  auto w = make_refinement_weights(kFeat, kAnchors, cfg);
  init_uniform(w, 14);
  FeatureMap r = r_init;
  for (int it = 0; it < 2; ++it) {
    const auto d = apply_refinement_module(features, r, w, cfg.n_groups);
    for (std::size_t i = 0; i < r.values.size(); ++i) r.values[i] += d.values[i];
  }
  EXPECT_EQ(refine_rotation(features, r_init, w, cfg).values, r.values);
}

TEST_F(RefinementTest, RejectsMismatchedShapes) {
  const auto cfg = scaling_config(0, 32);
  const auto w = make_refinement_weights(kFeat, kAnchors, cfg);
  EXPECT_THROW(refine_rotation(random_map(4, 5, kFeat + 1, 1), r_init, w, cfg), std::invalid_argument);
  EXPECT_THROW(refine_rotation(features, random_map(3, 5, 6, 1), w, cfg), std::invalid_argument);
  EXPECT_THROW(refine_rotation(features, random_map(4, 5, 4, 1), w, cfg), std::invalid_argument);
  EXPECT_THROW(refine_rotation(features, r_init, w, scaling_config(3, 32)), std::invalid_argument);
}

TEST(WeightsIo, RoundTripIsExact) {
  const auto cfg = scaling_config(3, 32);
  auto w = make_refinement_weights(16, 2, cfg);
  init_uniform(w, 15);
  std::stringstream buf;
  write_tensors(buf, to_tensors(w));
  const auto back = from_tensors(read_tensors(buf));
  ASSERT_EQ(back.blocks.size(), w.blocks.size());
  for (std::size_t b = 0; b < w.blocks.size(); ++b) {
    EXPECT_EQ(back.blocks[b].conv.depthwise, w.blocks[b].conv.depthwise);
    EXPECT_EQ(back.blocks[b].conv.pointwise, w.blocks[b].conv.pointwise);
    EXPECT_EQ(back.blocks[b].gamma, w.blocks[b].gamma);
  }
  EXPECT_EQ(back.output.pointwise_bias, w.output.pointwise_bias);

  const auto path = (std::filesystem::temp_directory_path() / "posekit_weights_test.bin").string();
  save_weights(path, w);
  EXPECT_EQ(load_weights(path).output.depthwise, w.output.depthwise);
  std::filesystem::remove(path);
}

TEST(WeightsIo, RejectsCorruptInput) {
  std::stringstream bad_magic("nope\n");
  EXPECT_THROW(read_tensors(bad_magic), std::runtime_error);
  std::stringstream truncated("posekit-weights 1\ntensors 1\nx 1 4\ndata\n\x01\x02");
  EXPECT_THROW(read_tensors(truncated), std::runtime_error);
  EXPECT_THROW(from_tensors({}), std::runtime_error);
}

TEST(Anchors, GridSizesRoundUp) {
  const auto grid = make_anchor_grid(100, 60);
  ASSERT_EQ(grid.levels.size(), 3u);
  EXPECT_EQ(grid.levels[0].width, 13);
  EXPECT_EQ(grid.levels[0].height, 8);
  EXPECT_EQ(grid.levels[2].width, 4);
  EXPECT_EQ(grid.levels[2].height, 2);
}

TEST(Anchors, EncodeExamples) {
  const auto grid = make_anchor_grid(64, 64);
  const CellIndex cell{0, 2, 3};
  const Vec2 center = cell_center(grid, cell);
  EXPECT_EQ(center, Vec2(3.5 * 8, 2.5 * 8));
  EXPECT_EQ(encode_center_offset(center, cell, grid), Vec2(0, 0));
  EXPECT_EQ(encode_center_offset(center + Vec2(8, 0), cell, grid), Vec2(1, 0));
  EXPECT_THROW(encode_center_offset(center, CellIndex{0, 8, 0}, grid), std::out_of_range);
}

TEST(Anchors, DecodeZeroAndConstantOffsets) {
  const auto grid = make_anchor_grid(32, 24, {8, 16});
  std::vector<FeatureMap> zero, ones;
  for (const auto& lvl : grid.levels) {
    zero.emplace_back(lvl.height, lvl.width, 2, lvl.stride);
    FeatureMap one(lvl.height, lvl.width, 2, lvl.stride);
    std::fill(one.values.begin(), one.values.end(), 1.0);
    ones.push_back(one);
  }
  const auto c0 = decode_center(zero, grid);
  const auto c1 = decode_center(ones, grid);
  for (std::size_t l = 0; l < grid.levels.size(); ++l) {
    const auto& lvl = grid.levels[l];
    for (int i = 0; i < lvl.height; ++i) {
      for (int j = 0; j < lvl.width; ++j) {
        const auto k = static_cast<std::size_t>(i * lvl.width + j);
        EXPECT_EQ(c0[l][k], Vec2((j + 0.5) * lvl.stride, (i + 0.5) * lvl.stride));
        EXPECT_EQ(c1[l][k], c0[l][k] + Vec2(lvl.stride, lvl.stride));
      }
    }
  }
}

TEST(Anchors, EncodeDecodeRoundTripIsExact) {
  const auto grid = make_anchor_grid(128, 96, {8, 16, 32}, 2);
  std::mt19937_64 rng(16);
  // Centers on a 1/64-pixel lattice: every intermediate value is exact.
  std::uniform_int_distribution<int> ux(0, 128 * 64), uy(0, 96 * 64);
  std::vector<FeatureMap> offsets;
  std::vector<std::vector<Vec2>> truth(grid.levels.size());
  for (std::size_t l = 0; l < grid.levels.size(); ++l) {
    const auto& lvl = grid.levels[l];
    FeatureMap off(lvl.height, lvl.width, 4, lvl.stride);
    for (int i = 0; i < lvl.height; ++i) {
      for (int j = 0; j < lvl.width; ++j) {
        for (int a = 0; a < 2; ++a) {
          const Vec2 c(ux(rng) / 64.0, uy(rng) / 64.0);
          const Vec2 e = encode_center_offset(c, CellIndex{l, i, j}, grid);
          off.at(i, j, 2 * a) = e.x();
          off.at(i, j, 2 * a + 1) = e.y();
          truth[l].push_back(c);
        }
      }
    }
    offsets.push_back(off);
  }
  const auto decoded = decode_center(offsets, grid);
  for (std::size_t l = 0; l < truth.size(); ++l) EXPECT_EQ(decoded[l], truth[l]);
}

TEST(Anchors, DecodeTranslationsUsesPinholeRecovery) {
  const auto grid = make_anchor_grid(16, 16, {8});
  FeatureMap off(2, 2, 2, 8), depth(2, 2, 1, 8);
  std::fill(depth.values.begin(), depth.values.end(), 1000.0);
  const IntrinsicsVector a{600, 600, 4, 4, 1, 1};
  const auto t = decode_translations({off}, {depth}, grid, a);
  EXPECT_EQ(t[0][0], recover_translation(Vec2(4, 4), 1000, a));
  EXPECT_EQ(t[0][0], Vec3(0, 0, 1000));
  EXPECT_EQ(t[0][3], recover_translation(Vec2(12, 12), 1000, a));
}

TEST(Nms, IdenticalBoxesKeepHigherScore) {
  std::vector<Detection> d(2);
  d[0].score = 0.4;
  d[1].score = 0.9;
  d[0].bbox = d[1].bbox = {0, 0, 10, 10};
  EXPECT_EQ(nms_indices(d, 0.5), std::vector<std::size_t>{1});
}

TEST(Nms, DisjointBoxesAllSurvive) {
  std::vector<Detection> d(3);
  for (int i = 0; i < 3; ++i) {
    d[i].score = 0.1 * (i + 1);
    d[i].bbox = {20.0 * i, 0, 20.0 * i + 10, 10};
  }
  EXPECT_EQ(nms(d, 0.5).size(), 3u);
}

TEST(Nms, ClassesAreIndependent) {
  std::vector<Detection> d(2);
  d[0].bbox = d[1].bbox = {0, 0, 10, 10};
  d[1].class_id = 1;
  EXPECT_EQ(nms(d, 0.5).size(), 2u);
}

TEST(Nms, MatchesBruteForceReference) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> count(0, 20);
  for (int s = 0; s < 500; ++s) {
    const auto dets = random_detections(rng, count(rng));
    for (double thr : {0.3, 0.5, 0.7}) ASSERT_EQ(nms_indices(dets, thr), nms_reference(dets, thr));
  }
}

TEST(Nms, RejectsDegenerateBoxes) {
  std::vector<Detection> d(1);
  d[0].bbox = {5, 5, 5, 10};
  EXPECT_THROW(nms(d, 0.5), std::invalid_argument);
}
