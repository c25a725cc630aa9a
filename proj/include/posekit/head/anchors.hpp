#pragma once

// Anchor-grid geometry for the translation head: cell centers, stride
// normalized center-point offsets, and recovery of the full translation from
// decoded centers and depths.

#include <posekit/geometry.hpp>
#include <posekit/head/feature_map.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace posekit::head {

struct AnchorLevel {
  int height = 0;
  int width = 0;
  double stride = 8.0;

  /// Coordinate maps: X holds the column index, Y the row index of every cell.
  std::vector<double> x_map() const {
    std::vector<double> x(static_cast<std::size_t>(height * width));
    for (int i = 0; i < height; ++i)
      for (int j = 0; j < width; ++j) x[static_cast<std::size_t>(i * width + j)] = j;
    return x;
  }
  std::vector<double> y_map() const {
    std::vector<double> y(static_cast<std::size_t>(height * width));
    for (int i = 0; i < height; ++i)
      for (int j = 0; j < width; ++j) y[static_cast<std::size_t>(i * width + j)] = i;
    return y;
  }
};

struct AnchorGrid {
  std::vector<AnchorLevel> levels;
  int anchors_per_cell = 1;
};

struct CellIndex {
  std::size_t level = 0;
  int row = 0;
  int col = 0;
};

/// One level per stride, covering an input of the given pixel size.
inline AnchorGrid make_anchor_grid(int input_width, int input_height, const std::vector<double>& strides = {8, 16, 32},
                                   int anchors_per_cell = 1) {
  if (input_width <= 0 || input_height <= 0 || anchors_per_cell <= 0) {
    throw std::invalid_argument("make_anchor_grid: sizes must be positive");
  }
  AnchorGrid grid;
  grid.anchors_per_cell = anchors_per_cell;
  for (double s : strides) {
    if (!(s > 0.0)) throw std::invalid_argument("make_anchor_grid: stride must be positive");
    grid.levels.push_back({static_cast<int>(std::ceil(input_height / s)), static_cast<int>(std::ceil(input_width / s)), s});
  }
  return grid;
}

inline const AnchorLevel& level_of(const AnchorGrid& grid, const CellIndex& cell) {
  if (cell.level >= grid.levels.size()) throw std::out_of_range("anchor level out of range");
  const auto& lvl = grid.levels[cell.level];
  if (cell.row < 0 || cell.col < 0 || cell.row >= lvl.height || cell.col >= lvl.width) {
    throw std::out_of_range("anchor cell out of range");
  }
  return lvl;
}

inline Vec2 cell_center(const AnchorGrid& grid, const CellIndex& cell) {
  const auto& lvl = level_of(grid, cell);
  return {(cell.col + 0.5) * lvl.stride, (cell.row + 0.5) * lvl.stride};
}

/// Offset from the cell center to c, in units of the level stride.
inline Vec2 encode_center_offset(const Vec2& c, const CellIndex& cell, const AnchorGrid& grid) {
  const double stride = level_of(grid, cell).stride;
  return (c - cell_center(grid, cell)) / stride;
}

/// Absolute center points from per-level offset maps (2 channels per anchor).
/// Result is indexed [level][(row * width + col) * anchors + anchor].
inline std::vector<std::vector<Vec2>> decode_center(const std::vector<FeatureMap>& offsets, const AnchorGrid& grid) {
  if (offsets.size() != grid.levels.size()) throw std::invalid_argument("decode_center: level count mismatch");
  const int a_count = grid.anchors_per_cell;
  std::vector<std::vector<Vec2>> out(offsets.size());
  for (std::size_t l = 0; l < offsets.size(); ++l) {
    const auto& lvl = grid.levels[l];
    const auto& off = offsets[l];
    if (off.height != lvl.height || off.width != lvl.width || off.channels != 2 * a_count) {
      throw std::invalid_argument("decode_center: offset map shape does not match the anchor grid");
    }
    const auto xs = lvl.x_map();
    const auto ys = lvl.y_map();
    out[l].reserve(off.cells() * static_cast<std::size_t>(a_count));
    for (int i = 0; i < lvl.height; ++i) {
      for (int j = 0; j < lvl.width; ++j) {
        const auto cell = static_cast<std::size_t>(i * lvl.width + j);
        const double cx = (xs[cell] + 0.5) * lvl.stride;
        const double cy = (ys[cell] + 0.5) * lvl.stride;
        for (int a = 0; a < a_count; ++a) {
          out[l].emplace_back(cx + off.at(i, j, 2 * a) * lvl.stride, cy + off.at(i, j, 2 * a + 1) * lvl.stride);
        }
      }
    }
  }
  return out;
}

/// Full translations from decoded offsets and per-anchor depth maps.
inline std::vector<std::vector<Translation>> decode_translations(const std::vector<FeatureMap>& offsets,
                                                                 const std::vector<FeatureMap>& depths,
                                                                 const AnchorGrid& grid, const IntrinsicsVector& a) {
  const auto centers = decode_center(offsets, grid);
  if (depths.size() != centers.size()) throw std::invalid_argument("decode_translations: level count mismatch");
  std::vector<std::vector<Translation>> out(centers.size());
  for (std::size_t l = 0; l < centers.size(); ++l) {
    if (depths[l].values.size() != centers[l].size()) {
      throw std::invalid_argument("decode_translations: depth map shape does not match the anchor grid");
    }
    out[l].reserve(centers[l].size());
    for (std::size_t k = 0; k < centers[l].size(); ++k) {
      out[l].push_back(recover_translation(centers[l][k], depths[l].values[k], a));
    }
  }
  return out;
}

}  // namespace posekit::head
