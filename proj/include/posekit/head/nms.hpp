#pragma once

#include <posekit/geometry.hpp>

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace posekit::head {

struct Box {
  double x_min = 0.0, y_min = 0.0, x_max = 0.0, y_max = 0.0;
  double area() const { return std::max(0.0, x_max - x_min) * std::max(0.0, y_max - y_min); }
};

struct Detection {
  int class_id = 0;
  double score = 0.0;
  Box bbox;
  AxisAngle rotation;
  Translation translation = Translation::Zero();
};

inline double iou(const Box& a, const Box& b) {
  const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  const double inter = w * h;
  return inter / (a.area() + b.area() - inter);
}

/// Greedy per-class suppression: visiting detections by descending score
/// (ties by input order), a detection is dropped when its IoU with an already
/// kept detection of the same class exceeds the threshold. Returns kept
/// indices in visiting order.
inline std::vector<std::size_t> nms_indices(const std::vector<Detection>& dets, double iou_threshold) {
  for (const auto& d : dets) {
    if (!(d.bbox.x_min < d.bbox.x_max) || !(d.bbox.y_min < d.bbox.y_max)) {
      throw std::invalid_argument("nms: degenerate bounding box");
    }
  }
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return dets[k].class_id == dets[i].class_id && iou(dets[k].bbox, dets[i].bbox) > iou_threshold;
    });
    if (!suppressed) kept.push_back(i);
  }
  return kept;
}

inline std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_threshold) {
  std::vector<Detection> out;
  for (std::size_t i : nms_indices(dets, iou_threshold)) out.push_back(dets[i]);
  return out;
}

}  // namespace posekit::head
