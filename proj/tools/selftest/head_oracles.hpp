#pragma once

// Reference pieces for the head tests: random feature maps and detection
// sets, and a brute-force NMS that shares no code with the library.

#include <posekit/headspec.hpp>

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

using posekit::head::Detection;
using posekit::head::FeatureMap;

inline FeatureMap random_map(int h, int w, int c, std::uint64_t seed, double stride = 1.0) {
  FeatureMap m(h, w, c, stride);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& v : m.values) v = n(rng);
  return m;
}

// Brute-force reference: a box survives iff no higher-priority same-class box
// that itself survives overlaps it above the threshold. Evaluated by fixpoint
// over the priority order, written without sorting helpers.
inline std::vector<std::size_t> nms_reference(const std::vector<Detection>& dets, double thr) {
  const std::size_t n = dets.size();
  auto before = [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score || (dets[a].score == dets[b].score && a < b);
  };
  std::vector<int> rank(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (before(j, i)) ++rank[i];
  std::vector<bool> keep(n, false);
  for (int r = 0; r < static_cast<int>(n); ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      if (rank[i] != r) continue;
      bool suppressed = false;
      for (std::size_t j = 0; j < n; ++j) {
        if (!keep[j] || dets[j].class_id != dets[i].class_id) continue;
        const double ix = std::max(0.0, std::min(dets[i].bbox.x_max, dets[j].bbox.x_max) -
                                            std::max(dets[i].bbox.x_min, dets[j].bbox.x_min));
        const double iy = std::max(0.0, std::min(dets[i].bbox.y_max, dets[j].bbox.y_max) -
                                            std::max(dets[i].bbox.y_min, dets[j].bbox.y_min));
        const double inter = ix * iy;
        const double uni = dets[i].bbox.area() + dets[j].bbox.area() - inter;
        if (inter / uni > thr) suppressed = true;
      }
      keep[i] = !suppressed;
    }
  }
  std::vector<std::size_t> out;
  for (int r = 0; r < static_cast<int>(n); ++r)
    for (std::size_t i = 0; i < n; ++i)
      if (rank[i] == r && keep[i]) out.push_back(i);
  return out;
}

inline std::vector<Detection> random_detections(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> pos(0, 100), size(5, 40), score(0, 1);
  std::uniform_int_distribution<int> cls(0, 2);
  std::bernoulli_distribution tie(0.2);
  std::vector<Detection> dets;
  for (int i = 0; i < n; ++i) {
    Detection d;
    d.class_id = cls(rng);
    d.score = tie(rng) && !dets.empty() ? dets.back().score : score(rng);
    const double x = pos(rng), y = pos(rng);
    d.bbox = {x, y, x + size(rng), y + size(rng)};
    dets.push_back(d);
  }
  return dets;
}

}  // namespace oracle
