#pragma once

// Transformation loss: mean distance between the model points transformed by
// the predicted and by the ground-truth pose, with a nearest-point variant for
// symmetric objects, plus analytic gradients with respect to the predicted
// pose parameters.

#include <posekit/geometry.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace posekit {

/// Weights of the combined detection + pose loss.
struct LossWeights {
  double lambda_class = 1.0;
  double lambda_bbox = 1.0;
  double lambda_trans = 0.02;
};

/// Gradient of the transformation loss with respect to the predicted pose.
struct LossGrad {
  Vec3 d_r = Vec3::Zero();
  Vec3 d_t = Vec3::Zero();
};

struct LossAndGrad {
  double value = 0.0;
  LossGrad grad;
};

inline constexpr std::size_t kDefaultLossPoints = 500;

/// Deterministic subsample of m model points without replacement. Returns the
/// full point list, in order, when the model has at most m points; otherwise
/// the chosen points in ascending index order.
inline std::vector<Vec3> sample_model_points(const ObjectModel& model, std::size_t m, std::uint64_t seed) {
  if (m == 0) throw std::invalid_argument("sample_model_points: m must be at least 1");
  const std::size_t n = model.points.size();
  if (n <= m) return model.points;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // partial Fisher-Yates
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  std::vector<Vec3> out;
  out.reserve(m);
  for (std::size_t i : idx) out.push_back(model.points[i]);
  return out;
}

namespace detail {

inline std::vector<Vec3> transform_points(const Pose& pose, std::span<const Vec3> points) {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& x : points) out.push_back(transform_point(pose, x));
  return out;
}

inline void require_points(std::span<const Vec3> points) {
  if (points.empty()) throw std::invalid_argument("transformation loss: empty point set");
}

// Index of the point in `set` closest to q (first one on ties).
inline std::size_t nearest_index(const Vec3& q, std::span<const Vec3> set) {
  std::size_t best = 0;
  double best_sq = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < set.size(); ++j) {
    const double d = (q - set[j]).squaredNorm();
    if (d < best_sq) {
      best_sq = d;
      best = j;
    }
  }
  return best;
}

}  // namespace detail

/// Asymmetric loss: mean over points of |(Rot(r~,x) + t~) - (Rot(r,x) + t)|.
inline double loss_asym(const Pose& pred, const Pose& gt, std::span<const Vec3> points) {
  detail::require_points(points);
  double sum = 0.0;
  for (const auto& x : points) sum += (transform_point(pred, x) - transform_point(gt, x)).norm();
  return sum / static_cast<double>(points.size());
}

/// Symmetric loss: for every predicted-transformed point, the distance to the
/// closest ground-truth-transformed point, averaged. Exact O(m^2) search.
inline double loss_sym(const Pose& pred, const Pose& gt, std::span<const Vec3> points) {
  detail::require_points(points);
  const auto p = detail::transform_points(pred, points);
  const auto g = detail::transform_points(gt, points);
  double sum = 0.0;
  for (const auto& q : p) sum += (q - g[detail::nearest_index(q, g)]).norm();
  return sum / static_cast<double>(points.size());
}

inline double loss_trans(const Pose& pred, const Pose& gt, const ObjectModel& model, std::span<const Vec3> points) {
  return model.symmetric ? loss_sym(pred, gt, points) : loss_asym(pred, gt, points);
}

/// loss_trans and its gradient w.r.t. the predicted rotation vector and
/// translation. For the symmetric loss the nearest-point assignment is held
/// fixed at the current pose. Points whose residual is exactly zero contribute
/// a zero subgradient.
inline LossAndGrad loss_trans_grad(const Pose& pred, const Pose& gt, const ObjectModel& model,
                                   std::span<const Vec3> points) {
  detail::require_points(points);
  const auto p = detail::transform_points(pred, points);
  const auto g = detail::transform_points(gt, points);
  LossAndGrad out;
  double sum = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::size_t j = model.symmetric ? detail::nearest_index(p[i], g) : i;
    const Vec3 d = p[i] - g[j];
    const double dist = d.norm();
    sum += dist;
    if (dist == 0.0) continue;
    const Vec3 u = d / dist;
    out.grad.d_t += u;
    out.grad.d_r += rodrigues_jacobian<double>(pred.rotation.r, points[i]).transpose() * u;
  }
  const double inv_m = 1.0 / static_cast<double>(points.size());
  out.value = sum / static_cast<double>(points.size());
  out.grad.d_r *= inv_m;
  out.grad.d_t *= inv_m;
  return out;
}

/// Weighted sum of the class, box and transformation losses.
inline double combined_loss(double l_class, double l_bbox, double l_trans, const LossWeights& w) {
  if (w.lambda_class < 0.0 || w.lambda_bbox < 0.0 || w.lambda_trans < 0.0) {
    throw std::invalid_argument("combined_loss: weights must be non-negative");
  }
  return w.lambda_class * l_class + w.lambda_bbox * l_bbox + w.lambda_trans * l_trans;
}

}  // namespace posekit
