#pragma once

// Reference implementations used only by tests. They share no code with the
// library: rotations are built from explicit axis/angle matrices in long
// double, and nearest neighbours are found by plain loops.

#include <posekit/geometry.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using posekit::Mat3;
using posekit::Pose;
using posekit::Vec3;

struct LMat3 {
  long double m[3][3];
};

// R = I + sin(t) K + (1 - cos(t)) K^2 with K the unit-axis cross matrix.
inline LMat3 rotation_matrix(const Vec3& r) {
  const long double x = r.x(), y = r.y(), z = r.z();
  const long double t = std::sqrt(x * x + y * y + z * z);
  LMat3 out{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  if (t == 0) return out;
  const long double k[3] = {x / t, y / t, z / t};
  const long double kx[3][3] = {{0, -k[2], k[1]}, {k[2], 0, -k[0]}, {-k[1], k[0], 0}};
  const long double s = std::sin(t), c1 = 1 - std::cos(t);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      long double k2 = 0;
      for (int l = 0; l < 3; ++l) k2 += kx[i][l] * kx[l][j];
      out.m[i][j] += s * kx[i][j] + c1 * k2;
    }
  }
  return out;
}

inline Mat3 to_mat3(const LMat3& a) {
  Mat3 out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out(i, j) = static_cast<double>(a.m[i][j]);
  return out;
}

inline Vec3 rotate(const Vec3& r, const Vec3& p) {
  const LMat3 rm = rotation_matrix(r);
  long double out[3] = {0, 0, 0};
  const long double in[3] = {p.x(), p.y(), p.z()};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out[i] += rm.m[i][j] * in[j];
  return Vec3(static_cast<double>(out[0]), static_cast<double>(out[1]), static_cast<double>(out[2]));
}

inline Vec3 apply(const Pose& pose, const Vec3& p) { return rotate(pose.rotation.r, p) + pose.translation; }

inline double add(const Pose& gt, const Pose& pred, const std::vector<Vec3>& pts) {
  long double sum = 0;
  for (const auto& p : pts) sum += (apply(gt, p) - apply(pred, p)).norm();
  return static_cast<double>(sum / pts.size());
}

inline double add_s(const Pose& gt, const Pose& pred, const std::vector<Vec3>& pts) {
  long double sum = 0;
  for (const auto& p : pts) {
    const Vec3 q = apply(pred, p);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& g : pts) best = std::min(best, (apply(gt, g) - q).norm());
    sum += best;
  }
  return static_cast<double>(sum / pts.size());
}

template <typename Rng>
Vec3 random_unit(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do v = Vec3(n(rng), n(rng), n(rng));
  while (v.norm() < 1e-6);
  return v.normalized();
}

// Axis-angle with angle uniform in [lo, hi].
template <typename Rng>
Vec3 random_rotation_vector(Rng& rng, double lo = 0.0, double hi = 3.14159) {
  return std::uniform_real_distribution<double>(lo, hi)(rng) * random_unit(rng);
}

template <typename Rng>
Pose random_pose(Rng& rng) {
  Pose p;
  p.rotation = posekit::AxisAngle(random_rotation_vector(rng));
  std::uniform_real_distribution<double> xy(-200.0, 200.0), z(400.0, 1500.0);
  p.translation = Vec3(xy(rng), xy(rng), z(rng));
  return p;
}

template <typename Rng>
std::vector<Vec3> random_cloud(Rng& rng, int n, double half_extent = 60.0) {
  std::uniform_real_distribution<double> u(-half_extent, half_extent);
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  return pts;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace oracle
