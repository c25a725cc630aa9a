#pragma once

// Axis-angle rotation algebra, pinhole projection and translation recovery.
//
// Conventions: lengths in millimeters, angles in radians. A rotation is an
// axis-angle vector r whose direction is the axis and whose norm is the angle.

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace posekit {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Rotation vector: direction = unit axis, norm = angle in radians.
struct AxisAngle {
  Vec3 r = Vec3::Zero();

  AxisAngle() = default;
  explicit AxisAngle(const Vec3& v) : r(v) {}
  AxisAngle(double x, double y, double z) : r(x, y, z) {}

  double angle() const { return r.norm(); }
  static AxisAngle identity() { return {}; }
  AxisAngle operator-() const { return AxisAngle(-r); }
};

using Translation = Vec3;

/// Rigid transform from object frame to camera frame: x_cam = Rot(r, x) + t.
struct Pose {
  AxisAngle rotation;
  Translation translation = Translation::Zero();

  static Pose identity() { return {}; }
};

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double px = 0.0;
  double py = 0.0;
};

/// Per-image input vector of the translation head: pinhole parameters plus
/// the translation unit scale and the original-to-network image scale.
struct IntrinsicsVector {
  double fx = 1.0;
  double fy = 1.0;
  double px = 0.0;
  double py = 0.0;
  double s_translation = 1.0;
  double s_image = 1.0;

  static IntrinsicsVector from(const CameraIntrinsics& k, double s_translation = 1.0,
                               double s_image = 1.0) {
    return {k.fx, k.fy, k.px, k.py, s_translation, s_image};
  }
  CameraIntrinsics camera() const { return {fx, fy, px, py}; }
};

inline void validate(const CameraIntrinsics& k) {
  if (!(k.fx > 0.0) || !(k.fy > 0.0)) {
    throw std::invalid_argument("camera intrinsics: focal lengths must be positive");
  }
}

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

template <typename Scalar>
Matrix3<Scalar> skew(const Vector3<Scalar>& v) {
  Matrix3<Scalar> m;
  m << Scalar(0), -v.z(), v.y(),
       v.z(), Scalar(0), -v.x(),
       -v.y(), v.x(), Scalar(0);
  return m;
}

namespace detail {

// Coefficients of Rot(r, x) = c*x + a*(r x x) + b*r*(r.x):
//   c = cos(angle), a = sin(angle)/angle, b = (1 - cos(angle))/angle^2.
template <typename Scalar>
struct RodriguesCoeffs {
  Scalar c, a, b;
};

template <typename Scalar>
RodriguesCoeffs<Scalar> rodrigues_coeffs(Scalar theta_sq) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  if (theta_sq < Scalar(1e-16)) {
    // second-order Taylor expansion, angle < 1e-8
    return {Scalar(1) - theta_sq / Scalar(2), Scalar(1) - theta_sq / Scalar(6),
            Scalar(0.5) - theta_sq / Scalar(24)};
  }
  const Scalar theta = sqrt(theta_sq);
  const Scalar c = cos(theta);
  return {c, sin(theta) / theta, (Scalar(1) - c) / theta_sq};
}

}  // namespace detail

/// Rotates x by the axis-angle vector r with Rodrigues' formula.
template <typename Scalar>
Vector3<Scalar> rodrigues_rotate(const Vector3<Scalar>& r, const Vector3<Scalar>& x) {
  const auto k = detail::rodrigues_coeffs<Scalar>(r.squaredNorm());
  return k.c * x + k.a * r.cross(x) + k.b * r.dot(x) * r;
}

inline Vec3 rodrigues_rotate(const AxisAngle& r, const Vec3& x) {
  return rodrigues_rotate<double>(r.r, x);
}

/// Jacobian d Rot(r, x) / d r, obtained by differentiating the three Rodrigues
/// coefficients as functions of the angle.
template <typename Scalar>
Matrix3<Scalar> rodrigues_jacobian(const Vector3<Scalar>& r, const Vector3<Scalar>& x) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const Scalar theta_sq = r.squaredNorm();
  const auto k = detail::rodrigues_coeffs<Scalar>(theta_sq);
  // da/dr = a1 * r, db/dr = b1 * r, dc/dr = -a * r
  Scalar a1, b1;
  if (theta_sq < Scalar(1e-4)) {
    a1 = Scalar(-1) / Scalar(3) + theta_sq / Scalar(30) - theta_sq * theta_sq / Scalar(840);
    b1 = Scalar(-1) / Scalar(12) + theta_sq / Scalar(180) - theta_sq * theta_sq / Scalar(6720);
  } else {
    const Scalar theta = sqrt(theta_sq);
    const Scalar s = sin(theta);
    const Scalar c = cos(theta);
    a1 = (theta * c - s) / (theta_sq * theta);
    b1 = (theta * s - Scalar(2) * (Scalar(1) - c)) / (theta_sq * theta_sq);
  }
  const Vector3<Scalar> rxx = r.cross(x);
  const Scalar rdx = r.dot(x);
  Matrix3<Scalar> j = -k.a * x * r.transpose();
  j += a1 * rxx * r.transpose();
  j -= k.a * skew<Scalar>(x);
  j += b1 * rdx * r * r.transpose();
  j += k.b * (rdx * Matrix3<Scalar>::Identity() + r * x.transpose());
  return j;
}

template <typename Scalar>
Matrix3<Scalar> axis_angle_to_matrix(const Vector3<Scalar>& r) {
  const auto k = detail::rodrigues_coeffs<Scalar>(r.squaredNorm());
  return k.c * Matrix3<Scalar>::Identity() + k.a * skew<Scalar>(r) + k.b * r * r.transpose();
}

inline Mat3 axis_angle_to_matrix(const AxisAngle& r) { return axis_angle_to_matrix<double>(r.r); }

/// Log map SO(3) -> axis-angle with angle in [0, pi]. At an angle of exactly pi
/// the axis sign is fixed so that its first nonzero component is positive.
/// Throws std::invalid_argument unless R is orthonormal within `tolerance`
/// (Frobenius norm of R^T R - I) with positive determinant.
inline AxisAngle matrix_to_axis_angle(const Mat3& rot, double tolerance = 1e-6) {
  if (!rot.allFinite()) {
    throw std::invalid_argument("matrix_to_axis_angle: non-finite matrix");
  }
  const double ortho_err = (rot.transpose() * rot - Mat3::Identity()).norm();
  if (ortho_err > tolerance || rot.determinant() <= 0.0) {
    throw std::invalid_argument("matrix_to_axis_angle: not a rotation matrix (orthonormality error " +
                                std::to_string(ortho_err) + ")");
  }
  const Vec3 w(rot(2, 1) - rot(1, 2), rot(0, 2) - rot(2, 0), rot(1, 0) - rot(0, 1));
  const double sin_theta = 0.5 * w.norm();
  const double cos_theta = std::clamp(0.5 * (rot.trace() - 1.0), -1.0, 1.0);
  const double theta = std::atan2(sin_theta, cos_theta);

  if (cos_theta >= 0.0) {
    // theta in [0, pi/2]: antisymmetric part is well conditioned
    const double scale = theta < 1e-8 ? 0.5 * (1.0 + theta * theta / 6.0) : 0.5 * theta / sin_theta;
    return AxisAngle(scale * w);
  }

  // theta in (pi/2, pi]: read the axis off the symmetric part,
  // (R + R^T)/2 - cos(theta) I = (1 - cos(theta)) k k^T.
  const Mat3 kkt = (0.5 * (rot + rot.transpose()) - cos_theta * Mat3::Identity()) / (1.0 - cos_theta);
  Eigen::Index col = 0;
  kkt.diagonal().maxCoeff(&col);
  Vec3 axis = kkt.col(col) / std::sqrt(std::max(kkt(col, col), 0.0));
  axis.normalize();
  if (sin_theta > 1e-12) {
    if (axis.dot(w) < 0.0) axis = -axis;
  } else {
    for (int i = 0; i < 3; ++i) {
      if (std::abs(axis[i]) > 1e-12) {
        if (axis[i] < 0.0) axis = -axis;
        break;
      }
    }
  }
  return AxisAngle(theta * axis);
}

/// Maps r to the equivalent rotation vector with norm in [0, pi].
inline AxisAngle canonicalize(const AxisAngle& r) {
  const double theta = r.angle();
  if (theta <= std::numbers::pi) return r;
  return matrix_to_axis_angle(axis_angle_to_matrix(r));
}

/// Composition a * b (apply b first).
inline AxisAngle compose(const AxisAngle& a, const AxisAngle& b) {
  return matrix_to_axis_angle(axis_angle_to_matrix(a) * axis_angle_to_matrix(b));
}

inline Vec3 transform_point(const Pose& pose, const Vec3& x) {
  return rodrigues_rotate(pose.rotation, x) + pose.translation;
}

/// Pinhole projection of a camera-frame point to pixel coordinates.
inline Vec2 project(const CameraIntrinsics& k, const Vec3& x_cam) {
  if (!(x_cam.z() > 0.0)) {
    throw std::invalid_argument("project: point is not in front of the camera (z <= 0)");
  }
  return {k.fx * x_cam.x() / x_cam.z() + k.px, k.fy * x_cam.y() / x_cam.z() + k.py};
}

/// Recovers the full translation from the 2D center point (network-input
/// pixels) and the depth t_z.
inline Translation recover_translation(const Vec2& center, double t_z, const IntrinsicsVector& a) {
  if (!(t_z > 0.0)) {
    throw std::invalid_argument("recover_translation: t_z must be positive");
  }
  const double cx = center.x() / a.s_image;
  const double cy = center.y() / a.s_image;
  const double t_x = (cx - a.px) * t_z / a.fx;
  const double t_y = (cy - a.py) * t_z / a.fy;
  return Translation(t_x, t_y, t_z) * a.s_translation;
}

// ---------------------------------------------------------------------------
// Object models

struct ObjectModel {
  std::string id;
  std::vector<Vec3> points;
  double diameter = 0.0;
  bool symmetric = false;
};

/// Maximum pairwise distance, exact O(n^2) scan.
inline double compute_diameter(const std::vector<Vec3>& points) {
  double best_sq = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      best_sq = std::max(best_sq, (points[i] - points[j]).squaredNorm());
    }
  }
  return std::sqrt(best_sq);
}

inline ObjectModel make_object_model(std::string id, std::vector<Vec3> points, bool symmetric) {
  if (points.empty()) {
    throw std::invalid_argument("object model '" + id + "' has no points");
  }
  ObjectModel model;
  model.id = std::move(id);
  model.diameter = compute_diameter(points);
  model.points = std::move(points);
  model.symmetric = symmetric;
  return model;
}

/// Axis-aligned bounding box of the model points as (min, max).
inline std::pair<Vec3, Vec3> bounding_box(const ObjectModel& model) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& p : model.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return {lo, hi};
}

}  // namespace posekit
