#include <selftest/oracles.hpp>

#include <posekit/geometry.hpp>

#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace posekit;
using std::numbers::pi;

namespace {

double frobenius(const Mat3& a, const Mat3& b) { return (a - b).norm(); }

// Two axis-angles describe the same rotation.
bool same_rotation(const AxisAngle& a, const AxisAngle& b, double tol) {
  return frobenius(oracle::to_mat3(oracle::rotation_matrix(a.r)), oracle::to_mat3(oracle::rotation_matrix(b.r))) < tol;
}

}  // namespace

TEST(Rodrigues, QuarterTurnAboutZ) {
  const Vec3 y = rodrigues_rotate(AxisAngle(0, 0, pi / 2), Vec3(1, 0, 0));
  EXPECT_NEAR(y.x(), 0.0, 1e-15);
  EXPECT_NEAR(y.y(), 1.0, 1e-15);
  EXPECT_NEAR(y.z(), 0.0, 1e-15);
}

TEST(Rodrigues, ZeroVectorIsIdentity) {
  const Vec3 x(3, -1, 2);
  EXPECT_EQ(rodrigues_rotate(AxisAngle(), x), x);
  EXPECT_EQ(axis_angle_to_matrix(AxisAngle()), Mat3::Identity());
}

TEST(Rodrigues, MatchesMatrixOracle) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    const Vec3 r = oracle::random_rotation_vector(rng, 0.0, 2.0 * pi);
    const Vec3 x = oracle::random_cloud(rng, 1, 100.0)[0];
    const Vec3 expected = oracle::rotate(r, x);
    EXPECT_LT((rodrigues_rotate(AxisAngle(r), x) - expected).norm(), 1e-10);
    EXPECT_LT((axis_angle_to_matrix(AxisAngle(r)) * x - expected).norm(), 1e-10);
  }
}

TEST(Rodrigues, TinyAnglesUseSeriesWithoutLoss) {
  for (double t : {1e-9, 1e-8, 1e-7, 1e-5, 1e-3}) {
    const Vec3 r = t * Vec3(1, 2, -2).normalized();
    const Vec3 x(10, -20, 30);
    EXPECT_LT((rodrigues_rotate(AxisAngle(r), x) - oracle::rotate(r, x)).norm(), 1e-12) << t;
  }
}

TEST(Rodrigues, PreservesNorm) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 500; ++i) {
    const Vec3 r = oracle::random_rotation_vector(rng, 0.0, 10.0);
    const Vec3 x = oracle::random_cloud(rng, 1)[0];
    EXPECT_NEAR(rodrigues_rotate(AxisAngle(r), x).norm(), x.norm(), 1e-11);
  }
}

TEST(Rodrigues, JacobianMatchesCentralDifferences) {
  std::mt19937_64 rng(5);
  for (double scale : {1e-7, 1e-3, 0.5, 2.0, 3.1}) {
    for (int i = 0; i < 50; ++i) {
      const Vec3 r = scale * oracle::random_unit(rng);
      const Vec3 x = oracle::random_cloud(rng, 1, 50.0)[0];
      const Mat3 jac = rodrigues_jacobian<double>(r, x);
      const double h = 1e-6;
      for (int k = 0; k < 3; ++k) {
        Vec3 rp = r, rm = r;
        rp[k] += h;
        rm[k] -= h;
        const Vec3 fd = (oracle::rotate(rp, x) - oracle::rotate(rm, x)) / (2 * h);
        EXPECT_LT((jac.col(k) - fd).norm(), 1e-5 * std::max(1.0, x.norm())) << "scale " << scale << " k " << k;
      }
    }
  }
}

TEST(AxisAngleToMatrix, HalfTurnAboutZ) {
  const Mat3 m = axis_angle_to_matrix(AxisAngle(0, 0, pi));
  EXPECT_LT(frobenius(m, Vec3(-1, -1, 1).asDiagonal().toDenseMatrix()), 1e-15);
}

TEST(AxisAngleToMatrix, IsProperRotation) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 500; ++i) {
    const Mat3 m = axis_angle_to_matrix(AxisAngle(oracle::random_rotation_vector(rng, 0.0, 7.0)));
    EXPECT_LT((m.transpose() * m - Mat3::Identity()).norm(), 1e-14);
    EXPECT_NEAR(m.determinant(), 1.0, 1e-14);
  }
}

TEST(MatrixToAxisAngle, Identity) { EXPECT_EQ(matrix_to_axis_angle(Mat3::Identity()).r, Vec3::Zero()); }

TEST(MatrixToAxisAngle, HalfTurnAboutZ) {
  const AxisAngle r = matrix_to_axis_angle(Vec3(-1, -1, 1).asDiagonal().toDenseMatrix());
  EXPECT_NEAR(r.r.x(), 0.0, 1e-15);
  EXPECT_NEAR(r.r.y(), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(r.r.z()), pi, 1e-15);
}

TEST(MatrixToAxisAngle, RoundTripAcrossAngleRange) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 3000; ++i) {
    // Cover the small-angle, generic and near-pi regimes.
    const double lo = i % 3 == 0 ? 0.0 : (i % 3 == 1 ? 0.1 : pi - 1e-3);
    const double hi = i % 3 == 0 ? 1e-4 : (i % 3 == 1 ? pi - 0.1 : pi);
    const Vec3 r = oracle::random_rotation_vector(rng, lo, hi);
    const Mat3 m = oracle::to_mat3(oracle::rotation_matrix(r));
    const AxisAngle back = matrix_to_axis_angle(m);
    EXPECT_LE(back.angle(), pi + 1e-12);
    EXPECT_LT(frobenius(axis_angle_to_matrix(back), m), 1e-9) << r.transpose();
    EXPECT_NEAR(back.angle(), r.norm(), 1e-9);
  }
}

TEST(MatrixToAxisAngle, WrapsLargeAnglesIntoCanonicalRange) {
  const Vec3 axis = Vec3(1, 1, 0).normalized();
  const AxisAngle back = matrix_to_axis_angle(axis_angle_to_matrix(AxisAngle(1.5 * pi * axis)));
  EXPECT_NEAR(back.angle(), 0.5 * pi, 1e-12);
  EXPECT_LT((back.r - (-0.5 * pi) * axis).norm(), 1e-12);
}

TEST(MatrixToAxisAngle, RejectsNonRotations) {
  EXPECT_THROW(matrix_to_axis_angle(Vec3(1, 1, -1).asDiagonal().toDenseMatrix()), std::invalid_argument);
  EXPECT_THROW(matrix_to_axis_angle(2.0 * Mat3::Identity()), std::invalid_argument);
  Mat3 skewed = Mat3::Identity();
  skewed(0, 1) = 1e-3;
  EXPECT_THROW(matrix_to_axis_angle(skewed), std::invalid_argument);
  Mat3 nan = Mat3::Identity();
  nan(2, 2) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(matrix_to_axis_angle(nan), std::invalid_argument);
}

TEST(Canonicalize, SameRotationWithAngleAtMostPi) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 500; ++i) {
    const AxisAngle r(oracle::random_rotation_vector(rng, 0.0, 12.0));
    const AxisAngle c = canonicalize(r);
    EXPECT_LE(c.angle(), pi + 1e-12);
    EXPECT_TRUE(same_rotation(r, c, 1e-9));
  }
}

TEST(Compose, MatchesMatrixProduct) {
  std::mt19937_64 rng(19);
  for (int i = 0; i < 200; ++i) {
    const AxisAngle a(oracle::random_rotation_vector(rng)), b(oracle::random_rotation_vector(rng));
    const Mat3 expected =
        oracle::to_mat3(oracle::rotation_matrix(a.r)) * oracle::to_mat3(oracle::rotation_matrix(b.r));
    EXPECT_LT(frobenius(axis_angle_to_matrix(compose(a, b)), expected), 1e-9);
  }
}

TEST(Project, OpticalAxisHitsPrincipalPoint) {
  const CameraIntrinsics k{572.4, 573.6, 325.3, 242.0};
  const Vec2 u = project(k, Vec3(0, 0, 1000));
  EXPECT_EQ(u, Vec2(k.px, k.py));
}

TEST(Project, PinholeSubstitution) {
  const Vec2 u = project({600, 600, 320, 240}, Vec3(250, 0, 1000));
  EXPECT_DOUBLE_EQ(u.x(), 470.0);
  EXPECT_DOUBLE_EQ(u.y(), 240.0);
}

TEST(Project, ScaleInvariant) {
  const CameraIntrinsics k{600, 610, 319.5, 239.5};
  std::mt19937_64 rng(23);
  for (int i = 0; i < 200; ++i) {
    const Vec3 x = oracle::random_pose(rng).translation;
    const double lambda = std::uniform_real_distribution<double>(0.01, 100.0)(rng);
    EXPECT_LT((project(k, x) - project(k, lambda * x)).norm(), 1e-9);
  }
}

TEST(Project, RejectsPointsBehindCamera) {
  EXPECT_THROW(project({600, 600, 320, 240}, Vec3(0, 0, 0)), std::invalid_argument);
  EXPECT_THROW(project({600, 600, 320, 240}, Vec3(1, 1, -5)), std::invalid_argument);
}

TEST(RecoverTranslation, CenterAtPrincipalPoint) {
  const IntrinsicsVector a{600, 600, 320, 240, 0.001, 0.5};
  const Vec3 t = recover_translation(Vec2(320 * 0.5, 240 * 0.5), 800, a);
  EXPECT_DOUBLE_EQ(t.x(), 0.0);
  EXPECT_DOUBLE_EQ(t.y(), 0.0);
  EXPECT_DOUBLE_EQ(t.z(), 800 * 0.001);
}

TEST(RecoverTranslation, PinholeSubstitution) {
  const Vec3 t = recover_translation(Vec2(470, 240), 1000, {600, 600, 320, 240, 1, 1});
  EXPECT_DOUBLE_EQ(t.x(), 250.0);
  EXPECT_DOUBLE_EQ(t.y(), 0.0);
  EXPECT_DOUBLE_EQ(t.z(), 1000.0);
}

TEST(RecoverTranslation, InvertsProjection) {
  const CameraIntrinsics k{572.4114, 573.57043, 325.2611, 242.04899};
  const auto a = IntrinsicsVector::from(k);
  std::mt19937_64 rng(29);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 t = oracle::random_pose(rng).translation;
    EXPECT_LT((recover_translation(project(k, t), t.z(), a) - t).norm(), 1e-9);
  }
}

TEST(RecoverTranslation, RejectsNonPositiveDepth) {
  EXPECT_THROW(recover_translation(Vec2(1, 1), 0.0, {600, 600, 320, 240, 1, 1}), std::invalid_argument);
  EXPECT_THROW(recover_translation(Vec2(1, 1), -3.0, {600, 600, 320, 240, 1, 1}), std::invalid_argument);
}

TEST(Intrinsics, ValidationRejectsNonPositiveFocal) {
  EXPECT_THROW(validate(CameraIntrinsics{0, 600, 320, 240}), std::invalid_argument);
  EXPECT_THROW(validate(CameraIntrinsics{600, -1, 320, 240}), std::invalid_argument);
  EXPECT_NO_THROW(validate(CameraIntrinsics{600, 600, 320, 240}));
}

TEST(ObjectModel, DiameterIsMaxPairwiseDistance) {
  std::mt19937_64 rng(31);
  const auto pts = oracle::random_cloud(rng, 300);
  double expected = 0;
  for (const auto& p : pts)
    for (const auto& q : pts) expected = std::max(expected, (p - q).norm());
  const auto model = make_object_model("m", pts, false);
  EXPECT_NEAR(model.diameter, expected, 1e-9 * expected);
}

TEST(ObjectModel, RejectsEmptyPointList) { EXPECT_THROW(make_object_model("m", {}, false), std::invalid_argument); }

TEST(ObjectModel, SinglePointHasZeroDiameter) {
  EXPECT_EQ(make_object_model("m", {Vec3(1, 2, 3)}, false).diameter, 0.0);
}
