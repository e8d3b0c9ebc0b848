#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "gpshape/error.h"
#include "gpshape/geometry.h"

using namespace gpshape;

namespace {

constexpr double kPi = std::numbers::pi;

Point3 random_point(std::mt19937_64& rng, double scale = 3.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(rng), u(rng), u(rng)};
}

RigidTransform random_transform(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  const Vec3 axis(g(rng), g(rng), g(rng));
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  return RigidTransform(axis_angle(axis, ang(rng)), random_point(rng));
}

}  // namespace

TEST(Spherical, PoleMapsToPhiZeroThetaZero) {
  const auto s = to_spherical(Point3(0, 0, 1), ReferencePoint{});
  EXPECT_DOUBLE_EQ(s.phi, 0.0);
  EXPECT_DOUBLE_EQ(s.theta, 0.0);
  EXPECT_DOUBLE_EQ(s.distance, 1.0);
  const auto south = to_spherical(Point3(0, 0, -2), ReferencePoint{});
  EXPECT_DOUBLE_EQ(south.phi, kPi);
  EXPECT_DOUBLE_EQ(south.theta, 0.0);
}

TEST(Spherical, AxisCase) {
  const auto s = to_spherical(Point3(1, 0, 0), ReferencePoint{});
  EXPECT_NEAR(s.phi, kPi / 2, 1e-15);
  EXPECT_DOUBLE_EQ(s.theta, 0.0);
  EXPECT_DOUBLE_EQ(s.distance, 1.0);
  const auto neg_y = to_spherical(Point3(0, -1, 0), ReferencePoint{});
  EXPECT_NEAR(neg_y.theta, 1.5 * kPi, 1e-15);
}

TEST(Spherical, FromSphericalCases) {
  const ReferencePoint c{Point3(1, 2, 3), 0};
  const Point3 p = from_spherical({0.0, 1.234, 0.0}, c);
  EXPECT_EQ(p, Point3(1, 2, 3));
  const Point3 q = from_spherical({kPi / 2, kPi / 2, 2.0}, ReferencePoint{});
  EXPECT_NEAR(q.x(), 0.0, 1e-15);
  EXPECT_NEAR(q.y(), 2.0, 1e-15);
  EXPECT_NEAR(q.z(), 0.0, 1e-15);
}

TEST(Spherical, RoundTripRandomPoints) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const ReferencePoint c{random_point(rng), 0};
    const Point3 p = random_point(rng);
    const auto s = to_spherical(p, c);
    EXPECT_GE(s.phi, 0.0);
    EXPECT_LE(s.phi, kPi);
    EXPECT_GE(s.theta, 0.0);
    EXPECT_LT(s.theta, 2 * kPi);
    EXPECT_NEAR(s.distance, (p - c.center).norm(), 1e-14);
    EXPECT_LT((from_spherical(s, c) - p).norm(), 1e-12);
  }
}

TEST(Spherical, DegeneratePointThrows) {
  const ReferencePoint c{Point3(1, 1, 1), 0};
  try {
    to_spherical(Point3(1, 1, 1), c);
    FAIL() << "expected DegeneratePoint";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegeneratePoint);
  }
}

TEST(Transform, IdentityAndRotation) {
  EXPECT_EQ(apply_transform(RigidTransform::identity(), Point3(1, 2, 3)), Point3(1, 2, 3));
  const RigidTransform rz(axis_angle(Vec3::UnitZ(), kPi / 2), Vec3::Zero());
  const Point3 p = apply_transform(rz, Point3(1, 0, 0));
  EXPECT_NEAR(p.x(), 0.0, 1e-15);
  EXPECT_NEAR(p.y(), 1.0, 1e-15);
  EXPECT_NEAR(p.z(), 0.0, 1e-15);
}

TEST(Transform, InverseComposesToIdentity) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    const RigidTransform t = random_transform(rng);
    const Point3 p = random_point(rng);
    EXPECT_LT(((t * t.inverse()) * p - p).norm(), 1e-10);
    EXPECT_LT((t.inverse() * (t * p) - p).norm(), 1e-10);
  }
}

TEST(Transform, PreservesDistancesAndAssociates) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const RigidTransform a = random_transform(rng), b = random_transform(rng), c = random_transform(rng);
    const Point3 p = random_point(rng), q = random_point(rng);
    EXPECT_NEAR((a * p - a * q).norm(), (p - q).norm(), 1e-10);
    EXPECT_LT((((a * b) * c) * p - (a * (b * c)) * p).norm(), 1e-10);
  }
}

TEST(Transform, RejectsNonRotation) {
  Mat3 m = Mat3::Identity();
  m(0, 0) = -1.0;  // reflection
  EXPECT_THROW(RigidTransform(m, Vec3::Zero()), Error);
  Mat3 s = Mat3::Identity() * 1.01;
  EXPECT_THROW(RigidTransform(s, Vec3::Zero()), Error);
}

TEST(Camera, ProjectOpticalAxisAndOffsets) {
  const CameraIntrinsics cam{500, 500, 320, 320};
  const Pixel c = project(cam, Point3(0, 0, 1));
  EXPECT_DOUBLE_EQ(c.x(), 320.0);
  EXPECT_DOUBLE_EQ(c.y(), 320.0);
  EXPECT_DOUBLE_EQ(project(cam, Point3(1, 0, 1)).x(), 820.0);
  const Pixel a = project(cam, Point3(0.3, -0.2, 2.0));
  const Pixel b = project(cam, Point3(0.3, -0.2, 4.0));
  EXPECT_NEAR(b.x() - 320, 0.5 * (a.x() - 320), 1e-12);
  EXPECT_NEAR(b.y() - 320, 0.5 * (a.y() - 320), 1e-12);
}

TEST(Camera, BehindCameraThrows) {
  const CameraIntrinsics cam;
  try {
    project(cam, Point3(0, 0, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BehindCamera);
  }
  EXPECT_THROW(project(cam, Point3(0, 0, -1)), Error);
}

TEST(Camera, UnprojectInvertsProject) {
  const CameraIntrinsics cam{700, 650, 300, 310};
  const Point3 p(0.4, -0.7, 3.5);
  EXPECT_LT((unproject(cam, project(cam, p), p.z()) - p).norm(), 1e-12);
  EXPECT_THROW((CameraIntrinsics{0, 1, 0, 0}.validate()), Error);
}

TEST(Rotation, DistanceOfKnownAngle) {
  const Mat3 a = axis_angle(Vec3(1, 2, 3), 0.7);
  const Mat3 b = a * axis_angle(Vec3(-1, 0, 2), 1e-7);
  EXPECT_NEAR(rotation_distance(a, b), 1e-7, 1e-15);
  EXPECT_NEAR(rotation_distance(a, a * axis_angle(Vec3::UnitX(), 2.5)), 2.5, 1e-12);
}
