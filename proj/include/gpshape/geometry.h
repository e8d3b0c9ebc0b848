#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace gpshape {

using Point3 = Eigen::Vector3d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Pixel = Eigen::Vector2d;

struct ReferencePoint {
  Point3 center = Point3::Zero();
  std::size_t index = 0;
};

// Direction of a point relative to a reference point, plus the distance along
// that direction. phi is the polar angle from +z, theta the azimuth from +x.
struct SphericalSample {
  double phi = 0.0;
  double theta = 0.0;
  double distance = 0.0;
};

// Direction parameter vector (phi, theta).
using DirectionParams = Eigen::Vector2d;

inline DirectionParams direction_params(const SphericalSample& s) { return {s.phi, s.theta}; }

// Unit bearing vector for (phi, theta).
Vec3 bearing(double phi, double theta);
inline Vec3 bearing(const DirectionParams& psi) { return bearing(psi[0], psi[1]); }

// Spherical coordinates of a non-zero vector. Throws DegeneratePoint when
// |r| < 1e-12.
SphericalSample to_spherical(const Vec3& r);
SphericalSample to_spherical(const Point3& p, const ReferencePoint& c);
Point3 from_spherical(const SphericalSample& s, const ReferencePoint& c);

class RigidTransform {
 public:
  RigidTransform() = default;
  // Throws InvalidTransform if the rotation is not orthonormal with det +1
  // to 1e-9.
  RigidTransform(const Mat3& rotation, const Vec3& translation);

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Point3 apply(const Point3& p) const { return rotation_ * p + translation_; }
  Point3 operator*(const Point3& p) const { return apply(p); }

  // (a * b).apply(p) == a.apply(b.apply(p))
  RigidTransform operator*(const RigidTransform& other) const;
  RigidTransform inverse() const;

 private:
  Mat3 rotation_ = Mat3::Identity();
  Vec3 translation_ = Vec3::Zero();
};

Point3 apply_transform(const RigidTransform& t, const Point3& p);

// Rotation about a unit axis by angle (radians).
Mat3 axis_angle(const Vec3& axis, double angle);

// Rotation angle (radians) of a^T b.
double rotation_distance(const Mat3& a, const Mat3& b);

struct CameraIntrinsics {
  double fx = 800.0;
  double fy = 800.0;
  double cx = 320.0;
  double cy = 320.0;

  // Throws InvalidIntrinsics unless fx > 0 and fy > 0.
  void validate() const;
};

// Pinhole projection. Throws BehindCamera if p_cam.z <= 1e-9.
Pixel project(const CameraIntrinsics& cam, const Point3& p_cam);

// Camera-frame point on the ray through `pixel` at depth z.
Point3 unproject(const CameraIntrinsics& cam, const Pixel& pixel, double z);

}  // namespace gpshape
