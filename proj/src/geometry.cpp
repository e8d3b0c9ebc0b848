#include "gpshape/geometry.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gpshape/error.h"

namespace gpshape {

namespace {
constexpr double kMinDirectionNorm = 1e-12;
constexpr double kRotationTolerance = 1e-9;
constexpr double kMinDepth = 1e-9;
}  // namespace

Vec3 bearing(double phi, double theta) {
  const double s = std::sin(phi);
  return {s * std::cos(theta), s * std::sin(theta), std::cos(phi)};
}

SphericalSample to_spherical(const Vec3& r) {
  const double d = r.norm();
  if (!(d >= kMinDirectionNorm)) {
    throw Error(ErrorCode::DegeneratePoint, "direction undefined for |r| < 1e-12");
  }
  const double rho = std::hypot(r.x(), r.y());
  SphericalSample s;
  s.distance = d;
  // atan2 keeps full precision near the poles where acos(z/d) would not.
  s.phi = std::atan2(rho, r.z());
  if (rho == 0.0) {
    s.theta = 0.0;
  } else {
    double theta = std::atan2(r.y(), r.x());
    if (theta < 0.0) theta += 2.0 * std::numbers::pi;
    if (theta >= 2.0 * std::numbers::pi) theta = 0.0;
    s.theta = theta;
  }
  return s;
}

SphericalSample to_spherical(const Point3& p, const ReferencePoint& c) { return to_spherical(Vec3(p - c.center)); }

Point3 from_spherical(const SphericalSample& s, const ReferencePoint& c) {
  return s.distance * bearing(s.phi, s.theta) + c.center;
}

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  if (!rotation.allFinite() || !translation.allFinite()) {
    throw Error(ErrorCode::InvalidTransform, "non-finite transform");
  }
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  const double det = rotation.determinant();
  if (ortho > kRotationTolerance || std::abs(det - 1.0) > kRotationTolerance) {
    throw Error(ErrorCode::InvalidTransform, "rotation is not orthonormal with det +1");
  }
}

RigidTransform RigidTransform::operator*(const RigidTransform& other) const {
  RigidTransform out;
  out.rotation_ = rotation_ * other.rotation_;
  out.translation_ = rotation_ * other.translation_ + translation_;
  return out;
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform out;
  out.rotation_ = rotation_.transpose();
  out.translation_ = -(out.rotation_ * translation_);
  return out;
}

Point3 apply_transform(const RigidTransform& t, const Point3& p) { return t.apply(p); }

Mat3 axis_angle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

double rotation_distance(const Mat3& a, const Mat3& b) {
  const Mat3 r = a.transpose() * b;
  // Robust for small angles: use the skew part together with the trace.
  const Vec3 skew(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  return std::atan2(0.5 * skew.norm(), 0.5 * (r.trace() - 1.0));
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy) || !std::isfinite(cx) ||
      !std::isfinite(cy)) {
    throw Error(ErrorCode::InvalidIntrinsics, "focal lengths must be positive and finite");
  }
}

Pixel project(const CameraIntrinsics& cam, const Point3& p_cam) {
  if (!(p_cam.z() > kMinDepth)) {
    throw Error(ErrorCode::BehindCamera, "point at depth <= 1e-9");
  }
  return {cam.fx * p_cam.x() / p_cam.z() + cam.cx, cam.fy * p_cam.y() / p_cam.z() + cam.cy};
}

Point3 unproject(const CameraIntrinsics& cam, const Pixel& pixel, double z) {
  return {(pixel.x() - cam.cx) / cam.fx * z, (pixel.y() - cam.cy) / cam.fy * z, z};
}

}  // namespace gpshape
