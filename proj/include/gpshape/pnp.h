#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gpshape/geometry.h"

namespace gpshape {

struct PnpConfig {
  std::size_t max_iterations = 100;
  bool ransac = false;
  std::size_t ransac_iterations = 200;
  double ransac_threshold_px = 8.0;
  std::uint64_t seed = 0;
};

struct PnpResult {
  RigidTransform pose;
  bool converged = false;
  std::size_t iterations = 0;
  double rms = 0.0;  // reprojection RMS in pixels
  std::vector<bool> inliers;
};

// Root mean squared pixel distance between projected object points and
// observations. Points behind the camera throw BehindCamera.
double reprojection_rms(const RigidTransform& pose, std::span<const Point3> object_points,
                        std::span<const Pixel> pixels, const CameraIntrinsics& cam);

// Direct linear transform on normalized image coordinates, rotation projected
// onto SO(3). Throws DegenerateConfiguration for fewer than 6 points or
// (near) coplanar object points.
RigidTransform pnp_dlt(std::span<const Point3> object_points, std::span<const Pixel> pixels,
                       const CameraIntrinsics& cam);

// Levenberg-Marquardt on the reprojection error from `init`. Returns the best
// iterate; converged = false after max_iterations.
PnpResult refine_pose(const RigidTransform& init, std::span<const Point3> object_points,
                      std::span<const Pixel> pixels, const CameraIntrinsics& cam, std::size_t max_iterations = 100);

// DLT followed by LM, optionally wrapped in RANSAC over 6-point samples.
PnpResult solve_pnp(std::span<const Point3> object_points, std::span<const Pixel> pixels,
                    const CameraIntrinsics& cam, const PnpConfig& cfg = {});

}  // namespace gpshape
