#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gpshape/geometry.h"
#include "gpshape/shape_template.h"

namespace gpshape {

// A detected pixel and the object point it is believed to image. Object
// points are expressed in the units of the data the template was fitted on.
struct Correspondence {
  Pixel pixel = Pixel::Zero();
  Point3 object_point = Point3::Zero();
  double weight = 1.0;
};

enum class WeightsMode { Uniform, Provided };

// Rescales weights to sum to 1. Throws InvalidArgument on negative or
// non-finite weights, or a zero total.
void normalize_weights(std::vector<Correspondence>& corrs);

struct BackProjection {
  Point3 point = Point3::Zero();
  bool usable = false;
};

// Camera ray through the pixel, cut at the depth of T * P, mapped back to the
// object frame by T^-1. Correspondences whose T * P has depth <= 1e-9 come
// back with usable = false.
std::vector<BackProjection> back_project(const std::vector<Correspondence>& corrs, const RigidTransform& pose,
                                         const CameraIntrinsics& cam);

struct PointScore {
  Point3 point = Point3::Zero();  // back-projected, object frame
  std::size_t best_cluster = 0;
  double density = 0.0;
  double residual = 0.0;  // distance - predicted distance, normalized units
  double weight = 0.0;
  double sigma = 0.0;  // calibrated sigma of the best cluster
};

struct ConfidenceReport {
  double score = 0.0;
  double bound = 0.0;
  double delta = 0.0;
  std::size_t n_points = 0;
  std::size_t n_excluded = 0;
  std::vector<PointScore> per_point;
};

// Sum over usable points of w_i * max_k density_k(P_i). Weights of excluded
// points are redistributed over the survivors. When delta > 0 the report also
// carries confidence_bound at that margin using each point's best-cluster
// sigma. Throws NoUsablePoints.
ConfidenceReport score_pose(const ShapeTemplate& tmpl, const std::vector<Correspondence>& corrs,
                            const RigidTransform& pose, const CameraIntrinsics& cam,
                            WeightsMode mode = WeightsMode::Uniform, double delta = 0.0);

// (1 / (sqrt(2 pi) delta^2)) * sum_i w_i sigma_i (1 - exp(-delta^2 / (2 sigma_i^2))).
// Throws InvalidDelta for delta <= 0, LengthMismatch for unequal lengths.
double confidence_bound(const std::vector<double>& sigmas, const std::vector<double>& weights, double delta);

// Bound before scoring: per-cluster sigma weighted by the cluster's share of
// training points.
double template_confidence_bound(const ShapeTemplate& tmpl, double delta);

inline bool accept_pose(const ConfidenceReport& report, double threshold) { return report.score >= threshold; }

// File formats: CSV "u,v,X,Y,Z[,w]", pose JSON {rotation:[9] row-major,
// translation:[3]}, intrinsics JSON {fx, fy, cx, cy}. Parse failures throw
// Parse, missing files Io.
std::vector<Correspondence> read_correspondences(const std::filesystem::path& path);
void write_correspondences(const std::filesystem::path& path, const std::vector<Correspondence>& corrs);
RigidTransform read_pose(const std::filesystem::path& path);
std::string pose_to_json(const RigidTransform& pose);
CameraIntrinsics read_intrinsics(const std::filesystem::path& path);
std::string intrinsics_to_json(const CameraIntrinsics& cam);

}  // namespace gpshape
