#pragma once

#include <cstdint>
#include <vector>

#include "gpshape/dataprep.h"
#include "gpshape/geometry.h"

namespace gpshape {

struct ClusterAssignment {
  std::vector<ReferencePoint> reference_points;
  // Training-point indices per cluster, ascending. May overlap after
  // apply_overlap.
  std::vector<std::vector<std::size_t>> memberships;
  // Nearest-center label of every training point.
  std::vector<std::size_t> labels;
  // Softmax metric of each cluster; identity for k-means.
  std::vector<Mat3> q_matrices;

  std::size_t k() const { return reference_points.size(); }
};

struct KMeansConfig {
  std::size_t k = 8;
  std::uint64_t seed = 0;
  std::size_t max_iters = 100;
  double tolerance = 1e-9;
};

// Sum of squared nearest-center distances after each assignment step.
struct KMeansTrace {
  std::vector<double> inertia;
  std::size_t reseeded = 0;
};

// Lloyd iterations from a k-means++ start. Throws InvalidK.
ClusterAssignment kmeans(const SurfacePointCloud& points, const KMeansConfig& cfg, KMeansTrace* trace = nullptr);

// Adds every point to each cluster l with |p - C_l| <= (1 + rho) |p - C_nearest|.
ClusterAssignment apply_overlap(const ClusterAssignment& assignment, const SurfacePointCloud& points, double rho);

// Nearest-center partition for user-supplied centers. Throws DuplicateCenters.
ClusterAssignment manual_reference_points(const SurfacePointCloud& points, const std::vector<Point3>& centers);

// Index of the nearest center; ties go to the lowest index.
std::size_t nearest_center(const std::vector<ReferencePoint>& refs, const Point3& p);

// Logs a warning for every center closer than `threshold` to the training
// points. Returns the indices that triggered.
std::vector<std::size_t> warn_near_surface_centers(const ClusterAssignment& assignment,
                                                   const SurfacePointCloud& points, double threshold = 1e-3);

}  // namespace gpshape
