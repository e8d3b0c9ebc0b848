#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gpshape/clustering.h"
#include "gpshape/dataprep.h"
#include "gpshape/geometry.h"
#include "gpshape/gp.h"

namespace gpshape {

// One surface patch: a reference point and the GP over directions from it.
struct ClusterModel {
  ReferencePoint reference;
  Mat3 q_matrix = Mat3::Identity();
  GpModel gp;
  double calibrated_sigma2 = 1.0;
};

// Mixture of per-cluster directional distance fields. Immutable once built.
//
// Reference points and GP inputs live in the template frame (the normalized
// object frame). `placement` maps the template frame into the frame in which
// queries are expressed; it is the identity unless the template is moved with
// placed().
class ShapeTemplate {
 public:
  static constexpr int kFormatVersion = 1;

  ShapeTemplate() = default;
  ShapeTemplate(std::vector<ClusterModel> clusters, Normalization normalization,
                RigidTransform placement = RigidTransform::identity());

  std::size_t k() const { return clusters_.size(); }
  const std::vector<ClusterModel>& clusters() const { return clusters_; }
  const ClusterModel& cluster(std::size_t i) const { return clusters_.at(i); }
  const Normalization& normalization() const { return normalization_; }
  const RigidTransform& placement() const { return placement_; }
  std::vector<ReferencePoint> reference_points() const;

  // Template moved rigidly by `motion` (applied after the current placement).
  ShapeTemplate placed(const RigidTransform& motion) const;
  // Copy with replaced per-cluster calibrated variances.
  ShapeTemplate with_calibration(const std::vector<double>& sigma2) const;

  Point3 to_template_frame(const Point3& p) const { return inverse_placement_.apply(p); }

  // Training points per cluster divided by the total.
  std::vector<double> training_shares() const;

 private:
  std::vector<ClusterModel> clusters_;
  Normalization normalization_;
  RigidTransform placement_;
  RigidTransform inverse_placement_;
};

struct TemplateConfig {
  std::size_t k = 8;
  KernelKind kernel = KernelKind::RationalQuadratic;
  DistanceMode distance_mode = DistanceMode::BearingEuclidean;
  double overlap = 0.15;
  std::uint64_t seed = 0;
  std::size_t kmeans_max_iters = 100;
  OptimizerConfig optimizer;
  // When non-empty these replace k-means.
  std::vector<Point3> manual_centers;
  std::size_t min_cluster_points = 4;
};

struct CalibrationSample {
  std::size_t cluster = 0;
  double predicted = 0.0;
  double actual = 0.0;
};

struct CalibrationResult {
  std::vector<double> sigma2;
  std::vector<std::size_t> counts;
  std::vector<CalibrationSample> samples;
  double global_sigma2 = 0.0;
};

inline constexpr double kSigma2Floor = 1e-12;

// Per-cluster mean squared deviation of GP predictions from held-out points,
// each test point scored against its nearest reference point. Clusters with
// no test points fall back to the global mean squared deviation.
CalibrationResult calibrate_variance(const ShapeTemplate& tmpl, const SurfacePointCloud& test);

struct BuildReport {
  ClusterAssignment assignment;
  std::vector<FitReport> fits;
  CalibrationResult calibration;
  // Mean |predicted - actual| distance over the test set.
  double mean_radial_error = 0.0;
};

// kmeans -> overlap -> per-cluster GP fit -> held-out calibration.
// Throws ClusterTooSmall and anything raised by clustering / fitting.
ShapeTemplate build_template(const SurfacePointCloud& train, const SurfacePointCloud& test, const TemplateConfig& cfg,
                             BuildReport* report = nullptr);

// Softmax of -(p - C_k)^T Q_k (p - C_k) over clusters.
std::vector<double> mixture_weights(const ShapeTemplate& tmpl, const Point3& p);

struct ClusterLikelihood {
  double weight = 0.0;
  double density = 0.0;
  double predicted_distance = 0.0;
  double distance = 0.0;
};

struct LikelihoodQuery {
  Point3 point = Point3::Zero();
  std::vector<ClusterLikelihood> per_cluster;
  std::size_t best_cluster = 0;
  double max_density = 0.0;
  // sum_k weight_k * density_k
  double mixture = 0.0;

  double residual() const {
    const auto& c = per_cluster[best_cluster];
    return c.distance - c.predicted_distance;
  }
};

double normal_density(double x, double mean, double variance);

// Throws DegeneratePoint when p coincides with a reference point.
LikelihoodQuery point_likelihood(const ShapeTemplate& tmpl, const Point3& p);

// Surface samples along a Fibonacci lattice of directions from every
// reference point, keeping only points owned by their generating center.
SurfacePointCloud reconstruct(const ShapeTemplate& tmpl, std::size_t directions_per_cluster);

struct ReconstructionSample {
  Point3 point = Point3::Zero();  // placement frame
  std::size_t cluster = 0;
  Vec3 direction = Vec3::Zero();  // template frame
};

// reconstruct() with the generating cluster and direction of every point.
std::vector<ReconstructionSample> reconstruct_samples(const ShapeTemplate& tmpl, std::size_t directions_per_cluster);

// Mean |mu - d| of the template over a point set, nearest-center assignment.
double mean_radial_error(const ShapeTemplate& tmpl, const SurfacePointCloud& points);

std::string to_json(const ShapeTemplate& tmpl);
ShapeTemplate from_json(const std::string& text);
void save_template(const ShapeTemplate& tmpl, const std::filesystem::path& path);
ShapeTemplate load_template(const std::filesystem::path& path);

}  // namespace gpshape
