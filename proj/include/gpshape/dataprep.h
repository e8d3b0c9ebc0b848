#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "gpshape/geometry.h"

namespace gpshape {

struct TriangleMesh {
  std::vector<Point3> vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;

  // Throws InvalidArgument if a face index is out of range.
  void validate() const;
};

// Maps source coordinates to normalized ones: q = (p - center) * scale.
struct Normalization {
  Point3 center = Point3::Zero();
  double scale = 1.0;

  Point3 apply(const Point3& p) const { return (p - center) * scale; }
  Point3 invert(const Point3& q) const { return q / scale + center; }
  // Normalization equivalent to applying *this and then `next`.
  Normalization then(const Normalization& next) const;
};

struct SurfacePointCloud {
  std::vector<Point3> points;
  Normalization normalization;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

// Center at the bounding-box center and scale so that max |p| = 1.
// Throws EmptyCloud or DegenerateExtent.
Normalization unit_sphere_normalization(std::span<const Point3> points);
SurfacePointCloud normalize_unit_sphere(const SurfacePointCloud& cloud);
TriangleMesh normalize_mesh(const TriangleMesh& mesh, Normalization* applied = nullptr);

// Golden-angle spiral lattice of n unit vectors.
std::vector<Vec3> fibonacci_directions(std::size_t n);

struct RaycastConfig {
  double camera_radius = 2.0;
  // Full cone angle of each camera's ray fan.
  double aperture_deg = 60.0;
  std::size_t rays_per_camera = 1500;
};

struct Ray {
  Point3 origin;
  Vec3 direction;
};

// Acceleration structure for first-hit ray queries against a triangle mesh.
class MeshIntersector {
 public:
  explicit MeshIntersector(const TriangleMesh& mesh);

  // Distance along the (unit) ray to the first hit, or a negative value.
  double first_hit(const Ray& ray) const;

 private:
  struct Node {
    Eigen::AlignedBox3d box;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    std::uint32_t first = 0;
    std::uint32_t count = 0;
  };

  std::uint32_t build(std::uint32_t first, std::uint32_t count);
  double hit_triangle(const Ray& ray, std::uint32_t tri) const;

  const TriangleMesh* mesh_;
  std::vector<std::uint32_t> order_;
  std::vector<Point3> centroids_;
  std::vector<Node> nodes_;
};

// Moller-Trumbore ray/triangle test; returns the ray parameter or -1.
double intersect_triangle(const Ray& ray, const Point3& a, const Point3& b, const Point3& c);

// Rays of one camera at camera_radius * dir aimed at the origin.
std::vector<Ray> camera_rays(const Vec3& dir, const RaycastConfig& cfg);

// First-intersection samples for every camera ray. Output is ordered by
// (camera, ray) and deduplicated within 1e-9. Throws NoHits.
SurfacePointCloud raycast_sample(const TriangleMesh& mesh, std::span<const Vec3> camera_dirs,
                                 const RaycastConfig& cfg = {});

// Disjoint uniform-random subsamples. Throws InsufficientPoints.
std::pair<SurfacePointCloud, SurfacePointCloud> split_train_test(const SurfacePointCloud& cloud, std::size_t n_train,
                                                                 std::size_t n_test, std::uint64_t seed);

// Index form of split_train_test.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, std::size_t n_train,
                                                                            std::size_t n_test, std::uint64_t seed);

// Uniform random subsample without replacement (identity if n >= size).
SurfacePointCloud subsample(const SurfacePointCloud& cloud, std::size_t n, std::uint64_t seed);

}  // namespace gpshape
