#include "gpshape/dataprep.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <unordered_map>

#include "gpshape/error.h"
#include "gpshape/log.h"
#include "gpshape/parallel.h"

namespace gpshape {

namespace {

constexpr double kGoldenAngle = std::numbers::pi * (3.0 - 2.2360679774997896964);  // pi (3 - sqrt 5)
constexpr double kDedupTolerance = 1e-9;
constexpr std::uint32_t kLeafSize = 4;

struct CellKey {
  std::int64_t x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    std::uint64_t h = 1469598103934665603ull;
    for (std::int64_t v : {k.x, k.y, k.z}) {
      h ^= static_cast<std::uint64_t>(v);
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};

// Removes points within kDedupTolerance of an earlier point; keeps order.
std::vector<Point3> dedup_ordered(std::vector<Point3> pts) {
  constexpr double cell = 1e-6;
  std::unordered_map<CellKey, std::vector<std::size_t>, CellHash> grid;
  std::vector<Point3> out;
  out.reserve(pts.size());
  for (const auto& p : pts) {
    const CellKey key{static_cast<std::int64_t>(std::floor(p.x() / cell)),
                      static_cast<std::int64_t>(std::floor(p.y() / cell)),
                      static_cast<std::int64_t>(std::floor(p.z() / cell))};
    bool duplicate = false;
    for (int dx = -1; dx <= 1 && !duplicate; ++dx) {
      for (int dy = -1; dy <= 1 && !duplicate; ++dy) {
        for (int dz = -1; dz <= 1 && !duplicate; ++dz) {
          auto it = grid.find({key.x + dx, key.y + dy, key.z + dz});
          if (it == grid.end()) continue;
          for (std::size_t idx : it->second) {
            if ((out[idx] - p).norm() <= kDedupTolerance) {
              duplicate = true;
              break;
            }
          }
        }
      }
    }
    if (duplicate) continue;
    grid[key].push_back(out.size());
    out.push_back(p);
  }
  return out;
}

bool ray_box(const Ray& ray, const Vec3& inv_dir, const Eigen::AlignedBox3d& box, double t_max) {
  double t0 = 0.0;
  double t1 = t_max;
  for (int a = 0; a < 3; ++a) {
    double near = (box.min()[a] - ray.origin[a]) * inv_dir[a];
    double far = (box.max()[a] - ray.origin[a]) * inv_dir[a];
    if (near > far) std::swap(near, far);
    // NaN from 0 * inf means the ray is parallel and on the slab boundary.
    if (std::isnan(near)) near = -std::numeric_limits<double>::infinity();
    if (std::isnan(far)) far = std::numeric_limits<double>::infinity();
    t0 = std::max(t0, near);
    t1 = std::min(t1, far);
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace

void TriangleMesh::validate() const {
  for (const auto& f : faces) {
    for (auto idx : f) {
      if (idx >= vertices.size()) throw Error(ErrorCode::InvalidArgument, "face index out of range");
    }
  }
}

Normalization Normalization::then(const Normalization& next) const {
  return {center + next.center / scale, scale * next.scale};
}

Normalization unit_sphere_normalization(std::span<const Point3> points) {
  if (points.empty()) throw Error(ErrorCode::EmptyCloud, "cannot normalize an empty cloud");
  Eigen::AlignedBox3d box;
  for (const auto& p : points) box.extend(p);
  const Point3 center = box.center();
  double max_r = 0.0;
  for (const auto& p : points) max_r = std::max(max_r, (p - center).norm());
  if (!(max_r > 1e-12) || !std::isfinite(max_r)) {
    throw Error(ErrorCode::DegenerateExtent, "cloud has zero extent");
  }
  return {center, 1.0 / max_r};
}

SurfacePointCloud normalize_unit_sphere(const SurfacePointCloud& cloud) {
  const Normalization step = unit_sphere_normalization(cloud.points);
  SurfacePointCloud out;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(step.apply(p));
  out.normalization = cloud.normalization.then(step);
  return out;
}

TriangleMesh normalize_mesh(const TriangleMesh& mesh, Normalization* applied) {
  const Normalization step = unit_sphere_normalization(mesh.vertices);
  TriangleMesh out = mesh;
  for (auto& v : out.vertices) v = step.apply(v);
  if (applied) *applied = step;
  return out;
}

std::vector<Vec3> fibonacci_directions(std::size_t n) {
  std::vector<Vec3> dirs;
  dirs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(n);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double a = kGoldenAngle * static_cast<double>(i);
    dirs.push_back(Vec3(r * std::cos(a), r * std::sin(a), z).normalized());
  }
  return dirs;
}

double intersect_triangle(const Ray& ray, const Point3& a, const Point3& b, const Point3& c) {
  constexpr double eps = 1e-14;
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 pvec = ray.direction.cross(e2);
  const double det = e1.dot(pvec);
  if (std::abs(det) < eps) return -1.0;
  const double inv_det = 1.0 / det;
  const Vec3 tvec = ray.origin - a;
  const double u = tvec.dot(pvec) * inv_det;
  if (u < 0.0 || u > 1.0) return -1.0;
  const Vec3 qvec = tvec.cross(e1);
  const double v = ray.direction.dot(qvec) * inv_det;
  if (v < 0.0 || u + v > 1.0) return -1.0;
  const double t = e2.dot(qvec) * inv_det;
  return t > eps ? t : -1.0;
}

MeshIntersector::MeshIntersector(const TriangleMesh& mesh) : mesh_(&mesh) {
  mesh.validate();
  const auto n = static_cast<std::uint32_t>(mesh.faces.size());
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0u);
  centroids_.reserve(n);
  for (const auto& f : mesh.faces) {
    centroids_.push_back((mesh.vertices[f[0]] + mesh.vertices[f[1]] + mesh.vertices[f[2]]) / 3.0);
  }
  nodes_.reserve(2 * n / kLeafSize + 2);
  if (n > 0) build(0, n);
}

std::uint32_t MeshIntersector::build(std::uint32_t first, std::uint32_t count) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  Eigen::AlignedBox3d box;
  Eigen::AlignedBox3d centroid_box;
  for (std::uint32_t i = first; i < first + count; ++i) {
    const auto& f = mesh_->faces[order_[i]];
    for (auto v : f) box.extend(mesh_->vertices[v]);
    centroid_box.extend(centroids_[order_[i]]);
  }
  nodes_[index].box = box;
  if (count <= kLeafSize) {
    nodes_[index].first = first;
    nodes_[index].count = count;
    return index;
  }
  int axis = 0;
  centroid_box.sizes().maxCoeff(&axis);
  const std::uint32_t mid = first + count / 2;
  std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + first + count,
                   [&](std::uint32_t a, std::uint32_t b) {
                     if (centroids_[a][axis] != centroids_[b][axis]) return centroids_[a][axis] < centroids_[b][axis];
                     return a < b;
                   });
  const std::uint32_t left = build(first, mid - first);
  const std::uint32_t right = build(mid, first + count - mid);
  nodes_[index].left = left;
  nodes_[index].right = right;
  return index;
}

double MeshIntersector::hit_triangle(const Ray& ray, std::uint32_t tri) const {
  const auto& f = mesh_->faces[tri];
  return intersect_triangle(ray, mesh_->vertices[f[0]], mesh_->vertices[f[1]], mesh_->vertices[f[2]]);
}

double MeshIntersector::first_hit(const Ray& ray) const {
  if (nodes_.empty()) return -1.0;
  const Vec3 inv_dir = ray.direction.cwiseInverse();
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::uint32_t> stack{0};
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    if (!ray_box(ray, inv_dir, node.box, best)) continue;
    if (node.count > 0) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const double t = hit_triangle(ray, order_[i]);
        if (t > 0.0 && t < best) best = t;
      }
    } else {
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
  }
  return std::isfinite(best) ? best : -1.0;
}

std::vector<Ray> camera_rays(const Vec3& dir, const RaycastConfig& cfg) {
  const Vec3 d = dir.normalized();
  const Point3 origin = cfg.camera_radius * d;
  const Vec3 forward = -d;
  const Vec3 helper = std::abs(forward.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 right = forward.cross(helper).normalized();
  const Vec3 up = forward.cross(right);
  const double half = 0.5 * cfg.aperture_deg * std::numbers::pi / 180.0;
  const double cos_half = std::cos(half);
  const auto n = cfg.rays_per_camera;

  std::vector<Ray> rays;
  rays.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    // Sunflower pattern: uniform in solid angle over the cone.
    const double cos_a = 1.0 - (1.0 - cos_half) * (static_cast<double>(j) + 0.5) / static_cast<double>(n);
    const double sin_a = std::sqrt(std::max(0.0, 1.0 - cos_a * cos_a));
    const double az = kGoldenAngle * static_cast<double>(j);
    const Vec3 ray_dir = cos_a * forward + sin_a * (std::cos(az) * right + std::sin(az) * up);
    rays.push_back({origin, ray_dir.normalized()});
  }
  return rays;
}

SurfacePointCloud raycast_sample(const TriangleMesh& mesh, std::span<const Vec3> camera_dirs,
                                 const RaycastConfig& cfg) {
  const MeshIntersector bvh(mesh);
  const std::size_t per_camera = cfg.rays_per_camera;
  const std::size_t total = camera_dirs.size() * per_camera;

  std::vector<Point3> hits(total);
  std::vector<char> valid(total, 0);
  parallel_for(camera_dirs.size(), [&](std::size_t cam) {
    const auto rays = camera_rays(camera_dirs[cam], cfg);
    for (std::size_t j = 0; j < rays.size(); ++j) {
      const double t = bvh.first_hit(rays[j]);
      if (t > 0.0) {
        hits[cam * per_camera + j] = rays[j].origin + t * rays[j].direction;
        valid[cam * per_camera + j] = 1;
      }
    }
  });

  std::vector<Point3> ordered;
  ordered.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    if (valid[i]) ordered.push_back(hits[i]);
  }
  if (ordered.empty()) throw Error(ErrorCode::NoHits, "no camera ray hit the mesh");

  SurfacePointCloud out;
  out.points = dedup_ordered(std::move(ordered));
  logger()->debug("raycast: {} rays, {} unique hits", total, out.points.size());
  return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, std::size_t n_train,
                                                                            std::size_t n_test, std::uint64_t seed) {
  if (n_train + n_test > n) {
    throw Error(ErrorCode::InsufficientPoints, "need " + std::to_string(n_train + n_test) + " points, cloud has " +
                                                   std::to_string(n));
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first n_train + n_test slots are a uniform sample.
  const std::size_t take = n_train + n_test;
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  std::vector<std::size_t> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                                idx.begin() + static_cast<std::ptrdiff_t>(take));
  return {std::move(train), std::move(test)};
}

std::pair<SurfacePointCloud, SurfacePointCloud> split_train_test(const SurfacePointCloud& cloud, std::size_t n_train,
                                                                 std::size_t n_test, std::uint64_t seed) {
  auto [train_idx, test_idx] = split_indices(cloud.size(), n_train, n_test, seed);
  SurfacePointCloud train;
  SurfacePointCloud test;
  train.normalization = test.normalization = cloud.normalization;
  train.points.reserve(train_idx.size());
  test.points.reserve(test_idx.size());
  for (auto i : train_idx) train.points.push_back(cloud.points[i]);
  for (auto i : test_idx) test.points.push_back(cloud.points[i]);
  return {std::move(train), std::move(test)};
}

SurfacePointCloud subsample(const SurfacePointCloud& cloud, std::size_t n, std::uint64_t seed) {
  if (n >= cloud.size()) return cloud;
  return split_train_test(cloud, n, 0, seed).first;
}

}  // namespace gpshape
