#include "gpshape/clustering.h"

#include <algorithm>
#include <limits>
#include <random>

#include "gpshape/error.h"
#include "gpshape/kdtree.h"
#include "gpshape/log.h"
#include "gpshape/parallel.h"

namespace gpshape {

namespace {

std::vector<ReferencePoint> make_refs(const std::vector<Point3>& centers) {
  std::vector<ReferencePoint> refs;
  refs.reserve(centers.size());
  for (std::size_t i = 0; i < centers.size(); ++i) refs.push_back({centers[i], i});
  return refs;
}

ClusterAssignment partition(const SurfacePointCloud& points, std::vector<ReferencePoint> refs) {
  ClusterAssignment out;
  out.reference_points = std::move(refs);
  out.q_matrices.assign(out.reference_points.size(), Mat3::Identity());
  out.memberships.assign(out.reference_points.size(), {});
  out.labels.resize(points.size());
  parallel_for(points.size(), [&](std::size_t i) { out.labels[i] = nearest_center(out.reference_points, points.points[i]); });
  for (std::size_t i = 0; i < points.size(); ++i) out.memberships[out.labels[i]].push_back(i);
  return out;
}

std::vector<Point3> kmeanspp_init(const std::vector<Point3>& pts, std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = pts.size();
  std::vector<Point3> centers;
  centers.reserve(k);
  std::vector<char> chosen(n, 0);
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  std::size_t idx = first(rng);
  centers.push_back(pts[idx]);
  chosen[idx] = 1;

  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = (pts[i] - centers[0]).squaredNorm();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += chosen[i] ? 0.0 : d2[i];
    std::size_t pick = n;
    if (total > 0.0) {
      double target = unit(rng) * total;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i]) continue;
        target -= d2[i];
        pick = i;
        if (target < 0.0) break;
      }
    } else {
      // All remaining points coincide with a center.
      for (std::size_t i = 0; i < n && pick == n; ++i) {
        if (!chosen[i]) pick = i;
      }
    }
    chosen[pick] = 1;
    centers.push_back(pts[pick]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], (pts[i] - pts[pick]).squaredNorm());
  }
  return centers;
}

}  // namespace

std::size_t nearest_center(const std::vector<ReferencePoint>& refs, const Point3& p) {
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < refs.size(); ++k) {
    const double d2 = (p - refs[k].center).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = k;
    }
  }
  return best;
}

ClusterAssignment kmeans(const SurfacePointCloud& points, const KMeansConfig& cfg, KMeansTrace* trace) {
  const std::size_t n = points.size();
  const std::size_t k = cfg.k;
  if (k < 1 || k > n) {
    throw Error(ErrorCode::InvalidK, "k = " + std::to_string(k) + " with " + std::to_string(n) + " points");
  }
  const auto& pts = points.points;
  std::mt19937_64 rng(cfg.seed);
  std::vector<Point3> centers = kmeanspp_init(pts, k, rng);
  std::vector<std::size_t> labels(n, 0);
  std::vector<double> d2(n, 0.0);

  for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
    const auto refs = make_refs(centers);
    parallel_for(n, [&](std::size_t i) {
      labels[i] = nearest_center(refs, pts[i]);
      d2[i] = (pts[i] - centers[labels[i]]).squaredNorm();
    });
    if (trace) {
      double inertia = 0.0;
      for (double v : d2) inertia += v;
      trace->inertia.push_back(inertia);
    }

    std::vector<Point3> sums(k, Point3::Zero());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums[labels[i]] += pts[i];
      ++counts[labels[i]];
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      Point3 next;
      if (counts[c] == 0) {
        // Re-seed at the point farthest from its current center.
        std::size_t far = 0;
        for (std::size_t i = 1; i < n; ++i) {
          if (d2[i] > d2[far]) far = i;
        }
        next = pts[far];
        d2[far] = 0.0;
        if (trace) ++trace->reseeded;
        logger()->info("kmeans: cluster {} empty at iteration {}, re-seeded at point {}", c, iter, far);
      } else {
        next = sums[c] / static_cast<double>(counts[c]);
      }
      shift = std::max(shift, (next - centers[c]).norm());
      centers[c] = next;
    }
    if (shift < cfg.tolerance) break;
  }

  auto out = partition(points, make_refs(centers));
  if (trace) {
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) inertia += (pts[i] - centers[out.labels[i]]).squaredNorm();
    trace->inertia.push_back(inertia);
  }
  return out;
}

ClusterAssignment apply_overlap(const ClusterAssignment& assignment, const SurfacePointCloud& points, double rho) {
  if (!(rho >= 0.0)) throw Error(ErrorCode::InvalidArgument, "overlap rho must be >= 0");
  if (rho == 0.0) return assignment;
  ClusterAssignment out = assignment;
  const auto& refs = assignment.reference_points;
  const double factor = 1.0 + rho;
  for (auto& m : out.memberships) m.clear();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point3& p = points.points[i];
    const std::size_t own = assignment.labels[i];
    const double d_own = (p - refs[own].center).norm();
    for (std::size_t l = 0; l < refs.size(); ++l) {
      if (l == own || (p - refs[l].center).norm() <= factor * d_own) out.memberships[l].push_back(i);
    }
  }
  return out;
}

ClusterAssignment manual_reference_points(const SurfacePointCloud& points, const std::vector<Point3>& centers) {
  if (centers.empty()) throw Error(ErrorCode::InvalidK, "no reference points given");
  for (std::size_t a = 0; a < centers.size(); ++a) {
    if (!centers[a].allFinite()) throw Error(ErrorCode::InvalidArgument, "non-finite reference point");
    for (std::size_t b = a + 1; b < centers.size(); ++b) {
      if ((centers[a] - centers[b]).norm() < 1e-12) {
        throw Error(ErrorCode::DuplicateCenters, "reference points " + std::to_string(a) + " and " +
                                                     std::to_string(b) + " coincide");
      }
    }
  }
  return partition(points, make_refs(centers));
}

std::vector<std::size_t> warn_near_surface_centers(const ClusterAssignment& assignment,
                                                   const SurfacePointCloud& points, double threshold) {
  std::vector<std::size_t> flagged;
  if (points.empty()) return flagged;
  const KdTree tree(points.points);
  for (const auto& ref : assignment.reference_points) {
    const double d = std::sqrt(tree.nearest(ref.center).squared_distance);
    if (d < threshold) {
      flagged.push_back(ref.index);
      logger()->warn("reference point {} lies {:.3g} from the training surface; its distance field may degrade",
                     ref.index, d);
    }
  }
  return flagged;
}

}  // namespace gpshape
