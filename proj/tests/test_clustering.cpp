#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "gpshape/clustering.h"
#include "gpshape/error.h"
#include "support/shapes.h"

using namespace gpshape;

namespace {

SurfacePointCloud sphere_cloud(std::size_t n, std::uint64_t seed) {
  SurfacePointCloud c;
  c.points = shapes::random_sphere_points(n, seed);
  return c;
}

double inertia(const SurfacePointCloud& cloud, const ClusterAssignment& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    s += (cloud.points[i] - a.reference_points[a.labels[i]].center).squaredNorm();
  }
  return s;
}

}  // namespace

TEST(KMeans, SeparatedBlobsRecovered) {
  SurfacePointCloud c;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 0.01);
  const std::vector<Point3> centers = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}};
  for (int i = 0; i < 300; ++i) c.points.push_back(centers[i % 3] + Vec3(g(rng), g(rng), g(rng)));
  KMeansConfig cfg;
  cfg.k = 3;
  const auto a = kmeans(c, cfg);
  ASSERT_EQ(a.k(), 3u);
  for (const auto& want : centers) {
    double best = 1e9;
    for (const auto& r : a.reference_points) best = std::min(best, (r.center - want).norm());
    EXPECT_LT(best, 0.005);
  }
  for (std::size_t i = 0; i < 300; i += 3) {
    EXPECT_EQ(a.labels[i], a.labels[i % 3]);
  }
}

TEST(KMeans, InertiaNonIncreasing) {
  const auto c = sphere_cloud(2000, 2);
  KMeansConfig cfg;
  cfg.k = 8;
  KMeansTrace trace;
  const auto a = kmeans(c, cfg, &trace);
  ASSERT_GE(trace.inertia.size(), 2u);
  for (std::size_t i = 1; i < trace.inertia.size(); ++i) {
    EXPECT_LE(trace.inertia[i], trace.inertia[i - 1] * (1 + 1e-12));
  }
  EXPECT_NEAR(trace.inertia.back(), inertia(c, a), 1e-9 * trace.inertia.back());
}

TEST(KMeans, PartitionIsNearestCenterAndMembershipsMatch) {
  const auto c = sphere_cloud(1000, 3);
  KMeansConfig cfg;
  cfg.k = 6;
  const auto a = kmeans(c, cfg);
  std::size_t total = 0;
  for (std::size_t k = 0; k < a.k(); ++k) {
    EXPECT_TRUE(std::is_sorted(a.memberships[k].begin(), a.memberships[k].end()));
    for (auto i : a.memberships[k]) EXPECT_EQ(a.labels[i], k);
    total += a.memberships[k].size();
    EXPECT_EQ(a.reference_points[k].index, k);
    EXPECT_TRUE(a.q_matrices[k].isIdentity());
  }
  EXPECT_EQ(total, c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t k = 0; k < a.k(); ++k) {
      const double d = (c.points[i] - a.reference_points[k].center).squaredNorm();
      if (d < best) best = d, arg = k;
    }
    EXPECT_EQ(a.labels[i], arg);
  }
}

TEST(KMeans, DeterministicPerSeed) {
  const auto c = sphere_cloud(800, 4);
  KMeansConfig cfg;
  cfg.k = 5;
  cfg.seed = 11;
  const auto a = kmeans(c, cfg), b = kmeans(c, cfg);
  for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(a.reference_points[k].center, b.reference_points[k].center);
  EXPECT_EQ(a.labels, b.labels);
}

TEST(KMeans, KOneIsCentroid) {
  const auto c = sphere_cloud(500, 5);
  KMeansConfig cfg;
  cfg.k = 1;
  const auto a = kmeans(c, cfg);
  Point3 mean = Point3::Zero();
  for (const auto& p : c.points) mean += p;
  mean /= 500.0;
  EXPECT_LT((a.reference_points[0].center - mean).norm(), 1e-12);
}

TEST(KMeans, InvalidK) {
  const auto c = sphere_cloud(10, 6);
  for (std::size_t k : {std::size_t{0}, std::size_t{11}}) {
    KMeansConfig cfg;
    cfg.k = k;
    try {
      kmeans(c, cfg);
      FAIL() << k;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidK);
    }
  }
}

TEST(Overlap, RuleMatchesDefinition) {
  const auto c = sphere_cloud(1500, 7);
  KMeansConfig cfg;
  cfg.k = 6;
  const auto a = kmeans(c, cfg);
  const double rho = 0.15;
  const auto o = apply_overlap(a, c, rho);
  for (std::size_t l = 0; l < o.k(); ++l) {
    std::vector<std::size_t> want;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const double dn = (c.points[i] - a.reference_points[a.labels[i]].center).norm();
      if ((c.points[i] - a.reference_points[l].center).norm() <= (1 + rho) * dn) want.push_back(i);
    }
    EXPECT_EQ(o.memberships[l], want);
    EXPECT_GE(o.memberships[l].size(), a.memberships[l].size());
  }
  const auto zero = apply_overlap(a, c, 0.0);
  EXPECT_EQ(zero.memberships, a.memberships);
}

TEST(Manual, NearestCenterAndDuplicates) {
  const auto c = sphere_cloud(400, 8);
  const std::vector<Point3> centers = {{0, 0, 0.5}, {0, 0, -0.5}};
  const auto a = manual_reference_points(c, centers);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(a.labels[i], c.points[i].z() >= 0 ? 0u : 1u);
  EXPECT_EQ(nearest_center(a.reference_points, Point3(0, 0, 0)), 0u);
  try {
    manual_reference_points(c, {{0, 0, 0}, {0, 0, 0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateCenters);
  }
}

TEST(Manual, NearSurfaceWarning) {
  const auto c = sphere_cloud(400, 9);
  const auto a = manual_reference_points(c, {c.points[0], Point3::Zero()});
  EXPECT_EQ(warn_near_surface_centers(a, c), std::vector<std::size_t>{0});
}
