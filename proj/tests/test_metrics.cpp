#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "gpshape/error.h"
#include "gpshape/metrics.h"

using namespace gpshape;

namespace {

std::vector<Point3> random_cloud(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Point3> out;
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(u(rng), u(rng), u(rng));
  return out;
}

double brute_min_sq(const Point3& p, const std::vector<Point3>& set) {
  double best = 1e300;
  for (const auto& q : set) best = std::min(best, (p - q).squaredNorm());
  return best;
}

// O(n^2) rank: 1 + #smaller + (#equal - 1) / 2.
std::vector<double> brute_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (double v : x) less += v < x[i], equal += v == x[i];
    r[i] = 1 + less + (equal - 1) / 2;
  }
  return r;
}

double brute_pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i] / n, mb += b[i] / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

}  // namespace

TEST(Metrics, ChamferPrecisionRecallMatchBruteForce) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> size(1, 500);
  for (int trial = 0; trial < 50; ++trial) {
    const auto gt = random_cloud(rng, size(rng));
    const auto est = random_cloud(rng, size(rng));
    const double tau = 0.1;
    double a = 0, b = 0, hit_est = 0, hit_gt = 0;
    for (const auto& g : gt) {
      const double d = brute_min_sq(g, est);
      a += d;
      hit_gt += std::sqrt(d) < tau;
    }
    for (const auto& e : est) {
      const double d = brute_min_sq(e, gt);
      b += d;
      hit_est += std::sqrt(d) < tau;
    }
    const double want = a / gt.size() + b / est.size();
    EXPECT_NEAR(chamfer(gt, est), want, 1e-12 * std::max(1.0, want));
    const ShapeMetrics m = precision_recall_f(gt, est, tau);
    const double p = hit_est / est.size(), r = hit_gt / gt.size();
    EXPECT_NEAR(m.precision, p, 1e-12);
    EXPECT_NEAR(m.recall, r, 1e-12);
    EXPECT_NEAR(m.fscore, p + r > 0 ? 2 * p * r / (p + r) : 0.0, 1e-12);
    EXPECT_NEAR(m.chamfer, want, 1e-12 * std::max(1.0, want));
    EXPECT_EQ(m.n_gt, gt.size());
    EXPECT_EQ(m.n_est, est.size());
  }
}

TEST(Metrics, PrecisionIsStrict) {
  const std::vector<Point3> gt = {{0, 0, 0}};
  const std::vector<Point3> est = {{0.5, 0, 0}};
  EXPECT_EQ(precision_recall_f(gt, est, 0.5).precision, 0.0);
  EXPECT_EQ(precision_recall_f(gt, est, 0.5000001).precision, 1.0);
  EXPECT_EQ(fscore(0.0, 0.0), 0.0);
}

TEST(Metrics, AddMatchesBruteForce) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto pts = random_cloud(rng, 1 + trial * 9);
    const RigidTransform a(axis_angle(Vec3(g(rng), g(rng), g(rng)), g(rng)), Vec3(g(rng), g(rng), g(rng)));
    const RigidTransform b(axis_angle(Vec3(g(rng), g(rng), g(rng)), g(rng)), Vec3(g(rng), g(rng), g(rng)));
    double want = 0;
    for (const auto& p : pts) {
      const Point3 pa = a.rotation() * p + a.translation(), pb = b.rotation() * p + b.translation();
      want += (pa - pb).norm();
    }
    want /= pts.size();
    EXPECT_NEAR(add_metric(pts, a, b), want, 1e-12 * std::max(1.0, want));
  }
  EXPECT_EQ(add_metric(random_cloud(rng, 5), RigidTransform::identity(), RigidTransform::identity()), 0.0);
}

TEST(Metrics, SpearmanMatchesBruteForce) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> small(0, 9), size(3, 500);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = size(rng);
    std::vector<double> x, y;
    for (int i = 0; i < n; ++i) {
      // Half the instances carry heavy ties.
      x.push_back(trial % 2 ? small(rng) : g(rng));
      y.push_back(trial % 2 ? small(rng) + 0.1 * x.back() : x.back() + g(rng));
    }
    const auto rx = brute_ranks(x);
    EXPECT_EQ(average_ranks(x), rx);
    EXPECT_NEAR(spearman(x, y), brute_pearson(rx, brute_ranks(y)), 1e-12);
  }
}

TEST(Metrics, SpearmanKnownValuesAndErrors) {
  const std::vector<double> a = {1, 2, 3, 4, 5}, b = {5, 6, 7, 8, 7}, c = {5, 4, 3, 2, 1};
  EXPECT_NEAR(spearman(a, c), -1.0, 1e-15);
  EXPECT_NEAR(spearman(a, b), 0.8207826816681233, 1e-12);
  EXPECT_EQ(code_of([&] { spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2}); }),
            ErrorCode::LengthMismatch);
  EXPECT_EQ(code_of([&] { spearman(a, std::vector<double>{1, 2, 3}); }), ErrorCode::LengthMismatch);
  EXPECT_EQ(code_of([&] { spearman(a, std::vector<double>{2, 2, 2, 2, 2}); }), ErrorCode::DegenerateVariance);
}

TEST(Metrics, NnBaselineMatchesBruteForce) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> size(1, 500);
  for (int trial = 0; trial < 50; ++trial) {
    const auto train = random_cloud(rng, size(rng));
    const auto test = random_cloud(rng, size(rng));
    double want = 0;
    for (const auto& p : test) want += std::sqrt(brute_min_sq(p, train));
    want /= test.size();
    EXPECT_NEAR(nn_baseline_eval(train, test), want, 1e-12);
  }
}

TEST(Metrics, Errors) {
  const std::vector<Point3> empty, one = {{0, 0, 0}};
  EXPECT_EQ(code_of([&] { chamfer(empty, one); }), ErrorCode::EmptyCloud);
  EXPECT_EQ(code_of([&] { precision_recall_f(one, one, 0.0); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([&] { nn_baseline_eval(empty, one); }), ErrorCode::EmptyCloud);
}
