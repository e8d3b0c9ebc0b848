#include "gpshape/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gpshape/error.h"
#include "gpshape/kdtree.h"
#include "gpshape/mesh_io.h"
#include "gpshape/numeric.h"
#include "gpshape/parallel.h"

namespace gpshape {

namespace {

void require_points(std::span<const Point3> pts, const char* what) {
  if (pts.empty()) throw Error(ErrorCode::EmptyCloud, std::string(what) + " is empty");
}

double mean(std::span<const double> v) { return pairwise_sum(v) / static_cast<double>(v.size()); }

}  // namespace

std::vector<double> nearest_squared_distances(std::span<const Point3> queries, std::span<const Point3> target) {
  require_points(target, "target cloud");
  const KdTree tree(target);
  std::vector<double> out(queries.size());
  parallel_for(queries.size(), [&](std::size_t i) { out[i] = tree.nearest(queries[i]).squared_distance; });
  return out;
}

double chamfer(std::span<const Point3> gt, std::span<const Point3> est) {
  require_points(gt, "ground-truth cloud");
  require_points(est, "estimated cloud");
  const auto g2e = nearest_squared_distances(gt, est);
  const auto e2g = nearest_squared_distances(est, gt);
  return mean(g2e) + mean(e2g);
}

double fscore(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

ShapeMetrics precision_recall_f(std::span<const Point3> gt, std::span<const Point3> est, double tau) {
  require_points(gt, "ground-truth cloud");
  require_points(est, "estimated cloud");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw Error(ErrorCode::InvalidArgument, "tau must be finite and > 0");
  const auto g2e = nearest_squared_distances(gt, est);
  const auto e2g = nearest_squared_distances(est, gt);
  const double tau2 = tau * tau;
  const auto within = [tau2](const std::vector<double>& d) {
    return static_cast<double>(std::count_if(d.begin(), d.end(), [tau2](double x) { return x < tau2; }));
  };
  ShapeMetrics m;
  m.tau = tau;
  m.n_gt = gt.size();
  m.n_est = est.size();
  m.precision = within(e2g) / static_cast<double>(est.size());
  m.recall = within(g2e) / static_cast<double>(gt.size());
  m.fscore = fscore(m.precision, m.recall);
  m.chamfer = mean(g2e) + mean(e2g);
  return m;
}

double add_metric(std::span<const Point3> model_points, const RigidTransform& gt, const RigidTransform& est) {
  require_points(model_points, "model point set");
  std::vector<double> d(model_points.size());
  for (std::size_t i = 0; i < model_points.size(); ++i) {
    d[i] = (gt.apply(model_points[i]) - est.apply(model_points[i])).norm();
  }
  return mean(d);
}

std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && xs[order[j]] == xs[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = rank;
    i = j;
  }
  return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw Error(ErrorCode::LengthMismatch, "spearman inputs differ in length");
  if (xs.size() < 3) throw Error(ErrorCode::LengthMismatch, "spearman needs at least 3 pairs");
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const double mx = mean(rx);
  const double my = mean(ry);
  std::vector<double> sxy(rx.size()), sxx(rx.size()), syy(rx.size());
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy[i] = (rx[i] - mx) * (ry[i] - my);
    sxx[i] = (rx[i] - mx) * (rx[i] - mx);
    syy[i] = (ry[i] - my) * (ry[i] - my);
  }
  const double vx = pairwise_sum(sxx);
  const double vy = pairwise_sum(syy);
  if (!(vx > 0.0) || !(vy > 0.0)) throw Error(ErrorCode::DegenerateVariance, "constant ranks in spearman input");
  return pairwise_sum(sxy) / std::sqrt(vx * vy);
}

double nn_baseline_eval(std::span<const Point3> train, std::span<const Point3> test) {
  require_points(train, "train cloud");
  require_points(test, "test cloud");
  auto d = nearest_squared_distances(test, train);
  for (auto& x : d) x = std::sqrt(x);
  return mean(d);
}

std::string to_json(const ShapeMetrics& m) {
  return "{\"chamfer\": " + io::format_double(m.chamfer) + ", \"precision\": " + io::format_double(m.precision) +
         ", \"recall\": " + io::format_double(m.recall) + ", \"fscore\": " + io::format_double(m.fscore) +
         ", \"tau\": " + io::format_double(m.tau) + ", \"n_gt\": " + std::to_string(m.n_gt) +
         ", \"n_est\": " + std::to_string(m.n_est) + "}";
}

}  // namespace gpshape
