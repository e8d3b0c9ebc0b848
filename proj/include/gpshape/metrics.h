#pragma once

#include <span>
#include <string>
#include <vector>

#include "gpshape/geometry.h"

namespace gpshape {

struct ShapeMetrics {
  double chamfer = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double fscore = 0.0;
  double tau = 0.0;
  std::size_t n_gt = 0;
  std::size_t n_est = 0;
};

// Squared distance from every query point to its nearest neighbor in `target`.
std::vector<double> nearest_squared_distances(std::span<const Point3> queries, std::span<const Point3> target);

// mean_gt min_est |g - e|^2 + mean_est min_gt |e - g|^2. Throws EmptyCloud.
double chamfer(std::span<const Point3> gt, std::span<const Point3> est);

// Precision: share of est within tau of gt. Recall: share of gt within tau of
// est. Both strict (< tau). Also fills chamfer. Throws EmptyCloud and
// InvalidArgument for tau <= 0.
ShapeMetrics precision_recall_f(std::span<const Point3> gt, std::span<const Point3> est, double tau);

double fscore(double precision, double recall);

// Mean |T_gt p - T_est p|. Throws EmptyCloud.
double add_metric(std::span<const Point3> model_points, const RigidTransform& gt, const RigidTransform& est);

// Ranks starting at 1, ties receive their average rank.
std::vector<double> average_ranks(std::span<const double> xs);

// Pearson correlation of average ranks. Throws LengthMismatch (also for
// fewer than 3 values) and DegenerateVariance.
double spearman(std::span<const double> xs, std::span<const double> ys);

// Mean distance from each test point to its nearest train point. Throws EmptyCloud.
double nn_baseline_eval(std::span<const Point3> train, std::span<const Point3> test);

std::string to_json(const ShapeMetrics& m);

}  // namespace gpshape
