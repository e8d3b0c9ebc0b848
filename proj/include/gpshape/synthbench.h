#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "gpshape/geometry.h"
#include "gpshape/shape_template.h"

namespace gpshape {

// Gaussian-mixture pixel noise: outlier with probability outlier_prob, then a
// zero-mean isotropic displacement with the matching sigma (pixels).
struct NoiseModel {
  double sigma_inlier = 2.0;
  double sigma_outlier = 15.0;
  double outlier_prob = 0.0;
  std::uint64_t seed = 0;
};

struct NoisyPixels {
  std::vector<Pixel> pixels;
  std::vector<bool> outlier;
};

NoisyPixels inject_noise(std::span<const Pixel> pixels, const NoiseModel& model);

// R = Rz(yaw) * Ry(pitch) * Rx(roll), radians.
Mat3 euler_zyx(double yaw, double pitch, double roll);

// Rotation from Z-Y-X Euler angles (radians), translation (0, 0, distance).
// Throws InvalidArgument for distance <= 0.
RigidTransform generate_gt_pose(double yaw, double pitch, double roll, double distance);

struct SweepConfig {
  std::size_t n_points = 500;
  std::vector<double> yaw_deg{-60.0, -30.0, 0.0, 30.0, 60.0};
  std::vector<double> pitch_deg{-60.0, -30.0, 0.0, 30.0, 60.0};
  std::vector<double> roll_deg{0.0};
  // Normalized model units; the object spans the unit ball.
  std::vector<double> distances{3.0, 4.0, 5.0};
  std::vector<double> outlier_probs{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<double> sigma_outliers{10.0, 20.0, 40.0};
  double sigma_inlier = 2.0;
  std::size_t trials = 5;
  std::uint64_t seed = 0;
  CameraIntrinsics intrinsics;
  // Margin for the per-trial bound column, normalized units.
  double delta = 0.02;
  bool ransac = false;

  // Throws InvalidConfig for empty grids or out-of-range values.
  void validate() const;
  std::size_t n_cells() const;
};

// Missing keys keep their defaults; unknown keys and bad values throw
// InvalidConfig, malformed JSON throws Parse.
SweepConfig sweep_config_from_json(const std::string& text);
std::string to_json(const SweepConfig& cfg);

struct SweepRow {
  std::string object;
  double yaw = 0.0;  // degrees
  double pitch = 0.0;
  double roll = 0.0;
  double dist = 0.0;
  double outlier_prob = 0.0;
  double sigma_o = 0.0;
  std::size_t trial = 0;
  double add = 0.0;
  double confidence = 0.0;
  double bound = 0.0;
  bool pnp_failed = false;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double spearman = 0.0;  // NaN when undefined
  std::size_t n_trials = 0;
  std::size_t failures = 0;
  bool interrupted = false;
};

struct SweepHooks {
  // Called with each completed batch of rows, in row order.
  std::function<void(std::span<const SweepRow>)> on_rows;
  // Checked between batches; when set the sweep stops early.
  const std::atomic<bool>* cancel = nullptr;
};

// Model points are in the template's input units; they are normalized with
// the template normalization and subsampled to cfg.n_points. Rows come back
// ordered by (cell, trial).
SweepResult run_sweep(const ShapeTemplate& tmpl, std::span<const Point3> model_points, const SweepConfig& cfg,
                      const std::string& object = "object", const SweepHooks* hooks = nullptr);

std::string sweep_csv_header();
void write_sweep_rows(std::ostream& os, std::span<const SweepRow> rows);

struct NoiseCell {
  double sigma_o = 0.0;
  double outlier_prob = 0.0;
  double mean_confidence = 0.0;
  double standard_error = 0.0;
  std::size_t n = 0;
};

// Mean confidence of non-failed trials per (sigma_o, outlier_prob), sorted by
// sigma_o then outlier_prob.
std::vector<NoiseCell> confidence_by_noise(const std::vector<SweepRow>& rows);

// True when for each sigma_o the cell mean does not rise between consecutive
// outlier probabilities by more than z combined standard errors.
bool confidence_non_increasing(const std::vector<NoiseCell>& cells, double z = 3.0);

}  // namespace gpshape
