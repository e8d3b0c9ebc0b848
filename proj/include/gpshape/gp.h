#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "gpshape/kernel.h"

namespace gpshape {

struct Prediction {
  double mean = 0.0;      // clamped at 0
  double variance = 0.0;  // floored at 0
};

// Diagonal jitter is jitter_factor * mean(diag K), escalated x10 from
// kJitterStart up to kJitterMax before giving up.
inline constexpr double kJitterStart = 1e-8;
inline constexpr double kJitterMax = 1e-4;

// Cholesky factor of K + (sigma^2 + jitter) I.
struct GramFactor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
  // d jitter / d mean(diag K); 0 when the jitter does not track the Gram.
  double jitter_slope = 0.0;
};

// Throws NotPositiveDefinite after the last escalation.
GramFactor factor_gram(const Eigen::MatrixXd& gram, double noise);

// Negative marginal log likelihood
//   1/2 y^T A^-1 y + 1/2 log|A| + n/2 log(2 pi),  A = K + sigma^2 I (+ jitter)
double nmll(const std::vector<DirectionParams>& inputs, const std::vector<double>& targets, const KernelConfig& cfg);

// NMLL on precomputed features together with its gradient with respect to
// pack_hyperparameters(cfg).
double nmll_and_gradient(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, const KernelConfig& cfg,
                         Eigen::VectorXd* gradient);

struct OptimizerConfig {
  std::size_t iterations = 250;
  double learning_rate = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Reduce-on-plateau schedule: lr *= factor once the loss has not improved
  // (relative threshold) for more than `patience` iterations.
  double plateau_factor = 0.1;
  std::size_t plateau_patience = 10;
  double plateau_threshold = 1e-4;
  // Log-hyperparameters are kept inside [-bound, bound].
  double log_param_bound = 20.0;
  // Divide targets by their mean absolute value before training.
  bool normalize_targets = true;
};

struct FitReport {
  double initial_nmll = 0.0;
  double final_nmll = 0.0;
  std::size_t iterations = 0;
  std::size_t lr_reductions = 0;
  bool aborted = false;
  std::vector<double> loss_history;
};

class GpModel {
 public:
  GpModel() = default;

  // Exact GP conditioned on (inputs, targets / target_scale) with fixed
  // hyperparameters. Predictions are reported in target units.
  static GpModel condition(std::vector<DirectionParams> inputs, std::vector<double> targets, const KernelConfig& cfg,
                           double target_scale = 1.0);

  Prediction predict(const DirectionParams& x) const;
  double predict_mean(const DirectionParams& x) const;

  const KernelConfig& kernel() const { return kernel_; }
  const std::vector<DirectionParams>& inputs() const { return inputs_; }
  const std::vector<double>& targets() const { return targets_; }
  double target_scale() const { return target_scale_; }
  double jitter() const { return jitter_; }
  // NMLL of the scaled targets under the conditioned hyperparameters.
  double nmll() const { return nmll_; }
  Eigen::MatrixXd cholesky_factor() const { return chol_.matrixL(); }
  const Eigen::VectorXd& alpha() const { return alpha_; }
  std::size_t size() const { return inputs_.size(); }

 private:
  Eigen::VectorXd cross_covariance(const DirectionParams& x) const;

  KernelConfig kernel_;
  std::vector<DirectionParams> inputs_;
  std::vector<double> targets_;
  double target_scale_ = 1.0;
  Eigen::MatrixXd features_;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  Eigen::VectorXd alpha_;
  double jitter_ = 0.0;
  double nmll_ = 0.0;
};

// Starting hyperparameters: lengthscale = median pairwise input distance,
// alpha = 1, period = 2 x the largest feature range, offset = 1,
// noise = 1e-4 var(targets) + 1e-8.
KernelConfig initial_hyperparameters(const std::vector<DirectionParams>& inputs, const std::vector<double>& targets,
                                     KernelKind kind, DistanceMode mode);

// Adam on the log-hyperparameters of `init`, minimizing the NMLL. Returns the
// model at the best iterate seen. Throws NotPositiveDefinite / NonFiniteLoss
// only if the starting point itself cannot be evaluated.
GpModel fit(std::vector<DirectionParams> inputs, std::vector<double> targets, const KernelConfig& init,
            const OptimizerConfig& opt = {}, FitReport* report = nullptr);

// Mean absolute target, or 1 for all-zero targets.
double target_normalizer(const std::vector<double>& targets);

}  // namespace gpshape
