#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "gpshape/geometry.h"

namespace gpshape {

enum class KernelKind { RationalQuadratic, Rbf, Matern52, Periodic, Linear, Polynomial };

// How two direction parameter vectors are compared.
//  AngleParams: raw (phi, theta) coordinates.
//  BearingEuclidean: bearing vectors u(phi, theta) in R^3.
enum class DistanceMode { AngleParams, BearingEuclidean };

std::string_view to_string(KernelKind kind);
std::string_view to_string(DistanceMode mode);
// Throw InvalidArgument on unknown names.
KernelKind parse_kernel_kind(std::string_view name);
DistanceMode parse_distance_mode(std::string_view name);

inline constexpr KernelKind kAllKernelKinds[] = {KernelKind::RationalQuadratic, KernelKind::Rbf,
                                                 KernelKind::Matern52,          KernelKind::Periodic,
                                                 KernelKind::Linear,            KernelKind::Polynomial};

// Kernel hyperparameters are stored as logs. Stationary kernels have unit
// signal variance.
//
//   rbf        exp(-r^2 / 2l^2)
//   rq         (1 + r^2 / (2 alpha l^2))^-alpha
//   matern52   (1 + s + s^2/3) exp(-s),  s = sqrt(5) r / l
//   periodic   exp(-2 sum_d sin^2(pi |x_d - y_d| / p) / l^2)
//   linear     x.y / l^2
//   polynomial (x.y / l^2 + c)^3
struct KernelConfig {
  KernelKind kind = KernelKind::RationalQuadratic;
  DistanceMode distance_mode = DistanceMode::BearingEuclidean;
  double log_lengthscale = 0.0;
  double log_alpha = 0.0;   // rq
  double log_period = 0.0;  // periodic
  double log_offset = 0.0;  // polynomial
  double log_noise = -9.21034037197618;  // observation noise variance, log(1e-4)

  double noise() const;
};

// Optimizable log-hyperparameters in a fixed order: kernel parameters of the
// kind, then log_noise last.
std::vector<std::string> hyperparameter_names(KernelKind kind);
Eigen::VectorXd pack_hyperparameters(const KernelConfig& cfg);
KernelConfig unpack_hyperparameters(const KernelConfig& base, const Eigen::VectorXd& values);

// Kernel input features: one column per input, 2 rows for AngleParams and 3
// for BearingEuclidean.
Eigen::MatrixXd kernel_features(const std::vector<DirectionParams>& inputs, DistanceMode mode);
Eigen::VectorXd kernel_feature(const DirectionParams& psi, DistanceMode mode);

// k(x, y) on feature vectors (no noise term).
double kernel_value(const KernelConfig& cfg, const Eigen::Ref<const Eigen::VectorXd>& x,
                    const Eigen::Ref<const Eigen::VectorXd>& y);

// k(x, y) and its derivatives with respect to the kernel's log-parameters
// (same order as hyperparameter_names, without noise).
double kernel_value_and_gradient(const KernelConfig& cfg, const Eigen::Ref<const Eigen::VectorXd>& x,
                                 const Eigen::Ref<const Eigen::VectorXd>& y, Eigen::Ref<Eigen::VectorXd> grad);

// k(psi_i, psi_j) on direction parameter vectors.
double kernel_eval(const KernelConfig& cfg, const DirectionParams& psi_i, const DirectionParams& psi_j);

// Gram matrix K(X, X) without noise.
Eigen::MatrixXd gram_matrix(const KernelConfig& cfg, const Eigen::MatrixXd& features);

bool is_stationary(KernelKind kind);

// True for kernels that depend on the inputs only through |x - y|^2
// (rbf, rq, matern).
bool is_isotropic(KernelKind kind);

// Value of an isotropic kernel at squared distance r2.
double isotropic_kernel(const KernelConfig& cfg, double r2);

}  // namespace gpshape
