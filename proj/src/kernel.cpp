#include "gpshape/kernel.h"

#include <cmath>
#include <numbers>

#include "gpshape/error.h"

namespace gpshape {

namespace {
constexpr double kSqrt5 = 2.23606797749978969641;

std::size_t kernel_param_count(KernelKind kind) {
  switch (kind) {
    case KernelKind::RationalQuadratic:
    case KernelKind::Periodic:
    case KernelKind::Polynomial:
      return 2;
    case KernelKind::Rbf:
    case KernelKind::Matern52:
    case KernelKind::Linear:
      return 1;
  }
  return 1;
}
}  // namespace

std::string_view to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::RationalQuadratic: return "rq";
    case KernelKind::Rbf: return "rbf";
    case KernelKind::Matern52: return "matern";
    case KernelKind::Periodic: return "periodic";
    case KernelKind::Linear: return "linear";
    case KernelKind::Polynomial: return "polynomial";
  }
  return "rq";
}

std::string_view to_string(DistanceMode mode) {
  return mode == DistanceMode::AngleParams ? "angle_params" : "bearing_euclidean";
}

KernelKind parse_kernel_kind(std::string_view name) {
  for (auto kind : kAllKernelKinds) {
    if (to_string(kind) == name) return kind;
  }
  if (name == "matern52") return KernelKind::Matern52;
  if (name == "poly") return KernelKind::Polynomial;
  throw Error(ErrorCode::InvalidArgument, "unknown kernel kind '" + std::string(name) + "'");
}

DistanceMode parse_distance_mode(std::string_view name) {
  if (name == "angle_params") return DistanceMode::AngleParams;
  if (name == "bearing_euclidean") return DistanceMode::BearingEuclidean;
  throw Error(ErrorCode::InvalidArgument, "unknown distance mode '" + std::string(name) + "'");
}

double KernelConfig::noise() const { return std::exp(log_noise); }

bool is_stationary(KernelKind kind) { return kind != KernelKind::Linear && kind != KernelKind::Polynomial; }

bool is_isotropic(KernelKind kind) {
  return kind == KernelKind::Rbf || kind == KernelKind::RationalQuadratic || kind == KernelKind::Matern52;
}

double isotropic_kernel(const KernelConfig& cfg, double r2) {
  const double l2 = std::exp(2.0 * cfg.log_lengthscale);
  switch (cfg.kind) {
    case KernelKind::Rbf:
      return std::exp(-0.5 * r2 / l2);
    case KernelKind::RationalQuadratic: {
      const double alpha = std::exp(cfg.log_alpha);
      return std::exp(-alpha * std::log1p(0.5 * r2 / (alpha * l2)));
    }
    case KernelKind::Matern52: {
      const double s = kSqrt5 * std::sqrt(r2 / l2);
      return (1.0 + s + s * s / 3.0) * std::exp(-s);
    }
    default:
      throw Error(ErrorCode::InvalidArgument, "kernel is not isotropic");
  }
}

std::vector<std::string> hyperparameter_names(KernelKind kind) {
  std::vector<std::string> names{"log_lengthscale"};
  if (kind == KernelKind::RationalQuadratic) names.emplace_back("log_alpha");
  if (kind == KernelKind::Periodic) names.emplace_back("log_period");
  if (kind == KernelKind::Polynomial) names.emplace_back("log_offset");
  names.emplace_back("log_noise");
  return names;
}

Eigen::VectorXd pack_hyperparameters(const KernelConfig& cfg) {
  const std::size_t n = kernel_param_count(cfg.kind) + 1;
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  v[0] = cfg.log_lengthscale;
  if (cfg.kind == KernelKind::RationalQuadratic) v[1] = cfg.log_alpha;
  if (cfg.kind == KernelKind::Periodic) v[1] = cfg.log_period;
  if (cfg.kind == KernelKind::Polynomial) v[1] = cfg.log_offset;
  v[v.size() - 1] = cfg.log_noise;
  return v;
}

KernelConfig unpack_hyperparameters(const KernelConfig& base, const Eigen::VectorXd& values) {
  if (static_cast<std::size_t>(values.size()) != kernel_param_count(base.kind) + 1) {
    throw Error(ErrorCode::InvalidArgument, "hyperparameter vector has the wrong length");
  }
  KernelConfig cfg = base;
  cfg.log_lengthscale = values[0];
  if (cfg.kind == KernelKind::RationalQuadratic) cfg.log_alpha = values[1];
  if (cfg.kind == KernelKind::Periodic) cfg.log_period = values[1];
  if (cfg.kind == KernelKind::Polynomial) cfg.log_offset = values[1];
  cfg.log_noise = values[values.size() - 1];
  return cfg;
}

Eigen::VectorXd kernel_feature(const DirectionParams& psi, DistanceMode mode) {
  if (mode == DistanceMode::AngleParams) return psi;
  return bearing(psi);
}

Eigen::MatrixXd kernel_features(const std::vector<DirectionParams>& inputs, DistanceMode mode) {
  const Eigen::Index dim = mode == DistanceMode::AngleParams ? 2 : 3;
  Eigen::MatrixXd f(dim, static_cast<Eigen::Index>(inputs.size()));
  for (std::size_t i = 0; i < inputs.size(); ++i) f.col(static_cast<Eigen::Index>(i)) = kernel_feature(inputs[i], mode);
  return f;
}

double kernel_value_and_gradient(const KernelConfig& cfg, const Eigen::Ref<const Eigen::VectorXd>& x,
                                 const Eigen::Ref<const Eigen::VectorXd>& y, Eigen::Ref<Eigen::VectorXd> grad) {
  const double l = std::exp(cfg.log_lengthscale);
  const double l2 = l * l;
  const bool want_grad = grad.size() > 0;
  switch (cfg.kind) {
    case KernelKind::Rbf: {
      const double r2 = (x - y).squaredNorm();
      const double k = std::exp(-0.5 * r2 / l2);
      if (want_grad) grad[0] = k * r2 / l2;
      return k;
    }
    case KernelKind::RationalQuadratic: {
      const double r2 = (x - y).squaredNorm();
      const double alpha = std::exp(cfg.log_alpha);
      const double bm1 = 0.5 * r2 / (alpha * l2);
      const double b = 1.0 + bm1;
      const double log_b = std::log1p(bm1);
      const double k = std::exp(-alpha * log_b);
      if (want_grad) {
        grad[0] = 2.0 * alpha * bm1 * k / b;
        grad[1] = alpha * k * (-log_b + bm1 / b);
      }
      return k;
    }
    case KernelKind::Matern52: {
      const double r = (x - y).norm();
      const double s = kSqrt5 * r / l;
      const double e = std::exp(-s);
      const double k = (1.0 + s + s * s / 3.0) * e;
      if (want_grad) grad[0] = (s * s / 3.0) * (1.0 + s) * e;
      return k;
    }
    case KernelKind::Periodic: {
      const double p = std::exp(cfg.log_period);
      double sum_sin2 = 0.0;
      double sum_dsin = 0.0;
      for (Eigen::Index d = 0; d < x.size(); ++d) {
        const double delta = x[d] - y[d];
        const double sn = std::sin(std::numbers::pi * delta / p);
        sum_sin2 += sn * sn;
        sum_dsin += delta * std::sin(2.0 * std::numbers::pi * delta / p);
      }
      const double k = std::exp(-2.0 * sum_sin2 / l2);
      if (want_grad) {
        grad[0] = k * 4.0 * sum_sin2 / l2;
        grad[1] = k * 2.0 * std::numbers::pi / (l2 * p) * sum_dsin;
      }
      return k;
    }
    case KernelKind::Linear: {
      const double k = x.dot(y) / l2;
      if (want_grad) grad[0] = -2.0 * k;
      return k;
    }
    case KernelKind::Polynomial: {
      const double c = std::exp(cfg.log_offset);
      const double dot = x.dot(y) / l2;
      const double base = dot + c;
      const double k = base * base * base;
      if (want_grad) {
        grad[0] = 3.0 * base * base * (-2.0 * dot);
        grad[1] = 3.0 * base * base * c;
      }
      return k;
    }
  }
  return 0.0;
}

double kernel_value(const KernelConfig& cfg, const Eigen::Ref<const Eigen::VectorXd>& x,
                    const Eigen::Ref<const Eigen::VectorXd>& y) {
  Eigen::VectorXd none;
  return kernel_value_and_gradient(cfg, x, y, none);
}

double kernel_eval(const KernelConfig& cfg, const DirectionParams& psi_i, const DirectionParams& psi_j) {
  return kernel_value(cfg, kernel_feature(psi_i, cfg.distance_mode), kernel_feature(psi_j, cfg.distance_mode));
}

Eigen::MatrixXd gram_matrix(const KernelConfig& cfg, const Eigen::MatrixXd& features) {
  const Eigen::Index n = features.cols();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = kernel_value(cfg, features.col(i), features.col(i));
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = kernel_value(cfg, features.col(i), features.col(j));
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

}  // namespace gpshape
