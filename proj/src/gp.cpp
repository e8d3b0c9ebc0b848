#include "gpshape/gp.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gpshape/error.h"
#include "gpshape/log.h"

namespace gpshape {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

double log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace

GramFactor factor_gram(const Eigen::MatrixXd& gram, double noise) {
  const Eigen::Index n = gram.rows();
  double mean_diag = n > 0 ? gram.diagonal().mean() : 1.0;
  const bool tracks_gram = n > 0 && mean_diag > 0.0 && std::isfinite(mean_diag);
  if (!tracks_gram) mean_diag = 1.0;

  GramFactor out;
  for (double factor = kJitterStart; factor <= kJitterMax * 1.000001; factor *= 10.0) {
    const double jitter = factor * mean_diag;
    Eigen::MatrixXd a = gram;
    a.diagonal().array() += noise + jitter;
    out.llt.compute(a);
    if (out.llt.info() == Eigen::Success && out.llt.matrixLLT().diagonal().array().isFinite().all() &&
        (out.llt.matrixLLT().diagonal().array() > 0.0).all()) {
      out.jitter = jitter;
      out.jitter_slope = tracks_gram ? factor : 0.0;
      return out;
    }
  }
  throw Error(ErrorCode::NotPositiveDefinite, "Gram matrix not positive definite after jitter escalation");
}

double nmll_and_gradient(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, const KernelConfig& cfg,
                         Eigen::VectorXd* gradient) {
  const Eigen::Index n = features.cols();
  if (n < 1 || targets.size() != n) throw Error(ErrorCode::InvalidArgument, "nmll needs >= 1 matching input/target");
  const Eigen::VectorXd packed = pack_hyperparameters(cfg);
  const Eigen::Index n_kernel = packed.size() - 1;

  Eigen::MatrixXd gram(n, n);
  std::vector<Eigen::MatrixXd> d_gram;
  Eigen::VectorXd g(n_kernel);
  if (gradient) d_gram.assign(static_cast<std::size_t>(n_kernel), Eigen::MatrixXd(n, n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      double v;
      if (gradient) {
        v = kernel_value_and_gradient(cfg, features.col(i), features.col(j), g);
        for (Eigen::Index p = 0; p < n_kernel; ++p) {
          d_gram[static_cast<std::size_t>(p)](i, j) = g[p];
          d_gram[static_cast<std::size_t>(p)](j, i) = g[p];
        }
      } else {
        v = kernel_value(cfg, features.col(i), features.col(j));
      }
      gram(i, j) = v;
      gram(j, i) = v;
    }
  }

  const double noise = cfg.noise();
  const GramFactor factor = factor_gram(gram, noise);
  const Eigen::VectorXd alpha = factor.llt.solve(targets);
  const double value =
      0.5 * targets.dot(alpha) + 0.5 * log_det(factor.llt) + static_cast<double>(n) * kHalfLog2Pi;

  if (gradient) {
    // dL/dtheta = 1/2 tr((A^-1 - a a^T) dA/dtheta)
    Eigen::MatrixXd w = factor.llt.solve(Eigen::MatrixXd::Identity(n, n));
    w.noalias() -= alpha * alpha.transpose();
    gradient->resize(packed.size());
    // The jitter scales with mean(diag K), so it moves with the kernel parameters.
    const double trace_w = w.trace();
    for (Eigen::Index p = 0; p < n_kernel; ++p) {
      const auto& dk = d_gram[static_cast<std::size_t>(p)];
      (*gradient)[p] = 0.5 * w.cwiseProduct(dk).sum() + 0.5 * trace_w * factor.jitter_slope * dk.diagonal().mean();
    }
    (*gradient)[n_kernel] = 0.5 * noise * trace_w;
  }
  return value;
}

double nmll(const std::vector<DirectionParams>& inputs, const std::vector<double>& targets, const KernelConfig& cfg) {
  if (inputs.size() != targets.size()) throw Error(ErrorCode::InvalidArgument, "inputs/targets length mismatch");
  return nmll_and_gradient(kernel_features(inputs, cfg.distance_mode), to_eigen(targets), cfg, nullptr);
}

double target_normalizer(const std::vector<double>& targets) {
  double sum = 0.0;
  for (double t : targets) sum += std::abs(t);
  const double mean = targets.empty() ? 0.0 : sum / static_cast<double>(targets.size());
  return mean > 1e-12 ? mean : 1.0;
}

GpModel GpModel::condition(std::vector<DirectionParams> inputs, std::vector<double> targets, const KernelConfig& cfg,
                           double target_scale) {
  if (inputs.empty() || inputs.size() != targets.size()) {
    throw Error(ErrorCode::InvalidArgument, "GP needs >= 1 matching input/target");
  }
  if (!(target_scale > 0.0) || !std::isfinite(target_scale)) {
    throw Error(ErrorCode::InvalidArgument, "target scale must be positive");
  }
  GpModel m;
  m.kernel_ = cfg;
  m.inputs_ = std::move(inputs);
  m.targets_ = std::move(targets);
  m.target_scale_ = target_scale;
  m.features_ = kernel_features(m.inputs_, cfg.distance_mode);

  const Eigen::VectorXd y = to_eigen(m.targets_) / target_scale;
  const Eigen::MatrixXd gram = gram_matrix(cfg, m.features_);
  GramFactor factor = factor_gram(gram, cfg.noise());
  m.chol_ = std::move(factor.llt);
  m.jitter_ = factor.jitter;
  m.alpha_ = m.chol_.solve(y);
  if (!m.alpha_.allFinite()) throw Error(ErrorCode::NotPositiveDefinite, "non-finite GP weights");
  m.nmll_ = 0.5 * y.dot(m.alpha_) + 0.5 * log_det(m.chol_) + static_cast<double>(y.size()) * kHalfLog2Pi;
  return m;
}

Eigen::VectorXd GpModel::cross_covariance(const DirectionParams& x) const {
  const Eigen::VectorXd fx = kernel_feature(x, kernel_.distance_mode);
  Eigen::VectorXd k(features_.cols());
  if (is_isotropic(kernel_.kind)) {
    // Same closed forms as kernel_value, evaluated from squared distances.
    const double l2 = std::exp(2.0 * kernel_.log_lengthscale);
    const Eigen::ArrayXd r2 = (features_.colwise() - fx).colwise().squaredNorm().transpose().array();
    switch (kernel_.kind) {
      case KernelKind::Rbf:
        k = (-0.5 / l2 * r2).exp().matrix();
        break;
      case KernelKind::RationalQuadratic: {
        const double alpha = std::exp(kernel_.log_alpha);
        k = (-alpha * (0.5 / (alpha * l2) * r2).log1p()).exp().matrix();
        break;
      }
      default:
        for (Eigen::Index i = 0; i < k.size(); ++i) k[i] = isotropic_kernel(kernel_, r2[i]);
    }
    return k;
  }
  for (Eigen::Index i = 0; i < features_.cols(); ++i) k[i] = kernel_value(kernel_, fx, features_.col(i));
  return k;
}

double GpModel::predict_mean(const DirectionParams& x) const {
  const double mean = cross_covariance(x).dot(alpha_) * target_scale_;
  return std::max(0.0, mean);
}

Prediction GpModel::predict(const DirectionParams& x) const {
  const Eigen::VectorXd fx = kernel_feature(x, kernel_.distance_mode);
  const Eigen::VectorXd k = cross_covariance(x);
  const Eigen::VectorXd v = chol_.matrixL().solve(k);
  Prediction p;
  p.mean = std::max(0.0, k.dot(alpha_) * target_scale_);
  p.variance = std::max(0.0, kernel_value(kernel_, fx, fx) - v.squaredNorm()) * target_scale_ * target_scale_;
  return p;
}

KernelConfig initial_hyperparameters(const std::vector<DirectionParams>& inputs, const std::vector<double>& targets,
                                     KernelKind kind, DistanceMode mode) {
  KernelConfig cfg;
  cfg.kind = kind;
  cfg.distance_mode = mode;

  const Eigen::MatrixXd f = kernel_features(inputs, mode);
  const Eigen::Index n = f.cols();
  const Eigen::Index stride = std::max<Eigen::Index>(1, n / 1000);
  std::vector<double> dists;
  for (Eigen::Index i = 0; i < n; i += stride) {
    for (Eigen::Index j = 0; j < i; j += stride) dists.push_back((f.col(i) - f.col(j)).norm());
  }
  double median = 1.0;
  if (!dists.empty()) {
    auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
    std::nth_element(dists.begin(), mid, dists.end());
    if (*mid > 1e-12) median = *mid;
  }
  cfg.log_lengthscale = std::log(median);
  cfg.log_alpha = 0.0;
  double range = 0.0;
  if (n > 0) range = (f.rowwise().maxCoeff() - f.rowwise().minCoeff()).maxCoeff();
  cfg.log_period = std::log(range > 1e-12 ? 2.0 * range : 1.0);
  cfg.log_offset = 0.0;

  double mean = 0.0;
  for (double t : targets) mean += t;
  mean /= std::max<std::size_t>(1, targets.size());
  double var = 0.0;
  for (double t : targets) var += (t - mean) * (t - mean);
  var /= std::max<std::size_t>(1, targets.size());
  cfg.log_noise = std::log(1e-4 * var + 1e-8);
  return cfg;
}

GpModel fit(std::vector<DirectionParams> inputs, std::vector<double> targets, const KernelConfig& init,
            const OptimizerConfig& opt, FitReport* report) {
  if (inputs.empty() || inputs.size() != targets.size()) {
    throw Error(ErrorCode::InvalidArgument, "GP fit needs >= 1 matching input/target");
  }
  const double scale = opt.normalize_targets ? target_normalizer(targets) : 1.0;
  const Eigen::MatrixXd features = kernel_features(inputs, init.distance_mode);
  const Eigen::VectorXd y = to_eigen(targets) / scale;

  Eigen::VectorXd params = pack_hyperparameters(init).cwiseMax(-opt.log_param_bound).cwiseMin(opt.log_param_bound);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd best_params = params;
  double best_loss = std::numeric_limits<double>::infinity();
  double sched_best = std::numeric_limits<double>::infinity();
  std::size_t bad_steps = 0;
  double lr = opt.learning_rate;
  FitReport rep;

  for (std::size_t t = 1; t <= opt.iterations; ++t) {
    Eigen::VectorXd grad;
    double loss;
    try {
      loss = nmll_and_gradient(features, y, unpack_hyperparameters(init, params), &grad);
    } catch (const Error& e) {
      if (t == 1) throw;
      logger()->warn("gp fit: stopping at iteration {}: {}", t, e.what());
      rep.aborted = true;
      break;
    }
    if (!std::isfinite(loss) || !grad.allFinite()) {
      if (t == 1) throw Error(ErrorCode::NonFiniteLoss, "NMLL not finite at the initial hyperparameters");
      logger()->warn("gp fit: non-finite loss at iteration {}, keeping the best finite iterate", t);
      rep.aborted = true;
      break;
    }
    if (t == 1) rep.initial_nmll = loss;
    rep.loss_history.push_back(loss);
    rep.iterations = t;
    if (loss < best_loss) {
      best_loss = loss;
      best_params = params;
    }

    m = opt.beta1 * m + (1.0 - opt.beta1) * grad;
    v = opt.beta2 * v + (1.0 - opt.beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(t));
    const Eigen::VectorXd step = (m / bc1).array() / ((v / bc2).array().sqrt() + opt.epsilon);
    params = (params - lr * step).cwiseMax(-opt.log_param_bound).cwiseMin(opt.log_param_bound);

    if (loss < sched_best - opt.plateau_threshold * std::abs(sched_best) || !std::isfinite(sched_best)) {
      sched_best = loss;
      bad_steps = 0;
    } else if (++bad_steps > opt.plateau_patience) {
      lr *= opt.plateau_factor;
      bad_steps = 0;
      ++rep.lr_reductions;
    }
  }

  GpModel model = GpModel::condition(std::move(inputs), std::move(targets), unpack_hyperparameters(init, best_params),
                                     scale);
  rep.final_nmll = model.nmll();
  if (report) *report = std::move(rep);
  return model;
}

}  // namespace gpshape
