#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "gpshape/error.h"
#include "gpshape/gp.h"
#include "gpshape/kernel.h"

using namespace gpshape;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<DirectionParams> random_inputs(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phi(0.05, kPi - 0.05), theta(0.0, 2 * kPi);
  std::vector<DirectionParams> out;
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(phi(rng), theta(rng));
  return out;
}

std::vector<double> smooth_targets(const std::vector<DirectionParams>& x) {
  std::vector<double> y;
  for (const auto& p : x) {
    const Vec3 u = bearing(p);
    y.push_back(1.0 + 0.2 * u.x() + 0.1 * u.y() * u.z());
  }
  return y;
}

KernelConfig config_for(KernelKind kind) {
  KernelConfig c;
  c.kind = kind;
  c.log_lengthscale = std::log(0.8);
  c.log_alpha = std::log(1.5);
  c.log_period = std::log(3.0);
  c.log_offset = std::log(0.7);
  c.log_noise = std::log(1e-3);
  return c;
}

// Closed-form kernel formulas evaluated directly.
double reference_kernel(const KernelConfig& c, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const double l = std::exp(c.log_lengthscale);
  const double r2 = (x - y).squaredNorm();
  switch (c.kind) {
    case KernelKind::Rbf:
      return std::exp(-r2 / (2 * l * l));
    case KernelKind::RationalQuadratic: {
      const double a = std::exp(c.log_alpha);
      return std::pow(1 + r2 / (2 * a * l * l), -a);
    }
    case KernelKind::Matern52: {
      const double s = std::sqrt(5.0 * r2) / l;
      return (1 + s + s * s / 3) * std::exp(-s);
    }
    case KernelKind::Periodic: {
      const double p = std::exp(c.log_period);
      double s = 0;
      for (Eigen::Index d = 0; d < x.size(); ++d) s += std::pow(std::sin(kPi * std::abs(x[d] - y[d]) / p), 2);
      return std::exp(-2 * s / (l * l));
    }
    case KernelKind::Linear:
      return x.dot(y) / (l * l);
    case KernelKind::Polynomial:
      return std::pow(x.dot(y) / (l * l) + std::exp(c.log_offset), 3);
  }
  return 0;
}

class PerKernel : public ::testing::TestWithParam<KernelKind> {};

}  // namespace

TEST_P(PerKernel, ValueMatchesFormula) {
  const KernelConfig c = config_for(GetParam());
  for (const auto mode : {DistanceMode::AngleParams, DistanceMode::BearingEuclidean}) {
    KernelConfig cm = c;
    cm.distance_mode = mode;
    const auto x = random_inputs(20, 1);
    const auto f = kernel_features(x, mode);
    for (int i = 0; i < 20; ++i) {
      for (int j = 0; j < 20; ++j) {
        const double want = reference_kernel(cm, f.col(i), f.col(j));
        EXPECT_NEAR(kernel_value(cm, f.col(i), f.col(j)), want, 1e-12 * std::max(1.0, std::abs(want)));
      }
    }
  }
}

TEST_P(PerKernel, GradientMatchesFiniteDifference) {
  const KernelConfig c = config_for(GetParam());
  const auto x = random_inputs(2, 2);
  const auto f = kernel_features(x, c.distance_mode);
  const Eigen::VectorXd packed = pack_hyperparameters(c);
  const Eigen::Index nk = packed.size() - 1;
  Eigen::VectorXd grad(nk);
  kernel_value_and_gradient(c, f.col(0), f.col(1), grad);
  for (Eigen::Index k = 0; k < nk; ++k) {
    const double h = 1e-6;
    Eigen::VectorXd hi = packed, lo = packed;
    hi[k] += h;
    lo[k] -= h;
    const double fd = (kernel_value(unpack_hyperparameters(c, hi), f.col(0), f.col(1)) -
                       kernel_value(unpack_hyperparameters(c, lo), f.col(0), f.col(1))) /
                      (2 * h);
    EXPECT_NEAR(grad[k], fd, 1e-6 * std::max(1.0, std::abs(fd))) << hyperparameter_names(c.kind)[k];
  }
}

TEST_P(PerKernel, GramIsSymmetricPsd) {
  const KernelConfig c = config_for(GetParam());
  const auto f = kernel_features(random_inputs(60, 3), c.distance_mode);
  const Eigen::MatrixXd k = gram_matrix(c, f);
  EXPECT_LT((k - k.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
  EXPECT_GT(es.eigenvalues().minCoeff(), -1e-9 * es.eigenvalues().maxCoeff());
}

TEST_P(PerKernel, NmllGradientMatchesFiniteDifference) {
  const KernelConfig c = config_for(GetParam());
  const auto x = random_inputs(25, 4);
  const auto y = smooth_targets(x);
  const auto f = kernel_features(x, c.distance_mode);
  const Eigen::VectorXd t = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  Eigen::VectorXd grad;
  nmll_and_gradient(f, t, c, &grad);
  const Eigen::VectorXd packed = pack_hyperparameters(c);
  for (Eigen::Index k = 0; k < packed.size(); ++k) {
    const double h = 1e-5;
    Eigen::VectorXd hi = packed, lo = packed;
    hi[k] += h;
    lo[k] -= h;
    const double fd = (nmll_and_gradient(f, t, unpack_hyperparameters(c, hi), nullptr) -
                       nmll_and_gradient(f, t, unpack_hyperparameters(c, lo), nullptr)) /
                      (2 * h);
    EXPECT_NEAR(grad[k], fd, 1e-4 * std::max(1.0, std::abs(fd)));
  }
}

INSTANTIATE_TEST_SUITE_P(Kernels, PerKernel, ::testing::ValuesIn(kAllKernelKinds),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Kernel, NamesRoundTrip) {
  for (const auto k : kAllKernelKinds) EXPECT_EQ(parse_kernel_kind(to_string(k)), k);
  EXPECT_THROW(parse_kernel_kind("cosine"), Error);
  EXPECT_EQ(hyperparameter_names(KernelKind::RationalQuadratic).back(), "log_noise");
}

TEST(Gp, NmllMatchesDenseOracle) {
  const KernelConfig c = config_for(KernelKind::RationalQuadratic);
  const auto x = random_inputs(30, 5);
  const auto y = smooth_targets(x);
  const auto f = kernel_features(x, c.distance_mode);
  Eigen::MatrixXd a = gram_matrix(c, f);
  const GramFactor gf = factor_gram(a, c.noise());
  a.diagonal().array() += c.noise() + gf.jitter;
  const Eigen::VectorXd t = Eigen::Map<const Eigen::VectorXd>(y.data(), 30);
  // Oracle: LU solve and determinant, independent of the Cholesky path.
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  const double want = 0.5 * t.dot(lu.solve(t)) + 0.5 * std::log(lu.determinant()) + 15.0 * std::log(2 * kPi);
  EXPECT_NEAR(nmll(x, y, c), want, 1e-8 * std::abs(want));
}

TEST(Gp, PosteriorMatchesDenseOracle) {
  const KernelConfig c = config_for(KernelKind::Matern52);
  const auto x = random_inputs(40, 6);
  const auto y = smooth_targets(x);
  const GpModel m = GpModel::condition(x, y, c);
  const auto f = kernel_features(x, c.distance_mode);
  Eigen::MatrixXd a = gram_matrix(c, f);
  a.diagonal().array() += c.noise() + m.jitter();
  const Eigen::MatrixXd ainv = a.inverse();
  const Eigen::VectorXd t = Eigen::Map<const Eigen::VectorXd>(y.data(), 40);
  for (const auto& q : random_inputs(20, 7)) {
    const Eigen::VectorXd fq = kernel_feature(q, c.distance_mode);
    Eigen::VectorXd kx(40);
    for (int i = 0; i < 40; ++i) kx[i] = reference_kernel(c, f.col(i), fq);
    const double mean = kx.dot(ainv * t);
    const double var = 1.0 - kx.dot(ainv * kx);
    const Prediction p = m.predict(q);
    EXPECT_NEAR(p.mean, std::max(0.0, mean), 1e-8);
    EXPECT_NEAR(p.variance, std::max(0.0, var), 1e-7);
    EXPECT_DOUBLE_EQ(m.predict_mean(q), p.mean);
  }
}

TEST(Gp, TargetScaleIsTransparent) {
  const KernelConfig c = config_for(KernelKind::Rbf);
  const auto x = random_inputs(30, 8);
  const auto y = smooth_targets(x);
  const GpModel a = GpModel::condition(x, y, c, 1.0);
  const GpModel b = GpModel::condition(x, y, c, 2.0);
  const auto q = random_inputs(1, 9)[0];
  EXPECT_NEAR(a.predict_mean(q), b.predict_mean(q), 0.05);
  EXPECT_DOUBLE_EQ(target_normalizer({0.0, 0.0}), 1.0);
  EXPECT_DOUBLE_EQ(target_normalizer({-1.0, 3.0}), 2.0);
}

TEST(Gp, SinglePointNmll) {
  KernelConfig c;
  c.kind = KernelKind::Rbf;
  c.log_noise = -700.0;  // noise underflows to 0; only the jitter remains
  const double got = nmll({DirectionParams(1.0, 2.0)}, {0.0}, c);
  EXPECT_NEAR(got, 0.5 * std::log(2 * kPi), 1e-7);
}

TEST(Gp, JitterOnlyInterpolation) {
  const auto x = random_inputs(30, 13);
  const auto y = smooth_targets(x);
  KernelConfig c = config_for(KernelKind::Matern52);
  c.log_noise = -700.0;
  const GpModel m = GpModel::condition(x, y, c);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Prediction p = m.predict(x[i]);
    EXPECT_NEAR(p.mean, y[i], 1e-6);
    EXPECT_LT(p.variance, 1e-6);
  }
}

TEST(Gp, ConstantTargetsAfterFit) {
  const auto x = random_inputs(40, 14);
  const std::vector<double> y(x.size(), 5.0);
  for (const auto kind : kAllKernelKinds) {
    // x.y / l^2 on unit bearings only spans a.u, which has no constant term.
    if (kind == KernelKind::Linear) continue;
    const KernelConfig init = initial_hyperparameters(x, y, kind, DistanceMode::BearingEuclidean);
    OptimizerConfig opt;
    opt.iterations = 40;
    const GpModel m = fit(x, y, init, opt);
    for (std::size_t i = 0; i < x.size(); i += 5) EXPECT_NEAR(m.predict_mean(x[i]), 5.0, 1e-6) << to_string(kind);
  }
}

TEST(Gp, JitterEscalatesOnSingularGram) {
  Eigen::MatrixXd k = Eigen::MatrixXd::Ones(5, 5);
  const GramFactor gf = factor_gram(k, 0.0);
  EXPECT_GT(gf.jitter, 0.0);
  EXPECT_LE(gf.jitter, kJitterMax * 1.000001);
  Eigen::MatrixXd neg = -Eigen::MatrixXd::Identity(3, 3);
  try {
    factor_gram(neg, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotPositiveDefinite);
  }
}

TEST(Gp, FitLowersNmllAndInterpolates) {
  const auto x = random_inputs(120, 10);
  const auto y = smooth_targets(x);
  const KernelConfig init = initial_hyperparameters(x, y, KernelKind::RationalQuadratic, DistanceMode::BearingEuclidean);
  OptimizerConfig opt;
  opt.iterations = 60;
  FitReport rep;
  const GpModel m = fit(x, y, init, opt, &rep);
  EXPECT_LE(rep.final_nmll, rep.initial_nmll);
  EXPECT_FALSE(rep.loss_history.empty());
  double err = 0.0;
  const auto q = random_inputs(100, 11);
  const auto yq = smooth_targets(q);
  for (std::size_t i = 0; i < q.size(); ++i) err = std::max(err, std::abs(m.predict_mean(q[i]) - yq[i]));
  EXPECT_LT(err, 0.01);
}

TEST(Gp, FitIsDeterministic) {
  const auto x = random_inputs(50, 12);
  const auto y = smooth_targets(x);
  const KernelConfig init = initial_hyperparameters(x, y, KernelKind::Rbf, DistanceMode::BearingEuclidean);
  OptimizerConfig opt;
  opt.iterations = 20;
  const GpModel a = fit(x, y, init, opt);
  const GpModel b = fit(x, y, init, opt);
  EXPECT_EQ(pack_hyperparameters(a.kernel()), pack_hyperparameters(b.kernel()));
}
