#include "gpshape/pnp.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "gpshape/error.h"

namespace gpshape {

namespace {

constexpr std::size_t kMinPoints = 6;
constexpr double kMinDepth = 1e-6;

void check_inputs(std::span<const Point3> obj, std::span<const Pixel> pix) {
  if (obj.size() != pix.size()) throw Error(ErrorCode::LengthMismatch, "object points and pixels differ in count");
  if (obj.size() < kMinPoints) {
    throw Error(ErrorCode::DegenerateConfiguration,
                "PnP needs at least " + std::to_string(kMinPoints) + " correspondences, got " +
                    std::to_string(obj.size()));
  }
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

Mat3 axis_angle_exp(const Vec3& w) {
  const double angle = w.norm();
  if (angle < 1e-300) return Mat3::Identity();
  return axis_angle(w / angle, angle);
}

Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  if ((u * svd.matrixV().transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * svd.matrixV().transpose();
}

// Residuals with depth clamped at kMinDepth so the cost stays finite.
double residuals(const Mat3& r, const Vec3& t, std::span<const Point3> obj, std::span<const Pixel> pix,
                 const CameraIntrinsics& cam, Eigen::VectorXd& res) {
  const auto n = static_cast<Eigen::Index>(obj.size());
  res.resize(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3 x = r * obj[static_cast<std::size_t>(i)] + t;
    const double z = std::max(x.z(), kMinDepth);
    res[2 * i] = cam.fx * x.x() / z + cam.cx - pix[static_cast<std::size_t>(i)].x();
    res[2 * i + 1] = cam.fy * x.y() / z + cam.cy - pix[static_cast<std::size_t>(i)].y();
  }
  return res.squaredNorm();
}

void jacobian(const Mat3& r, const Vec3& t, std::span<const Point3> obj, const CameraIntrinsics& cam,
              Eigen::MatrixXd& jac) {
  const auto n = static_cast<Eigen::Index>(obj.size());
  jac.resize(2 * n, 6);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3 rp = r * obj[static_cast<std::size_t>(i)];
    const Vec3 x = rp + t;
    const double z = std::max(x.z(), kMinDepth);
    Eigen::Matrix<double, 2, 3> dproj;
    dproj << cam.fx / z, 0.0, -cam.fx * x.x() / (z * z), 0.0, cam.fy / z, -cam.fy * x.y() / (z * z);
    Eigen::Matrix<double, 3, 6> dx;
    dx.leftCols<3>() = -skew(rp);
    dx.rightCols<3>() = Mat3::Identity();
    jac.block<2, 6>(2 * i, 0) = dproj * dx;
  }
}

}  // namespace

double reprojection_rms(const RigidTransform& pose, std::span<const Point3> object_points,
                        std::span<const Pixel> pixels, const CameraIntrinsics& cam) {
  if (object_points.size() != pixels.size()) throw Error(ErrorCode::LengthMismatch, "length mismatch");
  if (object_points.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < object_points.size(); ++i) {
    sum += (project(cam, pose.apply(object_points[i])) - pixels[i]).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(object_points.size()));
}

RigidTransform pnp_dlt(std::span<const Point3> obj, std::span<const Pixel> pix, const CameraIntrinsics& cam) {
  check_inputs(obj, pix);
  cam.validate();
  const auto n = static_cast<Eigen::Index>(obj.size());

  Point3 centroid = Point3::Zero();
  for (const auto& p : obj) centroid += p;
  centroid /= static_cast<double>(obj.size());
  Mat3 cov = Mat3::Zero();
  double msd = 0.0;
  for (const auto& p : obj) {
    cov += (p - centroid) * (p - centroid).transpose();
    msd += (p - centroid).squaredNorm();
  }
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Vec3 ev = eig.eigenvalues();
  if (!(ev[2] > 0.0) || ev[0] < 1e-10 * ev[2]) {
    throw Error(ErrorCode::DegenerateConfiguration, "object points are coplanar or collinear");
  }
  const double s = std::sqrt(3.0 * static_cast<double>(obj.size()) / msd);

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 12);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    Eigen::Vector4d xh;
    xh << s * (obj[k] - centroid), 1.0;
    const double x = (pix[k].x() - cam.cx) / cam.fx;
    const double y = (pix[k].y() - cam.cy) / cam.fy;
    a.block<1, 4>(2 * i, 0) = xh.transpose();
    a.block<1, 4>(2 * i, 8) = -x * xh.transpose();
    a.block<1, 4>(2 * i + 1, 4) = xh.transpose();
    a.block<1, 4>(2 * i + 1, 8) = -y * xh.transpose();
  }
  // Smallest right singular vector via the 12x12 normal matrix.
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 12, 12>> solver(a.transpose() * a);
  const Eigen::Matrix<double, 12, 1> p = solver.eigenvectors().col(0);
  Eigen::Matrix<double, 3, 4> pn;
  pn << p.segment<4>(0).transpose(), p.segment<4>(4).transpose(), p.segment<4>(8).transpose();

  // Undo the object-point normalization X' = s (X - c).
  Eigen::Matrix4d tn = Eigen::Matrix4d::Identity();
  tn.topLeftCorner<3, 3>() *= s;
  tn.topRightCorner<3, 1>() = -s * centroid;
  Eigen::Matrix<double, 3, 4> proj = pn * tn;

  Mat3 m = proj.leftCols<3>();
  if (m.determinant() < 0.0) {
    proj = -proj;
    m = -m;
  }
  Eigen::JacobiSVD<Mat3> svd(m);
  const double scale = svd.singularValues().mean();
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw Error(ErrorCode::DegenerateConfiguration, "DLT produced a degenerate projection matrix");
  }
  return RigidTransform(nearest_rotation(m), proj.col(3) / scale);
}

PnpResult refine_pose(const RigidTransform& init, std::span<const Point3> obj, std::span<const Pixel> pix,
                      const CameraIntrinsics& cam, std::size_t max_iterations) {
  check_inputs(obj, pix);
  Mat3 r = init.rotation();
  Vec3 t = init.translation();
  Eigen::VectorXd res;
  Eigen::MatrixXd jac;
  double cost = residuals(r, t, obj, pix, cam, res);
  double lambda = 1e-3;
  PnpResult out;

  for (std::size_t it = 0; it < max_iterations; ++it) {
    out.iterations = it + 1;
    jacobian(r, t, obj, cam, jac);
    const Eigen::Matrix<double, 6, 6> h = jac.transpose() * jac;
    const Eigen::Matrix<double, 6, 1> g = jac.transpose() * res;
    if (g.lpNorm<Eigen::Infinity>() < 1e-14 * (1.0 + cost)) {
      out.converged = true;
      break;
    }
    bool accepted = false;
    while (!accepted && lambda < 1e16) {
      Eigen::Matrix<double, 6, 6> damped = h;
      damped.diagonal() += lambda * h.diagonal().cwiseMax(1e-12);
      const Eigen::Matrix<double, 6, 1> step = damped.ldlt().solve(-g);
      const Mat3 r_new = nearest_rotation(axis_angle_exp(step.head<3>()) * r);
      const Vec3 t_new = t + step.tail<3>();
      Eigen::VectorXd res_new;
      const double cost_new = residuals(r_new, t_new, obj, pix, cam, res_new);
      if (std::isfinite(cost_new) && cost_new <= cost) {
        const double rel_gain = (cost - cost_new) / std::max(cost, std::numeric_limits<double>::min());
        r = r_new;
        t = t_new;
        res = std::move(res_new);
        cost = cost_new;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        if (step.norm() < 1e-14 || rel_gain < 1e-15) out.converged = true;
      } else {
        lambda *= 10.0;
      }
    }
    if (!accepted || out.converged) {
      out.converged = true;
      break;
    }
  }
  out.pose = RigidTransform(r, t);
  out.rms = std::sqrt(cost / static_cast<double>(obj.size()));
  out.inliers.assign(obj.size(), true);
  return out;
}

PnpResult solve_pnp(std::span<const Point3> obj, std::span<const Pixel> pix, const CameraIntrinsics& cam,
                    const PnpConfig& cfg) {
  check_inputs(obj, pix);
  if (!cfg.ransac) return refine_pose(pnp_dlt(obj, pix, cam), obj, pix, cam, cfg.max_iterations);

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> idx(obj.size());
  std::vector<bool> best_inliers;
  std::size_t best_count = 0;
  const double thr2 = cfg.ransac_threshold_px * cfg.ransac_threshold_px;
  for (std::size_t it = 0; it < cfg.ransac_iterations; ++it) {
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<Point3> so;
    std::vector<Pixel> sp;
    for (std::size_t k = 0; k < kMinPoints; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, idx.size() - 1);
      std::swap(idx[k], idx[pick(rng)]);
      so.push_back(obj[idx[k]]);
      sp.push_back(pix[idx[k]]);
    }
    RigidTransform candidate;
    try {
      candidate = refine_pose(pnp_dlt(so, sp, cam), so, sp, cam, 20).pose;
    } catch (const Error&) {
      continue;
    }
    std::vector<bool> inl(obj.size(), false);
    std::size_t count = 0;
    for (std::size_t i = 0; i < obj.size(); ++i) {
      const Vec3 x = candidate.apply(obj[i]);
      if (x.z() <= kMinDepth) continue;
      if ((project(cam, x) - pix[i]).squaredNorm() < thr2) {
        inl[i] = true;
        ++count;
      }
    }
    if (count > best_count) {
      best_count = count;
      best_inliers = std::move(inl);
    }
  }
  if (best_count < kMinPoints) {
    PnpResult plain = refine_pose(pnp_dlt(obj, pix, cam), obj, pix, cam, cfg.max_iterations);
    return plain;
  }
  std::vector<Point3> io;
  std::vector<Pixel> ip;
  for (std::size_t i = 0; i < obj.size(); ++i) {
    if (best_inliers[i]) {
      io.push_back(obj[i]);
      ip.push_back(pix[i]);
    }
  }
  PnpResult out = refine_pose(pnp_dlt(io, ip, cam), io, ip, cam, cfg.max_iterations);
  out.inliers = std::move(best_inliers);
  return out;
}

}  // namespace gpshape
