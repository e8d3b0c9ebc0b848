#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "gpshape/confidence.h"
#include "gpshape/error.h"
#include "support/shapes.h"

using namespace gpshape;
namespace fs = std::filesystem;

namespace {

const double kSqrt2Pi = std::sqrt(2 * std::numbers::pi);

// Unit sphere around the origin as a single-cluster template with a GP
// conditioned on exact radii.
ShapeTemplate sphere_template(double sigma) {
  ClusterModel c;
  std::vector<DirectionParams> psi;
  std::vector<double> d;
  for (const auto& u : fibonacci_directions(150)) {
    psi.push_back(direction_params(to_spherical(u)));
    d.push_back(1.0);
  }
  KernelConfig k;
  k.log_lengthscale = std::log(0.5);
  k.log_noise = std::log(1e-8);
  c.gp = GpModel::condition(psi, d, k);
  c.calibrated_sigma2 = sigma * sigma;
  return ShapeTemplate({c}, Normalization{});
}

const RigidTransform kPose(axis_angle(Vec3(0.2, 1, 0.3), 0.8), Vec3(0.1, -0.2, 4.0));
const CameraIntrinsics kCam{572.4, 573.6, 325.3, 242.0};

std::vector<Correspondence> exact_correspondences(const ShapeTemplate& tmpl, std::size_t n) {
  std::vector<Correspondence> out;
  const auto samples = reconstruct_samples(tmpl, n);
  for (const auto& s : samples) out.push_back({project(kCam, kPose * s.point), s.point, 1.0});
  return out;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

fs::path temp_file(const std::string& name, const std::string& body) {
  const fs::path dir = fs::temp_directory_path() / "gpshape_test_confidence";
  fs::create_directories(dir);
  std::ofstream(dir / name) << body;
  return dir / name;
}

}  // namespace

TEST(Bound, SingleCaseValue) {
  const double direct = (1.0 - std::exp(-0.5)) / kSqrt2Pi;
  EXPECT_NEAR(confidence_bound({1.0}, {1.0}, 1.0), direct, 1e-6);
  EXPECT_NEAR(confidence_bound({1.0}, {1.0}, 1.0), direct, 1e-15);
  // Quoted elsewhere as roughly 0.156975; the exact value is 0.1569716.
  EXPECT_NEAR(confidence_bound({1.0}, {1.0}, 1.0), 0.156975, 5e-6);
}

TEST(Bound, BelowMonteCarloAverageDensity) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> ls(std::log(1e-3), std::log(1.0)), u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double sigma = std::exp(ls(rng)), delta = std::exp(ls(rng));
    const int n = 1000000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double r = delta * u(rng);
      const double f = std::exp(-0.5 * r * r / (sigma * sigma)) / (kSqrt2Pi * sigma);
      sum += f;
      sum2 += f * f;
    }
    const double mean = sum / n;
    const double sem = std::sqrt(std::max(0.0, sum2 / n - mean * mean) / n);
    EXPECT_LE(confidence_bound({sigma}, {1.0}, delta), mean + 3 * sem) << sigma << " " << delta;
  }
}

TEST(Bound, LimitsAndErrors) {
  EXPECT_LT(confidence_bound({0.1}, {1.0}, 1e6), 1e-7);
  EXPECT_NEAR(confidence_bound({0.1, 0.2}, {0.5, 0.5}, 0.05),
              0.5 * confidence_bound({0.1}, {1.0}, 0.05) + 0.5 * confidence_bound({0.2}, {1.0}, 0.05), 1e-15);
  EXPECT_EQ(code_of([] { confidence_bound({1.0}, {1.0}, 0.0); }), ErrorCode::InvalidDelta);
  EXPECT_EQ(code_of([] { confidence_bound({1.0}, {1.0}, -1.0); }), ErrorCode::InvalidDelta);
  EXPECT_EQ(code_of([] { confidence_bound({1.0, 2.0}, {1.0}, 1.0); }), ErrorCode::LengthMismatch);
  const ShapeTemplate t = sphere_template(0.02);
  EXPECT_NEAR(template_confidence_bound(t, 0.03), confidence_bound({0.02}, {1.0}, 0.03), 1e-12);
}

TEST(Accept, ThresholdExamples) {
  ConfidenceReport r;
  r.score = 0.78;
  EXPECT_TRUE(accept_pose(r, 0.6));
  r.score = 0.08;
  EXPECT_FALSE(accept_pose(r, 0.6));
  r.score = 0.6;
  EXPECT_TRUE(accept_pose(r, 0.6));
}

TEST(BackProject, RoundTripUnderExactPose) {
  std::vector<Correspondence> corrs;
  for (const auto& p : shapes::random_sphere_points(100, 1)) corrs.push_back({project(kCam, kPose * p), p, 1.0});
  const auto bp = back_project(corrs, kPose, kCam);
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    ASSERT_TRUE(bp[i].usable);
    EXPECT_LT((bp[i].point - corrs[i].object_point).norm(), 1e-12);
  }
}

TEST(Score, ExactPoseAttainsPeak) {
  const double sigma = 0.01;
  const ShapeTemplate t = sphere_template(sigma);
  const auto corrs = exact_correspondences(t, 300);
  const auto rep = score_pose(t, corrs, kPose, kCam, WeightsMode::Uniform, 0.02);
  EXPECT_NEAR(rep.score, 1.0 / (kSqrt2Pi * sigma), 1e-6);
  EXPECT_EQ(rep.n_points, corrs.size());
  EXPECT_EQ(rep.n_excluded, 0u);
  EXPECT_NEAR(rep.bound, confidence_bound({sigma}, {1.0}, 0.02), 1e-12);
}

TEST(Score, PerturbingAPixelLowersScore) {
  const ShapeTemplate t = sphere_template(0.01);
  const auto corrs = exact_correspondences(t, 100);
  const double peak = score_pose(t, corrs, kPose, kCam).score;
  for (std::size_t i = 0; i < corrs.size(); i += 7) {
    auto moved = corrs;
    moved[i].pixel += Pixel(1.5, -0.5);
    EXPECT_LT(score_pose(t, moved, kPose, kCam).score, peak);
  }
}

TEST(Score, MatchesBruteForce) {
  const ShapeTemplate t = sphere_template(0.03);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 3.0);
  std::uniform_real_distribution<double> w(0.1, 2.0);
  auto corrs = exact_correspondences(t, 80);
  for (auto& c : corrs) {
    c.pixel += Pixel(g(rng), g(rng));
    c.weight = w(rng);
  }
  const auto rep = score_pose(t, corrs, kPose, kCam, WeightsMode::Provided);
  double wsum = 0.0;
  for (const auto& c : corrs) wsum += c.weight;
  double want = 0.0;
  for (const auto& c : corrs) {
    const Point3 cam_pt = kPose * c.object_point;
    const Point3 back = kPose.inverse() * unproject(kCam, c.pixel, cam_pt.z());
    want += c.weight / wsum * point_likelihood(t, back).max_density;
  }
  EXPECT_NEAR(rep.score, want, 1e-12 * want);
  const auto uni = score_pose(t, corrs, kPose, kCam, WeightsMode::Uniform);
  for (const auto& p : uni.per_point) EXPECT_DOUBLE_EQ(p.weight, 1.0 / corrs.size());
}

TEST(Score, JointRigidMotionInvariance) {
  const ShapeTemplate t = sphere_template(0.02);
  auto corrs = exact_correspondences(t, 60);
  for (auto& c : corrs) c.pixel += Pixel(0.7, -1.1);
  const RigidTransform g(axis_angle(Vec3(1, 0, 1), 1.1), Vec3(0.5, 0.4, -0.3));
  auto moved = corrs;
  for (auto& c : moved) c.object_point = g * c.object_point;
  const double a = score_pose(t, corrs, kPose, kCam).score;
  const double b = score_pose(t.placed(g), moved, kPose * g.inverse(), kCam).score;
  EXPECT_NEAR(a, b, 1e-9 * a);
}

TEST(Score, BehindCameraExcludedAndRenormalized) {
  const ShapeTemplate t = sphere_template(0.02);
  auto corrs = exact_correspondences(t, 40);
  const std::size_t n = corrs.size();
  // Far behind the camera once posed.
  corrs.push_back({Pixel(300, 200), kPose.inverse() * Point3(0, 0, -5), 1.0});
  const auto rep = score_pose(t, corrs, kPose, kCam);
  EXPECT_EQ(rep.n_excluded, 1u);
  EXPECT_EQ(rep.n_points, n);
  EXPECT_NEAR(rep.score, 1.0 / (kSqrt2Pi * 0.02), 1e-6);
  std::vector<Correspondence> none = {corrs.back()};
  EXPECT_EQ(code_of([&] { score_pose(t, none, kPose, kCam); }), ErrorCode::NoUsablePoints);
}

TEST(Files, CorrespondenceRoundTrip) {
  std::vector<Correspondence> corrs = {{Pixel(1.5, 2.25), Point3(0.1, 0.2, 1.0 / 3.0), 1.0},
                                       {Pixel(3, 4), Point3(-1, 0, 2), 3.0}};
  const fs::path p = fs::temp_directory_path() / "gpshape_test_confidence_corrs.csv";
  write_correspondences(p, corrs);
  const auto back = read_correspondences(p);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].pixel, corrs[0].pixel);
  EXPECT_EQ(back[0].object_point, corrs[0].object_point);
  EXPECT_DOUBLE_EQ(back[0].weight + back[1].weight, 1.0);
  EXPECT_DOUBLE_EQ(back[1].weight, 0.75);
}

TEST(Files, ParseAndIoErrors) {
  EXPECT_EQ(code_of([] { read_correspondences("/nonexistent/c.csv"); }), ErrorCode::Io);
  const auto bad_header = temp_file("h.csv", "x,y,X,Y,Z\n1,2,3,4,5\n");
  EXPECT_EQ(code_of([&] { read_correspondences(bad_header); }), ErrorCode::Parse);
  const auto bad_row = temp_file("r.csv", "u,v,X,Y,Z\n1,2,3,four,5\n");
  EXPECT_EQ(code_of([&] { read_correspondences(bad_row); }), ErrorCode::Parse);
  const auto bad_pose = temp_file("p.json", "{\"rotation\": [1,0,0], \"translation\": [0,0,1]}");
  EXPECT_EQ(code_of([&] { read_pose(bad_pose); }), ErrorCode::Parse);
}

TEST(Files, PoseAndIntrinsicsRoundTrip) {
  const auto pose_path = temp_file("pose.json", pose_to_json(kPose));
  const RigidTransform back = read_pose(pose_path);
  EXPECT_EQ(back.rotation(), kPose.rotation());
  EXPECT_EQ(back.translation(), kPose.translation());
  const auto cam_path = temp_file("cam.json", intrinsics_to_json(kCam));
  const CameraIntrinsics cam = read_intrinsics(cam_path);
  EXPECT_EQ(cam.fx, kCam.fx);
  EXPECT_EQ(cam.cy, kCam.cy);
}
