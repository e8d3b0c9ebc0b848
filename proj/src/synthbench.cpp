#include "gpshape/synthbench.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "json.hpp"

#include "gpshape/confidence.h"
#include "gpshape/dataprep.h"
#include "gpshape/error.h"
#include "gpshape/log.h"
#include "gpshape/mesh_io.h"
#include "gpshape/metrics.h"
#include "gpshape/parallel.h"
#include "gpshape/pnp.h"

namespace gpshape {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t trial_seed(std::uint64_t master, std::uint64_t counter) {
  // splitmix64 of (master, counter)
  std::uint64_t z = master + 0x9E3779B97F4A7C15ull * (counter + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

void require_grid(const std::vector<double>& v, const char* name) {
  if (v.empty()) throw Error(ErrorCode::InvalidConfig, std::string("sweep grid '") + name + "' is empty");
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(ErrorCode::InvalidConfig, std::string("non-finite value in '") + name + "'");
  }
}

std::string number(double v) { return std::isfinite(v) ? io::format_double(v) : "nan"; }

std::string json_array(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + io::format_double(v[i]);
  return s + "]";
}

}  // namespace

NoisyPixels inject_noise(std::span<const Pixel> pixels, const NoiseModel& model) {
  if (!(model.outlier_prob >= 0.0 && model.outlier_prob <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "outlier probability must lie in [0, 1]");
  }
  if (!(model.sigma_inlier >= 0.0) || !(model.sigma_outlier >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "noise sigmas must be >= 0");
  }
  std::mt19937_64 rng(model.seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::normal_distribution<double> unit(0.0, 1.0);
  NoisyPixels out;
  out.pixels.reserve(pixels.size());
  out.outlier.reserve(pixels.size());
  for (const auto& p : pixels) {
    const bool outlier = coin(rng) < model.outlier_prob;
    const double sigma = outlier ? model.sigma_outlier : model.sigma_inlier;
    const double dx = unit(rng);
    const double dy = unit(rng);
    out.pixels.push_back(p + sigma * Pixel(dx, dy));
    out.outlier.push_back(outlier);
  }
  return out;
}

Mat3 euler_zyx(double yaw, double pitch, double roll) {
  return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
          Eigen::AngleAxisd(roll, Vec3::UnitX()))
      .toRotationMatrix();
}

RigidTransform generate_gt_pose(double yaw, double pitch, double roll, double distance) {
  if (!(distance > 0.0) || !std::isfinite(distance)) throw Error(ErrorCode::InvalidArgument, "distance must be > 0");
  return RigidTransform(euler_zyx(yaw, pitch, roll), Vec3(0.0, 0.0, distance));
}

void SweepConfig::validate() const {
  require_grid(yaw_deg, "yaw_deg");
  require_grid(pitch_deg, "pitch_deg");
  require_grid(roll_deg, "roll_deg");
  require_grid(distances, "distances");
  require_grid(outlier_probs, "outlier_probs");
  require_grid(sigma_outliers, "sigma_outliers");
  for (double d : distances) {
    if (!(d > 0.0)) throw Error(ErrorCode::InvalidConfig, "distances must be > 0");
  }
  for (double p : outlier_probs) {
    if (p < 0.0 || p > 1.0) throw Error(ErrorCode::InvalidConfig, "outlier_probs must lie in [0, 1]");
  }
  for (double s : sigma_outliers) {
    if (s < 0.0) throw Error(ErrorCode::InvalidConfig, "sigma_outliers must be >= 0");
  }
  if (!(sigma_inlier >= 0.0)) throw Error(ErrorCode::InvalidConfig, "sigma_inlier must be >= 0");
  if (trials == 0) throw Error(ErrorCode::InvalidConfig, "trials must be >= 1");
  if (n_points < 6) throw Error(ErrorCode::InvalidConfig, "n_points must be >= 6");
  if (!(delta > 0.0)) throw Error(ErrorCode::InvalidConfig, "delta must be > 0");
  try {
    intrinsics.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
}

std::size_t SweepConfig::n_cells() const {
  return yaw_deg.size() * pitch_deg.size() * roll_deg.size() * distances.size() * outlier_probs.size() *
         sigma_outliers.size();
}

SweepConfig sweep_config_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("sweep config: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::InvalidConfig, "sweep config must be a JSON object");
  SweepConfig cfg;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "n_points") cfg.n_points = value.get<std::size_t>();
      else if (key == "yaw_deg") cfg.yaw_deg = value.get<std::vector<double>>();
      else if (key == "pitch_deg") cfg.pitch_deg = value.get<std::vector<double>>();
      else if (key == "roll_deg") cfg.roll_deg = value.get<std::vector<double>>();
      else if (key == "distances") cfg.distances = value.get<std::vector<double>>();
      else if (key == "outlier_probs") cfg.outlier_probs = value.get<std::vector<double>>();
      else if (key == "sigma_outliers") cfg.sigma_outliers = value.get<std::vector<double>>();
      else if (key == "sigma_inlier") cfg.sigma_inlier = value.get<double>();
      else if (key == "trials") cfg.trials = value.get<std::size_t>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else if (key == "delta") cfg.delta = value.get<double>();
      else if (key == "ransac") cfg.ransac = value.get<bool>();
      else if (key == "intrinsics") {
        cfg.intrinsics.fx = value.at("fx").get<double>();
        cfg.intrinsics.fy = value.at("fy").get<double>();
        cfg.intrinsics.cx = value.at("cx").get<double>();
        cfg.intrinsics.cy = value.at("cy").get<double>();
      } else {
        throw Error(ErrorCode::InvalidConfig, "unknown sweep config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("sweep config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string to_json(const SweepConfig& cfg) {
  std::ostringstream os;
  os << "{\"n_points\": " << cfg.n_points << ", \"yaw_deg\": " << json_array(cfg.yaw_deg)
     << ", \"pitch_deg\": " << json_array(cfg.pitch_deg) << ", \"roll_deg\": " << json_array(cfg.roll_deg)
     << ", \"distances\": " << json_array(cfg.distances) << ", \"outlier_probs\": " << json_array(cfg.outlier_probs)
     << ", \"sigma_outliers\": " << json_array(cfg.sigma_outliers)
     << ", \"sigma_inlier\": " << io::format_double(cfg.sigma_inlier) << ", \"trials\": " << cfg.trials
     << ", \"seed\": " << cfg.seed << ", \"delta\": " << io::format_double(cfg.delta)
     << ", \"ransac\": " << (cfg.ransac ? "true" : "false") << ", \"intrinsics\": {\"fx\": "
     << io::format_double(cfg.intrinsics.fx) << ", \"fy\": " << io::format_double(cfg.intrinsics.fy)
     << ", \"cx\": " << io::format_double(cfg.intrinsics.cx) << ", \"cy\": " << io::format_double(cfg.intrinsics.cy)
     << "}}";
  return os.str();
}

SweepResult run_sweep(const ShapeTemplate& tmpl, std::span<const Point3> model_points, const SweepConfig& cfg,
                      const std::string& object, const SweepHooks* hooks) {
  cfg.validate();
  if (model_points.empty()) throw Error(ErrorCode::EmptyCloud, "sweep needs model points");

  // Work in normalized units with a template whose normalization is the identity.
  SurfacePointCloud model;
  for (const auto& p : model_points) model.points.push_back(tmpl.normalization().apply(p));
  if (model.size() > cfg.n_points) model = subsample(model, cfg.n_points, cfg.seed);
  const ShapeTemplate scoring(tmpl.clusters(), Normalization{}, tmpl.placement());
  const std::vector<Point3>& pts = model.points;

  struct Cell {
    double yaw, pitch, roll, dist, outlier_prob, sigma_o;
  };
  std::vector<Cell> cells;
  for (double yaw : cfg.yaw_deg) {
    for (double pitch : cfg.pitch_deg) {
      for (double roll : cfg.roll_deg) {
        for (double dist : cfg.distances) {
          for (double so : cfg.sigma_outliers) {
            for (double po : cfg.outlier_probs) cells.push_back({yaw, pitch, roll, dist, po, so});
          }
        }
      }
    }
  }

  SweepResult result;
  const std::size_t n_rows = cells.size() * cfg.trials;
  result.rows.resize(n_rows);
  const auto run_trial = [&](std::size_t r) {
    const Cell& c = cells[r / cfg.trials];
    SweepRow& row = result.rows[r];
    row.object = object;
    row.yaw = c.yaw;
    row.pitch = c.pitch;
    row.roll = c.roll;
    row.dist = c.dist;
    row.outlier_prob = c.outlier_prob;
    row.sigma_o = c.sigma_o;
    row.trial = r % cfg.trials;
    row.add = row.confidence = row.bound = kNaN;

    const std::uint64_t seed = trial_seed(cfg.seed, r);
    const RigidTransform gt = generate_gt_pose(c.yaw * kDeg, c.pitch * kDeg, c.roll * kDeg, c.dist);
    try {
      std::vector<Pixel> clean(pts.size());
      for (std::size_t i = 0; i < pts.size(); ++i) clean[i] = project(cfg.intrinsics, gt.apply(pts[i]));
      const NoisyPixels noisy = inject_noise(clean, {cfg.sigma_inlier, c.sigma_o, c.outlier_prob, seed});
      PnpConfig pnp;
      pnp.ransac = cfg.ransac;
      pnp.seed = seed;
      const PnpResult est = solve_pnp(pts, noisy.pixels, cfg.intrinsics, pnp);

      std::vector<Correspondence> corrs(pts.size());
      for (std::size_t i = 0; i < pts.size(); ++i) corrs[i] = {noisy.pixels[i], pts[i], 1.0 / pts.size()};
      const ConfidenceReport rep =
          score_pose(scoring, corrs, est.pose, cfg.intrinsics, WeightsMode::Uniform, cfg.delta);
      row.add = add_metric(pts, gt, est.pose);
      row.confidence = rep.score;
      row.bound = rep.bound;
    } catch (const Error& e) {
      row.pnp_failed = true;
      row.add = row.confidence = row.bound = kNaN;
      logger()->debug("sweep trial {} failed: {}", r, e.what());
    }
  };

  const std::size_t batch = std::max<std::size_t>(64, 16 * max_threads());
  std::size_t done = 0;
  while (done < n_rows) {
    if (hooks && hooks->cancel && hooks->cancel->load()) {
      result.interrupted = true;
      break;
    }
    const std::size_t count = std::min(batch, n_rows - done);
    parallel_for(count, [&](std::size_t i) { run_trial(done + i); });
    if (hooks && hooks->on_rows) hooks->on_rows(std::span<const SweepRow>(result.rows.data() + done, count));
    done += count;
  }
  result.rows.resize(done);

  std::vector<double> adds, confs;
  for (const auto& row : result.rows) {
    if (row.pnp_failed) {
      ++result.failures;
      continue;
    }
    adds.push_back(row.add);
    confs.push_back(row.confidence);
  }
  result.n_trials = result.rows.size();
  result.spearman = kNaN;
  try {
    result.spearman = spearman(adds, confs);
  } catch (const Error& e) {
    logger()->warn("sweep: spearman undefined: {}", e.what());
  }
  return result;
}

std::string sweep_csv_header() { return "object,yaw,pitch,roll,dist,outlier_prob,sigma_o,trial,add,confidence,bound,pnp_failed"; }

void write_sweep_rows(std::ostream& os, std::span<const SweepRow> rows) {
  for (const auto& r : rows) {
    os << r.object << ',' << number(r.yaw) << ',' << number(r.pitch) << ',' << number(r.roll) << ','
       << number(r.dist) << ',' << number(r.outlier_prob) << ',' << number(r.sigma_o) << ',' << r.trial << ','
       << number(r.add) << ',' << number(r.confidence) << ',' << number(r.bound) << ',' << (r.pnp_failed ? 1 : 0)
       << '\n';
  }
}

std::vector<NoiseCell> confidence_by_noise(const std::vector<SweepRow>& rows) {
  std::map<std::pair<double, double>, std::vector<double>> groups;
  for (const auto& r : rows) {
    if (!r.pnp_failed) groups[{r.sigma_o, r.outlier_prob}].push_back(r.confidence);
  }
  std::vector<NoiseCell> out;
  for (const auto& [key, values] : groups) {
    NoiseCell cell;
    cell.sigma_o = key.first;
    cell.outlier_prob = key.second;
    cell.n = values.size();
    double sum = 0.0;
    for (double v : values) sum += v;
    cell.mean_confidence = sum / static_cast<double>(cell.n);
    if (cell.n > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - cell.mean_confidence) * (v - cell.mean_confidence);
      cell.standard_error = std::sqrt(ss / static_cast<double>(cell.n - 1) / static_cast<double>(cell.n));
    }
    out.push_back(cell);
  }
  return out;
}

bool confidence_non_increasing(const std::vector<NoiseCell>& cells, double z) {
  for (std::size_t i = 1; i < cells.size(); ++i) {
    const auto& a = cells[i - 1];
    const auto& b = cells[i];
    if (a.sigma_o != b.sigma_o) continue;
    const double tol = z * std::hypot(a.standard_error, b.standard_error);
    if (b.mean_confidence > a.mean_confidence + tol) return false;
  }
  return true;
}

}  // namespace gpshape
