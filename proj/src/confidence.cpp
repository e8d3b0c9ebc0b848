#include "gpshape/confidence.h"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"

#include "gpshape/error.h"
#include "gpshape/log.h"
#include "gpshape/mesh_io.h"
#include "gpshape/numeric.h"
#include "gpshape/parallel.h"

namespace gpshape {

namespace {

constexpr double kMinDepth = 1e-9;

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::in | std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json parse_json_file(const std::filesystem::path& path) {
  const std::string text = slurp(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  return out;
}

double parse_number(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty() || !std::isfinite(v)) {
    throw Error(ErrorCode::Parse, where + ": '" + s + "' is not a finite number");
  }
  return v;
}

}  // namespace

void normalize_weights(std::vector<Correspondence>& corrs) {
  double total = 0.0;
  for (const auto& c : corrs) {
    if (!(c.weight >= 0.0) || !std::isfinite(c.weight)) {
      throw Error(ErrorCode::InvalidArgument, "correspondence weights must be finite and >= 0");
    }
    total += c.weight;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::InvalidArgument, "correspondence weights sum to zero");
  for (auto& c : corrs) c.weight /= total;
}

std::vector<BackProjection> back_project(const std::vector<Correspondence>& corrs, const RigidTransform& pose,
                                         const CameraIntrinsics& cam) {
  cam.validate();
  const RigidTransform inv = pose.inverse();
  std::vector<BackProjection> out(corrs.size());
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const double z = pose.apply(corrs[i].object_point).z();
    if (!(z > kMinDepth)) continue;
    out[i].point = inv.apply(unproject(cam, corrs[i].pixel, z));
    out[i].usable = true;
  }
  return out;
}

ConfidenceReport score_pose(const ShapeTemplate& tmpl, const std::vector<Correspondence>& corrs,
                            const RigidTransform& pose, const CameraIntrinsics& cam, WeightsMode mode,
                            double delta) {
  const auto projected = back_project(corrs, pose, cam);
  std::vector<std::size_t> usable;
  std::vector<double> weights;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    if (!projected[i].usable) continue;
    usable.push_back(i);
    weights.push_back(mode == WeightsMode::Uniform ? 1.0 : corrs[i].weight);
  }
  ConfidenceReport report;
  report.delta = delta;
  report.n_excluded = corrs.size() - usable.size();
  report.n_points = usable.size();
  if (usable.empty()) throw Error(ErrorCode::NoUsablePoints, "no correspondence lies in front of the camera");
  if (report.n_excluded > 0) logger()->info("score: {} correspondences behind the camera excluded", report.n_excluded);

  const double total = pairwise_sum(weights);
  if (!(total > 0.0) || !std::isfinite(total)) throw Error(ErrorCode::NoUsablePoints, "usable weights sum to zero");
  for (auto& w : weights) w /= total;

  report.per_point.resize(usable.size());
  parallel_for(usable.size(), [&](std::size_t j) {
    const Point3& p = projected[usable[j]].point;
    auto& ps = report.per_point[j];
    ps.point = p;
    ps.weight = weights[j];
    const LikelihoodQuery q = point_likelihood(tmpl, tmpl.normalization().apply(p));
    ps.best_cluster = q.best_cluster;
    ps.density = q.max_density;
    ps.residual = q.residual();
    ps.sigma = std::sqrt(tmpl.cluster(q.best_cluster).calibrated_sigma2);
  });

  std::vector<double> terms(usable.size());
  for (std::size_t j = 0; j < usable.size(); ++j) terms[j] = report.per_point[j].weight * report.per_point[j].density;
  report.score = pairwise_sum(terms);

  if (delta > 0.0) {
    std::vector<double> sigmas(usable.size());
    for (std::size_t j = 0; j < usable.size(); ++j) sigmas[j] = report.per_point[j].sigma;
    report.bound = confidence_bound(sigmas, weights, delta);
  }
  return report;
}

double confidence_bound(const std::vector<double>& sigmas, const std::vector<double>& weights, double delta) {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw Error(ErrorCode::InvalidDelta, "delta must be finite and > 0");
  if (sigmas.size() != weights.size()) throw Error(ErrorCode::LengthMismatch, "one sigma per weight expected");
  const double d2 = delta * delta;
  std::vector<double> terms(sigmas.size());
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    const double s = sigmas[i];
    terms[i] = weights[i] * s * -std::expm1(-d2 / (2.0 * s * s));
  }
  return pairwise_sum(terms) / (std::sqrt(2.0 * std::numbers::pi) * d2);
}

double template_confidence_bound(const ShapeTemplate& tmpl, double delta) {
  std::vector<double> sigmas;
  for (const auto& c : tmpl.clusters()) sigmas.push_back(std::sqrt(c.calibrated_sigma2));
  return confidence_bound(sigmas, tmpl.training_shares(), delta);
}

std::vector<Correspondence> read_correspondences(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string line;
  std::vector<Correspondence> out;
  std::size_t line_no = 0;
  bool header_seen = false;
  bool has_weight = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (!header_seen) {
      header_seen = true;
      const bool plain = fields.size() == 5 && fields[0] == "u" && fields[1] == "v" && fields[2] == "X" &&
                         fields[3] == "Y" && fields[4] == "Z";
      const bool weighted = fields.size() == 6 && fields[0] == "u" && fields[1] == "v" && fields[2] == "X" &&
                            fields[3] == "Y" && fields[4] == "Z" && fields[5] == "w";
      if (!plain && !weighted) throw Error(ErrorCode::Parse, where + ": expected header u,v,X,Y,Z[,w]");
      has_weight = weighted;
      continue;
    }
    if (fields.size() != (has_weight ? 6u : 5u)) throw Error(ErrorCode::Parse, where + ": wrong field count");
    Correspondence c;
    c.pixel = {parse_number(fields[0], where), parse_number(fields[1], where)};
    c.object_point = {parse_number(fields[2], where), parse_number(fields[3], where), parse_number(fields[4], where)};
    c.weight = has_weight ? parse_number(fields[5], where) : 1.0;
    out.push_back(c);
  }
  if (!header_seen) throw Error(ErrorCode::Parse, path.string() + ": empty correspondence file");
  if (out.empty()) throw Error(ErrorCode::NoUsablePoints, path.string() + ": no correspondences");
  normalize_weights(out);
  return out;
}

void write_correspondences(const std::filesystem::path& path, const std::vector<Correspondence>& corrs) {
  std::ofstream out(path, std::ios::out | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << "u,v,X,Y,Z,w\n";
  for (const auto& c : corrs) {
    out << io::format_double(c.pixel.x()) << ',' << io::format_double(c.pixel.y()) << ','
        << io::format_double(c.object_point.x()) << ',' << io::format_double(c.object_point.y()) << ','
        << io::format_double(c.object_point.z()) << ',' << io::format_double(c.weight) << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

RigidTransform read_pose(const std::filesystem::path& path) {
  const auto doc = parse_json_file(path);
  try {
    const auto r = doc.at("rotation").get<std::vector<double>>();
    const auto t = doc.at("translation").get<std::vector<double>>();
    if (r.size() != 9 || t.size() != 3) throw Error(ErrorCode::Parse, path.string() + ": rotation[9] and translation[3] expected");
    Mat3 rot;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) rot(i, j) = r[static_cast<std::size_t>(i * 3 + j)];
    }
    try {
      return RigidTransform(rot, Vec3(t[0], t[1], t[2]));
    } catch (const Error& e) {
      throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
}

std::string pose_to_json(const RigidTransform& pose) {
  std::ostringstream os;
  os << "{\"rotation\": [";
  for (int i = 0; i < 9; ++i) os << (i ? ", " : "") << io::format_double(pose.rotation()(i / 3, i % 3));
  os << "], \"translation\": [";
  for (int i = 0; i < 3; ++i) os << (i ? ", " : "") << io::format_double(pose.translation()[i]);
  os << "]}\n";
  return os.str();
}

CameraIntrinsics read_intrinsics(const std::filesystem::path& path) {
  const auto doc = parse_json_file(path);
  CameraIntrinsics cam;
  try {
    cam.fx = doc.at("fx").get<double>();
    cam.fy = doc.at("fy").get<double>();
    cam.cx = doc.at("cx").get<double>();
    cam.cy = doc.at("cy").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
  cam.validate();
  return cam;
}

std::string intrinsics_to_json(const CameraIntrinsics& cam) {
  return "{\"fx\": " + io::format_double(cam.fx) + ", \"fy\": " + io::format_double(cam.fy) +
         ", \"cx\": " + io::format_double(cam.cx) + ", \"cy\": " + io::format_double(cam.cy) + "}\n";
}

}  // namespace gpshape
