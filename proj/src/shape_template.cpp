#include "gpshape/shape_template.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "json.hpp"

#include "gpshape/error.h"
#include "gpshape/log.h"
#include "gpshape/mesh_io.h"
#include "gpshape/parallel.h"

namespace gpshape {

namespace {

using nlohmann::json;

std::size_t nearest_reference(const std::vector<ClusterModel>& clusters, const Point3& q) {
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    const double d2 = (q - clusters[k].reference.center).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = k;
    }
  }
  return best;
}

// ---- JSON writing with 17 significant digits ----

void write_number(std::ostream& os, double v) { os << io::format_double(v); }

void write_array(std::ostream& os, const double* v, std::size_t n) {
  os << '[';
  for (std::size_t i = 0; i < n; ++i) {
    if (i) os << ',';
    write_number(os, v[i]);
  }
  os << ']';
}

void write_vec3(std::ostream& os, const Vec3& v) { write_array(os, v.data(), 3); }

void write_mat3_row_major(std::ostream& os, const Mat3& m) {
  double rows[9];
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rows[r * 3 + c] = m(r, c);
  }
  write_array(os, rows, 9);
}

Vec3 read_vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::CorruptTemplate, "expected a 3-vector");
  Vec3 v(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
  if (!v.allFinite()) throw Error(ErrorCode::CorruptTemplate, "non-finite vector");
  return v;
}

Mat3 read_mat3(const json& j) {
  if (!j.is_array() || j.size() != 9) throw Error(ErrorCode::CorruptTemplate, "expected 9 matrix entries");
  Mat3 m;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m(r, c) = j[static_cast<std::size_t>(r * 3 + c)].get<double>();
  }
  if (!m.allFinite()) throw Error(ErrorCode::CorruptTemplate, "non-finite matrix");
  return m;
}

}  // namespace

// ---- ShapeTemplate ----

ShapeTemplate::ShapeTemplate(std::vector<ClusterModel> clusters, Normalization normalization,
                             RigidTransform placement)
    : clusters_(std::move(clusters)),
      normalization_(normalization),
      placement_(placement),
      inverse_placement_(placement.inverse()) {
  for (const auto& c : clusters_) {
    if (!(c.calibrated_sigma2 > 0.0) || !std::isfinite(c.calibrated_sigma2)) {
      throw Error(ErrorCode::InvalidArgument, "calibrated variance must be finite and > 0");
    }
  }
}

std::vector<ReferencePoint> ShapeTemplate::reference_points() const {
  std::vector<ReferencePoint> refs;
  refs.reserve(clusters_.size());
  for (const auto& c : clusters_) refs.push_back(c.reference);
  return refs;
}

ShapeTemplate ShapeTemplate::placed(const RigidTransform& motion) const {
  return ShapeTemplate(clusters_, normalization_, motion * placement_);
}

ShapeTemplate ShapeTemplate::with_calibration(const std::vector<double>& sigma2) const {
  if (sigma2.size() != clusters_.size()) throw Error(ErrorCode::InvalidArgument, "one variance per cluster expected");
  auto clusters = clusters_;
  for (std::size_t k = 0; k < clusters.size(); ++k) clusters[k].calibrated_sigma2 = sigma2[k];
  return ShapeTemplate(std::move(clusters), normalization_, placement_);
}

std::vector<double> ShapeTemplate::training_shares() const {
  std::vector<double> shares;
  double total = 0.0;
  for (const auto& c : clusters_) {
    shares.push_back(static_cast<double>(c.gp.size()));
    total += shares.back();
  }
  for (auto& s : shares) s /= total;
  return shares;
}

// ---- calibration ----

CalibrationResult calibrate_variance(const ShapeTemplate& tmpl, const SurfacePointCloud& test) {
  if (test.empty()) throw Error(ErrorCode::EmptyCloud, "calibration needs a non-empty test set");
  const auto& clusters = tmpl.clusters();
  CalibrationResult out;
  out.samples.resize(test.size());
  std::vector<char> usable(test.size(), 1);
  parallel_for(test.size(), [&](std::size_t i) {
    const Point3 q = tmpl.to_template_frame(test.points[i]);
    const std::size_t k = nearest_reference(clusters, q);
    const Vec3 r = q - clusters[k].reference.center;
    if (r.norm() < 1e-12) {
      usable[i] = 0;
      return;
    }
    const SphericalSample s = to_spherical(r);
    out.samples[i] = {k, clusters[k].gp.predict_mean(direction_params(s)), s.distance};
  });

  out.sigma2.assign(clusters.size(), 0.0);
  out.counts.assign(clusters.size(), 0);
  double global = 0.0;
  std::size_t global_n = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (!usable[i]) continue;
    const auto& s = out.samples[i];
    const double e = s.predicted - s.actual;
    out.sigma2[s.cluster] += e * e;
    ++out.counts[s.cluster];
    global += e * e;
    ++global_n;
  }
  if (global_n == 0) throw Error(ErrorCode::EmptyCloud, "no usable calibration points");
  out.global_sigma2 = std::max(kSigma2Floor, global / static_cast<double>(global_n));
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    if (out.counts[k] == 0) {
      logger()->info("calibration: cluster {} has no test points, using the global variance", k);
      out.sigma2[k] = out.global_sigma2;
    } else {
      out.sigma2[k] = std::max(kSigma2Floor, out.sigma2[k] / static_cast<double>(out.counts[k]));
    }
  }
  return out;
}

// ---- building ----

ShapeTemplate build_template(const SurfacePointCloud& train, const SurfacePointCloud& test, const TemplateConfig& cfg,
                             BuildReport* report) {
  if (train.empty()) throw Error(ErrorCode::EmptyCloud, "empty training cloud");
  if (test.empty()) throw Error(ErrorCode::EmptyCloud, "empty test cloud");

  ClusterAssignment partition;
  if (!cfg.manual_centers.empty()) {
    partition = manual_reference_points(train, cfg.manual_centers);
  } else {
    partition = kmeans(train, {cfg.k, cfg.seed, cfg.kmeans_max_iters, 1e-9});
  }
  warn_near_surface_centers(partition, train);
  const ClusterAssignment assignment = apply_overlap(partition, train, cfg.overlap);
  const std::size_t k = assignment.k();

  std::vector<std::vector<DirectionParams>> inputs(k);
  std::vector<std::vector<double>> targets(k);
  for (std::size_t c = 0; c < k; ++c) {
    const auto& ref = assignment.reference_points[c];
    for (std::size_t idx : assignment.memberships[c]) {
      const Vec3 r = train.points[idx] - ref.center;
      if (r.norm() < 1e-12) {
        logger()->warn("training point {} coincides with reference point {}, skipped", idx, c);
        continue;
      }
      const SphericalSample s = to_spherical(r);
      inputs[c].push_back(direction_params(s));
      targets[c].push_back(s.distance);
    }
    if (inputs[c].size() < cfg.min_cluster_points) {
      throw Error(ErrorCode::ClusterTooSmall, "cluster " + std::to_string(c) + " has " +
                                                  std::to_string(inputs[c].size()) + " training points (< " +
                                                  std::to_string(cfg.min_cluster_points) + ")");
    }
  }

  std::vector<ClusterModel> clusters(k);
  std::vector<FitReport> fits(k);
  parallel_for(k, [&](std::size_t c) {
    std::vector<double> scaled = targets[c];
    const double scale = cfg.optimizer.normalize_targets ? target_normalizer(scaled) : 1.0;
    for (auto& t : scaled) t /= scale;
    const KernelConfig init = initial_hyperparameters(inputs[c], scaled, cfg.kernel, cfg.distance_mode);
    clusters[c].reference = assignment.reference_points[c];
    clusters[c].q_matrix = assignment.q_matrices[c];
    clusters[c].gp = fit(inputs[c], targets[c], init, cfg.optimizer, &fits[c]);
    logger()->debug("cluster {}: n={} nmll {:.6g} -> {:.6g}", c, inputs[c].size(), fits[c].initial_nmll,
                    fits[c].final_nmll);
  });

  ShapeTemplate uncalibrated(std::move(clusters), train.normalization);
  CalibrationResult calibration = calibrate_variance(uncalibrated, test);
  ShapeTemplate tmpl = uncalibrated.with_calibration(calibration.sigma2);

  if (report) {
    report->assignment = assignment;
    report->fits = std::move(fits);
    double sum = 0.0;
    for (const auto& s : calibration.samples) sum += std::abs(s.predicted - s.actual);
    report->mean_radial_error = sum / static_cast<double>(calibration.samples.size());
    report->calibration = std::move(calibration);
  }
  return tmpl;
}

// ---- queries ----

std::vector<double> mixture_weights(const ShapeTemplate& tmpl, const Point3& p) {
  const Point3 q = tmpl.to_template_frame(p);
  const auto& clusters = tmpl.clusters();
  std::vector<double> logits(clusters.size());
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    const Vec3 r = q - clusters[k].reference.center;
    logits[k] = -r.dot(clusters[k].q_matrix * r);
    max_logit = std::max(max_logit, logits[k]);
  }
  double total = 0.0;
  for (auto& l : logits) {
    l = std::exp(l - max_logit);
    total += l;
  }
  for (auto& l : logits) l /= total;
  return logits;
}

double normal_density(double x, double mean, double variance) {
  const double e = x - mean;
  return std::exp(-0.5 * e * e / variance) / std::sqrt(2.0 * std::numbers::pi * variance);
}

LikelihoodQuery point_likelihood(const ShapeTemplate& tmpl, const Point3& p) {
  const Point3 q = tmpl.to_template_frame(p);
  const auto& clusters = tmpl.clusters();
  LikelihoodQuery out;
  out.point = p;
  out.per_cluster.resize(clusters.size());
  const auto weights = mixture_weights(tmpl, p);
  out.max_density = -1.0;
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    const Vec3 r = q - clusters[k].reference.center;
    if (r.norm() < 1e-12) throw Error(ErrorCode::DegeneratePoint, "query coincides with a reference point");
    const SphericalSample s = to_spherical(r);
    auto& c = out.per_cluster[k];
    c.weight = weights[k];
    c.distance = s.distance;
    c.predicted_distance = clusters[k].gp.predict_mean(direction_params(s));
    c.density = normal_density(s.distance, c.predicted_distance, clusters[k].calibrated_sigma2);
    out.mixture += c.weight * c.density;
    if (c.density > out.max_density) {
      out.max_density = c.density;
      out.best_cluster = k;
    }
  }
  return out;
}

std::vector<ReconstructionSample> reconstruct_samples(const ShapeTemplate& tmpl, std::size_t directions_per_cluster) {
  std::vector<ReconstructionSample> out;
  if (directions_per_cluster == 0) return out;
  const auto dirs = fibonacci_directions(directions_per_cluster);
  const auto& clusters = tmpl.clusters();

  std::vector<DirectionParams> psi(dirs.size());
  for (std::size_t i = 0; i < dirs.size(); ++i) psi[i] = direction_params(to_spherical(dirs[i]));

  for (std::size_t k = 0; k < clusters.size(); ++k) {
    std::vector<Point3> pts(dirs.size());
    std::vector<char> keep(dirs.size(), 0);
    parallel_for(dirs.size(), [&](std::size_t i) {
      const double mu = clusters[k].gp.predict_mean(psi[i]);
      if (!(mu > 0.0)) return;
      const Point3 p = clusters[k].reference.center + mu * bearing(psi[i]);
      const double own = (p - clusters[k].reference.center).squaredNorm();
      for (std::size_t l = 0; l < clusters.size(); ++l) {
        if (l != k && (p - clusters[l].reference.center).squaredNorm() < own) return;
      }
      pts[i] = tmpl.placement().apply(p);
      keep[i] = 1;
    });
    for (std::size_t i = 0; i < dirs.size(); ++i) {
      if (keep[i]) out.push_back({pts[i], k, bearing(psi[i])});
    }
  }
  return out;
}

SurfacePointCloud reconstruct(const ShapeTemplate& tmpl, std::size_t directions_per_cluster) {
  SurfacePointCloud out;
  out.normalization = tmpl.normalization();
  for (const auto& s : reconstruct_samples(tmpl, directions_per_cluster)) out.points.push_back(s.point);
  return out;
}

double mean_radial_error(const ShapeTemplate& tmpl, const SurfacePointCloud& points) {
  if (points.empty()) throw Error(ErrorCode::EmptyCloud, "empty point set");
  const auto cal = calibrate_variance(tmpl, points);
  double sum = 0.0;
  for (const auto& s : cal.samples) sum += std::abs(s.predicted - s.actual);
  return sum / static_cast<double>(cal.samples.size());
}

// ---- serialization ----

std::string to_json(const ShapeTemplate& tmpl) {
  std::ostringstream os;
  os << "{\n  \"format_version\": " << ShapeTemplate::kFormatVersion << ",\n";
  os << "  \"normalization\": {\"center\": ";
  write_vec3(os, tmpl.normalization().center);
  os << ", \"scale\": ";
  write_number(os, tmpl.normalization().scale);
  os << "},\n  \"placement\": {\"rotation\": ";
  write_mat3_row_major(os, tmpl.placement().rotation());
  os << ", \"translation\": ";
  write_vec3(os, tmpl.placement().translation());
  os << "},\n  \"clusters\": [";
  for (std::size_t k = 0; k < tmpl.k(); ++k) {
    const auto& c = tmpl.cluster(k);
    const auto& cfg = c.gp.kernel();
    os << (k ? ",\n" : "\n") << "    {\"center\": ";
    write_vec3(os, c.reference.center);
    os << ", \"q_matrix\": ";
    write_mat3_row_major(os, c.q_matrix);
    os << ",\n     \"kernel\": {\"kind\": \"" << to_string(cfg.kind) << "\", \"distance_mode\": \""
       << to_string(cfg.distance_mode) << "\", \"log_lengthscale\": ";
    write_number(os, cfg.log_lengthscale);
    os << ", \"log_alpha\": ";
    write_number(os, cfg.log_alpha);
    os << ", \"log_period\": ";
    write_number(os, cfg.log_period);
    os << ", \"log_offset\": ";
    write_number(os, cfg.log_offset);
    os << ", \"log_noise\": ";
    write_number(os, cfg.log_noise);
    os << "},\n     \"target_scale\": ";
    write_number(os, c.gp.target_scale());
    os << ", \"calibrated_sigma2\": ";
    write_number(os, c.calibrated_sigma2);
    os << ",\n     \"train_psi\": [";
    const auto& psi = c.gp.inputs();
    for (std::size_t i = 0; i < psi.size(); ++i) {
      if (i) os << ',';
      write_array(os, psi[i].data(), 2);
    }
    os << "],\n     \"train_d\": ";
    write_array(os, c.gp.targets().data(), c.gp.targets().size());
    os << "}";
  }
  os << "\n  ]\n}\n";
  return os.str();
}

ShapeTemplate from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptTemplate, std::string("template is not valid JSON: ") + e.what());
  }
  try {
    if (!doc.is_object() || !doc.contains("format_version")) {
      throw Error(ErrorCode::CorruptTemplate, "missing format_version");
    }
    const int version = doc.at("format_version").get<int>();
    if (version != ShapeTemplate::kFormatVersion) {
      throw Error(ErrorCode::SchemaVersionMismatch, "template format_version " + std::to_string(version) +
                                                        ", expected " + std::to_string(ShapeTemplate::kFormatVersion));
    }
    Normalization norm;
    norm.center = read_vec3(doc.at("normalization").at("center"));
    norm.scale = doc.at("normalization").at("scale").get<double>();
    if (!(norm.scale > 0.0) || !std::isfinite(norm.scale)) throw Error(ErrorCode::CorruptTemplate, "bad scale");

    RigidTransform placement;
    if (doc.contains("placement")) {
      const auto& pl = doc.at("placement");
      try {
        placement = RigidTransform(read_mat3(pl.at("rotation")), read_vec3(pl.at("translation")));
      } catch (const Error& e) {
        if (e.code() == ErrorCode::CorruptTemplate) throw;
        throw Error(ErrorCode::CorruptTemplate, e.what());
      }
    }

    const auto& jclusters = doc.at("clusters");
    if (!jclusters.is_array() || jclusters.empty()) throw Error(ErrorCode::CorruptTemplate, "no clusters");
    std::vector<ClusterModel> clusters;
    for (std::size_t k = 0; k < jclusters.size(); ++k) {
      const auto& jc = jclusters[k];
      ClusterModel c;
      c.reference = {read_vec3(jc.at("center")), k};
      c.q_matrix = read_mat3(jc.at("q_matrix"));
      const auto& jk = jc.at("kernel");
      KernelConfig cfg;
      try {
        cfg.kind = parse_kernel_kind(jk.at("kind").get<std::string>());
        cfg.distance_mode = parse_distance_mode(jk.at("distance_mode").get<std::string>());
      } catch (const Error& e) {
        throw Error(ErrorCode::CorruptTemplate, e.what());
      }
      cfg.log_lengthscale = jk.at("log_lengthscale").get<double>();
      cfg.log_alpha = jk.at("log_alpha").get<double>();
      cfg.log_period = jk.at("log_period").get<double>();
      cfg.log_offset = jk.at("log_offset").get<double>();
      cfg.log_noise = jk.at("log_noise").get<double>();

      std::vector<DirectionParams> psi;
      for (const auto& jp : jc.at("train_psi")) {
        if (!jp.is_array() || jp.size() != 2) throw Error(ErrorCode::CorruptTemplate, "train_psi entries need 2 values");
        psi.emplace_back(jp[0].get<double>(), jp[1].get<double>());
      }
      auto d = jc.at("train_d").get<std::vector<double>>();
      if (psi.size() != d.size() || psi.empty()) {
        throw Error(ErrorCode::CorruptTemplate, "train_psi / train_d size mismatch in cluster " + std::to_string(k));
      }
      const double scale = jc.contains("target_scale") ? jc.at("target_scale").get<double>() : target_normalizer(d);
      c.calibrated_sigma2 = jc.at("calibrated_sigma2").get<double>();
      if (!(c.calibrated_sigma2 > 0.0) || !std::isfinite(c.calibrated_sigma2)) {
        throw Error(ErrorCode::CorruptTemplate, "calibrated_sigma2 must be > 0");
      }
      try {
        c.gp = GpModel::condition(std::move(psi), std::move(d), cfg, scale);
      } catch (const Error& e) {
        throw Error(ErrorCode::CorruptTemplate, std::string("cannot rebuild GP: ") + e.what());
      }
      clusters.push_back(std::move(c));
    }
    return ShapeTemplate(std::move(clusters), norm, placement);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptTemplate, std::string("malformed template: ") + e.what());
  }
}

void save_template(const ShapeTemplate& tmpl, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::out | std::ios::trunc | std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << to_json(tmpl);
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

ShapeTemplate load_template(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::in | std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace gpshape
