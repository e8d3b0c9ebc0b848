#include "gpshape/cli.h"

#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <openssl/evp.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "gpshape/confidence.h"
#include "gpshape/dataprep.h"
#include "gpshape/log.h"
#include "gpshape/mesh_io.h"
#include "gpshape/metrics.h"
#include "gpshape/parallel.h"
#include "gpshape/shape_template.h"
#include "gpshape/synthbench.h"

namespace gpshape::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kManifestVersion = 1;

std::atomic<bool> g_interrupted{false};

extern "C" void on_sigint(int) { g_interrupted.store(true); }

struct GlobalOptions {
  std::size_t threads = 0;
  bool json_output = false;
  int verbosity = 0;
  bool quiet = false;
  std::string outdir = ".";
  std::string units = "model";
  double model_diameter = 0.0;
};

struct FitOptions {
  std::string input;
  std::size_t refs = 8;
  std::string kernel = "rq";
  std::string distance_mode = "bearing_euclidean";
  double overlap = 0.15;
  std::size_t train = 10000;
  std::size_t test = 30000;
  std::size_t iters = 250;
  double lr = 0.1;
  std::uint64_t seed = 0;
  std::string out;
  std::string centers;
  std::size_t cameras = 200;
  std::size_t rays_per_camera = 1500;
  double aperture = 60.0;
};

struct EvalOptions {
  std::string tmpl;
  std::string gt;
  double tau = 0.01;
  std::size_t chamfer_samples = 30000;
  std::size_t directions = 100000;
  std::uint64_t seed = 0;
  std::size_t cameras = 200;
  std::size_t rays_per_camera = 1500;
  std::string report;
  std::string reconstruction;
};

struct ScoreOptions {
  std::string tmpl;
  std::string pose;
  std::string intrinsics;
  std::string corr;
  double delta = 0.0;
  double threshold = std::numeric_limits<double>::quiet_NaN();
  std::string weights = "provided";
};

struct BenchOptions {
  std::vector<std::string> templates;
  std::vector<std::string> models;
  std::string sweep;
  std::string out;
  std::string summary;
};

// Records what a run read and wrote for the manifest.
struct RunRecord {
  std::string subcommand;
  std::vector<std::string> argv;
  json config = json::object();
  std::vector<fs::path> inputs;
  std::vector<fs::path> artifacts;
};

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "";
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

json file_entry(const fs::path& p) {
  json e;
  e["path"] = p.string();
  std::error_code ec;
  const auto size = fs::file_size(p, ec);
  e["bytes"] = ec ? json(nullptr) : json(size);
  e["sha256"] = sha256_file(p);
  return e;
}

json options_json(const CLI::App* app) {
  json out = json::object();
  for (const CLI::Option* opt : app->get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help") continue;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      out[name] = res.size() == 1 ? json(res.front()) : json(res);
    } else {
      out[name] = opt->get_default_str();
    }
  }
  return out;
}

void write_manifest(const GlobalOptions& g, const RunRecord& rec, int exit_code) {
  json m;
  m["manifest_version"] = kManifestVersion;
  m["tool"] = "gpshape";
  m["version"] = kVersion;
  m["subcommand"] = rec.subcommand;
  m["argv"] = rec.argv;
  m["config"] = rec.config;
  m["threads"] = max_threads();
  m["exit_code"] = exit_code;
  json inputs = json::array();
  for (const auto& p : rec.inputs) inputs.push_back(file_entry(p));
  m["inputs"] = inputs;
  json artifacts = json::array();
  for (const auto& p : rec.artifacts) artifacts.push_back(file_entry(p));
  m["artifacts"] = artifacts;
  std::error_code ec;
  fs::create_directories(g.outdir, ec);
  const fs::path path = fs::path(g.outdir) / ("gpshape_" + rec.subcommand + ".manifest.json");
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    logger()->warn("cannot write manifest {}", path.string());
    return;
  }
  out << m.dump(2) << '\n';
}

void emit_error(std::string_view category, std::string_view code, const std::string& message) {
  json e;
  e["error"] = category;
  e["code"] = code;
  e["message"] = message;
  std::cerr << e.dump() << std::endl;
}

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); }

std::string json_number(double v) { return std::isfinite(v) ? io::format_double(v) : "null"; }

// Point cloud in normalized units from a mesh (ray cast) or a raw cloud.
SurfacePointCloud load_surface(const fs::path& path, std::size_t cameras, std::size_t rays_per_camera,
                               double aperture, const Normalization* fixed) {
  io::GeometryFile geom = io::read_geometry(path);
  RaycastConfig rc;
  rc.rays_per_camera = rays_per_camera;
  rc.aperture_deg = aperture;
  if (geom.mesh) {
    TriangleMesh mesh = *geom.mesh;
    Normalization norm;
    if (fixed) {
      norm = *fixed;
      for (auto& v : mesh.vertices) v = norm.apply(v);
    } else {
      mesh = normalize_mesh(mesh, &norm);
    }
    const auto dirs = fibonacci_directions(cameras);
    SurfacePointCloud cloud = raycast_sample(mesh, dirs, rc);
    cloud.normalization = norm;
    logger()->info("ray casting {} cameras x {} rays: {} surface points", cameras, rays_per_camera, cloud.size());
    return cloud;
  }
  SurfacePointCloud cloud;
  cloud.points = std::move(geom.points);
  if (fixed) {
    for (auto& p : cloud.points) p = fixed->apply(p);
    cloud.normalization = *fixed;
    return cloud;
  }
  return normalize_unit_sphere(cloud);
}

std::vector<Point3> read_centers(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
  std::vector<Point3> centers;
  try {
    for (const auto& c : doc) {
      const auto v = c.get<std::vector<double>>();
      if (v.size() != 3) throw Error(ErrorCode::Parse, path.string() + ": centers must be [x, y, z] triples");
      centers.emplace_back(v[0], v[1], v[2]);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
  if (centers.empty()) config_error("centers file lists no centers");
  return centers;
}

int cmd_fit(const GlobalOptions& g, const FitOptions& o, RunRecord& rec) {
  if (o.refs == 0 && o.centers.empty()) config_error("--refs must be >= 1");
  if (o.overlap < 0.0 || !std::isfinite(o.overlap)) config_error("--overlap must be >= 0");
  if (o.train == 0 || o.test == 0) config_error("--train and --test must be >= 1");
  if (!(o.lr > 0.0)) config_error("--lr must be > 0");
  if (o.cameras == 0 || o.rays_per_camera == 0) config_error("--cameras and --rays-per-camera must be >= 1");
  TemplateConfig cfg;
  try {
    cfg.kernel = parse_kernel_kind(o.kernel);
    cfg.distance_mode = parse_distance_mode(o.distance_mode);
  } catch (const Error& e) {
    config_error(e.what());
  }
  rec.inputs.push_back(o.input);

  const SurfacePointCloud cloud = load_surface(o.input, o.cameras, o.rays_per_camera, o.aperture, nullptr);
  const auto [train, test] = split_train_test(cloud, o.train, o.test, o.seed);

  cfg.k = o.refs;
  cfg.overlap = o.overlap;
  cfg.seed = o.seed;
  cfg.optimizer.iterations = o.iters;
  cfg.optimizer.learning_rate = o.lr;
  if (!o.centers.empty()) {
    rec.inputs.push_back(o.centers);
    for (const auto& c : read_centers(o.centers)) cfg.manual_centers.push_back(cloud.normalization.apply(c));
  }

  BuildReport report;
  const ShapeTemplate tmpl = build_template(train, test, cfg, &report);
  save_template(tmpl, o.out);
  rec.artifacts.push_back(o.out);
  const double baseline = nn_baseline_eval(train.points, test.points);

  if (g.json_output) {
    json out;
    json clusters = json::array();
    for (std::size_t k = 0; k < tmpl.k(); ++k) {
      json c;
      c["cluster"] = k;
      c["n_train"] = tmpl.cluster(k).gp.size();
      c["initial_nmll"] = report.fits[k].initial_nmll;
      c["nmll"] = report.fits[k].final_nmll;
      c["sigma_hat"] = std::sqrt(tmpl.cluster(k).calibrated_sigma2);
      c["n_test"] = report.calibration.counts[k];
      clusters.push_back(c);
    }
    out["clusters"] = clusters;
    out["mean_radial_error"] = report.mean_radial_error;
    out["nn_baseline_error"] = baseline;
    out["n_surface_points"] = cloud.size();
    out["template"] = o.out;
    std::cout << out.dump() << std::endl;
  } else {
    for (std::size_t k = 0; k < tmpl.k(); ++k) {
      std::cout << fmt::format("cluster {}: n_train={} nmll {:.6g} -> {:.6g} sigma_hat={:.6g} n_test={}\n", k,
                               tmpl.cluster(k).gp.size(), report.fits[k].initial_nmll, report.fits[k].final_nmll,
                               std::sqrt(tmpl.cluster(k).calibrated_sigma2), report.calibration.counts[k]);
    }
    std::cout << fmt::format("mean radial error: {:.6g}\n", report.mean_radial_error);
    std::cout << fmt::format("nearest-neighbor baseline error: {:.6g}\n", baseline);
    std::cout << "template written to " << o.out << std::endl;
  }
  logger()->info("mean radial error {:.6g}", report.mean_radial_error);
  return kExitOk;
}

int cmd_eval_shape(const GlobalOptions& g, const EvalOptions& o, RunRecord& rec) {
  if (!(o.tau > 0.0) || !std::isfinite(o.tau)) config_error("--tau must be > 0");
  if (o.chamfer_samples == 0) config_error("--chamfer-samples must be >= 1");
  if (o.directions == 0) config_error("--directions must be >= 1");
  rec.inputs.push_back(o.tmpl);
  rec.inputs.push_back(o.gt);
  const ShapeTemplate tmpl = load_template(o.tmpl);
  const double tau = to_model_units(o.tau, g.units, tmpl.normalization().scale, g.model_diameter);

  const Normalization norm = tmpl.normalization();
  const SurfacePointCloud gt = load_surface(o.gt, o.cameras, o.rays_per_camera, 60.0, &norm);
  const std::size_t per_cluster = (o.directions + tmpl.k() - 1) / tmpl.k();
  const SurfacePointCloud est = reconstruct(tmpl, per_cluster);
  if (est.empty()) throw Error(ErrorCode::EmptyCloud, "reconstruction produced no points");

  ShapeMetrics m = precision_recall_f(gt.points, est.points, tau);
  const SurfacePointCloud gt_c = gt.size() > o.chamfer_samples ? subsample(gt, o.chamfer_samples, o.seed) : gt;
  const SurfacePointCloud est_c = est.size() > o.chamfer_samples ? subsample(est, o.chamfer_samples, o.seed + 1) : est;
  m.chamfer = chamfer(gt_c.points, est_c.points);

  const std::string report = to_json(m);
  std::cout << report << std::endl;
  if (!o.report.empty()) {
    std::ofstream out(o.report, std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + o.report);
    out << report << '\n';
    out.close();
    rec.artifacts.push_back(o.report);
  }
  if (!o.reconstruction.empty()) {
    std::vector<Point3> pts;
    for (const auto& p : est.points) pts.push_back(norm.invert(p));
    io::write_xyz(o.reconstruction, pts);
    rec.artifacts.push_back(o.reconstruction);
  }
  return kExitOk;
}

int cmd_score(const GlobalOptions& g, const ScoreOptions& o, RunRecord& rec) {
  if (!(o.delta > 0.0) || !std::isfinite(o.delta)) config_error("--delta must be > 0");
  WeightsMode mode;
  if (o.weights == "uniform") mode = WeightsMode::Uniform;
  else if (o.weights == "provided") mode = WeightsMode::Provided;
  else config_error("--weights must be 'uniform' or 'provided'");
  rec.inputs = {o.tmpl, o.pose, o.intrinsics, o.corr};

  const ShapeTemplate tmpl = load_template(o.tmpl);
  const RigidTransform pose = read_pose(o.pose);
  const CameraIntrinsics cam = read_intrinsics(o.intrinsics);
  const auto corrs = read_correspondences(o.corr);
  const double delta = to_model_units(o.delta, g.units, tmpl.normalization().scale, g.model_diameter);

  const ConfidenceReport rep = score_pose(tmpl, corrs, pose, cam, mode, delta);
  const double threshold = std::isnan(o.threshold) ? rep.bound : o.threshold;
  std::cout << "{\"score\": " << json_number(rep.score) << ", \"bound\": " << json_number(rep.bound)
            << ", \"accepted\": " << (accept_pose(rep, threshold) ? "true" : "false")
            << ", \"n_points\": " << rep.n_points << ", \"n_excluded\": " << rep.n_excluded
            << ", \"threshold\": " << json_number(threshold) << ", \"delta\": " << json_number(delta) << "}"
            << std::endl;
  return kExitOk;
}

int cmd_bench_synth(const GlobalOptions&, const BenchOptions& o, RunRecord& rec) {
  if (o.templates.empty()) config_error("at least one --template is required");
  if (o.templates.size() != o.models.size()) config_error("--template and --model must be given the same number of times");
  SweepConfig cfg;
  if (!o.sweep.empty()) {
    rec.inputs.push_back(o.sweep);
    std::ifstream in(o.sweep);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + o.sweep);
    std::stringstream ss;
    ss << in.rdbuf();
    cfg = sweep_config_from_json(ss.str());
  }
  cfg.validate();
  rec.config["resolved_sweep"] = json::parse(to_json(cfg));

  struct Object {
    std::string name;
    ShapeTemplate tmpl;
    std::vector<Point3> points;
  };
  std::vector<Object> objects;
  for (std::size_t i = 0; i < o.templates.size(); ++i) {
    rec.inputs.push_back(o.templates[i]);
    rec.inputs.push_back(o.models[i]);
    Object obj;
    obj.name = fs::path(o.templates[i]).stem().string();
    obj.tmpl = load_template(o.templates[i]);
    obj.points = io::read_geometry(o.models[i]).points;
    objects.push_back(std::move(obj));
  }

  std::ofstream csv(o.out, std::ios::trunc);
  if (!csv) throw Error(ErrorCode::Io, "cannot write " + o.out);
  rec.artifacts.push_back(o.out);
  csv << sweep_csv_header() << '\n';

  g_interrupted.store(false);
  auto* previous = std::signal(SIGINT, on_sigint);
  SweepHooks hooks;
  hooks.cancel = &g_interrupted;
  hooks.on_rows = [&csv](std::span<const SweepRow> rows) {
    write_sweep_rows(csv, rows);
    csv.flush();
  };

  json per_object = json::array();
  double spearman_sum = 0.0;
  std::size_t spearman_n = 0, n_trials = 0, failures = 0;
  bool interrupted = false;
  for (const auto& obj : objects) {
    const SweepResult res = run_sweep(obj.tmpl, obj.points, cfg, obj.name, &hooks);
    const auto cells = confidence_by_noise(res.rows);
    json entry;
    entry["object"] = obj.name;
    entry["spearman"] = std::isfinite(res.spearman) ? json(res.spearman) : json(nullptr);
    entry["n_trials"] = res.n_trials;
    entry["failures"] = res.failures;
    entry["noise_trend_non_increasing"] = confidence_non_increasing(cells);
    json cell_json = json::array();
    for (const auto& c : cells) {
      cell_json.push_back({{"sigma_o", c.sigma_o},
                           {"outlier_prob", c.outlier_prob},
                           {"mean_confidence", c.mean_confidence},
                           {"standard_error", c.standard_error},
                           {"n", c.n}});
    }
    entry["noise_cells"] = cell_json;
    per_object.push_back(entry);
    if (std::isfinite(res.spearman)) {
      spearman_sum += res.spearman;
      ++spearman_n;
    }
    n_trials += res.n_trials;
    failures += res.failures;
    if (res.interrupted) {
      interrupted = true;
      break;
    }
  }
  std::signal(SIGINT, previous);
  csv.close();

  json summary;
  summary["spearman"] = spearman_n ? json(spearman_sum / static_cast<double>(spearman_n)) : json(nullptr);
  summary["n_trials"] = n_trials;
  summary["failures"] = failures;
  summary["objects"] = per_object;
  summary["interrupted"] = interrupted;
  summary["euler_convention"] = "ZYX";
  summary["angle_units"] = "degrees";
  summary["distance_units"] = "normalized";
  summary["intrinsics"] = {{"fx", cfg.intrinsics.fx}, {"fy", cfg.intrinsics.fy}, {"cx", cfg.intrinsics.cx},
                           {"cy", cfg.intrinsics.cy}};
  summary["sweep"] = json::parse(to_json(cfg));
  const std::string summary_path = o.summary.empty() ? o.out + ".summary.json" : o.summary;
  std::ofstream sj(summary_path, std::ios::trunc);
  if (!sj) throw Error(ErrorCode::Io, "cannot write " + summary_path);
  sj << summary.dump(2) << '\n';
  sj.close();
  rec.artifacts.push_back(summary_path);
  std::cout << json({{"spearman", summary["spearman"]}, {"n_trials", n_trials}, {"failures", failures}}).dump()
            << std::endl;
  if (interrupted) throw Error(ErrorCode::Interrupted, "interrupted; partial results written");
  return kExitOk;
}

bool color_enabled() {
  const char* no_color = std::getenv("NO_COLOR");
  if (no_color && *no_color) return false;
  return isatty(fileno(stderr)) != 0;
}

}  // namespace

std::string_view error_category(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io:
      return "E_IO";
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidK:
    case ErrorCode::InvalidDelta:
      return "E_CONFIG";
    case ErrorCode::Parse:
    case ErrorCode::CorruptTemplate:
    case ErrorCode::SchemaVersionMismatch:
      return "E_PARSE";
    case ErrorCode::Internal:
      return "E_INTERNAL";
    case ErrorCode::Interrupted:
      return "E_INTERRUPTED";
    default:
      return "E_DATA";
  }
}

double to_model_units(double value, std::string_view units, double template_scale, double model_diameter_mm) {
  if (units == "model") return value;
  if (units != "mm") config_error("--units must be 'model' or 'mm'");
  if (model_diameter_mm > 0.0) return 2.0 * value / model_diameter_mm;
  return value * template_scale;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

int run(int argc, const char* const* argv) {
  GlobalOptions g;
  FitOptions fit_o;
  EvalOptions eval_o;
  ScoreOptions score_o;
  BenchOptions bench_o;

  CLI::App app{"Gaussian-process shape templates and pose confidence scoring", "gpshape"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.add_option("--threads", g.threads, "Maximum worker threads (0 = hardware)")->capture_default_str();
  app.add_flag("--json", g.json_output, "Structured JSON logs and output");
  app.add_flag("-v,--verbose", g.verbosity, "More log output (repeatable)");
  app.add_flag("-q,--quiet", g.quiet, "Only errors on stderr");
  app.add_option("--outdir", g.outdir, "Directory for the run manifest")->capture_default_str();
  app.add_option("--units", g.units, "Units of --delta / --tau: model or mm")
      ->check(CLI::IsMember({"model", "mm"}))
      ->capture_default_str();
  app.add_option("--model-diameter", g.model_diameter, "Object diameter in mm (with --units mm)");

  CLI::App* fit = app.add_subcommand("fit", "Fit a shape template to a mesh or point cloud");
  fit->fallthrough();
  fit->add_option("--input", fit_o.input, "Mesh (.obj/.ply) or cloud (.ply/.xyz)")->required();
  fit->add_option("--refs", fit_o.refs, "Number of reference points K")->capture_default_str();
  fit->add_option("--kernel", fit_o.kernel, "rq, rbf, matern, periodic, linear, polynomial")->capture_default_str();
  fit->add_option("--distance-mode", fit_o.distance_mode, "bearing_euclidean or angle_params")->capture_default_str();
  fit->add_option("--overlap", fit_o.overlap, "Inter-cluster overlap rho")->capture_default_str();
  fit->add_option("--train", fit_o.train, "Training points")->capture_default_str();
  fit->add_option("--test", fit_o.test, "Calibration points")->capture_default_str();
  fit->add_option("--iters", fit_o.iters, "Optimizer iterations")->capture_default_str();
  fit->add_option("--lr", fit_o.lr, "Adam learning rate")->capture_default_str();
  fit->add_option("--seed", fit_o.seed, "Master seed")->capture_default_str();
  fit->add_option("--out", fit_o.out, "Template JSON path")->required();
  fit->add_option("--centers", fit_o.centers, "JSON array of manual reference points [[x,y,z],...]");
  fit->add_option("--cameras", fit_o.cameras, "Fibonacci cameras for mesh sampling")->capture_default_str();
  fit->add_option("--rays-per-camera", fit_o.rays_per_camera, "Rays per camera")->capture_default_str();
  fit->add_option("--aperture", fit_o.aperture, "Camera ray-fan aperture in degrees")->capture_default_str();

  CLI::App* eval = app.add_subcommand("eval-shape", "Reconstruct a template and compare with ground truth");
  eval->fallthrough();
  eval->add_option("--template", eval_o.tmpl, "Template JSON")->required();
  eval->add_option("--gt", eval_o.gt, "Ground-truth mesh or cloud")->required();
  eval->add_option("--tau", eval_o.tau, "Precision/recall threshold")->capture_default_str();
  eval->add_option("--chamfer-samples", eval_o.chamfer_samples, "Max points per cloud for Chamfer")
      ->capture_default_str();
  eval->add_option("--directions", eval_o.directions, "Total reconstruction directions")->capture_default_str();
  eval->add_option("--seed", eval_o.seed, "Subsampling seed")->capture_default_str();
  eval->add_option("--cameras", eval_o.cameras, "Fibonacci cameras when --gt is a mesh")->capture_default_str();
  eval->add_option("--rays-per-camera", eval_o.rays_per_camera, "Rays per camera")->capture_default_str();
  eval->add_option("--report", eval_o.report, "Also write the JSON report here");
  eval->add_option("--reconstruction", eval_o.reconstruction, "Write reconstructed points (.xyz)");

  CLI::App* score = app.add_subcommand("score", "Confidence score of a pose estimate");
  score->fallthrough();
  score->add_option("--template", score_o.tmpl, "Template JSON")->required();
  score->add_option("--pose", score_o.pose, "Pose JSON")->required();
  score->add_option("--intrinsics", score_o.intrinsics, "Intrinsics JSON")->required();
  score->add_option("--corr", score_o.corr, "Correspondences CSV u,v,X,Y,Z[,w]")->required();
  score->add_option("--delta", score_o.delta, "Distance margin for the bound")->required();
  score->add_option("--threshold", score_o.threshold, "Acceptance threshold (default: bound at --delta)");
  score->add_option("--weights", score_o.weights, "uniform or provided")->capture_default_str();

  CLI::App* bench = app.add_subcommand("bench-synth", "Synthetic ADD vs confidence benchmark");
  bench->fallthrough();
  bench->add_option("--template", bench_o.templates, "Template JSON (repeatable)")->required();
  bench->add_option("--model", bench_o.models, "Model points for each template (repeatable)")->required();
  bench->add_option("--sweep", bench_o.sweep, "Sweep config JSON (default grid when omitted)");
  bench->add_option("--out", bench_o.out, "Result CSV")->required();
  bench->add_option("--summary", bench_o.summary, "Summary JSON (default: <out>.summary.json)");

  RunRecord rec;
  for (int i = 0; i < argc; ++i) rec.argv.emplace_back(argv[i]);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    std::cout << kVersion << std::endl;
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    emit_error("E_CONFIG", "InvalidConfig", e.what());
    return kExitUser;
  }

  const bool json_logs = g.json_output;
  auto level = spdlog::level::warn;
  if (g.quiet) level = spdlog::level::err;
  else if (g.verbosity == 1) level = spdlog::level::info;
  else if (g.verbosity >= 2) level = spdlog::level::debug;
  configure_logging(level, json_logs ? LogFormat::Json : LogFormat::Text, color_enabled());
  set_max_threads(g.threads);

  CLI::App* sub = app.get_subcommands().front();
  rec.subcommand = sub->get_name();
  rec.config = options_json(sub);
  rec.config["global"] = options_json(&app);

  int code = kExitOk;
  try {
    if (sub == fit) code = cmd_fit(g, fit_o, rec);
    else if (sub == eval) code = cmd_eval_shape(g, eval_o, rec);
    else if (sub == score) code = cmd_score(g, score_o, rec);
    else code = cmd_bench_synth(g, bench_o, rec);
  } catch (const Error& e) {
    emit_error(error_category(e.code()), to_string(e.code()), e.what());
    code = e.code() == ErrorCode::Internal ? kExitInternal : kExitUser;
  } catch (const std::bad_alloc& e) {
    emit_error("E_INTERNAL", "Internal", std::string("out of memory: ") + e.what());
    code = kExitInternal;
  } catch (const std::exception& e) {
    emit_error("E_INTERNAL", "Internal", e.what());
    code = kExitInternal;
  }
  write_manifest(g, rec, code);
  return code;
}

}  // namespace gpshape::cli
