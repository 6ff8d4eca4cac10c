// Copyright (c) 2026 The foglift Authors.
// SPDX-License-Identifier: Apache-2.0

// foglift: generate fogged scenes, fit voxel fields, estimate the fog
// threshold, render with it, and score the renders.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "foglift/foglift.hpp"

namespace fs = std::filesystem;
using namespace foglift;

namespace {

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------------------
// gen-scene

struct GenOptions {
  std::string preset;
  std::optional<double> fog;
  std::uint64_t seed = 0;
  fs::path out;
  std::optional<int> n_train, n_test, size;
};

int run_gen(const GenOptions& o) {
  SceneSpec spec = make_preset(o.preset, o.seed);
  if (o.fog) spec.fog_sigma = *o.fog;
  if (o.n_train) spec.n_train = *o.n_train;
  if (o.n_test) spec.n_test = *o.n_test;
  if (o.size) spec.width = spec.height = *o.size;
  generate_dataset(spec, o.out);
  std::cerr << "gen-scene: wrote " << spec.n_train << " train / " << spec.n_test << " test frames of '" << spec.name
            << "' (fog " << spec.fog_sigma << ") to " << o.out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// fit

struct FitOptions {
  fs::path data;
  int dims = 96;
  fs::path out;
  TrainConfig cfg;
};

fs::path log_path_for(const fs::path& field) {
  fs::path p = field;
  p.replace_extension(".log.csv");
  return p;
}

int run_fit(const FitOptions& o) {
  const Dataset train = load_dataset(o.data, Split::train);
  const int report_every = std::max(1, o.cfg.steps / 20);
  const FitResult fitted =
      fit(train, o.cfg, GridDims{o.dims, o.dims, o.dims}, [&](const TrainLogRow& row) {
        if (row.step % report_every == 0 || row.step == o.cfg.steps)
          std::cerr << "fit: step " << row.step << " loss " << format_sig6(row.loss) << " psnr "
                    << format_sig6(row.psnr) << "\n";
      });
  save_field(fitted.field, o.out);
  std::vector<CsvRow> rows;
  rows.reserve(fitted.log.size());
  for (const auto& r : fitted.log)
    rows.push_back({std::to_string(r.step), format_sig6(r.loss), format_sig6(r.psnr)});
  write_csv(log_path_for(o.out), "step,loss,psnr", rows);
  std::cerr << "fit: held-out psnr " << format_sig6(fitted.heldout_psnr) << " dB; field written to "
            << o.out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateOptions {
  fs::path field;
  fs::path data;
  fs::path curve;
  ThresholdConfig cfg;
};

void echo_config(const char* cmd, const ThresholdConfig& cfg) {
  std::cerr << cmd << ": candidates=" << cfg.candidates().size() << " qmax=" << cfg.q_max
            << " qstep=" << cfg.q_step << " window=" << cfg.savgol_window << " order=" << cfg.savgol_order
            << " batch=" << cfg.batch_size << " samples=" << cfg.samples_per_ray << " seed=" << cfg.seed << "\n";
}

int run_estimate(const EstimateOptions& o) {
  const RadianceField field = load_field(o.field);
  const Dataset ds = load_dataset(o.data, Split::train);
  echo_config("estimate", o.cfg);
  const SampleCache cache = cache_ray_batch(field, std::span<const Camera>(ds.cameras), o.cfg);
  ContrastCurve curve = contrast_sweep(cache, o.cfg);
  try {
    detect_threshold(curve, o.cfg);
  } catch (const NoPlateauError&) {
    if (!o.curve.empty()) write_curve_csv(o.curve, curve);
    throw;
  }
  if (!o.curve.empty()) write_curve_csv(o.curve, curve);
  std::cout << "sigma_thre=" << format_sig6(*curve.detected) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// render

struct RenderOptions {
  fs::path field;
  std::string pose;
  std::string thre = "0";
  fs::path out;
  fs::path data;
  std::string split = "test";
  int samples = 128;
  ThresholdConfig estimate;
};

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + s + "' (expected train or test)");
}

// A 4x4 camera-to-world matrix: either JSON ([[...],...] or
// {"transform_matrix": ...}) or 16 whitespace-separated numbers.
Transform read_pose_file(const fs::path& path) {
  const std::string text = detail::read_file_bytes(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && (text[first] == '[' || text[first] == '{')) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
    if (j.is_object()) j = j.value("transform_matrix", nlohmann::json{});
    return from_json_matrix(j, path.string());
  }
  std::istringstream in(text);
  Transform t = Transform::identity();
  for (int k = 0; k < 16; ++k)
    if (!(in >> t.m[static_cast<std::size_t>(k / 4)][static_cast<std::size_t>(k % 4)])) throw FormatError(path.string() + ": expected 16 numbers");
  return t;
}

// Intrinsics for free poses when no dataset is given: the default scene rig,
// with the clip range covering the whole field box.
Camera free_camera(const RadianceField& field, const Transform& pose) {
  Camera cam{64, 64, 0.75, pose, 1e-3, 1.0};
  const Vec3 eye = pose.translation();
  const Aabb& b = field.bounds();
  double far = 0.0;
  for (int k = 0; k < 8; ++k) {
    const Vec3 corner{k & 1 ? b.max.x : b.min.x, k & 2 ? b.max.y : b.min.y, k & 4 ? b.max.z : b.min.z};
    far = std::max(far, length(corner - eye));
  }
  cam.far = std::max(far, 2.0 * cam.near);
  return cam;
}

std::string estimate_key(const std::string& field_bytes, const ThresholdConfig& cfg, std::span<const Camera> cameras) {
  nlohmann::json j;
  j["q_max"] = cfg.q_max;
  j["q_step"] = cfg.q_step;
  j["batch"] = cfg.batch_size;
  j["window"] = cfg.savgol_window;
  j["order"] = cfg.savgol_order;
  j["tolerance"] = cfg.flat_tolerance;
  j["samples"] = cfg.samples_per_ray;
  j["seed"] = cfg.seed;
  // The cameras, not the dataset path, so relocated copies share a key.
  nlohmann::json cams = nlohmann::json::array();
  for (const Camera& c : cameras) {
    nlohmann::json m = nlohmann::json::array();
    for (const auto& row : c.camera_to_world.m) m.push_back(row);
    cams.push_back({c.width, c.height, c.camera_angle_x, c.near, c.far, m});
  }
  j["cameras"] = std::move(cams);
  return hex64(fnv1a(j.dump(), fnv1a(field_bytes)));
}

// Runs the threshold search once per (field bytes, config) and caches the
// result in "<field>.thre.json".
double auto_threshold(const RenderOptions& o, const RadianceField& field, std::span<const Camera> cameras) {
  const std::string key = estimate_key(detail::read_file_bytes(o.field), o.estimate, cameras);
  fs::path cache_path = o.field;
  cache_path += ".thre.json";
  if (fs::exists(cache_path)) {
    try {
      const auto j = nlohmann::json::parse(detail::read_file_bytes(cache_path));
      if (j.value("key", std::string()) == key) {
        const double v = j.at("sigma_thre").get<double>();
        std::cerr << "render: cached threshold sigma_thre=" << format_sig6(v) << "\n";
        return v;
      }
    } catch (const nlohmann::json::exception&) {
      // stale or corrupt cache: recompute
    }
  }
  echo_config("render", o.estimate);
  const ThresholdEstimate est = estimate_threshold(field, cameras, o.estimate);
  nlohmann::json j;
  j["key"] = key;
  j["sigma_thre"] = est.sigma_thre;
  try {
    detail::write_file_bytes(cache_path, j.dump(2) + "\n");
  } catch (const IoError& e) {
    std::cerr << "render: warning: " << e.what() << "\n";
  }
  std::cerr << "render: estimated threshold sigma_thre=" << format_sig6(est.sigma_thre) << "\n";
  return est.sigma_thre;
}

void write_render(const fs::path& rgb_path, const RenderOutput& r) {
  if (rgb_path.has_parent_path()) fs::create_directories(rgb_path.parent_path());
  fs::path stem = rgb_path;
  stem.replace_extension();
  write_png(rgb_path, r.rgb, Transfer::srgb);
  write_png(stem.string() + "_alpha.png", r.alpha, Transfer::linear);
  write_pfm(stem.string() + "_depth.pfm", r.depth);
}

bool is_index(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

int run_render(const RenderOptions& o) {
  const RadianceField field = load_field(o.field);
  std::optional<Dataset> ds;
  if (!o.data.empty()) ds = load_dataset(o.data, parse_split(o.split));

  struct Job {
    Camera cam;
    fs::path out;
  };
  std::vector<Job> jobs;
  if (o.pose == "all" || is_index(o.pose)) {
    if (!ds) throw std::invalid_argument("--pose " + o.pose + " needs --data");
    if (o.pose == "all") {
      for (std::size_t i = 0; i < ds->size(); ++i)
        jobs.push_back({ds->cameras[i], o.out / (fs::path(ds->names[i]).filename().string() + ".png")});
    } else {
      const std::size_t i = std::stoul(o.pose);
      if (i >= ds->size())
        throw std::out_of_range("pose index " + o.pose + " out of range (" + std::to_string(ds->size()) + " frames)");
      jobs.push_back({ds->cameras[i], o.out});
    }
  } else {
    const Transform pose = read_pose_file(o.pose);
    Camera cam = ds ? ds->cameras.front() : free_camera(field, pose);
    cam.camera_to_world = pose;
    jobs.push_back({cam, o.out});
  }

  std::optional<double> threshold;
  if (o.thre == "auto") {
    std::vector<Camera> cams;
    if (ds && fs::exists(o.data / manifest_name(Split::train)))
      cams = load_dataset(o.data, Split::train).cameras;
    else
      for (const auto& j : jobs) cams.push_back(j.cam);
    threshold = auto_threshold(o, field, cams);
  } else {
    threshold = parse_double(o.thre, "--thre");
    if (*threshold < 0.0) throw std::invalid_argument("--thre must be >= 0 or 'auto'");
  }
  for (const auto& job : jobs) write_render(job.out, render_image(field, job.cam, o.samples, threshold));
  std::cerr << "render: " << jobs.size() << " frame(s) at sigma_thre=" << format_sig6(*threshold) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  fs::path render_dir;
  fs::path data;
  fs::path out;
  std::string split = "test";
  MaskedPsnrConfig mask;
};

int run_eval(const EvalOptions& o) {
  const Dataset ds = load_dataset(o.data, parse_split(o.split));
  if (!ds.clear || !ds.depth) throw FormatError(o.data.string() + ": evaluation needs clear images and depth maps");
  if (!fs::is_directory(o.render_dir)) throw IoError("render directory not found: " + o.render_dir.string());

  std::size_t renders = 0;
  for (const auto& e : fs::directory_iterator(o.render_dir)) {
    const std::string name = e.path().filename().string();
    if (e.path().extension() == ".png" && !name.ends_with("_alpha.png")) ++renders;
  }
  if (renders != ds.size())
    throw std::invalid_argument("frame count mismatch: " + std::to_string(renders) + " renders in " +
                                o.render_dir.string() + ", " + std::to_string(ds.size()) + " frames in dataset");

  struct Score {
    double psnr, ssim, masked;
  };
  std::vector<Score> scores(ds.size());
  std::vector<std::string> names(ds.size());
  parallel_for(ds.size(), [&](std::size_t i) {
    names[i] = fs::path(ds.names[i]).filename().string();
    const fs::path p = o.render_dir / (names[i] + ".png");
    if (!fs::exists(p)) throw IoError("missing render " + p.string());
    const Image img = read_png(p, Transfer::srgb);
    const Image& gt = (*ds.clear)[i];
    scores[i] = {psnr(img, gt), ssim(img, gt), masked_psnr(img, gt, (*ds.depth)[i], o.mask)};
  });

  std::vector<CsvRow> rows;
  Score mean{0, 0, 0};
  for (std::size_t i = 0; i < scores.size(); ++i) {
    rows.push_back({names[i], format_sig6(scores[i].psnr), format_sig6(scores[i].ssim), format_sig6(scores[i].masked)});
    mean.psnr += scores[i].psnr / scores.size();
    mean.ssim += scores[i].ssim / scores.size();
    mean.masked += scores[i].masked / scores.size();
  }
  rows.push_back({"mean", format_sig6(mean.psnr), format_sig6(mean.ssim), format_sig6(mean.masked)});
  write_csv(o.out, "frame,psnr,ssim,masked_psnr", rows, {"color_space=linear"});
  std::cerr << "eval: " << scores.size() << " frames, mean psnr " << format_sig6(mean.psnr) << " masked_psnr "
            << format_sig6(mean.masked) << "\n";
  return 0;
}

void add_threshold_flags(CLI::App* cmd, ThresholdConfig& cfg) {
  cmd->add_option("--qmax", cfg.q_max, "largest candidate threshold")->capture_default_str();
  cmd->add_option("--qstep", cfg.q_step, "candidate spacing")->capture_default_str();
  cmd->add_option("--window", cfg.savgol_window, "smoothing window (odd)")->capture_default_str();
  cmd->add_option("--order", cfg.savgol_order, "smoothing polynomial order")->capture_default_str();
  cmd->add_option("--batch", cfg.batch_size, "rays in the contrast batch")->capture_default_str();
  cmd->add_option("--samples", cfg.samples_per_ray, "samples per ray")->capture_default_str();
  cmd->add_option("--tolerance", cfg.flat_tolerance, "gradient magnitude treated as flat")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"foglift: fog removal for voxel radiance fields by density thresholding"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-scene", "generate a paired foggy/clear dataset");
  gen_cmd->add_option("--preset", gen.preset, "pedestal | pedestal-heavy | small-scale | clear")->required();
  gen_cmd->add_option("--fog", gen.fog, "override the preset fog density");
  gen_cmd->add_option("--seed", gen.seed, "camera placement seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "output directory")->required();
  gen_cmd->add_option("--train-count", gen.n_train, "number of training frames");
  gen_cmd->add_option("--test-count", gen.n_test, "number of test frames");
  gen_cmd->add_option("--size", gen.size, "image width and height in pixels");

  FitOptions fit_opts;
  auto* fit_cmd = app.add_subcommand("fit", "fit a voxel field to a dataset's foggy images");
  fit_cmd->add_option("--data", fit_opts.data, "dataset directory")->required();
  fit_cmd->add_option("--dims", fit_opts.dims, "grid resolution per axis")->capture_default_str();
  fit_cmd->add_option("--steps", fit_opts.cfg.steps, "gradient steps")->capture_default_str();
  fit_cmd->add_option("--out", fit_opts.out, "output field file")->required();
  fit_cmd->add_option("--seed", fit_opts.cfg.seed, "ray sampling seed")->capture_default_str();
  fit_cmd->add_option("--rays", fit_opts.cfg.rays_per_step, "rays per step")->capture_default_str();
  fit_cmd->add_option("--samples", fit_opts.cfg.samples_per_ray, "samples per ray")->capture_default_str();
  fit_cmd->add_option("--lr", fit_opts.cfg.learning_rate, "density learning rate")->capture_default_str();
  fit_cmd->add_option("--color-lr", fit_opts.cfg.color_learning_rate, "color learning rate")->capture_default_str();
  fit_cmd->add_option("--beta", fit_opts.cfg.softplus_beta, "softplus sharpness")->capture_default_str();
  fit_cmd->add_option("--smooth", fit_opts.cfg.smooth_density, "neighbour smoothness weight on density")
      ->capture_default_str();
  fit_cmd->add_option("--smooth-color", fit_opts.cfg.smooth_color, "neighbour smoothness weight on color")
      ->capture_default_str();
  fit_cmd->add_option("--smooth-huber", fit_opts.cfg.smooth_huber, "density difference where smoothing turns linear")
      ->capture_default_str();

  EstimateOptions est;
  auto* est_cmd = app.add_subcommand("estimate", "find the fog density threshold of a field");
  est_cmd->add_option("--field", est.field, "field file")->required();
  est_cmd->add_option("--data", est.data, "dataset directory (training cameras)")->required();
  est_cmd->add_option("--curve", est.curve, "write the contrast curve CSV here");
  est_cmd->add_option("--seed", est.cfg.seed, "ray batch seed")->capture_default_str();
  add_threshold_flags(est_cmd, est.cfg);

  RenderOptions ren;
  auto* ren_cmd = app.add_subcommand("render", "render a field, optionally with fog removed");
  ren_cmd->add_option("--field", ren.field, "field file")->required();
  ren_cmd->add_option("--pose", ren.pose, "frame index, 'all', or a 4x4 matrix file")->required();
  ren_cmd->add_option("--thre", ren.thre, "density threshold or 'auto'")->capture_default_str();
  ren_cmd->add_option("--out", ren.out, "output PNG (a directory for --pose all)")->required();
  ren_cmd->add_option("--data", ren.data, "dataset directory for poses and intrinsics");
  ren_cmd->add_option("--split", ren.split, "dataset split for --pose")->capture_default_str();
  ren_cmd->add_option("--render-samples", ren.samples, "samples per ray")->capture_default_str();
  ren_cmd->add_option("--seed", ren.estimate.seed, "ray batch seed for --thre auto")->capture_default_str();
  add_threshold_flags(ren_cmd, ren.estimate);

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "score renders against clear ground truth");
  eval_cmd->add_option("--render-dir", ev.render_dir, "directory of rendered frames")->required();
  eval_cmd->add_option("--data", ev.data, "dataset directory")->required();
  eval_cmd->add_option("--out", ev.out, "report CSV")->required();
  eval_cmd->add_option("--split", ev.split, "dataset split")->capture_default_str();
  eval_cmd->add_option("--mask-fraction", ev.mask.target_fraction, "fraction of hit pixels kept")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen_cmd) return run_gen(gen);
    if (*fit_cmd) return run_fit(fit_opts);
    if (*est_cmd) return run_estimate(est);
    if (*ren_cmd) return run_render(ren);
    if (*eval_cmd) return run_eval(ev);
  } catch (const NoPlateauError& e) {
    std::cerr << "error: no plateau: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
