// Copyright (c) 2026 The foglift Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "foglift/camera.hpp"
#include "foglift/field.hpp"
#include "foglift/io.hpp"
#include "foglift/render.hpp"

namespace foglift {

/// Procedural scene plus the camera rig that photographs it.
struct SceneSpec {
  std::string name = "custom";
  std::uint64_t seed = 0;
  std::vector<Primitive> primitives;
  double fog_sigma = 0.0;
  Rgb fog_color = gray(0.7);
  Aabb fog_bounds{{-1, -1, -1}, {1, 1, 1}};
  Vec3 center;  // look-at target; cameras live on the hemisphere above it
  int n_train = 100;
  int n_test = 20;
  double dist_min = 1.0;
  double dist_max = 1.0;
  int width = 64;
  int height = 64;
  double camera_angle_x = 0.75;
  double near = 0.05;
  double far = 7.0;
  int gt_samples = 512;  // quadrature samples per ray for ground-truth images
  std::optional<DirectionalLight> light = DirectionalLight{};

  void validate() const {
    if (!(dist_min > 0.0) || !(dist_min <= dist_max)) throw std::invalid_argument("need 0 < dist_min <= dist_max");
    if (n_train < 1 || n_test < 0) throw std::invalid_argument("need n_train >= 1 and n_test >= 0");
    if (!(fog_sigma >= 0.0)) throw std::invalid_argument("fog_sigma must be >= 0");
    if (gt_samples < 1) throw std::invalid_argument("gt_samples must be >= 1");
    scene().validate();
  }

  AnalyticScene scene(bool with_fog = true) const {
    AnalyticScene s;
    s.fog_sigma = with_fog ? fog_sigma : 0.0;
    s.fog_color = fog_color;
    s.fog_bounds = fog_bounds;
    s.primitives = primitives;
    s.light = light;
    return s;
  }

  Camera camera_template() const {
    return {width, height, camera_angle_x, Transform::identity(), near, far};
  }
};

inline nlohmann::json to_json(const SceneSpec& spec) {
  auto vec = [](const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); };
  auto rgb = [](const Rgb& c) { return nlohmann::json::array({c.r, c.g, c.b}); };
  nlohmann::json prims = nlohmann::json::array();
  for (const auto& p : spec.primitives) {
    nlohmann::json j{{"solid_sigma", p.solid_sigma}, {"albedo", rgb(p.albedo)}};
    if (const auto* s = std::get_if<Sphere>(&p.shape)) {
      j["shape"] = "sphere";
      j["center"] = vec(s->center);
      j["radius"] = s->radius;
    } else {
      const auto& b = std::get<Box>(p.shape);
      j["shape"] = "box";
      j["min"] = vec(b.min);
      j["max"] = vec(b.max);
    }
    prims.push_back(j);
  }
  nlohmann::json j{{"name", spec.name},
                   {"seed", spec.seed},
                   {"fog_sigma", spec.fog_sigma},
                   {"fog_color", rgb(spec.fog_color)},
                   {"fog_bbox_min", vec(spec.fog_bounds.min)},
                   {"fog_bbox_max", vec(spec.fog_bounds.max)},
                   {"center", vec(spec.center)},
                   {"n_train", spec.n_train},
                   {"n_test", spec.n_test},
                   {"dist_min", spec.dist_min},
                   {"dist_max", spec.dist_max},
                   {"width", spec.width},
                   {"height", spec.height},
                   {"camera_angle_x", spec.camera_angle_x},
                   {"near", spec.near},
                   {"far", spec.far},
                   {"gt_samples", spec.gt_samples},
                   {"primitives", prims}};
  if (spec.light) {
    j["light_direction"] = vec(spec.light->direction);
    j["light_ambient"] = spec.light->ambient;
  }
  return j;
}

namespace detail {

// Ground slab filling the bottom of the fog box, a pedestal with a ball on
// top, and two smaller props. Everything scales with `s`; densities scale
// with 1/s so the apparent opacity is scale independent.
inline SceneSpec pedestal_layout(double s) {
  SceneSpec spec;
  const double solid = 50.0 / s;
  spec.fog_bounds = {{-3.0 * s, -3.0 * s, -0.3 * s}, {3.0 * s, 3.0 * s, 3.3 * s}};
  spec.center = {0.0, 0.0, 0.5 * s};
  spec.dist_min = 1.8 * s;
  spec.dist_max = 2.7 * s;
  spec.near = 0.05 * s;
  spec.far = 7.0 * s;
  spec.primitives = {
      {Box{{-3.0 * s, -3.0 * s, -0.3 * s}, {3.0 * s, 3.0 * s, 0.0}}, solid, {0.45, 0.40, 0.30}},
      {Box{{-0.35 * s, -0.35 * s, 0.0}, {0.35 * s, 0.35 * s, 0.5 * s}}, solid, {0.60, 0.60, 0.65}},
      {Sphere{{0.0, 0.0, 0.8 * s}, 0.3 * s}, solid, {0.80, 0.15, 0.10}},
      {Box{{0.8 * s, -0.9 * s, 0.0}, {1.2 * s, -0.5 * s, 0.4 * s}}, solid, {0.10, 0.30, 0.70}},
      {Sphere{{-0.9 * s, 0.7 * s, 0.25 * s}, 0.25 * s}, solid, {0.20, 0.60, 0.20}},
  };
  return spec;
}

}  // namespace detail

// World size of the pedestal presets. At this scale sigma_fog 0.5 leaves the
// objects clearly visible from the camera shell.
inline constexpr double kPedestalScale = 0.5;

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"pedestal", "pedestal-heavy", "small-scale", "clear"};
  return names;
}

/// Named scene presets:
///   pedestal        moderate fog, sigma_fog 0.5
///   pedestal-heavy  same scene, sigma_fog 2.0
///   small-scale     pedestal shrunk 4x with 4x the fog density (same look)
/// All share one layout at kPedestalScale (small-scale at a quarter of it).
///   clear           pedestal without fog
inline SceneSpec make_preset(const std::string& name, std::uint64_t seed = 0) {
  SceneSpec spec;
  if (name == "pedestal") {
    spec = detail::pedestal_layout(kPedestalScale);
    spec.fog_sigma = 0.5;
  } else if (name == "pedestal-heavy") {
    spec = detail::pedestal_layout(kPedestalScale);
    spec.fog_sigma = 2.0;
  } else if (name == "small-scale") {
    spec = detail::pedestal_layout(0.25 * kPedestalScale);
    spec.fog_sigma = 2.0;
  } else if (name == "clear") {
    spec = detail::pedestal_layout(kPedestalScale);
    spec.fog_sigma = 0.0;
  } else {
    throw std::invalid_argument("unknown preset '" + name + "'");
  }
  spec.name = name;
  spec.seed = seed;
  return spec;
}

/// Pedestal-sized rig with a random ground color and 2-5 random props.
/// Solid densities are drawn from [50, 150].
inline SceneSpec random_scene_spec(std::uint64_t seed, double fog_sigma) {
  SceneSpec spec = detail::pedestal_layout(1.0);
  spec.name = "random";
  spec.seed = seed;
  spec.fog_sigma = fog_sigma;
  std::mt19937_64 rng(mix_seed(seed, 0x5ce9e));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto range = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  auto albedo = [&] { return Rgb{range(0.1, 0.9), range(0.1, 0.9), range(0.1, 0.9)}; };

  spec.primitives.resize(1);
  spec.primitives[0].albedo = albedo();
  spec.primitives[0].solid_sigma = range(50.0, 150.0);
  const int count = 2 + static_cast<int>(unit(rng) * 4.0);
  for (int i = 0; i < count; ++i) {
    const double x = range(-1.0, 1.0), y = range(-1.0, 1.0), size = range(0.15, 0.4);
    Primitive p;
    if (unit(rng) < 0.5) {
      p.shape = Sphere{{x, y, size}, size};
    } else {
      p.shape = Box{{x - size, y - size, 0.0}, {x + size, y + size, range(0.2, 0.9)}};
    }
    p.solid_sigma = range(50.0, 150.0);
    p.albedo = albedo();
    spec.primitives.push_back(p);
  }
  return spec;
}

/// Camera on the upper hemisphere around the scene center at a uniform
/// distance in [dist_min, dist_max], looking at the center with +Z up.
template <class Engine>
Camera sample_camera(const SceneSpec& spec, Engine& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double z = unit(rng);  // uniform z gives uniform area on the hemisphere
  const double phi = 2.0 * std::numbers::pi * unit(rng);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  const double dist = spec.dist_min + (spec.dist_max - spec.dist_min) * unit(rng);
  const Vec3 eye = spec.center + dist * Vec3{r * std::cos(phi), r * std::sin(phi), z};
  Camera cam = spec.camera_template();
  cam.camera_to_world = look_at(eye, spec.center);
  return cam;
}

/// Camera for frame `index` of a split. Each frame owns its own RNG stream.
inline Camera frame_camera(const SceneSpec& spec, Split split, int index) {
  const std::uint64_t stream = (split == Split::train ? 0ull : 1ull << 32) + static_cast<std::uint64_t>(index);
  std::mt19937_64 rng(mix_seed(spec.seed, stream));
  return sample_camera(spec, rng);
}

/// Distance to the first primitive along every pixel ray; 0 where nothing is hit.
inline Image depth_map(const AnalyticScene& scene, const Camera& cam) {
  Image depth(cam.width, cam.height, 1);
  parallel_for(static_cast<std::size_t>(cam.height), [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < cam.width; ++x) {
      const Ray ray = pixel_ray(cam, x, y);
      const auto hit = scene.first_hit(ray.origin, ray.direction, ray.t_near, ray.t_far);
      depth.at(x, y) = hit ? static_cast<float>(*hit) : 0.0f;
    }
  });
  return depth;
}

/// Pixels whose rays miss every primitive (only fog or nothing along them).
inline std::vector<bool> fog_only_mask(const AnalyticScene& scene, const Camera& cam) {
  const Image depth = depth_map(scene, cam);
  std::vector<bool> mask(depth.pixel_count());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = depth.pixels[i] == 0.0f;
  return mask;
}

inline DatasetMeta dataset_meta(const SceneSpec& spec) {
  DatasetMeta meta;
  meta.fog_sigma = spec.fog_sigma;
  meta.seed = spec.seed;
  meta.bounds = spec.fog_bounds;
  meta.near = spec.near;
  meta.far = spec.far;
  meta.width = spec.width;
  meta.height = spec.height;
  meta.spec = to_json(spec);
  return meta;
}

/// Renders and writes a paired foggy/clear dataset with depth maps:
///   transforms.json / transforms_test.json   manifests (train / test)
///   train/r_<i>.png, test/r_<i>.png            foggy images
///   clear/{train,test}/r_<i>.png               same cameras without fog
///   depth/{train,test}/r_<i>.pfm               first-hit distance, 0 = miss
///   meta.json                                  fog, seed, bounds, spec echo
/// Returns the training manifest.
inline DatasetManifest generate_dataset(const SceneSpec& spec, const fs::path& out_dir) {
  spec.validate();
  const AnalyticScene foggy = spec.scene(true);
  const AnalyticScene clear = spec.scene(false);
  const DatasetMeta meta = dataset_meta(spec);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  DatasetManifest train_manifest;
  for (Split split : {Split::train, Split::test}) {
    const std::string sub = split == Split::train ? "train" : "test";
    const int count = split == Split::train ? spec.n_train : spec.n_test;
    if (count == 0) continue;
    for (const fs::path& d : {out_dir / sub, out_dir / meta.clear_dir / sub, out_dir / meta.depth_dir / sub}) {
      fs::create_directories(d, ec);
      if (ec) throw IoError("cannot create " + d.string() + ": " + ec.message());
    }
    DatasetManifest manifest{spec.camera_angle_x, {}};
    for (int i = 0; i < count; ++i) {
      const Camera cam = frame_camera(spec, split, i);
      const std::string stem = "r_" + std::to_string(i);
      const RenderOutput fog_render = render_image(foggy, cam, spec.gt_samples);
      const RenderOutput clear_render = render_image(clear, cam, spec.gt_samples);
      write_png(out_dir / sub / (stem + ".png"), fog_render.rgb);
      write_png(out_dir / meta.clear_dir / sub / (stem + ".png"), clear_render.rgb);
      write_pfm(out_dir / meta.depth_dir / sub / (stem + ".pfm"), depth_map(clear, cam));
      manifest.frames.push_back({"./" + sub + "/" + stem, cam.camera_to_world});
    }
    write_manifest(out_dir / manifest_name(split), manifest);
    if (split == Split::train) train_manifest = manifest;
  }
  write_meta(out_dir / "meta.json", meta);
  return train_manifest;
}

}  // namespace foglift
