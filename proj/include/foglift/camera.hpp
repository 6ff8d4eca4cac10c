// Copyright (c) 2026 The foglift Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <optional>
#include <numbers>
#include <stdexcept>
#include <string>

#include "foglift/vec.hpp"

namespace foglift {

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length
  double t_near = 0.0;
  double t_far = 1.0;

  Vec3 at(double t) const { return origin + direction * t; }
};

/// The part of the ray's [t_near, t_far] span inside `box`; nullopt when the
/// ray misses it.
inline std::optional<Ray> clip_ray(const Ray& ray, const Aabb& box) {
  double t0 = ray.t_near, t1 = ray.t_far;
  for (std::size_t a = 0; a < 3; ++a) {
    const double o = ray.origin[a], d = ray.direction[a];
    if (d == 0.0) {
      if (o < box.min[a] || o > box.max[a]) return std::nullopt;
      continue;
    }
    double ta = (box.min[a] - o) / d;
    double tb = (box.max[a] - o) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (!(t0 < t1)) return std::nullopt;
  Ray out = ray;
  out.t_near = t0;
  out.t_far = t1;
  return out;
}

/// Pinhole camera. The transform maps camera space to world space; the camera
/// looks down its local -Z with +Y up, as in the NeRF synthetic layout.
struct Camera {
  int width = 0;
  int height = 0;
  double camera_angle_x = 0.0;
  Transform camera_to_world;
  double near = 0.0;
  double far = 1.0;

  double focal() const { return 0.5 * width / std::tan(0.5 * camera_angle_x); }

  void validate() const {
    if (width <= 0 || height <= 0) throw std::invalid_argument("camera resolution must be positive");
    if (!(camera_angle_x > 0.0 && camera_angle_x < std::numbers::pi))
      throw std::invalid_argument("camera_angle_x must lie in (0, pi)");
    if (!(near < far)) throw std::invalid_argument("camera near must be < far");
    if (camera_to_world.rigidity_error() > 1e-6)
      throw std::invalid_argument("camera rotation is not orthonormal");
  }
};

/// Ray through the center of pixel (px, py); row 0 is the top of the image.
inline Ray pixel_ray(const Camera& cam, int px, int py) {
  if (px < 0 || px >= cam.width || py < 0 || py >= cam.height)
    throw std::out_of_range("pixel (" + std::to_string(px) + ", " + std::to_string(py) + ") outside " +
                            std::to_string(cam.width) + "x" + std::to_string(cam.height) + " image");
  const double f = cam.focal();
  const Vec3 local{(px + 0.5 - 0.5 * cam.width) / f, -(py + 0.5 - 0.5 * cam.height) / f, -1.0};
  return {cam.camera_to_world.translation(), normalize(cam.camera_to_world.apply_direction(local)), cam.near,
          cam.far};
}

/// Camera-to-world transform at `eye` looking at `target`. Falls back to +Y as
/// the up hint when the view direction is parallel to `up`.
inline Transform look_at(const Vec3& eye, const Vec3& target, const Vec3& up = {0, 0, 1}) {
  const Vec3 forward = normalize(target - eye);
  Vec3 right = cross(forward, up);
  if (length(right) < 1e-9) right = cross(forward, Vec3{0, 1, 0});
  right = normalize(right);
  const Vec3 cam_up = cross(right, forward);
  return Transform::from_axes(right, cam_up, -forward, eye);
}

}  // namespace foglift
