// Copyright (c) 2026 The foglift Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "foglift/camera.hpp"
#include "foglift/field.hpp"
#include "foglift/image.hpp"
#include "foglift/parallel.hpp"

namespace foglift {

/// Anything that can be queried for density and radiance at a point: the
/// voxel grid, the analytic scene, or test doubles wrapping either.
template <class F>
concept RadianceSource = requires(const F& f, const Vec3& p) {
  { f.query(p) } -> std::convertible_to<FieldSample>;
};

/// Per-ray samples, cached once and composited under any number of
/// thresholds.
struct RaySamples {
  std::vector<double> t;
  std::vector<double> delta;
  std::vector<double> sigma;
  std::vector<Rgb> color;

  std::size_t size() const { return t.size(); }

  void resize(std::size_t n) {
    t.resize(n);
    delta.resize(n);
    sigma.resize(n);
    color.resize(n);
  }
};

/// splitmix64 finalizer, used to derive independent per-item seeds.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Sample distances for n equal strata of [t_near, t_far]: stratum midpoints,
/// or one uniform draw per stratum when an engine is supplied. The final
/// delta is the stratum width.
template <class Engine = std::mt19937_64>
void stratified_distances(const Ray& ray, int n, Engine* jitter, std::vector<double>& t, std::vector<double>& delta) {
  if (n < 1) throw std::invalid_argument("sample count must be >= 1");
  const double width = (ray.t_far - ray.t_near) / n;
  t.resize(static_cast<std::size_t>(n));
  delta.resize(static_cast<std::size_t>(n));
  if (jitter == nullptr) {
    for (int i = 0; i < n; ++i) {
      t[i] = ray.t_near + (i + 0.5) * width;
      delta[i] = width;
    }
    return;
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < n; ++i) t[i] = ray.t_near + (i + unit(*jitter)) * width;
  for (int i = 0; i + 1 < n; ++i) delta[i] = t[i + 1] - t[i];
  delta[n - 1] = width;
}

template <RadianceSource Field>
RaySamples sample_ray(const Field& field, const Ray& ray, int n, bool jitter = false, std::uint64_t seed = 0) {
  RaySamples s;
  if (jitter) {
    std::mt19937_64 rng(seed);
    stratified_distances(ray, n, &rng, s.t, s.delta);
  } else {
    stratified_distances<std::mt19937_64>(ray, n, nullptr, s.t, s.delta);
  }
  s.sigma.resize(s.t.size());
  s.color.resize(s.t.size());
  for (std::size_t i = 0; i < s.t.size(); ++i) {
    const FieldSample q = field.query(ray.at(s.t[i]));
    s.sigma[i] = q.sigma;
    s.color[i] = q.color;
  }
  return s;
}

struct CompositeResult {
  Rgb color;
  double alpha = 0.0;
  double depth = 0.0;  // expected termination distance, 0 when alpha == 0
};

namespace detail {

template <bool Thresholded>
CompositeResult composite_impl(const RaySamples& s, double threshold) {
  CompositeResult out;
  double optical_depth = 0.0;
  double weight_sum = 0.0;
  double weighted_t = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    double sigma = s.sigma[i];
    if constexpr (Thresholded) {
      if (!(sigma >= threshold)) sigma = 0.0;
    }
    if (sigma == 0.0) continue;
    const double tau = sigma * s.delta[i];
    const double weight = std::exp(-optical_depth) * -std::expm1(-tau);
    out.color += weight * s.color[i];
    weight_sum += weight;
    weighted_t += weight * s.t[i];
    optical_depth += tau;
  }
  // The weights telescope to 1 - T_N. Taking alpha from the summed optical
  // depth keeps it exactly monotone in the threshold: dropping a sample can
  // only lower every partial sum.
  out.alpha = -std::expm1(-optical_depth);
  out.depth = weight_sum > 0.0 ? weighted_t / weight_sum : 0.0;
  return out;
}

}  // namespace detail

/// Plain quadrature: color, opacity and expected depth along one ray.
inline CompositeResult composite(const RaySamples& s) { return detail::composite_impl<false>(s, 0.0); }

/// Quadrature with every density below `threshold` treated as empty space.
/// A sample exactly at the threshold is kept.
inline CompositeResult composite(const RaySamples& s, double threshold) {
  if (!(threshold >= 0.0)) throw std::invalid_argument("density threshold must be >= 0");
  return detail::composite_impl<true>(s, threshold);
}

/// Transmittance in front of every sample under the given threshold.
inline std::vector<double> transmittance(const RaySamples& s, double threshold = 0.0) {
  std::vector<double> out(s.size());
  double optical_depth = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    out[i] = std::exp(-optical_depth);
    if (s.sigma[i] >= threshold) optical_depth += s.sigma[i] * s.delta[i];
  }
  return out;
}

struct RenderOutput {
  Image rgb;    // linear, 3 channels
  Image alpha;  // 1 channel
  Image depth;  // 1 channel, world units
};

/// Renders every pixel of `cam`. Without jitter the output is fully
/// deterministic; with jitter each pixel draws from its own seeded stream.
/// An empty threshold selects the plain quadrature.
template <RadianceSource Field>
RenderOutput render_image(const Field& field, const Camera& cam, int samples_per_ray,
                          std::optional<double> threshold = std::nullopt, bool jitter = false,
                          std::uint64_t seed = 0) {
  cam.validate();
  if (samples_per_ray < 1) throw std::invalid_argument("sample count must be >= 1");
  RenderOutput out{Image(cam.width, cam.height, 3), Image(cam.width, cam.height, 1),
                   Image(cam.width, cam.height, 1)};
  parallel_for(static_cast<std::size_t>(cam.height), [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < cam.width; ++x) {
      const std::uint64_t pixel = static_cast<std::uint64_t>(y) * cam.width + x;
      const RaySamples s = sample_ray(field, pixel_ray(cam, x, y), samples_per_ray, jitter, mix_seed(seed, pixel));
      const CompositeResult c = threshold ? composite(s, *threshold) : composite(s);
      out.rgb.set_rgb(x, y, c.color);
      out.alpha.at(x, y) = static_cast<float>(c.alpha);
      out.depth.at(x, y) = static_cast<float>(c.depth);
    }
  });
  return out;
}

}  // namespace foglift
