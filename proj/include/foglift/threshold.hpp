// Copyright (c) 2026 The foglift Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "foglift/camera.hpp"
#include "foglift/error.hpp"
#include "foglift/parallel.hpp"
#include "foglift/render.hpp"
#include "foglift/savgol.hpp"

namespace foglift {

/// Settings for the automatic fog threshold search. Defaults sweep
/// {0, 0.05, ..., 8} and smooth with a quadratic over 21 candidates.
struct ThresholdConfig {
  double q_max = 8.0;
  double q_step = 0.05;
  int batch_size = 4096;
  int savgol_window = 21;
  int savgol_order = 2;
  double flat_tolerance = 1e-3;  // |d kappa / d sigma| treated as zero
  int samples_per_ray = 128;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(q_step > 0.0)) throw std::invalid_argument("q_step must be > 0");
    if (!(q_max >= q_step)) throw std::invalid_argument("q_max must be >= q_step");
    if (savgol_window % 2 == 0 || savgol_window <= savgol_order || savgol_order < 0)
      throw std::invalid_argument("savgol window must be odd and larger than the order");
    if (batch_size < 2) throw std::invalid_argument("batch_size must be >= 2");
    if (samples_per_ray < 1) throw std::invalid_argument("samples_per_ray must be >= 1");
    if (!(flat_tolerance >= 0.0)) throw std::invalid_argument("flat_tolerance must be >= 0");
  }

  /// Candidate thresholds 0, q_step, 2 q_step, ... up to q_max.
  std::vector<double> candidates() const {
    const auto count = static_cast<std::size_t>(std::floor(q_max / q_step + 1e-9)) + 1;
    std::vector<double> q(count);
    for (std::size_t k = 0; k < count; ++k) q[k] = static_cast<double>(k) * q_step;
    return q;
  }
};

struct ContrastCurve {
  std::vector<double> sigma_thre;
  std::vector<double> kappa_raw;
  std::vector<double> kappa_smooth;
  std::optional<double> detected;
};

/// Rec. 709 luminance of a linear color.
constexpr double luminance(const Rgb& c) { return 0.2126 * c.r + 0.7152 * c.g + 0.0722 * c.b; }

/// Michelson contrast of a set of non-negative luminances; 0 for all-black.
inline double michelson(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("michelson contrast of an empty set");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double sum = *hi + *lo;
  return sum > 0.0 ? (*hi - *lo) / sum : 0.0;
}

/// Central differences with spacing h; one-sided at both ends.
inline std::vector<double> central_gradient(std::span<const double> y, double h) {
  const std::size_t n = y.size();
  std::vector<double> g(n, 0.0);
  if (n < 2) return g;
  g[0] = (y[1] - y[0]) / h;
  g[n - 1] = (y[n - 1] - y[n - 2]) / h;
  for (std::size_t i = 1; i + 1 < n; ++i) g[i] = (y[i + 1] - y[i - 1]) / (2.0 * h);
  return g;
}

/// Index where the curve flattens after its steepest rise: the first index at
/// or after the maximum-gradient index from which |gradient| stays within
/// `flat_tolerance` for `window` consecutive candidates. A curve that never
/// rises faster than the tolerance has its plateau at index 0.
inline std::size_t detect_plateau(std::span<const double> curve, double q_step, int window, double flat_tolerance) {
  if (window < 1) throw std::invalid_argument("plateau window must be >= 1");
  const auto w = static_cast<std::size_t>(window);
  if (curve.size() < 2 * w) throw std::invalid_argument("contrast curve shorter than two windows");
  const std::vector<double> g = central_gradient(curve, q_step);
  auto steepest = static_cast<std::size_t>(std::max_element(g.begin(), g.end()) - g.begin());
  // A curve that never rises by more than the tolerance is flat throughout;
  // its argmax would only pick up rounding noise.
  if (g[steepest] <= flat_tolerance) steepest = 0;

  std::size_t run = 0;  // flat samples ending at j
  for (std::size_t j = steepest; j < g.size(); ++j) {
    run = std::abs(g[j]) <= flat_tolerance ? run + 1 : 0;
    if (run == w) return j + 1 - w;
  }
  std::ostringstream msg;
  msg << "contrast curve never stays flat (|gradient| <= " << flat_tolerance << ") for " << window
      << " candidates after its steepest rise at candidate " << steepest;
  throw NoPlateauError(msg.str());
}

/// Samples along a fixed batch of pixel rays, queried once and reused for
/// every candidate threshold.
struct SampleCache {
  std::vector<RaySamples> rays;
};

/// Draws `batch_size` pixel rays uniformly (with replacement) over the pixels
/// of the given cameras and samples the field along each.
template <RadianceSource Field>
SampleCache cache_ray_batch(const Field& field, std::span<const Camera> cameras, const ThresholdConfig& cfg) {
  cfg.validate();
  if (cameras.empty()) throw std::invalid_argument("threshold estimation needs at least one camera");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick_cam(0, cameras.size() - 1);
  std::vector<Ray> rays;
  rays.reserve(static_cast<std::size_t>(cfg.batch_size));
  for (int b = 0; b < cfg.batch_size; ++b) {
    const Camera& cam = cameras[pick_cam(rng)];
    std::uniform_int_distribution<int> px(0, cam.width - 1), py(0, cam.height - 1);
    const int x = px(rng);
    const int y = py(rng);
    rays.push_back(pixel_ray(cam, x, y));
  }
  SampleCache cache;
  cache.rays.resize(rays.size());
  parallel_for(rays.size(), [&](std::size_t i) { cache.rays[i] = sample_ray(field, rays[i], cfg.samples_per_ray); });
  return cache;
}

/// Raw and smoothed Michelson contrast of the cached batch for every
/// candidate threshold. Contrast uses the batch-wide luminance extremes.
inline ContrastCurve contrast_sweep(const SampleCache& cache, const ThresholdConfig& cfg) {
  cfg.validate();
  if (cache.rays.empty()) throw std::invalid_argument("empty sample cache");
  ContrastCurve curve;
  curve.sigma_thre = cfg.candidates();
  curve.kappa_raw.resize(curve.sigma_thre.size());
  parallel_for(curve.sigma_thre.size(), [&](std::size_t k) {
    std::vector<double> lum(cache.rays.size());
    for (std::size_t r = 0; r < cache.rays.size(); ++r)
      lum[r] = luminance(composite(cache.rays[r], curve.sigma_thre[k]).color);
    curve.kappa_raw[k] = michelson(lum);
  });
  curve.kappa_smooth = savgol_smooth(curve.kappa_raw, cfg.savgol_window, cfg.savgol_order);
  return curve;
}

/// Fills `curve.detected` from the smoothed contrast. Throws NoPlateauError.
inline double detect_threshold(ContrastCurve& curve, const ThresholdConfig& cfg) {
  const std::size_t idx = detect_plateau(curve.kappa_smooth, cfg.q_step, cfg.savgol_window, cfg.flat_tolerance);
  curve.detected = curve.sigma_thre[idx];
  return *curve.detected;
}

struct ThresholdEstimate {
  double sigma_thre = 0.0;
  ContrastCurve curve;
};

/// Full automatic search: cache a ray batch, sweep the candidates, smooth,
/// and take the start of the plateau as the fog threshold.
template <RadianceSource Field>
ThresholdEstimate estimate_threshold(const Field& field, std::span<const Camera> cameras, const ThresholdConfig& cfg) {
  if constexpr (requires { field.empty(); }) {
    if (field.empty()) throw std::invalid_argument("threshold estimation on an empty field");
  }
  const SampleCache cache = cache_ray_batch(field, cameras, cfg);
  ThresholdEstimate est;
  est.curve = contrast_sweep(cache, cfg);
  est.sigma_thre = detect_threshold(est.curve, cfg);
  return est;
}

}  // namespace foglift
