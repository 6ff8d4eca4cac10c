// Copyright (c) 2026 The foglift Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "foglift/error.hpp"
#include "foglift/image.hpp"
#include "foglift/threshold.hpp"

namespace foglift {

/// Reported for identical images instead of +inf.
inline constexpr double kPsnrCap = 99.0;

inline double psnr_from_mse(double mse, double peak = 1.0) {
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

inline double psnr(const Image& a, const Image& b, double peak = 1.0) {
  if (!a.same_shape(b)) throw std::invalid_argument("psnr: image dimensions differ");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
    sum += d * d;
  }
  return psnr_from_mse(sum / static_cast<double>(a.pixels.size()), peak);
}

/// Single-channel view: luminance for RGB, the channel itself for gray.
inline std::vector<double> luminance_plane(const Image& img) {
  std::vector<double> out(img.pixel_count());
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * img.width + x;
      out[i] = img.channels >= 3 ? luminance(img.rgb(x, y)) : static_cast<double>(img.at(x, y));
    }
  return out;
}

/// Mean SSIM over all fully contained 11x11 Gaussian windows (sigma 1.5),
/// computed on luminance.
inline double ssim(const Image& a, const Image& b, double peak = 1.0) {
  if (a.width != b.width || a.height != b.height) throw std::invalid_argument("ssim: image dimensions differ");
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  if (a.width < kWin || a.height < kWin) throw std::invalid_argument("ssim: image smaller than the 11x11 window");

  std::array<double, kWin> g{};
  double gsum = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - kWin / 2;
    g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    gsum += g[i];
  }
  for (auto& v : g) v /= gsum;

  const std::vector<double> la = luminance_plane(a), lb = luminance_plane(b);
  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  const int w = a.width;
  double total = 0.0;
  int count = 0;
  for (int y0 = 0; y0 + kWin <= a.height; ++y0)
    for (int x0 = 0; x0 + kWin <= a.width; ++x0) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int dy = 0; dy < kWin; ++dy)
        for (int dx = 0; dx < kWin; ++dx) {
          const double wt = g[dy] * g[dx];
          const std::size_t i = static_cast<std::size_t>(y0 + dy) * w + (x0 + dx);
          ma += wt * la[i];
          mb += wt * lb[i];
          saa += wt * la[i] * la[i];
          sbb += wt * lb[i] * lb[i];
          sab += wt * la[i] * lb[i];
        }
      const double va = std::max(0.0, saa - ma * ma);
      const double vb = std::max(0.0, sbb - mb * mb);
      const double cov = sab - ma * mb;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return total / count;
}

struct MaskedPsnrConfig {
  double target_fraction = 0.5;
  double peak = 1.0;
};

/// Depth cutoff selecting the nearest `fraction` of hit pixels (nearest-rank
/// quantile over depth > 0).
inline double depth_quantile(const Image& depth, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("target_fraction must lie in (0, 1]");
  std::vector<float> hits;
  for (float d : depth.pixels)
    if (d > 0.0f && std::isfinite(d)) hits.push_back(d);
  if (hits.empty()) throw NoForegroundError("depth map has no foreground pixels");
  std::sort(hits.begin(), hits.end());
  const auto rank = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(hits.size()) - 1e-12));
  return hits[std::max<std::size_t>(rank, 1) - 1];
}

/// PSNR restricted to hit pixels no farther than the depth quantile.
inline double masked_psnr(const Image& render, const Image& gt_clear, const Image& gt_depth,
                          const MaskedPsnrConfig& cfg = {}) {
  if (!render.same_shape(gt_clear)) throw std::invalid_argument("masked_psnr: render and ground truth differ in shape");
  if (gt_depth.width != render.width || gt_depth.height != render.height || gt_depth.channels != 1)
    throw std::invalid_argument("masked_psnr: depth map does not match the image");
  const double cutoff = depth_quantile(gt_depth, cfg.target_fraction);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t p = 0; p < gt_depth.pixels.size(); ++p) {
    const float d = gt_depth.pixels[p];
    if (!(d > 0.0f && d <= cutoff)) continue;
    for (int c = 0; c < render.channels; ++c) {
      const std::size_t i = p * render.channels + c;
      const double diff = static_cast<double>(render.pixels[i]) - gt_clear.pixels[i];
      sum += diff * diff;
      ++n;
    }
  }
  return psnr_from_mse(sum / static_cast<double>(n), cfg.peak);
}

/// Number of pixels the depth mask keeps.
inline std::size_t masked_pixel_count(const Image& gt_depth, double fraction) {
  const double cutoff = depth_quantile(gt_depth, fraction);
  return static_cast<std::size_t>(std::count_if(gt_depth.pixels.begin(), gt_depth.pixels.end(),
                                                [&](float d) { return d > 0.0f && d <= cutoff; }));
}

}  // namespace foglift
