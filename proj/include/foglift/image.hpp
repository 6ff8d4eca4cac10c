// Copyright (c) 2026 The foglift Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "foglift/vec.hpp"

namespace foglift {

/// Interleaved float image, row 0 at the top. Linear values throughout; the
/// sRGB transfer only happens at the PNG boundary.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.0f)
      : width(w), height(h), channels(c), pixels(static_cast<std::size_t>(w) * h * c, fill) {
    if (w <= 0 || h <= 0 || c <= 0) throw std::invalid_argument("image dimensions must be positive");
  }

  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  float& at(int x, int y, int c = 0) { return pixels[index(x, y, c)]; }
  float at(int x, int y, int c = 0) const { return pixels[index(x, y, c)]; }

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

  Rgb rgb(int x, int y) const {
    const std::size_t i = index(x, y);
    return {pixels[i], pixels[i + 1], pixels[i + 2]};
  }
  void set_rgb(int x, int y, const Rgb& c) {
    const std::size_t i = index(x, y);
    pixels[i] = static_cast<float>(c.r);
    pixels[i + 1] = static_cast<float>(c.g);
    pixels[i + 2] = static_cast<float>(c.b);
  }

  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

}  // namespace foglift
