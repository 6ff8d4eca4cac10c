// Copyright (c) 2026 The foglift Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

namespace foglift {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr double operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr double& operator[](std::size_t i) { return i == 0 ? x : (i == 1 ? y : z); }

  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr Vec3& operator-=(const Vec3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  constexpr Vec3& operator*=(double s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }

  friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
  friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
  friend constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
  friend constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
  friend constexpr Vec3 operator/(const Vec3& a, double s) { return {a.x / s, a.y / s, a.z / s}; }
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double length(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline Vec3 normalize(const Vec3& v) { return v / length(v); }

constexpr Vec3 cwise_min(const Vec3& a, const Vec3& b) {
  return {a.x < b.x ? a.x : b.x, a.y < b.y ? a.y : b.y, a.z < b.z ? a.z : b.z};
}

constexpr Vec3 cwise_max(const Vec3& a, const Vec3& b) {
  return {a.x > b.x ? a.x : b.x, a.y > b.y ? a.y : b.y, a.z > b.z ? a.z : b.z};
}

/// Linear RGB triple. Kept distinct from Vec3 so positions and radiance
/// never mix by accident.
struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  constexpr double operator[](std::size_t i) const { return i == 0 ? r : (i == 1 ? g : b); }
  constexpr double& operator[](std::size_t i) { return i == 0 ? r : (i == 1 ? g : b); }

  constexpr Rgb& operator+=(const Rgb& o) {
    r += o.r;
    g += o.g;
    b += o.b;
    return *this;
  }
  constexpr Rgb& operator*=(double s) {
    r *= s;
    g *= s;
    b *= s;
    return *this;
  }

  friend constexpr Rgb operator+(Rgb a, const Rgb& o) { return a += o; }
  friend constexpr Rgb operator-(const Rgb& a, const Rgb& o) { return {a.r - o.r, a.g - o.g, a.b - o.b}; }
  friend constexpr Rgb operator*(Rgb a, double s) { return a *= s; }
  friend constexpr Rgb operator*(double s, Rgb a) { return a *= s; }
  friend constexpr Rgb operator*(const Rgb& a, const Rgb& o) { return {a.r * o.r, a.g * o.g, a.b * o.b}; }
  friend constexpr bool operator==(const Rgb&, const Rgb&) = default;
};

constexpr Rgb gray(double v) { return {v, v, v}; }

/// Axis-aligned box, closed on both ends.
struct Aabb {
  Vec3 min;
  Vec3 max;

  constexpr bool contains(const Vec3& p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z &&
           p.z <= max.z;
  }
  constexpr Vec3 extent() const { return max - min; }
  constexpr Vec3 center() const { return (min + max) * 0.5; }
  constexpr bool valid() const { return min.x < max.x && min.y < max.y && min.z < max.z; }
  friend constexpr bool operator==(const Aabb&, const Aabb&) = default;
};

/// Row-major 4x4 rigid transform, camera-to-world in the NeRF convention.
struct Transform {
  std::array<std::array<double, 4>, 4> m{{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}}};

  static constexpr Transform identity() { return {}; }

  static Transform from_axes(const Vec3& x_axis, const Vec3& y_axis, const Vec3& z_axis,
                             const Vec3& origin) {
    Transform t;
    for (std::size_t r = 0; r < 3; ++r) {
      t.m[r][0] = x_axis[r];
      t.m[r][1] = y_axis[r];
      t.m[r][2] = z_axis[r];
      t.m[r][3] = origin[r];
    }
    return t;
  }

  constexpr Vec3 translation() const { return {m[0][3], m[1][3], m[2][3]}; }

  constexpr Vec3 apply_direction(const Vec3& d) const {
    return {m[0][0] * d.x + m[0][1] * d.y + m[0][2] * d.z,
            m[1][0] * d.x + m[1][1] * d.y + m[1][2] * d.z,
            m[2][0] * d.x + m[2][1] * d.y + m[2][2] * d.z};
  }

  constexpr Vec3 apply_point(const Vec3& p) const { return apply_direction(p) + translation(); }

  /// Largest deviation of R^T R from identity, plus the bottom-row deviation
  /// from (0,0,0,1).
  double rigidity_error() const {
    double err = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < 3; ++k) s += m[k][i] * m[k][j];
        err = std::max(err, std::abs(s - (i == j ? 1.0 : 0.0)));
      }
    }
    err = std::max({err, std::abs(m[3][0]), std::abs(m[3][1]), std::abs(m[3][2]),
                    std::abs(m[3][3] - 1.0)});
    return err;
  }

  friend constexpr bool operator==(const Transform&, const Transform&) = default;
};

}  // namespace foglift
