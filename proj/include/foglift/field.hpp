// Copyright (c) 2026 The foglift Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "foglift/error.hpp"
#include "foglift/vec.hpp"

namespace foglift {

struct FieldSample {
  double sigma = 0.0;
  Rgb color;
};

struct GridDims {
  int x = 0;
  int y = 0;
  int z = 0;

  constexpr std::size_t count() const {
    return static_cast<std::size_t>(x) * static_cast<std::size_t>(y) * static_cast<std::size_t>(z);
  }
  constexpr bool positive() const { return x > 0 && y > 0 && z > 0; }
  static constexpr GridDims cube(int n) { return {n, n, n}; }
  friend constexpr bool operator==(const GridDims&, const GridDims&) = default;
};

/// Position of a query point inside the lattice of voxel centers: the
/// lowest-index corner plus the fractional offsets along each axis.
struct LatticeCell {
  std::size_t base = 0;
  std::array<std::size_t, 8> corner{};  // x fastest: (000,100,010,110,001,101,011,111)
  double tx = 0.0;
  double ty = 0.0;
  double tz = 0.0;

  std::array<double, 8> weights() const {
    const double ux = 1.0 - tx, uy = 1.0 - ty, uz = 1.0 - tz;
    return {ux * uy * uz, tx * uy * uz, ux * ty * uz, tx * ty * uz,
            ux * uy * tz, tx * uy * tz, ux * ty * tz, tx * ty * tz};
  }
};

namespace detail {

// Axis coordinate in voxel-center units, clamped to the outermost centers.
// Near-integer coordinates snap so that centers reproduce stored values exactly.
inline void lattice_axis(double pos, double lo, double size, int dim, std::size_t& index,
                         double& frac, std::size_t& step) {
  double u = (pos - lo) / size - 0.5;
  const double nearest = std::round(u);
  if (std::abs(u - nearest) < 1e-9) u = nearest;
  if (dim == 1 || u <= 0.0) {
    index = 0;
    frac = 0.0;
  } else if (u >= dim - 1) {
    index = static_cast<std::size_t>(dim - 2);
    frac = 1.0;
  } else {
    const double fl = std::floor(u);
    index = static_cast<std::size_t>(fl);
    frac = u - fl;
  }
  step = dim == 1 ? 0 : 1;
}

inline double lerp(double a, double b, double t) { return (1.0 - t) * a + t * b; }

// The volatile store pins each conversion: GCC 11 at -O3 vectorizes the
// plain form and skips the rounding of the last two components.
inline double round_to_float(double v) {
  volatile float f = static_cast<float>(v);
  return f;
}

inline Aabb round_to_float(const Aabb& box) {
  auto r = [](const Vec3& v) { return Vec3{round_to_float(v.x), round_to_float(v.y), round_to_float(v.z)}; };
  return {r(box.min), r(box.max)};
}

}  // namespace detail

/// Bounded voxel grid of density and linear RGB, sampled at voxel centers and
/// trilinearly interpolated in between. Outside its bounds the field is empty.
///
/// Bounds are stored at float precision so that the on-disk format round
/// trips exactly.
class RadianceField {
 public:
  RadianceField() = default;

  RadianceField(const Aabb& bounds, GridDims dims, std::vector<float> density, std::vector<float> rgb)
      : bounds_(detail::round_to_float(bounds)), dims_(dims), density_(std::move(density)), rgb_(std::move(rgb)) {
    if (!dims_.positive()) throw std::invalid_argument("grid dims must be positive");
    if (!bounds_.valid()) throw std::invalid_argument("bbox_min must be < bbox_max componentwise");
    if (density_.size() != dims_.count() || rgb_.size() != 3 * dims_.count())
      throw std::invalid_argument("voxel array size does not match dims");
    for (float s : density_)
      if (!(s >= 0.0f) || !std::isfinite(s)) throw std::invalid_argument("voxel density must be finite and >= 0");
    for (float c : rgb_)
      if (!(c >= 0.0f && c <= 1.0f)) throw std::invalid_argument("voxel color must lie in [0,1]");
  }

  static RadianceField filled(const Aabb& bounds, GridDims dims, float sigma, const Rgb& color) {
    std::vector<float> rgb(3 * dims.count());
    for (std::size_t i = 0; i < dims.count(); ++i) {
      rgb[3 * i] = static_cast<float>(color.r);
      rgb[3 * i + 1] = static_cast<float>(color.g);
      rgb[3 * i + 2] = static_cast<float>(color.b);
    }
    return RadianceField(bounds, dims, std::vector<float>(dims.count(), sigma), std::move(rgb));
  }

  const Aabb& bounds() const { return bounds_; }
  GridDims dims() const { return dims_; }
  bool empty() const { return density_.empty(); }
  const std::vector<float>& density() const { return density_; }
  const std::vector<float>& rgb() const { return rgb_; }

  Vec3 voxel_size() const {
    const Vec3 e = bounds_.extent();
    return {e.x / dims_.x, e.y / dims_.y, e.z / dims_.z};
  }

  std::size_t index(int ix, int iy, int iz) const {
    return static_cast<std::size_t>(ix) +
           static_cast<std::size_t>(dims_.x) * (static_cast<std::size_t>(iy) + static_cast<std::size_t>(dims_.y) * iz);
  }

  Vec3 voxel_center(int ix, int iy, int iz) const {
    const Vec3 s = voxel_size();
    return {bounds_.min.x + (ix + 0.5) * s.x, bounds_.min.y + (iy + 0.5) * s.y, bounds_.min.z + (iz + 0.5) * s.z};
  }

  FieldSample voxel(std::size_t i) const {
    return {density_[i], {rgb_[3 * i], rgb_[3 * i + 1], rgb_[3 * i + 2]}};
  }

  void set_voxel(std::size_t i, float sigma, float r, float g, float b) {
    density_[i] = std::max(sigma, 0.0f);
    rgb_[3 * i] = std::clamp(r, 0.0f, 1.0f);
    rgb_[3 * i + 1] = std::clamp(g, 0.0f, 1.0f);
    rgb_[3 * i + 2] = std::clamp(b, 0.0f, 1.0f);
  }

  /// Lattice cell for a point inside the bounds; nullopt outside.
  std::optional<LatticeCell> locate(const Vec3& p) const { return locate(bounds_, dims_, p); }

  static std::optional<LatticeCell> locate(const Aabb& bounds, GridDims dims, const Vec3& p) {
    if (!bounds.contains(p)) return std::nullopt;
    const Vec3 e = bounds.extent();
    LatticeCell cell;
    std::size_t ix, iy, iz, sx, sy, sz;
    detail::lattice_axis(p.x, bounds.min.x, e.x / dims.x, dims.x, ix, cell.tx, sx);
    detail::lattice_axis(p.y, bounds.min.y, e.y / dims.y, dims.y, iy, cell.ty, sy);
    detail::lattice_axis(p.z, bounds.min.z, e.z / dims.z, dims.z, iz, cell.tz, sz);
    const std::size_t nx = static_cast<std::size_t>(dims.x);
    const std::size_t nxy = nx * static_cast<std::size_t>(dims.y);
    cell.base = ix + nx * iy + nxy * iz;
    sy *= nx;
    sz *= nxy;
    cell.corner = {cell.base,           cell.base + sx,           cell.base + sy,      cell.base + sx + sy,
                   cell.base + sz,      cell.base + sx + sz,      cell.base + sy + sz, cell.base + sx + sy + sz};
    return cell;
  }

  FieldSample query(const Vec3& p) const {
    const auto cell = locate(p);
    if (!cell) return {};
    const auto& c = cell->corner;
    auto tri = [&](auto&& value) {
      const double x00 = detail::lerp(value(c[0]), value(c[1]), cell->tx);
      const double x10 = detail::lerp(value(c[2]), value(c[3]), cell->tx);
      const double x01 = detail::lerp(value(c[4]), value(c[5]), cell->tx);
      const double x11 = detail::lerp(value(c[6]), value(c[7]), cell->tx);
      return detail::lerp(detail::lerp(x00, x10, cell->ty), detail::lerp(x01, x11, cell->ty), cell->tz);
    };
    FieldSample out;
    out.sigma = std::max(0.0, tri([&](std::size_t i) { return static_cast<double>(density_[i]); }));
    for (std::size_t ch = 0; ch < 3; ++ch) {
      out.color[ch] =
          std::clamp(tri([&](std::size_t i) { return static_cast<double>(rgb_[3 * i + ch]); }), 0.0, 1.0);
    }
    return out;
  }

  friend bool operator==(const RadianceField&, const RadianceField&) = default;

 private:
  Aabb bounds_{};
  GridDims dims_{};
  std::vector<float> density_;
  std::vector<float> rgb_;
};

// ---------------------------------------------------------------------------
// Analytic ground-truth scenes

struct Sphere {
  Vec3 center;
  double radius = 1.0;
};

struct Box {
  Vec3 min;
  Vec3 max;
};

struct Primitive {
  std::variant<Sphere, Box> shape;
  double solid_sigma = 50.0;
  Rgb albedo = gray(0.5);
};

/// Directional light baked into the primitive colors as Lambertian shading.
struct DirectionalLight {
  Vec3 direction = normalize(Vec3{0.4, 0.3, 1.0});  // towards the light
  double ambient = 0.35;
};

inline bool contains(const Primitive& prim, const Vec3& p) {
  if (const auto* s = std::get_if<Sphere>(&prim.shape)) {
    const Vec3 d = p - s->center;
    return dot(d, d) <= s->radius * s->radius;
  }
  const auto& b = std::get<Box>(prim.shape);
  return Aabb{b.min, b.max}.contains(p);
}

/// Outward normal of the surface point nearest to p.
inline Vec3 surface_normal(const Primitive& prim, const Vec3& p) {
  if (const auto* s = std::get_if<Sphere>(&prim.shape)) {
    const Vec3 d = p - s->center;
    const double len = length(d);
    return len > 0.0 ? d / len : Vec3{0, 0, 1};
  }
  const auto& b = std::get<Box>(prim.shape);
  const std::array<double, 6> dist = {p.x - b.min.x, b.max.x - p.x, p.y - b.min.y,
                                      b.max.y - p.y, p.z - b.min.z, b.max.z - p.z};
  const std::array<Vec3, 6> normals = {Vec3{-1, 0, 0}, Vec3{1, 0, 0}, Vec3{0, -1, 0},
                                       Vec3{0, 1, 0},  Vec3{0, 0, -1}, Vec3{0, 0, 1}};
  // Ties prefer the top face so flat ground reads as lit.
  std::size_t best = 5;
  for (std::size_t i = 0; i < 6; ++i)
    if (std::abs(dist[i]) < std::abs(dist[best])) best = i;
  return normals[best];
}

/// Entry distance of a ray into the primitive, clipped to [t_min, t_max].
/// A ray starting inside reports t_min.
inline std::optional<double> intersect(const Primitive& prim, const Vec3& o, const Vec3& d, double t_min,
                                       double t_max) {
  double t0 = 0.0, t1 = 0.0;
  if (const auto* s = std::get_if<Sphere>(&prim.shape)) {
    const Vec3 oc = o - s->center;
    const double b = dot(oc, d);
    const double c = dot(oc, oc) - s->radius * s->radius;
    const double disc = b * b - c;
    if (disc < 0.0) return std::nullopt;
    const double root = std::sqrt(disc);
    t0 = -b - root;
    t1 = -b + root;
  } else {
    const auto& box = std::get<Box>(prim.shape);
    t0 = -std::numeric_limits<double>::infinity();
    t1 = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < 3; ++a) {
      if (d[a] == 0.0) {
        if (o[a] < box.min[a] || o[a] > box.max[a]) return std::nullopt;
        continue;
      }
      double ta = (box.min[a] - o[a]) / d[a];
      double tb = (box.max[a] - o[a]) / d[a];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
    }
    if (t0 > t1) return std::nullopt;
  }
  if (t1 < t_min || t0 > t_max) return std::nullopt;
  return std::max(t0, t_min);
}

/// Piecewise-constant scene: solid primitives inside a box of homogeneous fog.
struct AnalyticScene {
  double fog_sigma = 0.0;
  Rgb fog_color = gray(0.7);
  Aabb fog_bounds{{-1, -1, -1}, {1, 1, 1}};
  std::vector<Primitive> primitives;
  std::optional<DirectionalLight> light;

  void validate() const {
    if (!(fog_sigma >= 0.0)) throw std::invalid_argument("fog_sigma must be >= 0");
    if (!fog_bounds.valid()) throw std::invalid_argument("fog bounds must be non-degenerate");
    for (const auto& p : primitives) {
      if (!(p.solid_sigma > 0.0)) throw std::invalid_argument("solid_sigma must be > 0");
      if (!(fog_sigma < p.solid_sigma)) throw std::invalid_argument("fog_sigma must be below every solid_sigma");
    }
  }

  Rgb shade(const Primitive& prim, const Vec3& p) const {
    if (!light) return prim.albedo;
    const double lambert = std::max(0.0, dot(surface_normal(prim, p), light->direction));
    return prim.albedo * (light->ambient + (1.0 - light->ambient) * lambert);
  }

  /// Later primitives win where primitives overlap.
  FieldSample query(const Vec3& p) const {
    for (auto it = primitives.rbegin(); it != primitives.rend(); ++it)
      if (contains(*it, p)) return {it->solid_sigma, shade(*it, p)};
    if (fog_sigma > 0.0 && fog_bounds.contains(p)) return {fog_sigma, fog_color};
    return {};
  }

  /// Nearest primitive entry along the ray within [t_min, t_max].
  std::optional<double> first_hit(const Vec3& o, const Vec3& d, double t_min, double t_max) const {
    std::optional<double> best;
    for (const auto& prim : primitives) {
      if (auto t = intersect(prim, o, d, t_min, t_max); t && (!best || *t < *best)) best = t;
    }
    return best;
  }
};

inline FieldSample query_analytic(const AnalyticScene& scene, const Vec3& p) { return scene.query(p); }

/// Samples the analytic scene at voxel centers.
inline RadianceField bake(const AnalyticScene& scene, GridDims dims, const Aabb& bounds) {
  if (dims.x < 2 || dims.y < 2 || dims.z < 2) throw std::invalid_argument("bake requires dims >= 2 on every axis");
  RadianceField field = RadianceField::filled(bounds, dims, 0.0f, Rgb{});
  for (int iz = 0; iz < dims.z; ++iz)
    for (int iy = 0; iy < dims.y; ++iy)
      for (int ix = 0; ix < dims.x; ++ix) {
        const FieldSample s = scene.query(field.voxel_center(ix, iy, iz));
        field.set_voxel(field.index(ix, iy, iz), static_cast<float>(s.sigma), static_cast<float>(s.color.r),
                        static_cast<float>(s.color.g), static_cast<float>(s.color.b));
      }
  return field;
}

// ---------------------------------------------------------------------------
// Field file: "FGNF", u32 version, 6 f32 bounds, 3 u32 dims, density, rgb.
// Everything little-endian.

inline constexpr std::array<char, 4> kFieldMagic = {'F', 'G', 'N', 'F'};
inline constexpr std::uint32_t kFieldVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}
inline void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

class ByteReader {
 public:
  ByteReader(const std::string& bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError(what_ + ": truncated file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string raw(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::string& bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace detail

inline std::string encode_field(const RadianceField& field) {
  std::string out;
  out.reserve(40 + 16 * field.dims().count());
  out.append(kFieldMagic.data(), kFieldMagic.size());
  detail::put_u32(out, kFieldVersion);
  const Aabb& b = field.bounds();
  for (double v : {b.min.x, b.min.y, b.min.z, b.max.x, b.max.y, b.max.z}) detail::put_f32(out, static_cast<float>(v));
  detail::put_u32(out, static_cast<std::uint32_t>(field.dims().x));
  detail::put_u32(out, static_cast<std::uint32_t>(field.dims().y));
  detail::put_u32(out, static_cast<std::uint32_t>(field.dims().z));
  for (float s : field.density()) detail::put_f32(out, s);
  for (float c : field.rgb()) detail::put_f32(out, c);
  return out;
}

inline RadianceField decode_field(const std::string& bytes) {
  detail::ByteReader in(bytes, "field file");
  const std::string magic = in.raw(4);
  if (magic != std::string(kFieldMagic.data(), 4))
    throw FormatError("field file: magic mismatch (expected \"FGNF\")");
  if (const std::uint32_t version = in.u32(); version != kFieldVersion)
    throw FormatError("field file: unsupported version " + std::to_string(version));
  std::array<float, 6> b{};
  for (auto& v : b) v = in.f32();
  const std::uint32_t nx = in.u32(), ny = in.u32(), nz = in.u32();
  constexpr std::uint32_t kMaxAxis = 4096;
  if (nx == 0 || ny == 0 || nz == 0 || nx > kMaxAxis || ny > kMaxAxis || nz > kMaxAxis)
    throw FormatError("field file: invalid dims");
  const GridDims dims{static_cast<int>(nx), static_cast<int>(ny), static_cast<int>(nz)};
  const std::size_t n = dims.count();
  if (in.remaining() != 16 * n)
    throw FormatError(in.remaining() < 16 * n ? "field file: truncated file" : "field file: trailing bytes");
  std::vector<float> density(n), rgb(3 * n);
  for (auto& s : density) s = in.f32();
  for (auto& c : rgb) c = in.f32();
  try {
    return RadianceField(Aabb{{b[0], b[1], b[2]}, {b[3], b[4], b[5]}}, dims, std::move(density), std::move(rgb));
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("field file: ") + e.what());
  }
}

inline void save_field(const RadianceField& field, const std::filesystem::path& path) {
  detail::write_file_bytes(path, encode_field(field));
}

inline RadianceField load_field(const std::filesystem::path& path) {
  return decode_field(detail::read_file_bytes(path));
}

}  // namespace foglift
