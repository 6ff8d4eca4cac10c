// Copyright (c) 2026 The foglift Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <png.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "foglift/camera.hpp"
#include "foglift/error.hpp"
#include "foglift/field.hpp"
#include "foglift/image.hpp"
#include "foglift/threshold.hpp"

namespace foglift {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// sRGB transfer

inline double linear_to_srgb(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return v <= 0.0031308 ? 12.92 * v : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

inline double srgb_to_linear(double v) {
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

inline std::uint8_t quantize_unit(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

inline const std::array<float, 256>& srgb_decode_table() {
  static const std::array<float, 256> table = [] {
    std::array<float, 256> t{};
    for (int i = 0; i < 256; ++i) t[i] = static_cast<float>(srgb_to_linear(i / 255.0));
    return t;
  }();
  return table;
}

enum class Transfer { srgb, linear };

// ---------------------------------------------------------------------------
// PNG (8-bit gray or RGB)

namespace detail {

struct PngFile {
  std::FILE* fp = nullptr;
  explicit PngFile(const fs::path& path, const char* mode) : fp(std::fopen(path.c_str(), mode)) {}
  ~PngFile() {
    if (fp) std::fclose(fp);
  }
  PngFile(const PngFile&) = delete;
  PngFile& operator=(const PngFile&) = delete;
};

[[noreturn]] inline void png_fail(png_structp png, png_const_charp msg) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  if (what) *what = msg;
  png_longjmp(png, 1);
}

inline void png_warn(png_structp, png_const_charp) {}

}  // namespace detail

/// Writes 1- or 3-channel images as 8-bit PNG. With Transfer::srgb values are
/// encoded with the sRGB curve; Transfer::linear stores them directly.
inline void write_png(const fs::path& path, const Image& img, Transfer transfer = Transfer::srgb) {
  if (img.channels != 1 && img.channels != 3) throw std::invalid_argument("PNG writer supports 1 or 3 channels");
  std::vector<png_byte> bytes(img.pixels.size());
  for (std::size_t i = 0; i < bytes.size(); ++i)
    bytes[i] = quantize_unit(transfer == Transfer::srgb ? linear_to_srgb(img.pixels[i]) : img.pixels[i]);

  detail::PngFile file(path, "wb");
  if (!file.fp) throw IoError("cannot write " + path.string());
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, detail::png_fail, detail::png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG write failed for " + path.string() + ": " + err);
  }
  png_init_io(png, file.fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (transfer == Transfer::srgb) png_set_sRGB(png, info, PNG_sRGB_INTENT_PERCEPTUAL);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
  for (int y = 0; y < img.height; ++y) png_write_row(png, bytes.data() + stride * y);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// Reads a PNG into an 8-bit buffer (alpha stripped, 16-bit reduced, palette
/// expanded). Returns channels 1 or 3.
inline Image read_png(const fs::path& path, Transfer transfer = Transfer::srgb) {
  detail::PngFile file(path, "rb");
  if (!file.fp) throw IoError("cannot open " + path.string());
  std::array<png_byte, 8> sig{};
  if (std::fread(sig.data(), 1, sig.size(), file.fp) != sig.size() || png_sig_cmp(sig.data(), 0, sig.size()) != 0)
    throw FormatError(path.string() + ": not a PNG file");
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, detail::png_fail, detail::png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng initialisation failed");
  }
  // Everything that owns memory is declared before setjmp.
  Image img;
  std::vector<png_byte> bytes;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(path.string() + ": " + err);
  }
  png_init_io(png, file.fp);
  png_set_sig_bytes(png, static_cast<int>(sig.size()));
  png_read_info(png, info);
  const int color_type = png_get_color_type(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  bytes.resize(static_cast<std::size_t>(width) * height * channels);
  rows.resize(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) rows[y] = bytes.data() + static_cast<std::size_t>(y) * width * channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  img = Image(width, height, channels);
  const auto& table = srgb_decode_table();
  for (std::size_t i = 0; i < bytes.size(); ++i)
    img.pixels[i] = transfer == Transfer::srgb ? table[bytes[i]] : static_cast<float>(bytes[i] / 255.0);
  return img;
}

// ---------------------------------------------------------------------------
// PFM (little-endian, scale -1, rows stored bottom to top)

inline void write_pfm(const fs::path& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3) throw std::invalid_argument("PFM supports 1 or 3 channels");
  std::string out = (img.channels == 1 ? "Pf\n" : "PF\n") + std::to_string(img.width) + " " +
                    std::to_string(img.height) + "\n-1.0\n";
  out.reserve(out.size() + 4 * img.pixels.size());
  const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
  for (int y = img.height - 1; y >= 0; --y)
    for (std::size_t i = 0; i < stride; ++i) detail::put_f32(out, img.pixels[stride * y + i]);
  detail::write_file_bytes(path, out);
}

inline Image read_pfm(const fs::path& path) {
  const std::string bytes = detail::read_file_bytes(path);
  std::istringstream header(bytes);
  std::string kind;
  int width = 0, height = 0;
  double scale = 0.0;
  header >> kind >> width >> height >> scale;
  if (!header || (kind != "Pf" && kind != "PF")) throw FormatError(path.string() + ": not a PFM file");
  if (width <= 0 || height <= 0) throw FormatError(path.string() + ": invalid PFM dimensions");
  if (scale >= 0.0) throw FormatError(path.string() + ": big-endian PFM is not supported");
  header.get();  // single whitespace byte after the scale
  const auto offset = static_cast<std::size_t>(header.tellg());
  const int channels = kind == "Pf" ? 1 : 3;
  Image img(width, height, channels);
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  if (bytes.size() - offset != 4 * stride * height) throw FormatError(path.string() + ": truncated PFM data");
  std::size_t pos = offset;
  for (int y = height - 1; y >= 0; --y)
    for (std::size_t i = 0; i < stride; ++i, pos += 4) {
      std::uint32_t v = 0;
      for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + b])) << (8 * b);
      img.pixels[stride * y + i] = std::bit_cast<float>(v);
    }
  return img;
}

// ---------------------------------------------------------------------------
// CSV

/// Six significant digits, as used by every CSV this project writes.
inline std::string format_sig6(double v) {
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%.6g", v);
  return buf.data();
}

using CsvRow = std::vector<std::string>;

struct CsvTable {
  std::vector<CsvRow> rows;
  std::vector<std::string> comments;  // '#' lines, without the leading "# "
};

/// Header line, then one line per row, then optional "# ..." trailer lines.
/// LF line endings.
inline void write_csv(const fs::path& path, const std::string& header, const std::vector<CsvRow>& rows,
                      const std::vector<std::string>& trailer = {}) {
  std::string out = header + "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += row[i];
    }
    out += '\n';
  }
  for (const auto& c : trailer) out += "# " + c + "\n";
  detail::write_file_bytes(path, out);
}

inline CsvTable read_csv(const fs::path& path, const std::string& expected_header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != expected_header)
    throw FormatError(path.string() + ": header mismatch (expected \"" + expected_header + "\")");
  const auto columns = static_cast<std::size_t>(std::count(expected_header.begin(), expected_header.end(), ',') + 1);
  CsvTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      table.comments.push_back(line.size() > 2 && line[1] == ' ' ? line.substr(2) : line.substr(1));
      continue;
    }
    CsvRow row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(cell);
    if (row.size() != columns) throw FormatError(path.string() + ": row has wrong column count: " + line);
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline double parse_double(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError(context + ": not a number: \"" + s + "\"");
  }
}

inline constexpr const char* kCurveHeader = "sigma_thre,kappa_raw,kappa_smooth";

inline void write_curve_csv(const fs::path& path, const ContrastCurve& curve) {
  std::vector<CsvRow> rows;
  rows.reserve(curve.sigma_thre.size());
  for (std::size_t i = 0; i < curve.sigma_thre.size(); ++i)
    rows.push_back({format_sig6(curve.sigma_thre[i]), format_sig6(curve.kappa_raw[i]), format_sig6(curve.kappa_smooth[i])});
  std::vector<std::string> trailer;
  if (curve.detected) trailer.push_back("detected=" + format_sig6(*curve.detected));
  write_csv(path, kCurveHeader, rows, trailer);
}

inline ContrastCurve read_curve_csv(const fs::path& path) {
  const CsvTable table = read_csv(path, kCurveHeader);
  ContrastCurve curve;
  for (const auto& row : table.rows) {
    curve.sigma_thre.push_back(parse_double(row[0], path.string()));
    curve.kappa_raw.push_back(parse_double(row[1], path.string()));
    curve.kappa_smooth.push_back(parse_double(row[2], path.string()));
  }
  for (const auto& c : table.comments)
    if (c.rfind("detected=", 0) == 0) curve.detected = parse_double(c.substr(9), path.string());
  return curve;
}

// ---------------------------------------------------------------------------
// Dataset manifest (NeRF synthetic layout) and loader

struct ManifestFrame {
  std::string file_path;  // relative, without extension, e.g. "./train/r_0"
  Transform transform_matrix;
};

struct DatasetManifest {
  double camera_angle_x = 0.0;
  std::vector<ManifestFrame> frames;
};

inline nlohmann::json to_json_matrix(const Transform& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t.m) rows.push_back({r[0], r[1], r[2], r[3]});
  return rows;
}

inline Transform from_json_matrix(const nlohmann::json& j, const std::string& context) {
  if (!j.is_array() || j.size() != 4) throw FormatError(context + ": transform_matrix must be 4x4");
  Transform t;
  for (std::size_t r = 0; r < 4; ++r) {
    if (!j[r].is_array() || j[r].size() != 4) throw FormatError(context + ": transform_matrix must be 4x4");
    for (std::size_t c = 0; c < 4; ++c) {
      if (!j[r][c].is_number()) throw FormatError(context + ": transform_matrix entries must be numbers");
      t.m[r][c] = j[r][c].get<double>();
    }
  }
  return t;
}

inline void write_manifest(const fs::path& path, const DatasetManifest& manifest) {
  nlohmann::json j;
  j["camera_angle_x"] = manifest.camera_angle_x;
  j["frames"] = nlohmann::json::array();
  for (const auto& f : manifest.frames)
    j["frames"].push_back({{"file_path", f.file_path}, {"transform_matrix", to_json_matrix(f.transform_matrix)}});
  detail::write_file_bytes(path, j.dump(2) + "\n");
}

inline DatasetManifest read_manifest(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("missing manifest " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file_bytes(path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  DatasetManifest m;
  if (!j.contains("camera_angle_x") || !j["camera_angle_x"].is_number())
    throw FormatError(path.string() + ": missing camera_angle_x");
  m.camera_angle_x = j["camera_angle_x"].get<double>();
  if (!j.contains("frames") || !j["frames"].is_array()) throw FormatError(path.string() + ": missing frames");
  for (const auto& f : j["frames"]) {
    if (!f.contains("file_path") || !f["file_path"].is_string() || !f.contains("transform_matrix"))
      throw FormatError(path.string() + ": frame needs file_path and transform_matrix");
    m.frames.push_back({f["file_path"].get<std::string>(), from_json_matrix(f["transform_matrix"], path.string())});
  }
  return m;
}

enum class Split { train, test };

inline const char* manifest_name(Split split) {
  return split == Split::train ? "transforms.json" : "transforms_test.json";
}

/// Sidecar metadata written next to the manifest.
struct DatasetMeta {
  double fog_sigma = 0.0;
  std::uint64_t seed = 0;
  Aabb bounds{{-1.5, -1.5, -1.5}, {1.5, 1.5, 1.5}};
  double near = 2.0;
  double far = 6.0;
  std::string clear_dir = "clear";
  std::string depth_dir = "depth";
  std::optional<int> width;
  std::optional<int> height;
  nlohmann::json spec;  // echo of the generating scene spec, if any
};

inline nlohmann::json to_json(const DatasetMeta& m) {
  nlohmann::json j;
  j["fog_sigma"] = m.fog_sigma;
  j["seed"] = m.seed;
  j["bbox_min"] = {m.bounds.min.x, m.bounds.min.y, m.bounds.min.z};
  j["bbox_max"] = {m.bounds.max.x, m.bounds.max.y, m.bounds.max.z};
  j["near"] = m.near;
  j["far"] = m.far;
  j["clear_dir"] = m.clear_dir;
  j["depth_dir"] = m.depth_dir;
  if (m.width) j["width"] = *m.width;
  if (m.height) j["height"] = *m.height;
  if (!m.spec.is_null()) j["spec"] = m.spec;
  return j;
}

inline DatasetMeta meta_from_json(const nlohmann::json& j, const std::string& context) {
  DatasetMeta m;
  try {
    m.fog_sigma = j.value("fog_sigma", 0.0);
    m.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("bbox_min") && j.contains("bbox_max")) {
      const auto lo = j["bbox_min"].get<std::array<double, 3>>();
      const auto hi = j["bbox_max"].get<std::array<double, 3>>();
      m.bounds = {{lo[0], lo[1], lo[2]}, {hi[0], hi[1], hi[2]}};
    }
    m.near = j.value("near", m.near);
    m.far = j.value("far", m.far);
    m.clear_dir = j.value("clear_dir", m.clear_dir);
    m.depth_dir = j.value("depth_dir", m.depth_dir);
    if (j.contains("width")) m.width = j["width"].get<int>();
    if (j.contains("height")) m.height = j["height"].get<int>();
    if (j.contains("spec")) m.spec = j["spec"];
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(context + ": " + e.what());
  }
  return m;
}

inline void write_meta(const fs::path& path, const DatasetMeta& meta) {
  detail::write_file_bytes(path, to_json(meta).dump(2) + "\n");
}

inline std::optional<DatasetMeta> read_meta(const fs::path& path) {
  if (!fs::exists(path)) return std::nullopt;
  try {
    return meta_from_json(nlohmann::json::parse(detail::read_file_bytes(path)), path.string());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

/// Posed images of one split. Clear images and depth maps are present only
/// when every frame has them.
struct Dataset {
  std::vector<Camera> cameras;
  std::vector<Image> foggy;
  std::optional<std::vector<Image>> clear;
  std::optional<std::vector<Image>> depth;
  std::vector<std::string> names;  // file_path entries, manifest order
  DatasetMeta meta;

  std::size_t size() const { return cameras.size(); }
};

namespace detail {

inline fs::path frame_file(const fs::path& dir, const std::string& sub, const std::string& file_path,
                           const char* ext) {
  fs::path rel = file_path;
  if (rel.is_absolute()) throw FormatError("frame file_path must be relative: " + file_path);
  fs::path p = sub.empty() ? dir / rel : dir / sub / rel;
  p += ext;
  return p.lexically_normal();
}

template <class Loader>
std::optional<std::vector<Image>> load_optional_collection(const fs::path& dir, const std::string& sub,
                                                           const std::vector<std::string>& names, const char* ext,
                                                           Loader&& load) {
  std::vector<Image> images;
  std::size_t present = 0;
  for (const auto& n : names)
    if (fs::exists(frame_file(dir, sub, n, ext))) ++present;
  if (present == 0) return std::nullopt;
  if (present != names.size())
    throw FormatError("incomplete " + sub + " collection in " + dir.string() + ": " + std::to_string(present) + "/" +
                      std::to_string(names.size()) + " frames");
  images.resize(names.size());
  parallel_for(names.size(), [&](std::size_t i) { images[i] = load(frame_file(dir, sub, names[i], ext)); });
  return images;
}

}  // namespace detail

/// Loads one split: manifest, foggy images (sRGB PNG decoded to linear), and
/// the clear and depth collections when they exist.
inline Dataset load_dataset(const fs::path& dir, Split split = Split::train) {
  const DatasetManifest manifest = read_manifest(dir / manifest_name(split));
  Dataset ds;
  ds.meta = read_meta(dir / "meta.json").value_or(DatasetMeta{});
  if (manifest.frames.empty()) throw FormatError((dir / manifest_name(split)).string() + ": no frames");
  for (const auto& f : manifest.frames) ds.names.push_back(f.file_path);

  ds.foggy.resize(manifest.frames.size());
  parallel_for(manifest.frames.size(), [&](std::size_t i) {
    const fs::path p = detail::frame_file(dir, "", manifest.frames[i].file_path, ".png");
    if (!fs::exists(p)) throw IoError("missing frame image " + p.string());
    ds.foggy[i] = read_png(p, Transfer::srgb);
  });
  const int width = ds.meta.width.value_or(ds.foggy.front().width);
  const int height = ds.meta.height.value_or(ds.foggy.front().height);
  for (std::size_t i = 0; i < ds.foggy.size(); ++i) {
    const Image& img = ds.foggy[i];
    if (img.width != width || img.height != height || img.channels != 3)
      throw FormatError("image " + manifest.frames[i].file_path + " is " + std::to_string(img.width) + "x" +
                        std::to_string(img.height) + ", manifest resolution is " + std::to_string(width) + "x" +
                        std::to_string(height));
    const Transform& t = manifest.frames[i].transform_matrix;
    if (t.rigidity_error() > 1e-4)
      throw FormatError("frame " + manifest.frames[i].file_path + ": transform rotation is not orthonormal");
    Camera cam{width, height, manifest.camera_angle_x, t, ds.meta.near, ds.meta.far};
    try {
      cam.validate();
    } catch (const std::invalid_argument& e) {
      throw FormatError("frame " + manifest.frames[i].file_path + ": " + e.what());
    }
    ds.cameras.push_back(cam);
  }

  ds.clear = detail::load_optional_collection(dir, ds.meta.clear_dir, ds.names, ".png",
                                              [](const fs::path& p) { return read_png(p, Transfer::srgb); });
  ds.depth = detail::load_optional_collection(dir, ds.meta.depth_dir, ds.names, ".pfm",
                                              [](const fs::path& p) { return read_pfm(p); });
  auto check = [&](const std::optional<std::vector<Image>>& images, const char* what) {
    if (!images) return;
    for (const auto& img : *images)
      if (img.width != width || img.height != height)
        throw FormatError(std::string(what) + " image resolution does not match the manifest");
  };
  check(ds.clear, "clear");
  check(ds.depth, "depth");
  return ds;
}

}  // namespace foglift
