// Copyright (c) 2026 The foglift Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <fstream>
#include <random>

#include "support.hpp"

namespace foglift {
namespace {

using testing::scratch_dir;

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TEST(Srgb, TransferFunctionKnownPoints) {
  EXPECT_NEAR(linear_to_srgb(0.5), 0.735357, 1e-6);
  EXPECT_NEAR(linear_to_srgb(0.001), 0.01292, 1e-12);
  EXPECT_EQ(linear_to_srgb(-1.0), 0.0);
  EXPECT_NEAR(linear_to_srgb(2.0), 1.0, 1e-12);
  for (double v = 0.0; v <= 1.0; v += 0.01) EXPECT_NEAR(srgb_to_linear(linear_to_srgb(v)), v, 1e-12);
}

TEST(Png, SrgbRoundTripWithinQuantization) {
  const auto dir = scratch_dir();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  Image img(13, 7, 3);
  for (float& v : img.pixels) v = unit(rng);
  write_png(dir / "a.png", img);
  const Image back = read_png(dir / "a.png");
  ASSERT_TRUE(back.same_shape(img));
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    // Half a code step in sRGB space, mapped through the steepest part of
    // the decode curve.
    const double enc = linear_to_srgb(img.pixels[i]);
    const double lo = srgb_to_linear(std::max(0.0, enc - 0.5 / 255)), hi = srgb_to_linear(std::min(1.0, enc + 0.5 / 255));
    ASSERT_GE(back.pixels[i], lo - 1e-6);
    ASSERT_LE(back.pixels[i], hi + 1e-6);
  }
}

TEST(Png, LinearTransferIsExactOnCodeValues) {
  const auto dir = scratch_dir();
  Image img(16, 16, 1);
  for (int i = 0; i < 256; ++i) img.pixels[i] = i / 255.0f;
  write_png(dir / "g.png", img, Transfer::linear);
  const Image back = read_png(dir / "g.png", Transfer::linear);
  EXPECT_EQ(back.channels, 1);
  for (int i = 0; i < 256; ++i) EXPECT_FLOAT_EQ(back.pixels[i], i / 255.0f);
}

TEST(Png, ClampsOutOfRange) {
  const auto dir = scratch_dir();
  Image img(2, 1, 3);
  img.set_rgb(0, 0, {-1.0, 2.0, 0.0});
  write_png(dir / "c.png", img);
  const Image back = read_png(dir / "c.png");
  EXPECT_EQ(back.pixels[0], 0.0f);
  EXPECT_EQ(back.pixels[1], 1.0f);
}

TEST(Png, ErrorsAreTyped) {
  const auto dir = scratch_dir();
  EXPECT_THROW(read_png(dir / "missing.png"), IoError);
  write_text(dir / "bad.png", "definitely not a png");
  EXPECT_THROW(read_png(dir / "bad.png"), FormatError);
}

TEST(Pfm, RoundTripIsExact) {
  const auto dir = scratch_dir();
  for (int channels : {1, 3}) {
    Image img(5, 4, channels);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<float>(i) * 0.37f - 2.0f;
    write_pfm(dir / "d.pfm", img);
    EXPECT_EQ(read_pfm(dir / "d.pfm"), img);
  }
}

TEST(Pfm, RowsStoredBottomUpLittleEndian) {
  const auto dir = scratch_dir();
  Image img(1, 2, 1);
  img.pixels = {1.0f, 2.0f};  // top row, bottom row
  write_pfm(dir / "o.pfm", img);
  const std::string bytes = read_text(dir / "o.pfm");
  const std::string header = "Pf\n1 2\n-1.0\n";
  ASSERT_EQ(bytes.substr(0, header.size()), header);
  // 2.0f = 0x40000000 first, little-endian.
  EXPECT_EQ(static_cast<unsigned char>(bytes[header.size() + 3]), 0x40);
  EXPECT_EQ(static_cast<unsigned char>(bytes[header.size() + 7]), 0x3f);
}

TEST(Pfm, MalformedInputs) {
  const auto dir = scratch_dir();
  write_text(dir / "t.pfm", "Pf\n2 2\n-1.0\n1234");
  EXPECT_THROW(read_pfm(dir / "t.pfm"), FormatError);
  write_text(dir / "b.pfm", "Pf\n1 1\n1.0\n1234");
  EXPECT_THROW(read_pfm(dir / "b.pfm"), FormatError);
  write_text(dir / "k.pfm", "P6\n1 1\n255\n");
  EXPECT_THROW(read_pfm(dir / "k.pfm"), FormatError);
}

TEST(Csv, SixSignificantDigits) {
  EXPECT_EQ(format_sig6(0.123456789), "0.123457");
  EXPECT_EQ(format_sig6(1234567.0), "1.23457e+06");
  EXPECT_EQ(format_sig6(0.05), "0.05");
  EXPECT_EQ(format_sig6(2.0), "2");
}

TEST(Csv, WriteReadWithTrailer) {
  const auto dir = scratch_dir();
  write_csv(dir / "t.csv", "a,b", {{"1", "2"}, {"3", "4"}}, {"note=x"});
  EXPECT_EQ(read_text(dir / "t.csv"), "a,b\n1,2\n3,4\n# note=x\n");
  const CsvTable t = read_csv(dir / "t.csv", "a,b");
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[1][0], "3");
  ASSERT_EQ(t.comments.size(), 1u);
  EXPECT_EQ(t.comments[0], "note=x");
  EXPECT_THROW(read_csv(dir / "t.csv", "a,c"), FormatError);
  write_text(dir / "r.csv", "a,b\n1,2,3\n");
  EXPECT_THROW(read_csv(dir / "r.csv", "a,b"), FormatError);
  EXPECT_THROW(parse_double("1.5x", "ctx"), FormatError);
}

TEST(Csv, CurveRoundTrip) {
  const auto dir = scratch_dir();
  ContrastCurve c;
  c.sigma_thre = {0.0, 0.05, 0.1};
  c.kappa_raw = {0.5, 0.6, 0.7};
  c.kappa_smooth = {0.51, 0.6, 0.69};
  c.detected = 0.05;
  write_curve_csv(dir / "c.csv", c);
  const ContrastCurve back = read_curve_csv(dir / "c.csv");
  EXPECT_EQ(back.sigma_thre, c.sigma_thre);
  EXPECT_EQ(back.kappa_smooth, c.kappa_smooth);
  EXPECT_EQ(back.detected, c.detected);
  EXPECT_EQ(read_text(dir / "c.csv").substr(0, 35), "sigma_thre,kappa_raw,kappa_smooth\n0");
}

TEST(Manifest, RoundTripAndValidation) {
  const auto dir = scratch_dir();
  DatasetManifest m{0.7, {{"./train/r_0", look_at({1, 2, 3}, {0, 0, 0})}}};
  write_manifest(dir / "transforms.json", m);
  const DatasetManifest back = read_manifest(dir / "transforms.json");
  EXPECT_EQ(back.camera_angle_x, 0.7);
  ASSERT_EQ(back.frames.size(), 1u);
  EXPECT_EQ(back.frames[0].file_path, "./train/r_0");
  EXPECT_EQ(back.frames[0].transform_matrix, m.frames[0].transform_matrix);

  EXPECT_THROW(read_manifest(dir / "none.json"), IoError);
  write_text(dir / "bad.json", "{ not json");
  EXPECT_THROW(read_manifest(dir / "bad.json"), FormatError);
  write_text(dir / "short.json", R"({"camera_angle_x": 0.5, "frames": [{"file_path": "a", "transform_matrix": [[1,0,0]]}]})");
  EXPECT_THROW(read_manifest(dir / "short.json"), FormatError);
  write_text(dir / "noangle.json", R"({"frames": []})");
  EXPECT_THROW(read_manifest(dir / "noangle.json"), FormatError);
}

// Minimal hand-written dataset, independent of the generator.
std::filesystem::path handmade_dataset(const std::filesystem::path& dir, const std::string& matrix, int w2 = 4) {
  std::filesystem::create_directories(dir / "train");
  write_text(dir / "transforms.json", R"({"camera_angle_x": 0.6, "frames": [
    {"file_path": "./train/a", "transform_matrix": )" + matrix + R"(},
    {"file_path": "./train/b", "transform_matrix": [[1,0,0,0],[0,1,0,0],[0,0,1,3],[0,0,0,1]]}]})");
  write_png(dir / "train/a.png", Image(4, 3, 3));
  write_png(dir / "train/b.png", Image(w2, 3, 3));
  return dir;
}

TEST(Dataset, LoadsHandmadeLayout) {
  const auto dir = handmade_dataset(scratch_dir(), "[[1,0,0,0],[0,1,0,0],[0,0,1,2],[0,0,0,1]]");
  const Dataset ds = load_dataset(dir);
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.cameras[0].width, 4);
  EXPECT_EQ(ds.cameras[0].camera_angle_x, 0.6);
  EXPECT_EQ(ds.cameras[1].camera_to_world.translation(), (Vec3{0, 0, 3}));
  EXPECT_FALSE(ds.clear);
  EXPECT_FALSE(ds.depth);
  EXPECT_THROW(load_dataset(dir, Split::test), IoError);
}

TEST(Dataset, RejectsResolutionMismatch) {
  const auto dir = handmade_dataset(scratch_dir(), "[[1,0,0,0],[0,1,0,0],[0,0,1,2],[0,0,0,1]]", 5);
  EXPECT_THROW(load_dataset(dir), FormatError);
}

TEST(Dataset, RejectsNonOrthonormalPose) {
  const auto dir = handmade_dataset(scratch_dir(), "[[1,0.01,0,0],[0,1,0,0],[0,0,1,2],[0,0,0,1]]");
  EXPECT_THROW(load_dataset(dir), FormatError);
}

TEST(Dataset, PartialClearCollectionIsAnError) {
  const auto dir = handmade_dataset(scratch_dir(), "[[1,0,0,0],[0,1,0,0],[0,0,1,2],[0,0,0,1]]");
  std::filesystem::create_directories(dir / "clear/train");
  write_png(dir / "clear/train/a.png", Image(4, 3, 3));
  EXPECT_THROW(load_dataset(dir), FormatError);
  write_png(dir / "clear/train/b.png", Image(4, 3, 3));
  EXPECT_TRUE(load_dataset(dir).clear);
}

TEST(Dataset, MissingFrameImage) {
  const auto dir = handmade_dataset(scratch_dir(), "[[1,0,0,0],[0,1,0,0],[0,0,1,2],[0,0,0,1]]");
  std::filesystem::remove(dir / "train/b.png");
  EXPECT_THROW(load_dataset(dir), IoError);
}

}  // namespace
}  // namespace foglift
