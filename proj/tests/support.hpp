// Copyright (c) 2026 The foglift Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <string>

#include "foglift/foglift.hpp"

namespace foglift::testing {

/// Fresh directory under the test working directory, named after the
/// running test.
inline std::filesystem::path scratch_dir() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  std::filesystem::path dir = std::filesystem::current_path() / "scratch" /
                              (std::string(info->test_suite_name()) + "." + info->name());
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline RadianceField random_field(GridDims dims, std::uint64_t seed, float max_sigma = 5.0f,
                                  Aabb bounds = {{-1, -1, -1}, {1, 1, 1}}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> sigma(0.0f, max_sigma), unit(0.0f, 1.0f);
  std::vector<float> d(dims.count()), c(3 * dims.count());
  for (auto& v : d) v = sigma(rng);
  for (auto& v : c) v = unit(rng);
  return RadianceField(bounds, dims, std::move(d), std::move(c));
}

inline RaySamples random_samples(std::mt19937_64& rng, int n, double max_sigma) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RaySamples s;
  s.resize(static_cast<std::size_t>(n));
  double t = unit(rng);
  for (int i = 0; i < n; ++i) {
    const double d = 0.01 + 0.2 * unit(rng);
    s.t[i] = t;
    s.delta[i] = d;
    t += d;
    // Mix of empty space, fog-like and solid-like densities.
    const double pick = unit(rng);
    s.sigma[i] = pick < 0.2 ? 0.0 : (pick < 0.7 ? max_sigma * 0.1 * unit(rng) : max_sigma * unit(rng));
    s.color[i] = {unit(rng), unit(rng), unit(rng)};
  }
  return s;
}

}  // namespace foglift::testing
