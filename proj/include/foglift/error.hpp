// Copyright (c) 2026 The foglift Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace foglift {

/// Malformed or unreadable on-disk artifact (field file, PFM, PNG, CSV,
/// manifest).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The smoothed contrast curve never stays flat for a full window after its
/// steepest rise.
class NoPlateauError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A depth map without any primitive hit, so no mask can be formed.
class NoForegroundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace foglift
