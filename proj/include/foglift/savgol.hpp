// Copyright (c) 2026 The foglift Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace foglift {

namespace detail {

// Solves the small dense system a * x = b in place (partial pivoting).
inline std::vector<long double> solve_dense(std::vector<std::vector<long double>> a, std::vector<long double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    if (a[pivot][col] == 0.0L) throw std::runtime_error("singular least-squares system");
    std::swap(a[pivot], a[col]);
    std::swap(b[pivot], b[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const long double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<long double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    long double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
    x[i] = s / a[i][i];
  }
  return x;
}

}  // namespace detail

/// Convolution weights that evaluate, at window position `at`, the
/// least-squares polynomial of degree `order` through a window of `window`
/// equally spaced samples.
inline std::vector<double> savgol_weights(int window, int order, int at) {
  if (window < 1 || order < 0 || order >= window || at < 0 || at >= window)
    throw std::invalid_argument("invalid Savitzky-Golay window/order/position");
  const std::size_t terms = static_cast<std::size_t>(order) + 1;
  // Normal equations in the offset x = j - at, so the fitted value at the
  // evaluation point is the constant coefficient.
  std::vector<std::vector<long double>> gram(terms, std::vector<long double>(terms, 0.0L));
  for (int j = 0; j < window; ++j) {
    const long double x = j - at;
    long double pk = 1.0L;
    std::vector<long double> powers(2 * terms - 1);
    for (auto& p : powers) {
      p = pk;
      pk *= x;
    }
    for (std::size_t r = 0; r < terms; ++r)
      for (std::size_t c = 0; c < terms; ++c) gram[r][c] += powers[r + c];
  }
  std::vector<long double> e0(terms, 0.0L);
  e0[0] = 1.0L;
  const std::vector<long double> z = detail::solve_dense(std::move(gram), std::move(e0));
  std::vector<double> w(static_cast<std::size_t>(window));
  for (int j = 0; j < window; ++j) {
    const long double x = j - at;
    long double pk = 1.0L, acc = 0.0L;
    for (std::size_t m = 0; m < terms; ++m) {
      acc += z[m] * pk;
      pk *= x;
    }
    w[static_cast<std::size_t>(j)] = static_cast<double>(acc);
  }
  return w;
}

/// Savitzky-Golay smoothing. Interior points use the centered window; within
/// window/2 of either end the window is truncated at the boundary and the fit
/// over the remaining one-sided points is evaluated at the point itself.
/// Windows too short for the order fall back to the highest order they fit.
inline std::vector<double> savgol_smooth(std::span<const double> y, int window, int order) {
  if (window % 2 == 0) throw std::invalid_argument("Savitzky-Golay window must be odd");
  if (order < 0 || window <= order) throw std::invalid_argument("Savitzky-Golay window must exceed the order");
  if (y.size() < static_cast<std::size_t>(window))
    throw std::invalid_argument("Savitzky-Golay input shorter than the window");
  const int n = static_cast<int>(y.size());
  const int half = window / 2;
  const std::vector<double> centered = savgol_weights(window, order, half);

  std::vector<double> out(y.size());
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half);
    const int hi = std::min(n - 1, i + half);
    const std::vector<double> edge =
        hi - lo + 1 == window ? std::vector<double>{} : savgol_weights(hi - lo + 1, std::min(order, hi - lo), i - lo);
    const std::vector<double>& w = edge.empty() ? centered : edge;
    double acc = 0.0;
    for (int j = lo; j <= hi; ++j) acc += w[static_cast<std::size_t>(j - lo)] * y[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

}  // namespace foglift
