// Copyright (c) 2026 The foglift Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "foglift/camera.hpp"
#include "foglift/field.hpp"
#include "foglift/io.hpp"
#include "foglift/metrics.hpp"
#include "foglift/render.hpp"

namespace foglift {

/// Sum over rays of the squared RGB error.
inline double photometric_loss(std::span<const Rgb> pred, std::span<const Rgb> gt) {
  if (pred.size() != gt.size()) throw std::invalid_argument("photometric_loss: length mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const Rgb d = pred[i] - gt[i];
    loss += d.r * d.r + d.g * d.g + d.b * d.b;
  }
  return loss;
}

enum class Optimizer { sgd, adam };

struct TrainConfig {
  int steps = 20000;
  int rays_per_step = 1024;
  int samples_per_ray = 64;
  double learning_rate = 200.0;       // density parameters
  double color_learning_rate = 50.0;  // color logits
  std::uint64_t seed = 0;
  double softplus_beta = 10.0;
  double init_density = 0.01;
  double init_color = 0.5;
  double transmittance_cutoff = 1e-4;  // marching stops once T drops below
  int heldout_rays = 4096;
  Optimizer optimizer = Optimizer::sgd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  // Neighbour smoothness on the voxels each batch touches (0 disables).
  double smooth_density = 0.0;
  double smooth_color = 0.0;
  double smooth_huber = 1.0;  // density difference where the penalty turns linear

  void validate() const {
    if (steps < 0) throw std::invalid_argument("steps must be >= 0");
    if (rays_per_step < 1 || samples_per_ray < 1 || heldout_rays < 1)
      throw std::invalid_argument("ray and sample counts must be >= 1");
    if (!(learning_rate > 0.0) || !(color_learning_rate > 0.0))
      throw std::invalid_argument("learning rates must be > 0");
    if (!(softplus_beta > 0.0)) throw std::invalid_argument("softplus_beta must be > 0");
    if (!(init_density > 0.0)) throw std::invalid_argument("init_density must be > 0");
    if (!(init_color > 0.0 && init_color < 1.0)) throw std::invalid_argument("init_color must lie in (0,1)");
    if (!(smooth_density >= 0.0) || !(smooth_color >= 0.0)) throw std::invalid_argument("smoothness weights must be >= 0");
    if (!(smooth_huber > 0.0)) throw std::invalid_argument("smooth_huber must be > 0");
  }
};

/// Trainable voxel grid. Each voxel holds four unconstrained parameters
/// (density pre-activation, three color logits), their activated values
/// (density = softplus_beta(p0), color = sigmoid(p1..p3)), and a gradient
/// accumulator. Values and gradients share a cache line since training reads
/// one and writes the other for the same voxels.
template <class Real>
class GridModel {
 public:
  static constexpr std::size_t kChannels = 4;

  GridModel(const Aabb& bounds, GridDims dims, double softplus_beta, double init_density, double init_color)
      : bounds_(detail::round_to_float(bounds)), dims_(dims), beta_(static_cast<Real>(softplus_beta)) {
    if (!dims.positive()) throw std::invalid_argument("grid dims must be positive");
    if (!bounds_.valid()) throw std::invalid_argument("grid bounds must be non-degenerate");
    const Real s0 = static_cast<Real>(std::log(std::expm1(softplus_beta * init_density)) / softplus_beta);
    const Real u0 = static_cast<Real>(std::log(init_color / (1.0 - init_color)));
    const Vec3 e = bounds_.extent();
    lo_ = {bounds_.min.x, bounds_.min.y, bounds_.min.z};
    inv_size_ = {dims.x / e.x, dims.y / e.y, dims.z / e.z};
    dim_ = {dims.x, dims.y, dims.z};
    stride_ = {1u, static_cast<std::uint32_t>(dims.x), static_cast<std::uint32_t>(dims.x) * static_cast<std::uint32_t>(dims.y)};
    params_.resize(kChannels * dims.count());
    cells_.resize(dims.count());
    touched_.assign((dims.count() + 63) / 64, 0);
    for (std::size_t v = 0; v < dims.count(); ++v) {
      params_[kChannels * v] = s0;
      params_[kChannels * v + 1] = params_[kChannels * v + 2] = params_[kChannels * v + 3] = u0;
      refresh(v);
    }
  }

  const Aabb& bounds() const { return bounds_; }
  GridDims dims() const { return dims_; }
  std::size_t voxel_count() const { return dims_.count(); }
  std::size_t parameter_count() const { return params_.size(); }

  Real param(std::size_t flat) const { return params_[flat]; }
  void set_param(std::size_t flat, Real v) {
    params_[flat] = v;
    refresh(flat / kChannels);
  }
  const Real* values(std::size_t voxel) const { return cells_[voxel].value; }
  std::optional<LatticeCell> locate(const Vec3& p) const { return RadianceField::locate(bounds_, dims_, p); }

  /// Same lattice mapping as RadianceField::locate without the exact-center
  /// snapping; false outside the bounds.
  bool locate_fast(const Vec3& p, std::array<std::uint32_t, 8>& corner, std::array<Real, 8>& weight) const {
    if (!bounds_.contains(p)) return false;
    std::uint32_t idx[3], step[3];
    double frac[3];
    const double pos[3] = {p.x, p.y, p.z};
    for (int a = 0; a < 3; ++a) {
      const double u = (pos[a] - lo_[a]) * inv_size_[a] - 0.5;
      const int n = dim_[a];
      if (n == 1 || u <= 0.0) {
        idx[a] = 0;
        frac[a] = 0.0;
      } else if (u >= n - 1) {
        idx[a] = static_cast<std::uint32_t>(n - 2);
        frac[a] = 1.0;
      } else {
        idx[a] = static_cast<std::uint32_t>(u);
        frac[a] = u - idx[a];
      }
      step[a] = n == 1 ? 0 : stride_[a];
    }
    const std::uint32_t base = idx[0] + stride_[1] * idx[1] + stride_[2] * idx[2];
    corner = {base,           base + step[0],           base + step[1],           base + step[0] + step[1],
              base + step[2], base + step[0] + step[2], base + step[1] + step[2], base + step[0] + step[1] + step[2]};
    const Real tx = static_cast<Real>(frac[0]), ty = static_cast<Real>(frac[1]), tz = static_cast<Real>(frac[2]);
    const Real ux = 1 - tx, uy = 1 - ty, uz = 1 - tz;
    weight = {ux * uy * uz, tx * uy * uz, ux * ty * uz, tx * ty * uz, ux * uy * tz, tx * uy * tz, ux * ty * tz, tx * ty * tz};
    return true;
  }
  void prefetch(std::size_t voxel) const { __builtin_prefetch(&cells_[voxel], 1); }

  Real softplus(Real x) const {
    const Real bx = beta_ * x;
    return bx > Real(20) ? x : std::log1p(std::exp(bx)) / beta_;
  }
  Real softplus_slope(Real x) const { return Real(1) / (Real(1) + std::exp(-beta_ * x)); }
  static Real sigmoid(Real x) { return Real(1) / (Real(1) + std::exp(-x)); }

  /// d(activated value)/d(parameter) for one flat parameter index.
  Real activation_slope(std::size_t flat) const {
    if (flat % kChannels == 0) return softplus_slope(params_[flat]);
    const Real c = cells_[flat / kChannels].value[flat % kChannels];
    return c * (Real(1) - c);
  }

  void refresh(std::size_t voxel) {
    const std::size_t b = kChannels * voxel;
    Real* v = cells_[voxel].value;
    v[0] = softplus(params_[b]);
    for (std::size_t c = 1; c < kChannels; ++c) v[c] = sigmoid(params_[b + c]);
  }

  // --- gradient w.r.t. activated values ---

  void accumulate(std::size_t voxel, Real d_sigma, Real dr, Real dg, Real db) {
    touched_[voxel >> 6] |= std::uint64_t{1} << (voxel & 63);
    Real* g = cells_[voxel].grad;
    g[0] += d_sigma;
    g[1] += dr;
    g[2] += dg;
    g[3] += db;
  }

  Real value_gradient(std::size_t flat) const { return cells_[flat / kChannels].grad[flat % kChannels]; }

  /// Visits voxels with accumulated gradient in ascending index order.
  template <class Fn>
  void for_each_touched(Fn&& fn) const {
    for (std::size_t w = 0; w < touched_.size(); ++w) {
      std::uint64_t bits = touched_[w];
      while (bits) {
        fn(64 * w + static_cast<std::size_t>(std::countr_zero(bits)));
        bits &= bits - 1;
      }
    }
  }

  std::size_t touched_count() const {
    std::size_t n = 0;
    for (std::uint64_t w : touched_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  void clear_gradient() {
    for_each_touched([&](std::size_t v) { std::fill_n(cells_[v].grad, kChannels, Real(0)); });
    std::fill(touched_.begin(), touched_.end(), 0);
  }

  /// Adds the gradient of a neighbour penalty to every touched voxel: Huber
  /// with transition `huber` on density, (w/2) (v_i - v_j)^2 on color.
  /// Density jumps wider than `huber` (solid surfaces) only feel a constant
  /// pull, so solids keep their height. Untouched voxels are left alone, so
  /// the cost follows the batch, not the grid.
  void add_smoothness(Real w_sigma, Real w_color, Real huber) {
    const std::size_t n = voxel_count();
    for_each_touched([&](std::size_t v) {
      const Real* self = cells_[v].value;
      Real* g = cells_[v].grad;
      std::size_t rem = v;
      for (int a = 0; a < 3; ++a) {
        const auto coord = static_cast<int>(rem % static_cast<std::size_t>(dim_[a]));
        rem /= static_cast<std::size_t>(dim_[a]);
        const std::size_t step = stride_[a];
        auto pull = [&](std::size_t u) {
          const Real* other = cells_[u].value;
          g[0] += w_sigma * std::clamp(self[0] - other[0], -huber, huber);
          for (std::size_t c = 1; c < kChannels; ++c) g[c] += w_color * (self[c] - other[c]);
        };
        if (coord > 0) pull(v - step);
        if (coord + 1 < dim_[a] && v + step < n) pull(v + step);
      }
    });
  }

  /// Gradient step on every touched voxel; clears the accumulators.
  void descend(Real lr_sigma, Real lr_color) {
    for_each_touched([&](std::size_t v) {
      const std::size_t b = kChannels * v;
      Cell& cell = cells_[v];
      // sigmoid(beta p) == 1 - exp(-beta softplus(p)), reusing the cached value
      params_[b] -= lr_sigma * cell.grad[0] * -std::expm1(-beta_ * cell.value[0]);
      for (std::size_t c = 1; c < kChannels; ++c)
        params_[b + c] -= lr_color * cell.grad[c] * cell.value[c] * (Real(1) - cell.value[c]);
      std::fill_n(cell.grad, kChannels, Real(0));
      refresh(v);
    });
    std::fill(touched_.begin(), touched_.end(), 0);
  }

  /// Adam step on every touched voxel (moments of untouched voxels are left
  /// as they are); clears the accumulators. `step` counts from 1.
  void descend_adam(Real lr_sigma, Real lr_color, Real beta1, Real beta2, Real epsilon, long step) {
    if (moment1_.empty()) {
      moment1_.assign(params_.size(), Real(0));
      moment2_.assign(params_.size(), Real(0));
    }
    const Real c1 = Real(1) - static_cast<Real>(std::pow(static_cast<double>(beta1), static_cast<double>(step)));
    const Real c2 = Real(1) - static_cast<Real>(std::pow(static_cast<double>(beta2), static_cast<double>(step)));
    for_each_touched([&](std::size_t v) {
      const std::size_t b = kChannels * v;
      Cell& cell = cells_[v];
      for (std::size_t c = 0; c < kChannels; ++c) {
        const Real slope = c == 0 ? -std::expm1(-beta_ * cell.value[0]) : cell.value[c] * (Real(1) - cell.value[c]);
        const Real g = cell.grad[c] * slope;
        Real& m = moment1_[b + c];
        Real& q = moment2_[b + c];
        m = beta1 * m + (Real(1) - beta1) * g;
        q = beta2 * q + (Real(1) - beta2) * g * g;
        params_[b + c] -= (c == 0 ? lr_sigma : lr_color) * (m / c1) / (std::sqrt(q / c2) + epsilon);
      }
      std::fill_n(cell.grad, kChannels, Real(0));
      refresh(v);
    });
    std::fill(touched_.begin(), touched_.end(), 0);
  }

  RadianceField to_field() const {
    std::vector<float> density(voxel_count()), rgb(3 * voxel_count());
    for (std::size_t v = 0; v < voxel_count(); ++v) {
      density[v] = static_cast<float>(cells_[v].value[0]);
      for (std::size_t c = 0; c < 3; ++c)
        rgb[3 * v + c] = std::clamp(static_cast<float>(cells_[v].value[1 + c]), 0.0f, 1.0f);
    }
    return RadianceField(bounds_, dims_, std::move(density), std::move(rgb));
  }

 private:
  struct alignas(2 * kChannels * sizeof(Real)) Cell {
    Real value[kChannels];
    Real grad[kChannels] = {};
  };

  Aabb bounds_;
  GridDims dims_;
  Real beta_;
  std::array<double, 3> lo_{}, inv_size_{};
  std::array<int, 3> dim_{};
  std::array<std::uint32_t, 3> stride_{};
  std::vector<Real> params_;
  std::vector<Cell> cells_;
  std::vector<std::uint64_t> touched_;
  std::vector<Real> moment1_, moment2_;  // Adam state, allocated on first use
};

/// One supervised pixel ray. An empty `t`/`delta` means "draw stratified
/// samples"; filled ones pin the sample positions.
struct TrainingRay {
  Ray ray;
  Rgb target;
  std::vector<double> t;
  std::vector<double> delta;
};

namespace detail {

template <class Real>
struct MarchSample {
  std::array<std::uint32_t, 8> corner;
  std::array<Real, 8> weight;
  Real sigma;
  Real color[3];
  Real delta;
  Real alpha;
  Real transmittance;  // in front of the sample
};

}  // namespace detail

/// Differentiable renderer over a GridModel: forward quadrature and the
/// analytic gradient of the squared error through the transmittance
/// products and trilinear weights.
template <class Real>
class RayRenderer {
 public:
  RayRenderer(GridModel<Real>& model, double transmittance_cutoff)
      : model_(model), cutoff_(static_cast<Real>(transmittance_cutoff)) {}

  Rgb render(const Ray& ray, std::span<const double> t, std::span<const double> delta) {
    Real color[3];
    march(ray, t, delta, color);
    return {color[0], color[1], color[2]};
  }

  /// Squared error of one ray; with `accumulate` adds d(loss)/d(values) to
  /// the model's gradient accumulators.
  Real loss(const Ray& ray, std::span<const double> t, std::span<const double> delta, const Rgb& target,
            bool accumulate, Rgb* predicted = nullptr) {
    Real color[3];
    march(ray, t, delta, color);
    const Real err[3] = {color[0] - static_cast<Real>(target.r), color[1] - static_cast<Real>(target.g),
                         color[2] - static_cast<Real>(target.b)};
    if (predicted) *predicted = {color[0], color[1], color[2]};
    if (accumulate) backward(err, color);
    return err[0] * err[0] + err[1] * err[1] + err[2] * err[2];
  }

 private:
  void march(const Ray& ray, std::span<const double> t, std::span<const double> delta, Real* color) {
    // Locate every sample and prefetch its corners before gathering; the
    // grid is far larger than cache.
    samples_.clear();
    for (std::size_t i = 0; i < t.size(); ++i) {
      detail::MarchSample<Real> s;
      if (!model_.locate_fast(ray.at(t[i]), s.corner, s.weight)) continue;
      for (std::size_t k = 0; k < 8; ++k) model_.prefetch(s.corner[k]);
      s.delta = static_cast<Real>(delta[i]);
      samples_.push_back(s);
    }

    color[0] = color[1] = color[2] = Real(0);
    Real trans = 1;
    std::size_t used = 0;
    for (auto& s : samples_) {
      s.sigma = s.color[0] = s.color[1] = s.color[2] = 0;
      for (std::size_t k = 0; k < 8; ++k) {
        const Real* v = model_.values(s.corner[k]);
        const Real wk = s.weight[k];
        s.sigma += wk * v[0];
        s.color[0] += wk * v[1];
        s.color[1] += wk * v[2];
        s.color[2] += wk * v[3];
      }
      s.transmittance = trans;
      s.alpha = -std::expm1(-s.sigma * s.delta);
      const Real weight = trans * s.alpha;
      for (int c = 0; c < 3; ++c) color[c] += weight * s.color[c];
      ++used;
      trans -= weight;
      if (trans < cutoff_) break;
    }
    samples_.resize(used);
  }

  // With g = dL/dC and S_i the color gathered behind sample i:
  //   dL/dc_i     = w_i g
  //   dL/dsigma_i = delta_i (T_{i+1} g.c_i - g.S_i)
  void backward(const Real* err, const Real* color) {
    const Real g[3] = {Real(2) * err[0], Real(2) * err[1], Real(2) * err[2]};
    Real gathered[3] = {0, 0, 0};  // color accumulated up to and including i
    for (const auto& s : samples_) {
      const Real weight = s.transmittance * s.alpha;
      const Real t_next = s.transmittance - weight;
      Real g_dot_c = 0, g_dot_behind = 0;
      for (int c = 0; c < 3; ++c) {
        gathered[c] += weight * s.color[c];
        g_dot_c += g[c] * s.color[c];
        g_dot_behind += g[c] * (color[c] - gathered[c]);
      }
      const Real d_sigma = s.delta * (t_next * g_dot_c - g_dot_behind);
      for (std::size_t k = 0; k < 8; ++k) {
        const Real wk = s.weight[k];
        if (wk == Real(0)) continue;
        model_.accumulate(s.corner[k], wk * d_sigma, wk * weight * g[0], wk * weight * g[1], wk * weight * g[2]);
      }
    }
  }

  GridModel<Real>& model_;
  Real cutoff_;
  std::vector<detail::MarchSample<Real>> samples_;
};

struct TrainLogRow {
  int step = 0;
  double loss = 0.0;  // summed squared error over the rays of the row
  double psnr = 0.0;
};

/// Plain SGD over a GridModel. Rays are processed in batch order and the
/// update sweeps voxels in index order, so a run is bit-reproducible.
template <class Real = float>
class Trainer {
 public:
  Trainer(const Aabb& bounds, GridDims dims, const TrainConfig& cfg)
      : cfg_((cfg.validate(), cfg)), model_(bounds, dims, cfg.softplus_beta, cfg.init_density, cfg.init_color) {}

  GridModel<Real>& model() { return model_; }
  const GridModel<Real>& model() const { return model_; }
  const TrainConfig& config() const { return cfg_; }

  /// Loss over the batch; with `accumulate` the gradient of this batch is
  /// left in the model (previous accumulators cleared first).
  double loss(std::span<const TrainingRay> batch, bool accumulate, std::mt19937_64* jitter = nullptr,
              double transmittance_cutoff = -1.0) {
    if (accumulate) model_.clear_gradient();
    RayRenderer<Real> renderer(model_, transmittance_cutoff < 0.0 ? cfg_.transmittance_cutoff : transmittance_cutoff);
    double total = 0.0;
    for (const auto& r : batch) {
      std::span<const double> t = r.t, delta = r.delta;
      if (t.empty()) {
        // Drawn samples cover only the part of the ray inside the grid.
        const auto inside = clip_ray(r.ray, model_.bounds());
        if (!inside) {
          total += r.target.r * r.target.r + r.target.g * r.target.g + r.target.b * r.target.b;
          continue;
        }
        stratified_distances(*inside, cfg_.samples_per_ray, jitter, t_scratch_, delta_scratch_);
        t = t_scratch_;
        delta = delta_scratch_;
      }
      total += static_cast<double>(renderer.loss(r.ray, t, delta, r.target, accumulate));
    }
    return total;
  }

  /// d(loss)/d(parameter) for the last accumulated batch.
  double parameter_gradient(std::size_t flat) const {
    return static_cast<double>(model_.value_gradient(flat)) * static_cast<double>(model_.activation_slope(flat));
  }

  /// One SGD step; returns the batch loss before the update.
  double step(std::span<const TrainingRay> batch, std::mt19937_64& jitter) {
    const double l = loss(batch, true, &jitter);
    if (cfg_.smooth_density > 0.0 || cfg_.smooth_color > 0.0)
      model_.add_smoothness(static_cast<Real>(cfg_.smooth_density), static_cast<Real>(cfg_.smooth_color),
                            static_cast<Real>(cfg_.smooth_huber));
    const auto lr_sigma = static_cast<Real>(cfg_.learning_rate);
    const auto lr_color = static_cast<Real>(cfg_.color_learning_rate);
    ++steps_;
    if (cfg_.optimizer == Optimizer::adam)
      model_.descend_adam(lr_sigma, lr_color, static_cast<Real>(cfg_.adam_beta1), static_cast<Real>(cfg_.adam_beta2),
                          static_cast<Real>(cfg_.adam_epsilon), steps_);
    else
      model_.descend(lr_sigma, lr_color);
    return l;
  }

  RadianceField field() const { return model_.to_field(); }

 private:
  TrainConfig cfg_;
  GridModel<Real> model_;
  long steps_ = 0;
  std::vector<double> t_scratch_, delta_scratch_;
};

/// Flat index of pixel (x, y) of frame f across all frames of `ds`; frames
/// share one resolution.
inline std::size_t dataset_pixel(const Dataset& ds, std::size_t f, int x, int y) {
  const Camera& cam = ds.cameras[0];
  return (f * static_cast<std::size_t>(cam.height) + static_cast<std::size_t>(y)) * static_cast<std::size_t>(cam.width) +
         static_cast<std::size_t>(x);
}

/// Uniformly drawn (with replacement) supervised rays from a dataset's
/// foggy images. Pixels flagged in `excluded` are redrawn.
inline std::vector<TrainingRay> draw_rays(const Dataset& ds, int count, std::mt19937_64& rng,
                                          const std::vector<bool>* excluded = nullptr) {
  if (ds.size() == 0) throw std::invalid_argument("dataset has no frames");
  std::uniform_int_distribution<std::size_t> pick(0, ds.size() - 1);
  std::uniform_int_distribution<int> px(0, ds.cameras[0].width - 1), py(0, ds.cameras[0].height - 1);
  std::vector<TrainingRay> rays;
  rays.reserve(static_cast<std::size_t>(count));
  while (static_cast<int>(rays.size()) < count) {
    const std::size_t f = pick(rng);
    const int x = px(rng);
    const int y = py(rng);
    if (excluded && (*excluded)[dataset_pixel(ds, f, x, y)]) continue;
    rays.push_back({pixel_ray(ds.cameras[f], x, y), ds.foggy[f].rgb(x, y), {}, {}});
  }
  return rays;
}

/// Distinct pixels set aside for evaluation: at most half of all pixels.
inline std::vector<bool> heldout_mask(const Dataset& ds, int count, std::mt19937_64& rng) {
  const std::size_t total = ds.size() * static_cast<std::size_t>(ds.cameras[0].width) * ds.cameras[0].height;
  std::vector<bool> mask(total, false);
  const std::size_t want = std::min(static_cast<std::size_t>(count), total / 2);
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  for (std::size_t n = 0; n < want;) {
    const std::size_t i = pick(rng);
    if (!mask[i]) {
      mask[i] = true;
      ++n;
    }
  }
  return mask;
}

inline double batch_psnr(double loss, std::size_t rays) {
  return psnr_from_mse(loss / (3.0 * static_cast<double>(rays)));
}

struct FitResult {
  RadianceField field;
  std::vector<TrainLogRow> log;  // steps + 1 rows
  double heldout_psnr = 0.0;
};

/// Fits a grid to the foggy images of `train`. A fixed set of training
/// pixels is held out of every batch. Row k of the log (k < steps) is the
/// loss of batch k+1 before its update; the final row is the loss on the
/// held-out pixels after the last update.
template <class Real = float>
FitResult fit(const Dataset& train, const TrainConfig& cfg, GridDims dims,
              const std::function<void(const TrainLogRow&)>& progress = {}) {
  cfg.validate();
  if (train.size() == 0) throw std::invalid_argument("training dataset has no frames");
  Trainer<Real> trainer(train.meta.bounds, dims, cfg);
  std::mt19937_64 rng(cfg.seed);
  std::mt19937_64 jitter(mix_seed(cfg.seed, 1));
  std::mt19937_64 heldout_rng(mix_seed(cfg.seed, 2));
  const std::vector<bool> heldout = heldout_mask(train, cfg.heldout_rays, heldout_rng);
  std::vector<TrainingRay> eval_rays;
  for (std::size_t f = 0; f < train.size(); ++f)
    for (int y = 0; y < train.cameras[0].height; ++y)
      for (int x = 0; x < train.cameras[0].width; ++x)
        if (heldout[dataset_pixel(train, f, x, y)])
          eval_rays.push_back({pixel_ray(train.cameras[f], x, y), train.foggy[f].rgb(x, y), {}, {}});

  FitResult result;
  result.log.reserve(static_cast<std::size_t>(cfg.steps) + 1);
  for (int step = 0; step < cfg.steps; ++step) {
    const std::vector<TrainingRay> batch = draw_rays(train, cfg.rays_per_step, rng, &heldout);
    const double l = trainer.step(batch, jitter);
    result.log.push_back({step, l, batch_psnr(l, batch.size())});
    if (progress) progress(result.log.back());
  }
  const double final_loss = trainer.loss(eval_rays, false);
  result.heldout_psnr = batch_psnr(final_loss, eval_rays.size());
  result.log.push_back({cfg.steps, final_loss, result.heldout_psnr});
  if (progress) progress(result.log.back());
  result.field = trainer.field();
  return result;
}

}  // namespace foglift
