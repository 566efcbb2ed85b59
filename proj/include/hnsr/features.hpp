// SPDX-FileCopyrightText: 2026 The HNSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hnsr/error.hpp"
#include "hnsr/grid.hpp"

namespace hnsr {

/// Dense grid of C-channel float features, cell-major with channels
/// contiguous per cell. All values finite.
class FeatureGrid {
 public:
  FeatureGrid() = default;

  FeatureGrid(Dims dims, std::uint32_t channels, std::vector<float> values)
      : dims_(dims), channels_(channels), values_(std::move(values)) {
    if (!dims_.positive()) {
      throw Error(ErrorCode::kInvalidArgument, "feature grid dims must be positive");
    }
    if (channels_ == 0) throw Error(ErrorCode::kInvalidArgument, "feature grid needs C >= 1");
    if (values_.size() != dims_.count() * channels_) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "feature value count " + std::to_string(values_.size()) + " != " +
                      std::to_string(dims_.count() * channels_));
    }
    for (float v : values_) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::kInvariantViolation, "feature grid holds a non-finite value");
      }
    }
  }

  const Dims& dims() const { return dims_; }
  std::uint32_t channels() const { return channels_; }
  const std::vector<float>& values() const { return values_; }

  std::span<const float> at(const VoxelCoord& c) const {
    require_in_bounds(c, dims_, "feature lookup");
    return {values_.data() + dims_.index(c) * channels_, channels_};
  }

  FeatureGrid scaled(float factor) const {
    std::vector<float> v(values_);
    for (float& x : v) x *= factor;
    return FeatureGrid(dims_, channels_, std::move(v));
  }

  friend bool operator==(const FeatureGrid&, const FeatureGrid&) = default;

 private:
  Dims dims_{};
  std::uint32_t channels_ = 0;
  std::vector<float> values_;
};

struct PyramidMeta {
  std::string backbone_id;
  int timestep = 1;
  int total_steps = 1;
  std::vector<int> layer_ids;
  std::uint64_t noise_seed = 0;
  std::string schedule_id;

  friend bool operator==(const PyramidMeta&, const PyramidMeta&) = default;
};

/// Global feature grid plus N >= 1 local grids of non-decreasing resolution
/// over a shape grid of `base_dims`. Level 0 is the global grid.
class FeaturePyramid {
 public:
  FeaturePyramid() = default;

  FeaturePyramid(Dims base_dims, FeatureGrid global, std::vector<FeatureGrid> locals, PyramidMeta meta)
      : base_dims_(base_dims), meta_(std::move(meta)) {
    levels_.reserve(locals.size() + 1);
    levels_.push_back(std::move(global));
    for (auto& l : locals) levels_.push_back(std::move(l));
    validate();
  }

  const Dims& base_dims() const { return base_dims_; }
  const PyramidMeta& meta() const { return meta_; }
  const FeatureGrid& global() const { return levels_.front(); }
  /// Local level i in [1, N].
  const FeatureGrid& local(std::size_t i) const { return levels_.at(i); }
  const FeatureGrid& level(std::size_t i) const { return levels_.at(i); }
  std::size_t num_locals() const { return levels_.size() - 1; }
  std::size_t num_levels() const { return levels_.size(); }
  const std::vector<FeatureGrid>& levels() const { return levels_; }

  ScaleMap scale_map(std::size_t level) const {
    return ScaleMap::from_dims(levels_.at(level).dims(), base_dims_);
  }

  FeaturePyramid scaled(float factor) const {
    std::vector<FeatureGrid> locals;
    for (std::size_t i = 1; i < levels_.size(); ++i) locals.push_back(levels_[i].scaled(factor));
    return FeaturePyramid(base_dims_, levels_[0].scaled(factor), std::move(locals), meta_);
  }

  friend bool operator==(const FeaturePyramid&, const FeaturePyramid&) = default;

 private:
  void validate() const {
    if (!base_dims_.positive()) {
      throw Error(ErrorCode::kInvalidArgument, "pyramid base dims must be positive");
    }
    if (levels_.size() < 2) {
      throw Error(ErrorCode::kInvariantViolation, "pyramid needs a global level and >= 1 local level");
    }
    for (std::size_t i = 0; i < levels_.size(); ++i) {
      try {
        ScaleMap::from_dims(levels_[i].dims(), base_dims_);
      } catch (const Error& e) {
        throw Error(ErrorCode::kScaleMismatch, "level " + std::to_string(i) + ": " + e.what());
      }
      if (i > 0) {
        const Dims& a = levels_[i - 1].dims();
        const Dims& b = levels_[i].dims();
        if (b.nx < a.nx || b.ny < a.ny || b.nz < a.nz) {
          throw Error(ErrorCode::kInvariantViolation,
                      "resolutions not increasing: level " + std::to_string(i) + " " + to_string(b) +
                          " is coarser than level " + std::to_string(i - 1) + " " + to_string(a));
        }
      }
    }
    if (meta_.timestep < 1 || meta_.timestep > meta_.total_steps) {
      throw Error(ErrorCode::kInvalidTimestep, "meta timestep " + std::to_string(meta_.timestep) +
                                                   " outside [1," + std::to_string(meta_.total_steps) + "]");
    }
    if (meta_.layer_ids.size() != levels_.size()) {
      throw Error(ErrorCode::kInvariantViolation,
                  "meta layer_ids has " + std::to_string(meta_.layer_ids.size()) + " entries for " +
                      std::to_string(levels_.size()) + " levels");
    }
  }

  Dims base_dims_{};
  std::vector<FeatureGrid> levels_;
  PyramidMeta meta_;
};

/// Cosine distance 1 - cos(a, b), clamped to [0, 2]. A zero-norm argument is
/// maximally dissimilar to everything, itself included.
inline double cosine_distance(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "cosine_distance of " + std::to_string(a.size()) +
                                                   " vs " + std::to_string(b.size()) + " channels");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i], y = b[i];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0 || nb == 0.0) return 2.0;
  const double d = 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(d, 0.0, 2.0);
}

}  // namespace hnsr
