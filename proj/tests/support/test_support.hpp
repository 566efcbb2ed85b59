// SPDX-FileCopyrightText: 2026 The HNSR Authors
// SPDX-License-Identifier: Apache-2.0

// Helpers shared by the unit and acceptance tests.

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "hnsr/features.hpp"
#include "hnsr/grid.hpp"

namespace hnsr::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("hnsr_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Occupancy grid with each cell set with probability `p`; at least one cell
/// is occupied.
inline VoxelGrid random_occupancy(std::mt19937_64& rng, const Dims& d, double p) {
  std::bernoulli_distribution bit(p);
  std::vector<std::uint8_t> bits(d.count());
  for (auto& b : bits) b = bit(rng) ? 1 : 0;
  bits[std::uniform_int_distribution<std::size_t>(0, bits.size() - 1)(rng)] = 1;
  return VoxelGrid::occupancy(d, bits);
}

inline FeatureGrid random_features(std::mt19937_64& rng, const Dims& d, std::uint32_t channels) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<float> v(d.count() * channels);
  for (auto& x : v) x = n(rng);
  return FeatureGrid(d, channels, std::move(v));
}

/// Pyramid of random features with the given per-level scales over `base`.
inline FeaturePyramid random_pyramid(std::mt19937_64& rng, const Dims& base, const std::vector<std::uint32_t>& scales,
                                     std::uint32_t channels) {
  std::vector<FeatureGrid> levels;
  for (auto s : scales) levels.push_back(random_features(rng, {base.nx / s, base.ny / s, base.nz / s}, channels));
  PyramidMeta meta{"random", 1, 1, {}, 0, "none"};
  for (std::size_t i = 0; i < scales.size(); ++i) meta.layer_ids.push_back(static_cast<int>(i));
  FeatureGrid global = std::move(levels.front());
  levels.erase(levels.begin());
  return FeaturePyramid(base, std::move(global), std::move(levels), meta);
}

}  // namespace hnsr::test
