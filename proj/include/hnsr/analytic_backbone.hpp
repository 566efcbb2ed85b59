// SPDX-FileCopyrightText: 2026 The HNSR Authors
// SPDX-License-Identifier: Apache-2.0

// Training-free feature provider: builds a feature pyramid out of handcrafted
// block descriptors of an occupancy grid. It stands in for a pretrained
// generator so the matching pipeline can be run and checked without weights.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "hnsr/error.hpp"
#include "hnsr/features.hpp"
#include "hnsr/grid.hpp"
#include "hnsr/noise.hpp"

namespace hnsr {

enum class Descriptor {
  kOccupancyDensity,
  kCentroidOffset,
  kDistanceToSurface,
  kNormalizedPosition,
  kPcaAxes,
};

inline std::uint32_t channel_count(Descriptor d) {
  switch (d) {
    case Descriptor::kOccupancyDensity: return 1;
    case Descriptor::kCentroidOffset: return 3;
    case Descriptor::kDistanceToSurface: return 1;
    case Descriptor::kNormalizedPosition: return 3;
    case Descriptor::kPcaAxes: return 2;
  }
  return 0;
}

inline std::string to_string(Descriptor d) {
  switch (d) {
    case Descriptor::kOccupancyDensity: return "occupancy-density";
    case Descriptor::kCentroidOffset: return "centroid-offset";
    case Descriptor::kDistanceToSurface: return "distance-to-surface";
    case Descriptor::kNormalizedPosition: return "normalized-position";
    case Descriptor::kPcaAxes: return "pca-axes";
  }
  return "unknown";
}

inline Descriptor descriptor_from_string(const std::string& s) {
  for (Descriptor d : {Descriptor::kOccupancyDensity, Descriptor::kCentroidOffset,
                       Descriptor::kDistanceToSurface, Descriptor::kNormalizedPosition,
                       Descriptor::kPcaAxes}) {
    if (to_string(d) == s) return d;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown descriptor '" + s + "'");
}

struct LevelSpec {
  std::uint32_t scale = 1;
  std::vector<Descriptor> descriptors;

  friend bool operator==(const LevelSpec&, const LevelSpec&) = default;
};

/// Levels run coarsest (global) first; scales must strictly decrease.
struct BackboneConfig {
  std::vector<LevelSpec> levels;
  bool perturb_before = false;
  int timestep = 1;
  std::uint64_t seed = 0;

  friend bool operator==(const BackboneConfig&, const BackboneConfig&) = default;
};

inline std::vector<Descriptor> default_global_descriptors() {
  return {Descriptor::kOccupancyDensity, Descriptor::kCentroidOffset, Descriptor::kNormalizedPosition};
}

inline std::vector<Descriptor> default_local_descriptors() {
  return {Descriptor::kOccupancyDensity, Descriptor::kCentroidOffset, Descriptor::kDistanceToSurface,
          Descriptor::kNormalizedPosition};
}

/// Global grid of 8 cells per axis (scale at least 2 on small grids), then one
/// local level per halving of the scale down to the base resolution.
inline BackboneConfig default_backbone_config(std::uint32_t resolution) {
  BackboneConfig cfg;
  std::uint32_t s = std::max<std::uint32_t>(2, resolution / 8);
  cfg.levels.push_back({s, default_global_descriptors()});
  do {
    s = std::max<std::uint32_t>(1, s / 2);
    cfg.levels.push_back({s, default_local_descriptors()});
  } while (s > 1);
  return cfg;
}

inline void validate(const BackboneConfig& cfg) {
  if (cfg.levels.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "backbone config needs a global and >= 1 local level");
  }
  for (std::size_t i = 0; i < cfg.levels.size(); ++i) {
    if (cfg.levels[i].scale == 0) throw Error(ErrorCode::kInvalidArgument, "level scale must be >= 1");
    if (cfg.levels[i].descriptors.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "level " + std::to_string(i) + " has no descriptors");
    }
    if (i > 0 && cfg.levels[i].scale >= cfg.levels[i - 1].scale) {
      throw Error(ErrorCode::kInvalidArgument, "level scales must strictly decrease toward finer levels");
    }
  }
}

inline nlohmann::json to_json(const BackboneConfig& cfg) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& l : cfg.levels) {
    nlohmann::json names = nlohmann::json::array();
    for (Descriptor d : l.descriptors) names.push_back(to_string(d));
    levels.push_back({{"scale", l.scale}, {"descriptors", names}});
  }
  return {{"levels", levels},
          {"perturb_before", cfg.perturb_before},
          {"timestep", cfg.timestep},
          {"seed", cfg.seed}};
}

inline BackboneConfig backbone_config_from_json(const nlohmann::json& j) {
  BackboneConfig cfg;
  try {
    for (const auto& l : j.at("levels")) {
      LevelSpec spec;
      spec.scale = l.at("scale").get<std::uint32_t>();
      for (const auto& name : l.at("descriptors")) {
        spec.descriptors.push_back(descriptor_from_string(name.get<std::string>()));
      }
      cfg.levels.push_back(std::move(spec));
    }
    cfg.perturb_before = j.value("perturb_before", false);
    cfg.timestep = j.value("timestep", 1);
    cfg.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("backbone config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

namespace detail {

// Squared 1D distance transform (Felzenszwalb & Huttenlocher) of f, in place.
inline void edt_1d(std::vector<double>& f, std::vector<double>& out, std::vector<int>& v,
                   std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  out.resize(f.size());
  v.assign(f.size(), 0);
  z.assign(f.size() + 1, 0.0);
  int k = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * (q - v[k]));
    while (s <= z[k]) {
      --k;
      s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * (q - v[k]));
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = double(q) - v[k];
    out[q] = dq * dq + f[v[k]];
  }
  f.swap(out);
}

}  // namespace detail

/// Exact Euclidean distance, in cells, from each occupied cell to the nearest
/// unoccupied cell; cells outside the grid count as unoccupied. Zero on
/// unoccupied cells.
inline std::vector<float> distance_transform(const VoxelGrid& occ) {
  const Dims d = occ.dims();
  // Padded by one empty cell on every side.
  const Dims p{d.nx + 2, d.ny + 2, d.nz + 2};
  std::vector<double> g(p.count(), 0.0);
  for (std::size_t i = 0; i < d.count(); ++i) {
    if (occ.values()[i] != 1.0f) continue;
    const VoxelCoord c = d.coord(i);
    g[p.index({c.x + 1, c.y + 1, c.z + 1})] = 1.0;
  }
  // x pass: squared distance to the nearest empty cell along the row. The
  // padding guarantees one at both ends.
  for (std::uint32_t z = 0; z < p.nz; ++z)
    for (std::uint32_t y = 0; y < p.ny; ++y) {
      const std::size_t row = p.index({0, y, z});
      double run = 0.0;
      for (std::uint32_t x = 0; x < p.nx; ++x) {
        run = g[row + x] == 0.0 ? 0.0 : run + 1.0;
        g[row + x] = run;
      }
      run = 0.0;
      for (std::uint32_t x = p.nx; x-- > 0;) {
        run = g[row + x] == 0.0 ? 0.0 : run + 1.0;
        g[row + x] = std::min(g[row + x], run) * std::min(g[row + x], run);
      }
    }
  std::vector<double> line, scratch, z;
  std::vector<int> v;
  auto pass = [&](std::uint32_t n, auto&& index_of, std::uint32_t outer_a, std::uint32_t outer_b) {
    line.resize(n);
    for (std::uint32_t a = 0; a < outer_a; ++a)
      for (std::uint32_t b = 0; b < outer_b; ++b) {
        for (std::uint32_t q = 0; q < n; ++q) line[q] = g[index_of(q, a, b)];
        detail::edt_1d(line, scratch, v, z);
        for (std::uint32_t q = 0; q < n; ++q) g[index_of(q, a, b)] = line[q];
      }
  };
  pass(p.ny, [&](std::uint32_t q, std::uint32_t a, std::uint32_t b) { return p.index({a, q, b}); }, p.nx, p.nz);
  pass(p.nz, [&](std::uint32_t q, std::uint32_t a, std::uint32_t b) { return p.index({a, b, q}); }, p.nx, p.ny);
  std::vector<float> out(d.count(), 0.0f);
  for (std::size_t i = 0; i < d.count(); ++i) {
    const VoxelCoord c = d.coord(i);
    out[i] = static_cast<float>(std::sqrt(g[p.index({c.x + 1, c.y + 1, c.z + 1})]));
  }
  return out;
}

/// Evaluates one descriptor of the s^3 block of base cells under coarse cell
/// `c`. `dist` is the base-grid distance transform; it is only read for the
/// distance-to-surface descriptor and computed on demand when absent.
inline std::vector<float> descriptor_at(const VoxelGrid& occ, const VoxelCoord& c, std::uint32_t s,
                                        Descriptor which,
                                        const std::vector<float>* dist = nullptr) {
  if (occ.kind() != GridKind::kOccupancy) {
    throw Error(ErrorCode::kUnsupportedKind, "descriptors are defined on occupancy grids");
  }
  const ScaleMap m = ScaleMap::with_scale(occ.dims(), s);
  const CellBox box = block_of(c, m);
  const Dims& base = occ.dims();

  std::vector<VoxelCoord> cells;
  for (std::uint32_t z = box.lo.z; z < box.hi.z; ++z)
    for (std::uint32_t y = box.lo.y; y < box.hi.y; ++y)
      for (std::uint32_t x = box.lo.x; x < box.hi.x; ++x)
        if (occ.values()[base.index({x, y, z})] == 1.0f) cells.push_back({x, y, z});

  const double block_volume = double(s) * s * s;
  const double cx = box.lo.x + s / 2.0, cy = box.lo.y + s / 2.0, cz = box.lo.z + s / 2.0;

  switch (which) {
    case Descriptor::kOccupancyDensity:
      return {static_cast<float>(cells.size() / block_volume)};

    case Descriptor::kCentroidOffset: {
      if (cells.empty()) return {0.0f, 0.0f, 0.0f};
      double sx = 0, sy = 0, sz = 0;
      for (const auto& v : cells) {
        sx += v.x + 0.5;
        sy += v.y + 0.5;
        sz += v.z + 0.5;
      }
      const double n = static_cast<double>(cells.size());
      return {static_cast<float>((sx / n - cx) / s), static_cast<float>((sy / n - cy) / s),
              static_cast<float>((sz / n - cz) / s)};
    }

    case Descriptor::kDistanceToSurface: {
      if (cells.empty()) return {0.0f};
      std::vector<float> local;
      if (!dist) {
        local = distance_transform(occ);
        dist = &local;
      }
      double sum = 0;
      for (const auto& v : cells) sum += (*dist)[base.index(v)];
      return {static_cast<float>(sum / cells.size() / base.max_extent())};
    }

    case Descriptor::kNormalizedPosition:
      return {static_cast<float>((c.x + 0.5) / m.coarse().nx),
              static_cast<float>((c.y + 0.5) / m.coarse().ny),
              static_cast<float>((c.z + 0.5) / m.coarse().nz)};

    case Descriptor::kPcaAxes: {
      if (cells.size() < 3) return {0.0f, 0.0f};
      Eigen::Vector3d mean = Eigen::Vector3d::Zero();
      for (const auto& v : cells) mean += Eigen::Vector3d(v.x, v.y, v.z);
      mean /= static_cast<double>(cells.size());
      Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
      for (const auto& v : cells) {
        const Eigen::Vector3d dv = Eigen::Vector3d(v.x, v.y, v.z) - mean;
        cov += dv * dv.transpose();
      }
      cov /= static_cast<double>(cells.size());
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov, Eigen::EigenvaluesOnly);
      const Eigen::Vector3d ev = es.eigenvalues();  // ascending
      const double total = ev.sum();
      if (total <= 0) return {0.0f, 0.0f};
      return {static_cast<float>(ev[2] / total), static_cast<float>(ev[1] / total)};
    }
  }
  return {};
}

namespace detail {

inline FeatureGrid extract_level(const VoxelGrid& occ, const LevelSpec& spec,
                                 const std::vector<float>& dist) {
  const ScaleMap m = ScaleMap::with_scale(occ.dims(), spec.scale);
  std::uint32_t channels = 0;
  for (Descriptor d : spec.descriptors) channels += channel_count(d);
  const Dims& coarse = m.coarse();
  std::vector<float> values;
  values.reserve(coarse.count() * channels);
  for (std::size_t i = 0; i < coarse.count(); ++i) {
    const VoxelCoord c = coarse.coord(i);
    for (Descriptor d : spec.descriptors) {
      const auto f = descriptor_at(occ, c, spec.scale, d, &dist);
      values.insert(values.end(), f.begin(), f.end());
    }
  }
  return FeatureGrid(coarse, channels, std::move(values));
}

}  // namespace detail

inline constexpr int kAnalyticTotalSteps = 1000;

/// Builds the pyramid for shape `s` (occupancy, or signed distance reduced to
/// its surface band). With `perturb_before`, the shape is diffused to the
/// configured timestep and re-binarized at half the signal level first.
inline FeaturePyramid extract_pyramid(const VoxelGrid& s, const BackboneConfig& cfg) {
  validate(cfg);
  const NoiseSchedule sched = NoiseSchedule::linear(kAnalyticTotalSteps);
  if (cfg.timestep < 1 || cfg.timestep > sched.total_steps()) {
    throw Error(ErrorCode::kInvalidTimestep, "backbone timestep " + std::to_string(cfg.timestep));
  }
  VoxelGrid occ = to_occupancy(s);
  for (const auto& l : cfg.levels) ScaleMap::with_scale(occ.dims(), l.scale);
  if (occupied_cells(occ).empty()) {
    throw Error(ErrorCode::kEmptyTarget, "cannot extract features from a shape with no occupied cells");
  }
  if (cfg.perturb_before) {
    const double ab = sched.alpha_bar(cfg.timestep);
    const VoxelGrid noisy = perturb(occ, sched, cfg.timestep, cfg.seed);
    const float threshold = static_cast<float>(0.5 * std::sqrt(ab));
    std::vector<std::uint8_t> bits(noisy.values().size());
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = noisy.values()[i] > threshold ? 1 : 0;
    occ = VoxelGrid::occupancy(occ.dims(), bits);
  }
  const std::vector<float> dist = distance_transform(occ);

  std::vector<FeatureGrid> locals;
  for (std::size_t i = 1; i < cfg.levels.size(); ++i) {
    locals.push_back(detail::extract_level(occ, cfg.levels[i], dist));
  }
  PyramidMeta meta;
  meta.backbone_id = "analytic";
  meta.timestep = cfg.timestep;
  meta.total_steps = sched.total_steps();
  for (std::size_t i = 0; i < cfg.levels.size(); ++i) meta.layer_ids.push_back(static_cast<int>(i));
  meta.noise_seed = cfg.seed;
  meta.schedule_id = sched.id();
  return FeaturePyramid(occ.dims(), detail::extract_level(occ, cfg.levels[0], dist), std::move(locals),
                        std::move(meta));
}

}  // namespace hnsr
