// SPDX-FileCopyrightText: 2026 The HNSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "hnsr/error.hpp"

namespace hnsr {

/// Integer cell index into a voxel grid. Ordering is lexicographic on
/// (x, y, z), which is the tie-break order used everywhere in matching.
struct VoxelCoord {
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  std::uint32_t z = 0;

  friend auto operator<=>(const VoxelCoord&, const VoxelCoord&) = default;
};

inline std::string to_string(const VoxelCoord& c) {
  return "(" + std::to_string(c.x) + "," + std::to_string(c.y) + "," +
         std::to_string(c.z) + ")";
}

inline std::ostream& operator<<(std::ostream& os, const VoxelCoord& c) {
  return os << to_string(c);
}

struct Dims {
  std::uint32_t nx = 0;
  std::uint32_t ny = 0;
  std::uint32_t nz = 0;

  friend bool operator==(const Dims&, const Dims&) = default;

  std::size_t count() const {
    return std::size_t{nx} * std::size_t{ny} * std::size_t{nz};
  }
  bool positive() const { return nx > 0 && ny > 0 && nz > 0; }
  bool contains(const VoxelCoord& c) const {
    return c.x < nx && c.y < ny && c.z < nz;
  }
  // Row-major, x fastest.
  std::size_t index(const VoxelCoord& c) const {
    return std::size_t{c.x} + std::size_t{nx} * (std::size_t{c.y} + std::size_t{ny} * c.z);
  }
  VoxelCoord coord(std::size_t idx) const {
    VoxelCoord c;
    c.x = static_cast<std::uint32_t>(idx % nx);
    idx /= nx;
    c.y = static_cast<std::uint32_t>(idx % ny);
    c.z = static_cast<std::uint32_t>(idx / ny);
    return c;
  }
  std::uint32_t max_extent() const { return std::max({nx, ny, nz}); }
};

inline std::string to_string(const Dims& d) {
  return std::to_string(d.nx) + "x" + std::to_string(d.ny) + "x" + std::to_string(d.nz);
}

inline std::ostream& operator<<(std::ostream& os, const Dims& d) { return os << to_string(d); }

inline void require_in_bounds(const VoxelCoord& c, const Dims& d, const char* what) {
  if (!d.contains(c)) {
    throw Error(ErrorCode::kCoordinateOutOfBounds,
                std::string(what) + " " + to_string(c) + " outside grid " + to_string(d));
  }
}

enum class GridKind : std::uint32_t { kOccupancy = 0, kSignedDistance = 1, kLatentEmbedding = 2 };

inline std::string to_string(GridKind k) {
  switch (k) {
    case GridKind::kOccupancy: return "occupancy";
    case GridKind::kSignedDistance: return "signed-distance";
    case GridKind::kLatentEmbedding: return "latent-embedding";
  }
  return "unknown";
}

/// Dense voxel grid holding either occupancy in {0,1}, signed distance in
/// unit-cube edge units, or a small per-cell latent vector. Immutable.
class VoxelGrid {
 public:
  VoxelGrid() = default;

  VoxelGrid(Dims dims, GridKind kind, std::vector<float> values, std::uint32_t channels = 1,
            std::optional<std::vector<std::uint8_t>> mask = std::nullopt)
      : dims_(dims), kind_(kind), channels_(channels), values_(std::move(values)),
        mask_(std::move(mask)) {
    if (!dims_.positive()) {
      throw Error(ErrorCode::kInvalidArgument, "grid dims must be positive, got " + hnsr::to_string(dims_));
    }
    if (channels_ == 0) throw Error(ErrorCode::kInvalidArgument, "grid needs at least one channel");
    if (kind_ != GridKind::kLatentEmbedding && channels_ != 1) {
      throw Error(ErrorCode::kInvalidArgument, hnsr::to_string(kind_) + " grids are scalar");
    }
    if (values_.size() != dims_.count() * channels_) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "value count " + std::to_string(values_.size()) + " != " +
                      std::to_string(dims_.count() * channels_));
    }
    if (kind_ == GridKind::kOccupancy) {
      for (float v : values_) {
        if (v != 0.0f && v != 1.0f) {
          throw Error(ErrorCode::kInvariantViolation, "occupancy grid holds a value outside {0,1}");
        }
      }
    }
    if (mask_ && mask_->size() != dims_.count()) {
      throw Error(ErrorCode::kDimensionMismatch, "occupancy mask size does not match dims");
    }
  }

  static VoxelGrid occupancy(Dims dims, const std::vector<std::uint8_t>& bits) {
    std::vector<float> v(bits.size());
    std::transform(bits.begin(), bits.end(), v.begin(),
                   [](std::uint8_t b) { return b ? 1.0f : 0.0f; });
    return VoxelGrid(dims, GridKind::kOccupancy, std::move(v));
  }

  static VoxelGrid occupancy_from(Dims dims, const std::vector<VoxelCoord>& cells) {
    std::vector<float> v(dims.count(), 0.0f);
    for (const auto& c : cells) {
      require_in_bounds(c, dims, "occupied cell");
      v[dims.index(c)] = 1.0f;
    }
    return VoxelGrid(dims, GridKind::kOccupancy, std::move(v));
  }

  const Dims& dims() const { return dims_; }
  GridKind kind() const { return kind_; }
  std::uint32_t channels() const { return channels_; }
  const std::vector<float>& values() const { return values_; }
  const std::optional<std::vector<std::uint8_t>>& mask() const { return mask_; }

  float at(const VoxelCoord& c, std::uint32_t channel = 0) const {
    require_in_bounds(c, dims_, "grid lookup");
    return values_[dims_.index(c) * channels_ + channel];
  }
  bool occupied(const VoxelCoord& c) const {
    return kind_ == GridKind::kOccupancy && at(c) == 1.0f;
  }

 private:
  Dims dims_{};
  GridKind kind_ = GridKind::kOccupancy;
  std::uint32_t channels_ = 1;
  std::vector<float> values_;
  std::optional<std::vector<std::uint8_t>> mask_;
};

/// Integer scale s between a coarse grid and a base grid, D_base = s * D_coarse.
class ScaleMap {
 public:
  static ScaleMap from_dims(const Dims& coarse, const Dims& base) {
    if (!coarse.positive() || !base.positive() || base.nx % coarse.nx != 0 ||
        base.ny % coarse.ny != 0 || base.nz % coarse.nz != 0) {
      throw Error(ErrorCode::kScaleMismatch,
                  "dims " + to_string(coarse) + " do not divide base " + to_string(base));
    }
    const std::uint32_t s = base.nx / coarse.nx;
    if (base.ny / coarse.ny != s || base.nz / coarse.nz != s) {
      throw Error(ErrorCode::kScaleMismatch,
                  "anisotropic scale between " + to_string(coarse) + " and " + to_string(base));
    }
    return ScaleMap(s, coarse, base);
  }

  static ScaleMap with_scale(const Dims& base, std::uint32_t s) {
    if (s == 0 || base.nx % s != 0 || base.ny % s != 0 || base.nz % s != 0) {
      throw Error(ErrorCode::kScaleMismatch,
                  "scale " + std::to_string(s) + " does not divide base " + to_string(base));
    }
    return ScaleMap(s, Dims{base.nx / s, base.ny / s, base.nz / s}, base);
  }

  std::uint32_t scale() const { return scale_; }
  const Dims& coarse() const { return coarse_; }
  const Dims& base() const { return base_; }

 private:
  ScaleMap(std::uint32_t s, Dims coarse, Dims base) : scale_(s), coarse_(coarse), base_(base) {}

  std::uint32_t scale_;
  Dims coarse_;
  Dims base_;
};

/// Inclusive-exclusive box of base cells [lo, hi).
struct CellBox {
  VoxelCoord lo;
  VoxelCoord hi;

  bool contains(const VoxelCoord& c) const {
    return c.x >= lo.x && c.x < hi.x && c.y >= lo.y && c.y < hi.y && c.z >= lo.z && c.z < hi.z;
  }
};

inline VoxelCoord downsample_coord(const VoxelCoord& v, const ScaleMap& m) {
  require_in_bounds(v, m.base(), "base coordinate");
  const std::uint32_t s = m.scale();
  return {v.x / s, v.y / s, v.z / s};
}

inline CellBox block_of(const VoxelCoord& c, const ScaleMap& m) {
  require_in_bounds(c, m.coarse(), "coarse coordinate");
  const std::uint32_t s = m.scale();
  return {{c.x * s, c.y * s, c.z * s}, {c.x * s + s, c.y * s + s, c.z * s + s}};
}

/// All s^3 base cells covered by coarse cell `c`, in lexicographic order.
inline std::vector<VoxelCoord> upsample_block(const VoxelCoord& c, const ScaleMap& m) {
  const CellBox box = block_of(c, m);
  std::vector<VoxelCoord> out;
  out.reserve(std::size_t{m.scale()} * m.scale() * m.scale());
  for (std::uint32_t x = box.lo.x; x < box.hi.x; ++x)
    for (std::uint32_t y = box.lo.y; y < box.hi.y; ++y)
      for (std::uint32_t z = box.lo.z; z < box.hi.z; ++z) out.push_back({x, y, z});
  return out;
}

/// Surface band half-width for signed-distance grids, in unit-cube units, for
/// a grid whose longest axis has `extent` cells (one base-cell edge).
inline double sdf_band(const Dims& d) { return 1.0 / static_cast<double>(d.max_extent()); }

/// Cells that belong to the shape, in linear (x-fastest) order.
inline std::vector<VoxelCoord> occupied_cells(const VoxelGrid& g) {
  std::vector<VoxelCoord> out;
  const Dims& d = g.dims();
  switch (g.kind()) {
    case GridKind::kOccupancy:
      for (std::size_t i = 0; i < d.count(); ++i)
        if (g.values()[i] == 1.0f) out.push_back(d.coord(i));
      break;
    case GridKind::kSignedDistance: {
      const double tau = sdf_band(d);
      for (std::size_t i = 0; i < d.count(); ++i)
        if (std::abs(static_cast<double>(g.values()[i])) <= tau) out.push_back(d.coord(i));
      break;
    }
    case GridKind::kLatentEmbedding:
      if (!g.mask()) {
        throw Error(ErrorCode::kUnsupportedKind, "latent-embedding grid has no occupancy mask");
      }
      for (std::size_t i = 0; i < d.count(); ++i)
        if ((*g.mask())[i]) out.push_back(d.coord(i));
      break;
  }
  return out;
}

/// Occupancy view of any grid kind (SDF band, latent mask, or identity).
inline VoxelGrid to_occupancy(const VoxelGrid& g) {
  if (g.kind() == GridKind::kOccupancy) return g;
  return VoxelGrid::occupancy_from(g.dims(), occupied_cells(g));
}

/// Max-pool an occupancy grid by the scale of `m`.
inline VoxelGrid coarsen_occupancy(const VoxelGrid& g, const ScaleMap& m) {
  if (g.kind() != GridKind::kOccupancy) {
    throw Error(ErrorCode::kUnsupportedKind, "coarsen_occupancy needs an occupancy grid");
  }
  if (!(g.dims() == m.base())) {
    throw Error(ErrorCode::kScaleMismatch,
                "grid " + to_string(g.dims()) + " is not the base " + to_string(m.base()));
  }
  const Dims& base = g.dims();
  const Dims& coarse = m.coarse();
  const std::uint32_t s = m.scale();
  std::vector<float> out(coarse.count(), 0.0f);
  for (std::size_t i = 0; i < base.count(); ++i) {
    if (g.values()[i] != 1.0f) continue;
    const VoxelCoord v = base.coord(i);
    out[coarse.index({v.x / s, v.y / s, v.z / s})] = 1.0f;
  }
  return VoxelGrid(coarse, GridKind::kOccupancy, std::move(out));
}

}  // namespace hnsr
