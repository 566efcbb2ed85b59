// SPDX-FileCopyrightText: 2026 The HNSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "hnsr/error.hpp"
#include "hnsr/grid.hpp"
#include "hnsr/matcher.hpp"
#include "hnsr/mesh.hpp"

namespace hnsr {

inline constexpr double kNormalizedExtent = 0.9;
inline constexpr double kSatEpsilon = 1e-9;

inline bool supported_resolution(std::uint32_t r) { return r == 16 || r == 32 || r == 64 || r == 128; }

/// Affine map p -> scale * p + translation into the unit cube.
struct Normalization {
  double scale = 1.0;
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return scale * p + translation; }
  Vec3 invert(const Vec3& q) const { return (q - translation) / scale; }
};

/// Centers the bounding box at 0.5 and scales its longest side to 0.9.
inline Normalization fit_unit_cube(const Mesh& m) {
  if (m.vertices.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot normalize an empty mesh");
  Vec3 lo = m.vertices.front(), hi = m.vertices.front();
  for (const auto& v : m.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  const double extent = (hi - lo).maxCoeff();
  if (!(extent > 0.0)) throw Error(ErrorCode::kInvalidArgument, "mesh has zero extent");
  Normalization n;
  n.scale = kNormalizedExtent / extent;
  n.translation = Vec3::Constant(0.5) - n.scale * (lo + hi) / 2.0;
  return n;
}

inline nlohmann::json to_json(const Normalization& n) {
  return {{"scale", n.scale}, {"translation", {n.translation.x(), n.translation.y(), n.translation.z()}}};
}

inline Normalization normalization_from_json(const nlohmann::json& j) {
  Normalization n;
  n.scale = j.at("scale").get<double>();
  const auto& t = j.at("translation");
  n.translation = Vec3(t[0].get<double>(), t[1].get<double>(), t[2].get<double>());
  return n;
}

/// Separating-axis test between a triangle and an axis-aligned box given by
/// center and half extent. Touching counts as overlap; projections are
/// compared with kSatEpsilon slack.
inline bool triangle_box_overlap(const Vec3& center, const Vec3& half, const std::array<Vec3, 3>& tri) {
  const Vec3 v0 = tri[0] - center, v1 = tri[1] - center, v2 = tri[2] - center;
  const std::array<Vec3, 3> edges{v1 - v0, v2 - v1, v0 - v2};

  auto separated = [&](const Vec3& axis) {
    if (axis.squaredNorm() == 0.0) return false;
    const double p0 = axis.dot(v0), p1 = axis.dot(v1), p2 = axis.dot(v2);
    const double r = half.x() * std::abs(axis.x()) + half.y() * std::abs(axis.y()) + half.z() * std::abs(axis.z());
    const double lo = std::min({p0, p1, p2}), hi = std::max({p0, p1, p2});
    return lo > r + kSatEpsilon || hi < -r - kSatEpsilon;
  };

  for (int a = 0; a < 3; ++a) {
    if (separated(Vec3::Unit(a))) return false;
  }
  if (separated(edges[0].cross(edges[1]))) return false;
  for (int a = 0; a < 3; ++a)
    for (const auto& e : edges)
      if (separated(Vec3::Unit(a).cross(e))) return false;
  return true;
}

/// Per-vertex voxel plus the inverse listing of vertices per occupied voxel.
struct VertexVoxelMap {
  std::vector<VoxelCoord> vertex_voxel;
  std::unordered_map<std::size_t, std::vector<std::uint32_t>> voxel_vertices;  // key: linear index

  const std::vector<std::uint32_t>* vertices_in(const Dims& d, const VoxelCoord& c) const {
    auto it = voxel_vertices.find(d.index(c));
    return it == voxel_vertices.end() ? nullptr : &it->second;
  }
};

struct VoxelizedMesh {
  VoxelGrid grid;
  VertexVoxelMap map;
  Normalization normalization;
  std::vector<Vec3> normalized_vertices;
  std::uint32_t resolution = 0;
};

namespace detail {

inline VoxelCoord cell_of(const Vec3& q, std::uint32_t res) {
  auto axis = [&](double t) {
    const double c = std::floor(t * res);
    return static_cast<std::uint32_t>(std::clamp(c, 0.0, static_cast<double>(res - 1)));
  };
  return {axis(q.x()), axis(q.y()), axis(q.z())};
}

inline Vec3 cell_center(const VoxelCoord& c, std::uint32_t res) {
  return Vec3((c.x + 0.5) / res, (c.y + 0.5) / res, (c.z + 0.5) / res);
}

}  // namespace detail

/// Conservative surface voxelization: a cell is occupied iff some triangle
/// overlaps its closed box. Vertices are in unit-cube coordinates already.
inline VoxelGrid voxelize_surface(const std::vector<Vec3>& verts, const std::vector<Face>& faces, std::uint32_t res) {
  const Dims dims{res, res, res};
  std::vector<std::uint8_t> bits(dims.count(), 0);
  const double h = 0.5 / res;
  for (const auto& f : faces) {
    const std::array<Vec3, 3> tri{verts[f[0]], verts[f[1]], verts[f[2]]};
    const Vec3 lo = tri[0].cwiseMin(tri[1]).cwiseMin(tri[2]);
    const Vec3 hi = tri[0].cwiseMax(tri[1]).cwiseMax(tri[2]);
    auto range = [&](double a, double b) {
      const auto first = static_cast<std::int64_t>(std::floor(a * res)) - 1;
      const auto last = static_cast<std::int64_t>(std::floor(b * res)) + 1;
      return std::pair<std::uint32_t, std::uint32_t>(
          static_cast<std::uint32_t>(std::clamp<std::int64_t>(first, 0, res - 1)),
          static_cast<std::uint32_t>(std::clamp<std::int64_t>(last, 0, res - 1)));
    };
    const auto [x0, x1] = range(lo.x(), hi.x());
    const auto [y0, y1] = range(lo.y(), hi.y());
    const auto [z0, z1] = range(lo.z(), hi.z());
    for (std::uint32_t z = z0; z <= z1; ++z)
      for (std::uint32_t y = y0; y <= y1; ++y)
        for (std::uint32_t x = x0; x <= x1; ++x) {
          const std::size_t idx = dims.index({x, y, z});
          if (bits[idx]) continue;
          if (triangle_box_overlap(detail::cell_center({x, y, z}, res), Vec3::Constant(h), tri)) bits[idx] = 1;
        }
  }
  return VoxelGrid::occupancy(dims, bits);
}

/// Registers each vertex to its containing voxel, or to the nearest occupied
/// voxel (by center distance, lexicographic tie-break) when that one is empty.
inline VertexVoxelMap build_vertex_map(const std::vector<Vec3>& verts, const VoxelGrid& grid, std::uint32_t res) {
  VertexVoxelMap map;
  const Dims& d = grid.dims();
  std::vector<VoxelCoord> occupied;
  for (std::uint32_t i = 0; i < verts.size(); ++i) {
    VoxelCoord c = detail::cell_of(verts[i], res);
    if (!grid.occupied(c)) {
      if (occupied.empty()) occupied = occupied_cells(grid);
      if (occupied.empty()) throw Error(ErrorCode::kEmptyTarget, "voxel grid has no occupied cells");
      double best = std::numeric_limits<double>::infinity();
      for (const auto& o : occupied) {
        const double dist = (detail::cell_center(o, res) - verts[i]).squaredNorm();
        if (dist < best || (dist == best && o < c)) {
          best = dist;
          c = o;
        }
      }
    }
    map.vertex_voxel.push_back(c);
    map.voxel_vertices[d.index(c)].push_back(i);
  }
  return map;
}

/// Normalizes the mesh into the unit cube and voxelizes its surface at
/// `resolution` cells per axis.
inline VoxelizedMesh voxelize(const Mesh& m, std::uint32_t resolution) {
  if (m.vertices.empty() || m.faces.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot voxelize an empty mesh");
  if (!supported_resolution(resolution)) {
    throw Error(ErrorCode::kInvalidArgument,
                "resolution " + std::to_string(resolution) + " not in {16, 32, 64, 128}");
  }
  m.validate();
  VoxelizedMesh out;
  out.resolution = resolution;
  out.normalization = fit_unit_cube(m);
  out.normalized_vertices.reserve(m.vertices.size());
  for (const auto& v : m.vertices) out.normalized_vertices.push_back(out.normalization.apply(v));
  out.grid = voxelize_surface(out.normalized_vertices, m.faces, resolution);
  out.map = build_vertex_map(out.normalized_vertices, out.grid, resolution);
  return out;
}

enum class LiftAnchor {
  kCellCenter,    // nearest target vertex to the matched cell's center
  kSourceOffset,  // ... to the matched cell's center displaced by the source vertex's offset in its own cell
};

/// Point in the target's unit cube that source vertex `v` lands on, given
/// its matched target voxel.
inline Vec3 lift_anchor_point(const VoxelizedMesh& src, std::uint32_t v, const VoxelCoord& target_cell,
                              std::uint32_t target_res, LiftAnchor anchor) {
  Vec3 q = detail::cell_center(target_cell, target_res);
  if (anchor == LiftAnchor::kSourceOffset) {
    const Vec3 offset_cells =
        src.normalized_vertices[v] * src.resolution -
        (detail::cell_center(src.map.vertex_voxel[v], src.resolution) * src.resolution);
    q += offset_cells / target_res;
  }
  return q;
}

/// Nearest target vertex to `q`, preferring the vertices registered to `cell`
/// and falling back to all vertices. Ties go to the lower index.
inline std::int32_t nearest_target_vertex(const VoxelizedMesh& tar, const VoxelCoord& cell, const Vec3& q) {
  const auto* in_cell = tar.map.vertices_in(tar.grid.dims(), cell);
  std::int32_t best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  auto consider = [&](std::uint32_t i) {
    const double d = (tar.normalized_vertices[i] - q).squaredNorm();
    if (d < best_d || (d == best_d && static_cast<std::int32_t>(i) < best)) {
      best_d = d;
      best = static_cast<std::int32_t>(i);
    }
  };
  if (in_cell && !in_cell->empty()) {
    for (auto i : *in_cell) consider(i);
  } else {
    for (std::uint32_t i = 0; i < tar.normalized_vertices.size(); ++i) consider(i);
  }
  return best;
}

/// Per-source-vertex target vertex through the voxel correspondence.
inline VertexMap lift_correspondence(const CorrespondenceMap& cm, const VoxelizedMesh& src, const VoxelizedMesh& tar,
                                     LiftAnchor anchor = LiftAnchor::kSourceOffset) {
  if (!(cm.source_dims == src.grid.dims()) || !(cm.target_dims == tar.grid.dims())) {
    throw Error(ErrorCode::kDimensionMismatch, "correspondence dims " + to_string(cm.source_dims) + " -> " +
                                                   to_string(cm.target_dims) + " do not match the voxelized meshes");
  }
  VertexMap out(src.normalized_vertices.size(), -1);
  for (std::uint32_t v = 0; v < out.size(); ++v) {
    const CorrespondenceEntry* e = cm.find(src.map.vertex_voxel[v]);
    if (!e) continue;
    const Vec3 q = lift_anchor_point(src, v, e->target, tar.resolution, anchor);
    out[v] = nearest_target_vertex(tar, e->target, q);
  }
  return out;
}

inline nlohmann::json vertex_map_to_json(const VertexVoxelMap& m) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : m.vertex_voxel) cells.push_back(coord_json(c));
  return {{"vertex_voxel", cells}};
}

}  // namespace hnsr
