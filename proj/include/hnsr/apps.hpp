// SPDX-FileCopyrightText: 2026 The HNSR Authors
// SPDX-License-Identifier: Apache-2.0

// Applications on top of a correspondence: part-label transfer
// (co-segmentation), keypoint matching, and part-wise texture transfer.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hnsr/error.hpp"
#include "hnsr/geodesic.hpp"
#include "hnsr/matcher.hpp"
#include "hnsr/mesh.hpp"
#include "hnsr/mesh_io.hpp"
#include "hnsr/voxelize.hpp"

namespace hnsr {

// ---------------------------------------------------------------------------
// Co-segmentation

/// Labels for `tar` from a labeled `src`, given a target-to-source vertex map.
/// Target vertices without a match take the label of the geodesically
/// nearest matched target vertex; vertices in components with no matched
/// vertex fall back to the Euclidean nearest one.
inline std::vector<int> cosegment(const Mesh& src, const Mesh& tar, const VertexMap& tar_to_src) {
  if (!src.labels) throw Error(ErrorCode::kMissingData, "source mesh carries no labels");
  for (std::size_t i = 0; i < src.labels->size(); ++i) {
    if ((*src.labels)[i] < 0) {
      throw Error(ErrorCode::kMissingData, "source vertex " + std::to_string(i) + " is unlabeled");
    }
  }
  if (tar_to_src.size() != tar.vertices.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "target-to-source map must cover every target vertex");
  }
  std::vector<int> out(tar.vertices.size(), -1);
  std::vector<std::uint32_t> seeds;
  for (std::size_t v = 0; v < out.size(); ++v) {
    const auto s = tar_to_src[v];
    if (s < 0) continue;
    if (static_cast<std::size_t>(s) >= src.vertices.size()) {
      throw Error(ErrorCode::kCoordinateOutOfBounds, "mapped source vertex " + std::to_string(s) + " out of range");
    }
    out[v] = (*src.labels)[static_cast<std::size_t>(s)];
    seeds.push_back(static_cast<std::uint32_t>(v));
  }
  if (seeds.size() == out.size()) return out;
  if (seeds.empty()) throw Error(ErrorCode::kMissingData, "no target vertex received a correspondence");

  const auto owner = EdgeGraph(tar).nearest_seed(seeds);
  for (std::size_t v = 0; v < out.size(); ++v) {
    if (out[v] >= 0) continue;
    std::int64_t from = owner[v];
    if (from < 0) {
      double best = std::numeric_limits<double>::infinity();
      for (auto s : seeds) {
        const double d = (tar.vertices[s] - tar.vertices[v]).squaredNorm();
        if (d < best) {
          best = d;
          from = s;
        }
      }
    }
    out[v] = out[static_cast<std::size_t>(from)];
  }
  return out;
}

/// Convenience overload: `cm` must have been computed with the target as the
/// matching source (target-to-source direction).
inline std::vector<int> cosegment(const Mesh& src, const Mesh& tar, const CorrespondenceMap& cm,
                                  const VoxelizedMesh& src_vox, const VoxelizedMesh& tar_vox) {
  return cosegment(src, tar, lift_correspondence(cm, tar_vox, src_vox));
}

// ---------------------------------------------------------------------------
// Keypoints

struct KeypointQuery {
  std::optional<std::uint32_t> vertex;  // source vertex index
  std::optional<Vec3> point;            // or a point in the source's normalized unit cube
  std::uint32_t k = 1;
};

struct KeypointCandidate {
  std::int32_t vertex = -1;
  VoxelCoord cell;
  double distance = 0.0;
};

struct KeypointResult {
  VoxelCoord source_cell;
  std::vector<KeypointCandidate> candidates;  // best first
  bool snapped = false;                       // query was off the shape and moved to the nearest occupied voxel
};

namespace detail {

inline VoxelCoord nearest_occupied(const VoxelGrid& grid, const Vec3& q, std::uint32_t res) {
  std::optional<VoxelCoord> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& c : occupied_cells(grid)) {
    const double d = (cell_center(c, res) - q).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (!best) throw Error(ErrorCode::kEmptyTarget, "source grid has no occupied cells");
  return *best;
}

}  // namespace detail

/// Locates the target vertex corresponding to a source keypoint. With k > 1
/// the k best cells of the query's final region are returned, which needs
/// `matcher` built over the same pyramids that produced `cm`.
inline KeypointResult match_keypoint(const KeypointQuery& q, const CorrespondenceMap& cm, const VoxelizedMesh& src,
                                     const VoxelizedMesh& tar, const Matcher* matcher = nullptr) {
  if (q.k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be at least 1");
  if (q.vertex.has_value() == q.point.has_value()) {
    throw Error(ErrorCode::kInvalidArgument, "keypoint query needs exactly one of vertex or point");
  }
  if (q.k > 1 && !matcher) throw Error(ErrorCode::kInvalidArgument, "k > 1 needs the matcher");
  KeypointResult r;
  Vec3 offset_cells = Vec3::Zero();  // query offset from its cell center, in source cells
  if (q.vertex) {
    if (*q.vertex >= src.normalized_vertices.size()) {
      throw Error(ErrorCode::kCoordinateOutOfBounds, "vertex " + std::to_string(*q.vertex) + " out of range");
    }
    r.source_cell = src.map.vertex_voxel[*q.vertex];
    offset_cells = (src.normalized_vertices[*q.vertex] - detail::cell_center(r.source_cell, src.resolution)) *
                   src.resolution;
  } else {
    const Vec3& p = *q.point;
    if ((p.array() < 0.0).any() || (p.array() > 1.0).any()) {
      throw Error(ErrorCode::kCoordinateOutOfBounds, "keypoint outside the normalized unit cube");
    }
    r.source_cell = detail::cell_of(p, src.resolution);
    if (src.grid.occupied(r.source_cell)) {
      offset_cells = (p - detail::cell_center(r.source_cell, src.resolution)) * src.resolution;
    } else {
      r.source_cell = detail::nearest_occupied(src.grid, p, src.resolution);
      r.snapped = true;
    }
  }
  const CorrespondenceEntry* e = cm.find(r.source_cell);
  if (!e) throw Error(ErrorCode::kMissingData, "correspondence does not cover source cell " + to_string(r.source_cell));

  auto lift = [&](const VoxelCoord& cell, double distance) {
    const Vec3 anchor = detail::cell_center(cell, tar.resolution) + offset_cells / tar.resolution;
    return KeypointCandidate{nearest_target_vertex(tar, cell, anchor), cell, distance};
  };
  if (q.k == 1) {
    r.candidates.push_back(lift(e->target, e->distance));
    return r;
  }
  const CorrespondenceEntry full = matcher->match(r.source_cell, true);
  const auto ranked = matcher->rank_final(full.regions.back(), r.source_cell, full.trace.back());
  for (std::size_t i = 0; i < ranked.size() && i < q.k; ++i) r.candidates.push_back(lift(ranked[i].coord, ranked[i].distance));
  return r;
}

// ---------------------------------------------------------------------------
// Texture transfer

struct PartMatch {
  int source_part = -1;
  int target_part = -1;
  std::size_t votes = 0;
  double fraction = 0.0;  // votes / number of source-part vertices
};

struct TextureTransfer {
  Mesh mesh;                               // target with textures reassigned
  std::vector<PartMatch> votes;            // every (source, target) pair with votes
  std::map<int, int> assignment;           // target part -> chosen source part
  std::vector<std::string> warnings;
};

inline constexpr std::array<float, 3> kFallbackColor{0.5f, 0.5f, 0.5f};

/// Vote table of source parts against target parts through a source-to-target
/// vertex map, sorted by (source, target).
inline std::vector<PartMatch> part_votes(const Mesh& src, const Mesh& tar, const VertexMap& src_to_tar) {
  if (!src.has_parts() || !tar.has_parts()) {
    throw Error(ErrorCode::kMissingData, "texture transfer needs part decompositions on both meshes");
  }
  if (src_to_tar.size() != src.vertices.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "source-to-target map must cover every source vertex");
  }
  const auto sp = src.vertex_parts();
  const auto tp = tar.vertex_parts();
  std::map<std::pair<int, int>, std::size_t> counts;
  std::vector<std::size_t> part_size(src.parts.size(), 0);
  for (std::size_t v = 0; v < sp.size(); ++v) {
    if (sp[v] < 0) continue;
    ++part_size[static_cast<std::size_t>(sp[v])];
    const auto t = src_to_tar[v];
    if (t < 0) continue;
    if (static_cast<std::size_t>(t) >= tar.vertices.size()) {
      throw Error(ErrorCode::kCoordinateOutOfBounds, "mapped target vertex " + std::to_string(t) + " out of range");
    }
    const int target_part = tp[static_cast<std::size_t>(t)];
    if (target_part >= 0) ++counts[{sp[v], target_part}];
  }
  std::vector<PartMatch> out;
  for (const auto& [key, n] : counts) {
    out.push_back({key.first, key.second, n, static_cast<double>(n) / part_size[static_cast<std::size_t>(key.first)]});
  }
  return out;
}

/// Each target part adopts the texture of the source part that sends it the
/// most votes; ties go to the source part whose name sorts first. Target
/// parts without votes, and those whose source part lacks a texture or UVs,
/// get kFallbackColor.
inline TextureTransfer transfer_texture(const Mesh& src, const Mesh& tar, const VertexMap& src_to_tar) {
  TextureTransfer r;
  r.votes = part_votes(src, tar, src_to_tar);
  r.mesh = tar;

  std::vector<bool> src_has_uv(src.parts.size(), false);
  if (src.has_uvs()) {
    for (std::size_t f = 0; f < src.faces.size(); ++f) {
      const auto& t = src.face_uvs[f];
      if (t[0] >= 0 && t[1] >= 0 && t[2] >= 0) src_has_uv[static_cast<std::size_t>(src.face_part[f])] = true;
    }
  }

  for (int t = 0; t < static_cast<int>(tar.parts.size()); ++t) {
    const PartMatch* best = nullptr;
    for (const auto& pm : r.votes) {
      if (pm.target_part != t) continue;
      if (!best || pm.votes > best->votes ||
          (pm.votes == best->votes && src.parts[pm.source_part].name < src.parts[best->source_part].name)) {
        best = &pm;
      }
    }
    Part& part = r.mesh.parts[static_cast<std::size_t>(t)];
    if (!best) {
      part.texture.reset();
      part.color = kFallbackColor;
      continue;
    }
    r.assignment[t] = best->source_part;
    const Part& from = src.parts[static_cast<std::size_t>(best->source_part)];
    if (!from.texture || !src_has_uv[static_cast<std::size_t>(best->source_part)]) {
      r.warnings.push_back("source part '" + from.name + "' has no UV texture; target part '" + part.name +
                           "' uses the fallback color");
      part.texture.reset();
      part.color = kFallbackColor;
      continue;
    }
    part.texture = from.texture;
    part.color = from.color;
  }
  return r;
}

inline nlohmann::json to_json(const TextureTransfer& t, const Mesh& src, const Mesh& tar) {
  nlohmann::json votes = nlohmann::json::array();
  for (const auto& v : t.votes) {
    votes.push_back({{"source_part", src.parts[static_cast<std::size_t>(v.source_part)].name},
                     {"target_part", tar.parts[static_cast<std::size_t>(v.target_part)].name},
                     {"votes", v.votes},
                     {"fraction", v.fraction}});
  }
  nlohmann::json assignment = nlohmann::json::object();
  for (const auto& [tp, sp] : t.assignment) {
    assignment[tar.parts[static_cast<std::size_t>(tp)].name] = src.parts[static_cast<std::size_t>(sp)].name;
  }
  return {{"votes", votes}, {"assignment", assignment}, {"warnings", t.warnings}};
}

/// Writes `m` as OBJ + MTL, copying every referenced texture image next to
/// the OBJ and referencing it by file name.
inline void save_textured_obj(Mesh m, const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  const fs::path dir = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  std::map<std::string, fs::path> placed;  // file name -> source image
  for (auto& p : m.parts) {
    if (!p.texture) continue;
    const fs::path from = *p.texture;
    std::string name = from.filename().string();
    for (int n = 1; placed.count(name) && placed[name] != from; ++n) {
      name = from.stem().string() + "_" + std::to_string(n) + from.extension().string();
    }
    if (!placed.count(name)) {
      placed[name] = from;
      const fs::path to = dir / name;
      std::error_code ec;
      if (!fs::exists(to) || !fs::equivalent(from, to, ec)) {
        fs::copy_file(from, to, fs::copy_options::overwrite_existing, ec);
        if (ec) throw Error(ErrorCode::kIo, "cannot copy texture " + from.string() + ": " + ec.message());
      }
    }
    p.texture = fs::path(name);
  }
  save_obj(m, path);
}

}  // namespace hnsr
