// SPDX-FileCopyrightText: 2026 The HNSR Authors
// SPDX-License-Identifier: Apache-2.0

// Mesh-to-mesh correspondence in one call: voxelize, obtain pyramids
// (analytic or imported), match densely, lift to vertices.

#pragma once

#include <optional>
#include <string>

#include "hnsr/analytic_backbone.hpp"
#include "hnsr/matcher.hpp"
#include "hnsr/mesh.hpp"
#include "hnsr/presets.hpp"
#include "hnsr/pyramid_io.hpp"
#include "hnsr/voxelize.hpp"

namespace hnsr {

struct PreparedShape {
  VoxelizedMesh vox;
  FeaturePyramid pyramid;
};

/// Voxelizes `m` at the configured resolution and attaches its pyramid. The
/// analytic preset computes it; other presets read `pyramid_path`.
inline PreparedShape prepare_shape(const Mesh& m, const RunConfig& c, const std::optional<std::string>& pyramid_path,
                                   const std::string& which) {
  validate(c);
  PreparedShape s;
  s.vox = voxelize(m, c.effective_resolution());
  if (c.preset == "analytic") {
    s.pyramid = extract_pyramid(s.vox.grid, analytic_config(c));
    return s;
  }
  if (!pyramid_path) {
    throw Error(ErrorCode::kInvalidArgument, "preset " + c.preset + " needs an exported " + which + " pyramid");
  }
  s.pyramid = read_pyramid(*pyramid_path);
  check_pyramid_against_preset(s.pyramid, c, which);
  if (!(s.pyramid.base_dims() == s.vox.grid.dims())) {
    throw Error(ErrorCode::kDimensionMismatch, which + " pyramid base dims " + to_string(s.pyramid.base_dims()) +
                                                   " vs voxelized dims " + to_string(s.vox.grid.dims()));
  }
  return s;
}

struct PairMatch {
  PreparedShape from;
  PreparedShape to;
  CorrespondenceMap cm;  // voxels of `from` to voxels of `to`
  VertexMap map;         // vertices of `from` to vertices of `to`
};

inline PairMatch match_prepared(PreparedShape from, PreparedShape to, const RunConfig& c,
                                LiftAnchor anchor = LiftAnchor::kSourceOffset) {
  PairMatch r{std::move(from), std::move(to), {}, {}};
  r.cm = match_dense(r.from.pyramid, r.to.pyramid, r.from.vox.grid, r.to.vox.grid, {c.threads, false});
  r.map = lift_correspondence(r.cm, r.from.vox, r.to.vox, anchor);
  return r;
}

/// Dense vertex correspondence from `from` to `to`. Direction handling is
/// left to the caller, which passes the meshes in matching order.
inline PairMatch match_meshes(const Mesh& from, const Mesh& to, const RunConfig& c,
                              const std::optional<std::string>& from_pyramid = std::nullopt,
                              const std::optional<std::string>& to_pyramid = std::nullopt) {
  return match_prepared(prepare_shape(from, c, from_pyramid, "source"), prepare_shape(to, c, to_pyramid, "target"), c);
}

}  // namespace hnsr
