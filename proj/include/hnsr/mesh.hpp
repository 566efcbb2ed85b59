// SPDX-FileCopyrightText: 2026 The HNSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "hnsr/error.hpp"

namespace hnsr {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Face = std::array<std::uint32_t, 3>;

/// Per-vertex target vertex index; -1 marks "no correspondence".
using VertexMap = std::vector<std::int32_t>;

struct Part {
  std::string name;
  std::optional<std::filesystem::path> texture;  // diffuse map, absolute or relative to the mesh
  std::array<float, 3> color{0.8f, 0.8f, 0.8f};

  friend bool operator==(const Part&, const Part&) = default;
};

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::optional<std::vector<int>> labels;  // per-vertex part label
  std::vector<Part> parts;                 // empty when the mesh has no part structure
  std::vector<int> face_part;              // per face index into `parts`, empty iff parts empty
  std::vector<Vec2> uvs;
  std::vector<std::array<std::int32_t, 3>> face_uvs;  // per face corner into `uvs`, -1 for none
  std::optional<VertexMap> gt_corr;                  // per-vertex ground truth into a partner mesh

  bool has_parts() const { return !parts.empty(); }
  bool has_uvs() const { return !face_uvs.empty(); }

  void validate() const {
    for (std::size_t f = 0; f < faces.size(); ++f) {
      const Face& t = faces[f];
      for (auto i : t) {
        if (i >= vertices.size()) {
          throw Error(ErrorCode::kInvariantViolation,
                      "face " + std::to_string(f) + " references vertex " + std::to_string(i) + " of " +
                          std::to_string(vertices.size()));
        }
      }
      if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
        throw Error(ErrorCode::kInvariantViolation, "face " + std::to_string(f) + " is degenerate");
      }
    }
    if (labels && labels->size() != vertices.size()) {
      throw Error(ErrorCode::kInvariantViolation, "label count does not match vertex count");
    }
    if (gt_corr && gt_corr->size() != vertices.size()) {
      throw Error(ErrorCode::kInvariantViolation, "ground-truth correspondence count does not match vertex count");
    }
    if (!parts.empty()) {
      if (face_part.size() != faces.size()) {
        throw Error(ErrorCode::kInvariantViolation, "face_part must have one entry per face");
      }
      for (int p : face_part) {
        if (p < 0 || static_cast<std::size_t>(p) >= parts.size()) {
          throw Error(ErrorCode::kInvariantViolation, "face part index out of range");
        }
      }
    } else if (!face_part.empty()) {
      throw Error(ErrorCode::kInvariantViolation, "face_part given without parts");
    }
    if (!face_uvs.empty()) {
      if (face_uvs.size() != faces.size()) {
        throw Error(ErrorCode::kInvariantViolation, "face_uvs must have one entry per face");
      }
      for (const auto& t : face_uvs)
        for (auto i : t)
          if (i >= 0 && static_cast<std::size_t>(i) >= uvs.size()) {
            throw Error(ErrorCode::kInvariantViolation, "uv index out of range");
          }
    }
  }

  /// Axis-aligned bounding box diagonal length.
  double bbox_diagonal() const {
    if (vertices.empty()) return 0.0;
    Vec3 lo = vertices.front(), hi = vertices.front();
    for (const auto& v : vertices) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
    return (hi - lo).norm();
  }

  double surface_area() const {
    double a = 0.0;
    for (const auto& f : faces) {
      a += 0.5 * (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]).norm();
    }
    return a;
  }

  /// Part of each vertex: the smallest part index among its incident faces,
  /// or -1 for vertices not on any face (or meshes without parts).
  std::vector<int> vertex_parts() const {
    std::vector<int> out(vertices.size(), -1);
    if (parts.empty()) return out;
    for (std::size_t f = 0; f < faces.size(); ++f)
      for (auto v : faces[f])
        if (out[v] < 0 || face_part[f] < out[v]) out[v] = face_part[f];
    return out;
  }
};

}  // namespace hnsr
