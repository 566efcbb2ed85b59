// SPDX-FileCopyrightText: 2026 The HNSR Authors
// SPDX-License-Identifier: Apache-2.0

// Procedural labeled meshes. Every shape is built from named parts; each
// vertex is labeled with its part index and carries a UV from the part's
// parameterization. No two vertices share a position.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>
#include <tuple>
#include <vector>

#include "hnsr/error.hpp"
#include "hnsr/mesh.hpp"

namespace hnsr::procedural {

/// Accumulates parts into one mesh, merging coincident vertices.
class MeshBuilder {
 public:
  int add_part(const std::string& name) {
    Part p;
    p.name = name;
    const int id = static_cast<int>(mesh_.parts.size());
    // Distinct flat colors make parts visible in viewers.
    p.color = {0.3f + 0.6f * static_cast<float>((id * 37) % 10) / 10.0f,
               0.3f + 0.6f * static_cast<float>((id * 53) % 10) / 10.0f,
               0.3f + 0.6f * static_cast<float>((id * 71) % 10) / 10.0f};
    mesh_.parts.push_back(p);
    return id;
  }

  std::uint32_t vertex(const Vec3& p, const Vec2& uv) {
    const auto key = std::make_tuple(std::llround(p.x() * 1e9), std::llround(p.y() * 1e9), std::llround(p.z() * 1e9));
    auto it = merge_.find(key);
    if (it != merge_.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(mesh_.vertices.size());
    mesh_.vertices.push_back(p);
    mesh_.uvs.push_back(uv);
    merge_.emplace(key, id);
    return id;
  }

  void quad(std::uint32_t a, std::uint32_t b, std::uint32_t c, std::uint32_t d, int part) {
    tri(a, b, c, part);
    tri(a, c, d, part);
  }

  void tri(std::uint32_t a, std::uint32_t b, std::uint32_t c, int part) {
    if (a == b || b == c || a == c) return;
    mesh_.faces.push_back({a, b, c});
    mesh_.face_uvs.push_back({static_cast<std::int32_t>(a), static_cast<std::int32_t>(b), static_cast<std::int32_t>(c)});
    mesh_.face_part.push_back(part);
  }

  Mesh finish() {
    mesh_.labels = mesh_.vertex_parts();
    mesh_.validate();
    return std::move(mesh_);
  }

 private:
  Mesh mesh_;
  std::map<std::tuple<long long, long long, long long>, std::uint32_t> merge_;
};

/// Axis-aligned box surface, each side split into cells no larger than `h`.
/// With `side_parts` every side gets its own part; otherwise all go to the
/// current part.
inline void add_box(MeshBuilder& b, const Vec3& lo, const Vec3& hi, double h, const std::string& name,
                    bool side_parts = false) {
  static constexpr std::array<const char*, 6> kSide{"-x", "+x", "-y", "+y", "-z", "+z"};
  const Vec3 ext = hi - lo;
  std::array<int, 3> n{};
  for (int a = 0; a < 3; ++a) n[a] = std::max(1, static_cast<int>(std::ceil(ext[a] / h - 1e-9)));
  int part = side_parts ? -1 : b.add_part(name);
  for (int axis = 0; axis < 3; ++axis)
    for (int sign = 0; sign < 2; ++sign) {
      if (side_parts) part = b.add_part(name + kSide[2 * axis + sign]);
      const int u = (axis + 1) % 3, v = (axis + 2) % 3;
      std::vector<std::uint32_t> ids;
      for (int j = 0; j <= n[v]; ++j)
        for (int i = 0; i <= n[u]; ++i) {
          Vec3 p;
          p[axis] = sign ? hi[axis] : lo[axis];
          p[u] = lo[u] + ext[u] * i / n[u];
          p[v] = lo[v] + ext[v] * j / n[v];
          ids.push_back(b.vertex(p, Vec2(static_cast<double>(i) / n[u], static_cast<double>(j) / n[v])));
        }
      const int row = n[u] + 1;
      for (int j = 0; j < n[v]; ++j)
        for (int i = 0; i < n[u]; ++i) {
          const auto a0 = ids[j * row + i], a1 = ids[j * row + i + 1];
          const auto a2 = ids[(j + 1) * row + i + 1], a3 = ids[(j + 1) * row + i];
          if (sign) b.quad(a0, a1, a2, a3, part);
          else b.quad(a0, a3, a2, a1, part);
        }
    }
}

/// Latitude-longitude sphere. Rows with polar angle below `split` go to
/// `upper_part`, the rest to `lower_part`.
inline void add_sphere(MeshBuilder& b, const Vec3& c, double r, int nu, int nv, int upper_part, int lower_part,
                       double split = std::numbers::pi / 2) {
  std::vector<std::uint32_t> ids;
  for (int j = 0; j <= nv; ++j)
    for (int i = 0; i < nu; ++i) {
      const double theta = std::numbers::pi * j / nv, phi = 2 * std::numbers::pi * i / nu;
      const Vec3 p = c + r * Vec3(std::sin(theta) * std::cos(phi), std::cos(theta), std::sin(theta) * std::sin(phi));
      const Vec3 snapped = (j == 0 || j == nv) ? c + Vec3(0, j == 0 ? r : -r, 0) : p;
      ids.push_back(b.vertex(snapped, Vec2(static_cast<double>(i) / nu, static_cast<double>(j) / nv)));
    }
  for (int j = 0; j < nv; ++j) {
    const int part = std::numbers::pi * (j + 0.5) / nv < split ? upper_part : lower_part;
    for (int i = 0; i < nu; ++i) {
      const int i1 = (i + 1) % nu;
      b.quad(ids[j * nu + i], ids[j * nu + i1], ids[(j + 1) * nu + i1], ids[(j + 1) * nu + i], part);
    }
  }
}

/// Cylinder along `axis` (0, 1 or 2) from `c - h/2` to `c + h/2`, with caps.
inline void add_cylinder(MeshBuilder& b, const Vec3& c, double r, double h, int axis, int nu, int nh, int side_part,
                         int cap_lo_part, int cap_hi_part) {
  const int u = (axis + 1) % 3, v = (axis + 2) % 3;
  auto at = [&](double t, double phi, double rad) {
    Vec3 p = c;
    p[axis] += t;
    p[u] += rad * std::cos(phi);
    p[v] += rad * std::sin(phi);
    return p;
  };
  std::vector<std::uint32_t> ring;
  for (int j = 0; j <= nh; ++j)
    for (int i = 0; i < nu; ++i) {
      const double phi = 2 * std::numbers::pi * i / nu;
      ring.push_back(b.vertex(at(-h / 2 + h * j / nh, phi, r), Vec2(static_cast<double>(i) / nu, static_cast<double>(j) / nh)));
    }
  for (int j = 0; j < nh; ++j)
    for (int i = 0; i < nu; ++i) {
      const int i1 = (i + 1) % nu;
      b.quad(ring[j * nu + i], ring[j * nu + i1], ring[(j + 1) * nu + i1], ring[(j + 1) * nu + i], side_part);
    }
  const int rings = std::max(1, nu / 8);
  for (int end = 0; end < 2; ++end) {
    const double t = end ? h / 2 : -h / 2;
    const int part = end ? cap_hi_part : cap_lo_part;
    std::vector<std::uint32_t> prev(ring.begin() + (end ? nh * nu : 0), ring.begin() + (end ? nh * nu : 0) + nu);
    for (int k = rings - 1; k >= 0; --k) {
      const double rad = r * k / rings;
      std::vector<std::uint32_t> cur;
      if (k == 0) {
        cur.assign(nu, b.vertex(at(t, 0, 0), Vec2(0.5, 0.5)));
      } else {
        for (int i = 0; i < nu; ++i) {
          const double phi = 2 * std::numbers::pi * i / nu;
          cur.push_back(b.vertex(at(t, phi, rad), Vec2(0.5 + 0.5 * std::cos(phi) * k / rings,
                                                        0.5 + 0.5 * std::sin(phi) * k / rings)));
        }
      }
      for (int i = 0; i < nu; ++i) {
        const int i1 = (i + 1) % nu;
        b.quad(prev[i], prev[i1], cur[i1], cur[i], part);
      }
      prev = cur;
    }
  }
}

/// Torus around the y axis; faces with x < 0 go to `left_part`.
inline void add_torus(MeshBuilder& b, double R, double r, int nu, int nv, int left_part, int right_part) {
  std::vector<std::uint32_t> ids;
  for (int j = 0; j < nv; ++j)
    for (int i = 0; i < nu; ++i) {
      const double phi = 2 * std::numbers::pi * i / nu, theta = 2 * std::numbers::pi * j / nv;
      const double rad = R + r * std::cos(theta);
      ids.push_back(b.vertex(Vec3(rad * std::cos(phi), r * std::sin(theta), rad * std::sin(phi)),
                             Vec2(static_cast<double>(i) / nu, static_cast<double>(j) / nv)));
    }
  for (int j = 0; j < nv; ++j)
    for (int i = 0; i < nu; ++i) {
      const int i1 = (i + 1) % nu, j1 = (j + 1) % nv;
      const double phi_mid = 2 * std::numbers::pi * (i + 0.5) / nu;
      const int part = std::cos(phi_mid) < 0 ? left_part : right_part;
      b.quad(ids[j * nu + i], ids[j * nu + i1], ids[j1 * nu + i1], ids[j1 * nu + i], part);
    }
}

inline Mesh box() {
  MeshBuilder b;
  add_box(b, Vec3(-0.6, -0.4, -0.3), Vec3(0.6, 0.4, 0.3), 0.1, "box", true);
  return b.finish();
}

inline Mesh sphere() {
  MeshBuilder b;
  const int top = b.add_part("upper"), bottom = b.add_part("lower");
  add_sphere(b, Vec3::Zero(), 0.5, 48, 24, top, bottom);
  return b.finish();
}

inline Mesh cylinder() {
  MeshBuilder b;
  const int side = b.add_part("side"), lo = b.add_part("bottom"), hi = b.add_part("top");
  add_cylinder(b, Vec3::Zero(), 0.3, 1.0, 1, 40, 12, side, lo, hi);
  return b.finish();
}

inline Mesh torus() {
  MeshBuilder b;
  const int left = b.add_part("left"), right = b.add_part("right");
  add_torus(b, 0.5, 0.15, 64, 20, left, right);
  return b.finish();
}

/// Two balls joined by a bar; part "left" is the left ball and bar half.
inline Mesh dumbbell() {
  MeshBuilder b;
  const int left = b.add_part("left");
  add_sphere(b, Vec3(-0.75, 0, 0), 0.3, 32, 16, left, left);
  add_cylinder(b, Vec3(-0.2525, 0, 0), 0.1, 0.495, 0, 20, 8, left, left, left);
  const int right = b.add_part("right");
  add_cylinder(b, Vec3(0.2525, 0, 0), 0.1, 0.495, 0, 20, 8, right, right, right);
  add_sphere(b, Vec3(0.75, 0, 0), 0.3, 32, 16, right, right);
  return b.finish();
}

struct QuadrupedParams {
  double leg_length = 0.6;             // visible leg length below the body
  std::array<bool, 4> legs{true, true, true, true};
};

/// Body, head and up to four legs (front-left, front-right, back-left,
/// back-right). Each leg's vertex count is independent of its length so that
/// index-wise correspondence holds across leg lengths.
inline Mesh quadruped(const QuadrupedParams& p = {}) {
  MeshBuilder b;
  add_box(b, Vec3(-1.0, 0.6, -0.4), Vec3(1.0, 1.2, 0.4), 0.1, "body");
  add_box(b, Vec3(0.93, 0.95, -0.2), Vec3(1.37, 1.45, 0.2), 0.1, "head");
  static constexpr std::array<const char*, 4> kLeg{"leg_fl", "leg_fr", "leg_bl", "leg_br"};
  static constexpr std::array<std::array<double, 2>, 4> kAt{{{0.7, -0.25}, {0.7, 0.25}, {-0.7, -0.25}, {-0.7, 0.25}}};
  for (int l = 0; l < 4; ++l) {
    if (!p.legs[l]) continue;
    const int part = b.add_part(kLeg[l]);
    // Legs reach 0.05 into the body; fixed 8 rows along the leg.
    const double top = 0.65, bottom = 0.6 - p.leg_length;
    const Vec3 c(kAt[l][0], (top + bottom) / 2, kAt[l][1]);
    add_cylinder(b, c, 0.09, top - bottom, 1, 16, 8, part, part, part);
  }
  return b.finish();
}

/// Source quadruped, a target with legs stretched by `stretch` and leg
/// `removed_leg` dropped (-1 keeps all four), and the ground-truth vertex map
/// from source to target (-1 for vertices of the removed leg).
struct DeformedPair {
  Mesh source;
  Mesh target;
  VertexMap gt;
};

inline DeformedPair quadruped_pair(double stretch = 1.2, int removed_leg = 3) {
  DeformedPair out;
  out.source = quadruped();
  QuadrupedParams tp;
  tp.leg_length = 0.6 * stretch;
  if (removed_leg >= 0) tp.legs[static_cast<std::size_t>(removed_leg)] = false;
  out.target = quadruped(tp);
  // Parts are emitted in the same order with the same vertex counts, so
  // vertices pair up by rank within each part name.
  const auto& sl = *out.source.labels;
  const auto& tl = *out.target.labels;
  std::map<std::string, std::vector<std::uint32_t>> tar_by_part;
  for (std::uint32_t v = 0; v < tl.size(); ++v) tar_by_part[out.target.parts[tl[v]].name].push_back(v);
  std::map<std::string, std::size_t> rank;
  out.gt.assign(out.source.vertices.size(), -1);
  for (std::uint32_t v = 0; v < sl.size(); ++v) {
    const std::string& name = out.source.parts[sl[v]].name;
    const std::size_t k = rank[name]++;
    auto it = tar_by_part.find(name);
    if (it == tar_by_part.end()) continue;
    if (k >= it->second.size()) throw Error(ErrorCode::kInvariantViolation, "part " + name + " vertex counts differ");
    out.gt[v] = static_cast<std::int32_t>(it->second[k]);
  }
  return out;
}

inline const std::vector<std::string>& shape_names() {
  static const std::vector<std::string> names{"box", "sphere", "cylinder", "torus", "dumbbell", "quadruped"};
  return names;
}

inline Mesh make(const std::string& name) {
  if (name == "box") return box();
  if (name == "sphere") return sphere();
  if (name == "cylinder") return cylinder();
  if (name == "torus") return torus();
  if (name == "dumbbell") return dumbbell();
  if (name == "quadruped") return quadruped();
  throw Error(ErrorCode::kInvalidArgument, "unknown procedural shape '" + name + "'");
}

}  // namespace hnsr::procedural
