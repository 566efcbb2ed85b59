// SPDX-FileCopyrightText: 2026 The HNSR Authors
// SPDX-License-Identifier: Apache-2.0

// Reference implementations written independently of the library for
// equivalence tests. They favor obviousness over speed.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hnsr/features.hpp"
#include "hnsr/grid.hpp"
#include "hnsr/matcher.hpp"

namespace hnsr::oracle {

using Cell = std::array<std::uint32_t, 3>;

inline double cosine_distance(const float* a, const float* b, std::size_t n) {
  long double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    dot += static_cast<long double>(a[i]) * b[i];
    na += static_cast<long double>(a[i]) * a[i];
    nb += static_cast<long double>(b[i]) * b[i];
  }
  if (na == 0 || nb == 0) return 2.0;
  const double d = 1.0 - static_cast<double>(dot / std::sqrt(na * nb));
  return std::clamp(d, 0.0, 2.0);
}

inline const float* feature(const FeatureGrid& g, const Cell& c) {
  const Dims& d = g.dims();
  const std::size_t idx = (std::size_t{c[2]} * d.ny + c[1]) * d.nx + c[0];
  return g.values().data() + idx * g.channels();
}

inline bool occupied(const VoxelGrid& g, const Cell& c) {
  const Dims& d = g.dims();
  return g.values()[(std::size_t{c[2]} * d.ny + c[1]) * d.nx + c[0]] == 1.0f;
}

/// Winner among (cell, distance) pairs: smallest distance up to `tol`, then
/// lexicographically smallest cell.
inline std::pair<Cell, double> pick(const std::vector<std::pair<Cell, double>>& scored, double tol) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [c, d] : scored) best = std::min(best, d);
  std::vector<std::pair<Cell, double>> near;
  for (const auto& s : scored)
    if (s.second <= best + tol) near.push_back(s);
  return *std::min_element(near.begin(), near.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
}

/// Trilinear sample of `g` at base cell `v` for a level of scale `s`, with
/// coordinates clamped to the level's cell centers.
inline std::vector<double> trilinear(const FeatureGrid& g, std::uint32_t s, const Cell& v) {
  const Dims& d = g.dims();
  const std::array<std::uint32_t, 3> n{d.nx, d.ny, d.nz};
  std::array<double, 3> u{};
  for (int a = 0; a < 3; ++a) u[a] = std::clamp((v[a] + 0.5) / s - 0.5, 0.0, n[a] - 1.0);
  std::vector<double> out(g.channels(), 0.0);
  for (int corner = 0; corner < 8; ++corner) {
    Cell c{};
    double w = 1.0;
    for (int a = 0; a < 3; ++a) {
      const auto lo = static_cast<std::uint32_t>(std::floor(u[a]));
      const auto hi = std::min(lo + 1, n[a] - 1);
      const double t = u[a] - lo;
      const bool up = (corner >> a) & 1;
      c[a] = up ? hi : lo;
      w *= up ? t : 1.0 - t;
    }
    if (w == 0.0) continue;
    const float* f = feature(g, c);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += w * f[k];
  }
  return out;
}

struct Result {
  Cell source;
  Cell target;
  std::vector<Cell> trace;
  std::vector<std::size_t> region_sizes;
};

/// Progressive matching with every candidate set written out explicitly.
inline std::vector<Result> brute_force_match(const FeaturePyramid& src, const FeaturePyramid& tar,
                                             const VoxelGrid& occ_src, const VoxelGrid& occ_tar, double tol) {
  const Dims sb = occ_src.dims(), tb = occ_tar.dims();
  const std::size_t levels = src.num_levels();
  std::vector<std::uint32_t> ss(levels), ts(levels);
  for (std::size_t i = 0; i < levels; ++i) {
    ss[i] = sb.nx / src.level(i).dims().nx;
    ts[i] = tb.nx / tar.level(i).dims().nx;
  }
  auto div = [](const Cell& c, std::uint32_t s) { return Cell{c[0] / s, c[1] / s, c[2] / s}; };

  std::vector<Result> out;
  for (std::uint32_t z = 0; z < sb.nz; ++z)
    for (std::uint32_t y = 0; y < sb.ny; ++y)
      for (std::uint32_t x = 0; x < sb.nx; ++x) {
        const Cell v{x, y, z};
        if (!occupied(occ_src, v)) continue;
        Result r;
        r.source = v;

        // Global: every coarse cell whose block holds an occupied target cell.
        const FeatureGrid& tg = tar.global();
        std::vector<std::pair<Cell, double>> scored;
        const float* fs = feature(src.global(), div(v, ss[0]));
        for (std::uint32_t cz = 0; cz < tg.dims().nz; ++cz)
          for (std::uint32_t cy = 0; cy < tg.dims().ny; ++cy)
            for (std::uint32_t cx = 0; cx < tg.dims().nx; ++cx) {
              bool any = false;
              for (std::uint32_t dz = 0; dz < ts[0] && !any; ++dz)
                for (std::uint32_t dy = 0; dy < ts[0] && !any; ++dy)
                  for (std::uint32_t dx = 0; dx < ts[0] && !any; ++dx)
                    any = occupied(occ_tar, {cx * ts[0] + dx, cy * ts[0] + dy, cz * ts[0] + dz});
              if (any) scored.push_back({{cx, cy, cz}, cosine_distance(fs, feature(tg, {cx, cy, cz}), tg.channels())});
            }
        Cell win = pick(scored, tol).first;
        r.trace.push_back(win);
        std::set<Cell> region;
        for (std::uint32_t dz = 0; dz < ts[0]; ++dz)
          for (std::uint32_t dy = 0; dy < ts[0]; ++dy)
            for (std::uint32_t dx = 0; dx < ts[0]; ++dx) {
              const Cell c{win[0] * ts[0] + dx, win[1] * ts[0] + dy, win[2] * ts[0] + dz};
              if (occupied(occ_tar, c)) region.insert(c);
            }
        r.region_sizes.push_back(region.size());

        for (std::size_t i = 1; i < levels; ++i) {
          std::set<Cell> candidates;
          for (const auto& c : region) candidates.insert(div(c, ts[i]));
          const float* fi = feature(src.level(i), div(v, ss[i]));
          std::vector<std::pair<Cell, double>> sc;
          for (const auto& a : candidates) sc.push_back({a, cosine_distance(fi, feature(tar.level(i), a), tar.level(i).channels())});
          win = pick(sc, tol).first;
          r.trace.push_back(win);
          std::set<Cell> next;
          for (const auto& c : region)
            if (div(c, ts[i]) == win) next.insert(c);
          region = std::move(next);
          r.region_sizes.push_back(region.size());
        }

        if (region.size() == 1) {
          r.target = *region.begin();
        } else {
          // Finest-level upsampled distance, then centrality in the last
          // winner's block, then lexicographic order.
          const std::size_t n = levels - 1;
          const auto fsrc = trilinear(src.level(n), ss[n], v);
          std::vector<float> fsrcf(fsrc.begin(), fsrc.end());
          struct Row {
            Cell c;
            double d;
            long long centrality;
          };
          std::vector<Row> rows;
          for (const auto& c : region) {
            const auto ft = trilinear(tar.level(n), ts[n], c);
            std::vector<float> ftf(ft.begin(), ft.end());
            long long cen = 0;
            for (int a = 0; a < 3; ++a) {
              const long long off = 2LL * (c[a] - win[a] * ts[n]) + 1 - ts[n];
              cen += off * off;
            }
            rows.push_back({c, cosine_distance(fsrcf.data(), ftf.data(), ftf.size()), cen});
          }
          double best = std::numeric_limits<double>::infinity();
          for (const auto& row : rows) best = std::min(best, row.d);
          std::vector<Row> near;
          for (const auto& row : rows)
            if (row.d <= best + tol) near.push_back(row);
          r.target = std::min_element(near.begin(), near.end(), [](const Row& a, const Row& b) {
                       return a.centrality != b.centrality ? a.centrality < b.centrality : a.c < b.c;
                     })->c;
        }
        out.push_back(std::move(r));
      }
  return out;
}

/// Empty when `cm` agrees with `want` entry by entry; otherwise a description
/// of the first difference.
inline std::string first_mismatch(const CorrespondenceMap& cm, const std::vector<Result>& want) {
  auto cell = [](const VoxelCoord& c) { return Cell{c.x, c.y, c.z}; };
  std::ostringstream os;
  if (cm.entries.size() != want.size()) {
    os << "entry count " << cm.entries.size() << " vs " << want.size();
    return os.str();
  }
  for (std::size_t i = 0; i < want.size(); ++i) {
    const auto& e = cm.entries[i];
    const auto& w = want[i];
    bool same = cell(e.source) == w.source && cell(e.target) == w.target && e.trace.size() == w.trace.size() &&
                e.region_sizes.size() == w.region_sizes.size();
    for (std::size_t k = 0; same && k < w.trace.size(); ++k) same = cell(e.trace[k]) == w.trace[k];
    for (std::size_t k = 0; same && k < w.region_sizes.size(); ++k) same = e.region_sizes[k] == w.region_sizes[k];
    if (!same) {
      os << "source " << e.source << ": got target " << e.target << ", oracle (" << w.target[0] << ","
         << w.target[1] << "," << w.target[2] << ")";
      return os.str();
    }
  }
  return {};
}

}  // namespace hnsr::oracle
