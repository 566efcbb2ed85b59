// SPDX-FileCopyrightText: 2026 The HNSR Authors
// SPDX-License-Identifier: Apache-2.0

// Progressive global-to-local correspondence matching.
//
// For a source voxel v:
//   1. Global initialization: compare F_G^src at v's global cell against every
//      occupied target global cell; the winner's block, restricted to
//      occupied target voxels, is region R_0.
//   2. Local refinement, i = 1..N: the candidate set A_i is R_{i-1}
//      downsampled into level i. The winner v_i^tar shrinks the region to
//      R_i = R_{i-1} ∩ block(v_i^tar).
//   3. Finalization picks one voxel of R_N.
//
// Every argmin takes the lexicographically smallest (x, y, z) among the
// candidates whose distance is within kTieTolerance of the minimum, so
// results do not depend on iteration order or thread count.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "hnsr/error.hpp"
#include "hnsr/features.hpp"
#include "hnsr/grid.hpp"
#include "hnsr/parallel.hpp"

namespace hnsr {

inline constexpr double kTieTolerance = 1e-6;

struct MatchRegion {
  std::size_t level = 0;
  std::vector<VoxelCoord> cells;  // base-grid cells of the target, sorted
};

struct CandidateSet {
  std::size_t level = 0;
  std::vector<VoxelCoord> coords;  // level-grid cells, sorted and unique
};

struct LevelMatch {
  VoxelCoord target;
  double distance = 0.0;
  MatchRegion region;
};

struct CorrespondenceEntry {
  VoxelCoord source;
  VoxelCoord target;
  std::vector<VoxelCoord> trace;           // [v_G^tar, v_1^tar, ..., v_N^tar]
  double distance = 0.0;                   // argmin value at the finest level
  std::vector<std::uint32_t> region_sizes;  // |R_0| .. |R_N|
  std::vector<MatchRegion> regions;        // only filled on request
};

struct CorrespondenceMap {
  Dims source_dims;
  Dims target_dims;
  std::vector<CorrespondenceEntry> entries;  // ordered by source linear index

  const CorrespondenceEntry* find(const VoxelCoord& src) const {
    const std::size_t key = source_dims.index(src);
    auto it = std::lower_bound(entries.begin(), entries.end(), key,
                               [&](const CorrespondenceEntry& e, std::size_t k) {
                                 return source_dims.index(e.source) < k;
                               });
    if (it == entries.end() || !(it->source == src)) return nullptr;
    return &*it;
  }
};

struct MatchOptions {
  unsigned threads = 1;
  bool keep_regions = false;
};

namespace detail {

struct Scored {
  VoxelCoord coord;
  double distance;
};

/// Index of the winner among `scored` under the tolerance tie rule.
inline std::size_t argmin_with_ties(std::span<const Scored> scored) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : scored) best = std::min(best, s.distance);
  std::size_t win = scored.size();
  for (std::size_t i = 0; i < scored.size(); ++i) {
    if (scored[i].distance <= best + kTieTolerance &&
        (win == scored.size() || scored[i].coord < scored[win].coord)) {
      win = i;
    }
  }
  return win;
}

inline std::uint64_t squared_offset_from_center(const VoxelCoord& c, const CellBox& box, std::uint32_t s) {
  // Twice the offset of the cell center from the block center, per axis.
  auto axis = [&](std::uint32_t v, std::uint32_t lo) {
    const std::int64_t d = 2 * (std::int64_t{v} - lo) + 1 - std::int64_t{s};
    return static_cast<std::uint64_t>(d * d);
  };
  return axis(c.x, box.lo.x) + axis(c.y, box.lo.y) + axis(c.z, box.lo.z);
}

}  // namespace detail

/// Feature of `level` at base cell `v`, trilinearly interpolated between the
/// level's cell centers (clamped at the border).
inline std::vector<float> sample_upsampled(const FeatureGrid& level, std::uint32_t scale, const VoxelCoord& v) {
  const Dims& d = level.dims();
  struct Axis {
    std::uint32_t i0, i1;
    double w;
  };
  auto axis = [&](std::uint32_t base, std::uint32_t n) {
    const double u = (base + 0.5) / scale - 0.5;
    if (u <= 0.0) return Axis{0, 0, 0.0};
    if (u >= n - 1.0) return Axis{n - 1, n - 1, 0.0};
    const auto i0 = static_cast<std::uint32_t>(std::floor(u));
    return Axis{i0, i0 + 1, u - i0};
  };
  const Axis ax = axis(v.x, d.nx), ay = axis(v.y, d.ny), az = axis(v.z, d.nz);
  std::vector<double> acc(level.channels(), 0.0);
  for (int cz = 0; cz < 2; ++cz)
    for (int cy = 0; cy < 2; ++cy)
      for (int cx = 0; cx < 2; ++cx) {
        const double w = (cx ? ax.w : 1 - ax.w) * (cy ? ay.w : 1 - ay.w) * (cz ? az.w : 1 - az.w);
        if (w == 0.0) continue;
        const auto f = level.at({cx ? ax.i1 : ax.i0, cy ? ay.i1 : ay.i0, cz ? az.i1 : az.i0});
        for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += w * f[c];
      }
  return {acc.begin(), acc.end()};
}

/// Matches source voxels of one pyramid against a target pyramid. Holds
/// read-only views of its inputs and caches target occupancy per level; all
/// query methods are const and safe to call concurrently.
class Matcher {
 public:
  Matcher(const FeaturePyramid& src, const FeaturePyramid& tar, const VoxelGrid& occ_tar)
      : src_(src), tar_(tar), occ_tar_(occ_tar) {
    if (src.num_levels() != tar.num_levels()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "source pyramid has " + std::to_string(src.num_levels()) + " levels, target has " +
                      std::to_string(tar.num_levels()));
    }
    for (std::size_t i = 0; i < src.num_levels(); ++i) {
      if (src.level(i).channels() != tar.level(i).channels()) {
        throw Error(ErrorCode::kDimensionMismatch,
                    "level " + std::to_string(i) + " channel count " + std::to_string(src.level(i).channels()) +
                        " vs " + std::to_string(tar.level(i).channels()));
      }
    }
    if (occ_tar.kind() != GridKind::kOccupancy) {
      throw Error(ErrorCode::kUnsupportedKind, "target occupancy must be an occupancy grid");
    }
    if (!(occ_tar.dims() == tar.base_dims())) {
      throw Error(ErrorCode::kDimensionMismatch, "target pyramid base dims " + to_string(tar.base_dims()) +
                                                     " vs target grid dims " + to_string(occ_tar.dims()));
    }
    for (std::size_t i = 0; i < src.num_levels(); ++i) {
      src_scales_.push_back(src.scale_map(i));
      tar_scales_.push_back(tar.scale_map(i));
    }
    const VoxelGrid global_occ = coarsen_occupancy(occ_tar, tar_scales_[0]);
    global_candidates_ = occupied_cells(global_occ);
    if (global_candidates_.empty()) {
      throw Error(ErrorCode::kEmptyTarget, "target shape has no occupied cells");
    }
  }

  std::size_t num_locals() const { return src_.num_locals(); }
  const ScaleMap& source_scale(std::size_t level) const { return src_scales_.at(level); }
  const ScaleMap& target_scale(std::size_t level) const { return tar_scales_.at(level); }

  LevelMatch global_init(const VoxelCoord& v_src) const {
    const VoxelCoord v_g = downsample_coord(v_src, src_scales_[0]);
    const auto f_src = src_.global().at(v_g);
    std::vector<detail::Scored> scored;
    scored.reserve(global_candidates_.size());
    for (const auto& c : global_candidates_) {
      scored.push_back({c, cosine_distance(f_src, tar_.global().at(c))});
    }
    const auto& win = scored[detail::argmin_with_ties(scored)];
    LevelMatch out{win.coord, win.distance, {0, {}}};
    const CellBox box = block_of(win.coord, tar_scales_[0]);
    for (std::uint32_t x = box.lo.x; x < box.hi.x; ++x)
      for (std::uint32_t y = box.lo.y; y < box.hi.y; ++y)
        for (std::uint32_t z = box.lo.z; z < box.hi.z; ++z)
          if (occ_tar_.values()[occ_tar_.dims().index({x, y, z})] == 1.0f) out.region.cells.push_back({x, y, z});
    return out;
  }

  CandidateSet candidates(const MatchRegion& prev, std::size_t level) const {
    check_refine_args(prev, level);
    CandidateSet a{level, {}};
    a.coords.reserve(prev.cells.size());
    for (const auto& c : prev.cells) a.coords.push_back(downsample_coord(c, tar_scales_[level]));
    std::sort(a.coords.begin(), a.coords.end());
    a.coords.erase(std::unique(a.coords.begin(), a.coords.end()), a.coords.end());
    return a;
  }

  LevelMatch refine_level(const VoxelCoord& v_src, const MatchRegion& prev, std::size_t level) const {
    const CandidateSet a = candidates(prev, level);
    const VoxelCoord v_i = downsample_coord(v_src, src_scales_[level]);
    const auto f_src = src_.level(level).at(v_i);
    std::vector<detail::Scored> scored;
    scored.reserve(a.coords.size());
    for (const auto& c : a.coords) scored.push_back({c, cosine_distance(f_src, tar_.level(level).at(c))});
    const auto& win = scored[detail::argmin_with_ties(scored)];
    LevelMatch out{win.coord, win.distance, {level, {}}};
    const CellBox box = block_of(win.coord, tar_scales_[level]);
    for (const auto& c : prev.cells)
      if (box.contains(c)) out.region.cells.push_back(c);
    return out;
  }

  /// Final-region cells ranked by distance between upsampled finest-level
  /// features, then by closeness to the center of `block_cell`'s block, then
  /// lexicographically. The first element is the finalized match.
  std::vector<detail::Scored> rank_final(const MatchRegion& final_region, const VoxelCoord& v_src,
                                         const VoxelCoord& block_cell) const {
    if (final_region.cells.empty()) {
      throw Error(ErrorCode::kContractViolation, "final region is empty");
    }
    const std::size_t n = src_.num_locals();
    const std::uint32_t s_src = src_scales_[n].scale();
    const std::uint32_t s_tar = tar_scales_[n].scale();
    std::vector<detail::Scored> scored;
    if (final_region.cells.size() == 1) {
      scored.push_back({final_region.cells.front(), 0.0});
      return scored;
    }
    const auto f_src = sample_upsampled(src_.level(n), s_src, v_src);
    for (const auto& c : final_region.cells) {
      const auto f_tar = sample_upsampled(tar_.level(n), s_tar, c);
      scored.push_back({c, cosine_distance(f_src, f_tar)});
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : scored) best = std::min(best, s.distance);
    const CellBox box = block_of(block_cell, tar_scales_[n]);
    // Near-equal distances collapse to the best value so that the
    // secondary keys decide, consistent with argmin_with_ties.
    auto key = [&](const detail::Scored& s) { return s.distance <= best + kTieTolerance ? best : s.distance; };
    std::stable_sort(scored.begin(), scored.end(), [&](const detail::Scored& a, const detail::Scored& b) {
      const double ka = key(a), kb = key(b);
      if (ka != kb) return ka < kb;
      const auto ca = detail::squared_offset_from_center(a.coord, box, s_tar);
      const auto cb = detail::squared_offset_from_center(b.coord, box, s_tar);
      if (ca != cb) return ca < cb;
      return a.coord < b.coord;
    });
    return scored;
  }

  VoxelCoord finalize(const MatchRegion& final_region, const VoxelCoord& v_src, const VoxelCoord& block_cell) const {
    return rank_final(final_region, v_src, block_cell).front().coord;
  }

  CorrespondenceEntry match(const VoxelCoord& v_src, bool keep_regions = false) const {
    return match_from(v_src, global_init(v_src), keep_regions);
  }

  CorrespondenceEntry match_from(const VoxelCoord& v_src, LevelMatch global, bool keep_regions) const {
    CorrespondenceEntry e;
    e.source = v_src;
    e.trace.push_back(global.target);
    e.distance = global.distance;
    e.region_sizes.push_back(static_cast<std::uint32_t>(global.region.cells.size()));
    MatchRegion region = std::move(global.region);
    if (keep_regions) e.regions.push_back(region);
    for (std::size_t i = 1; i <= src_.num_locals(); ++i) {
      LevelMatch step = refine_level(v_src, region, i);
      e.trace.push_back(step.target);
      e.distance = step.distance;
      e.region_sizes.push_back(static_cast<std::uint32_t>(step.region.cells.size()));
      region = std::move(step.region);
      if (keep_regions) e.regions.push_back(region);
    }
    e.target = finalize(region, v_src, e.trace.back());
    return e;
  }

 private:
  void check_refine_args(const MatchRegion& prev, std::size_t level) const {
    if (level < 1 || level > src_.num_locals()) {
      throw Error(ErrorCode::kContractViolation, "refinement level " + std::to_string(level) + " outside [1," +
                                                     std::to_string(src_.num_locals()) + "]");
    }
    if (prev.cells.empty()) throw Error(ErrorCode::kContractViolation, "previous region is empty");
  }

  const FeaturePyramid& src_;
  const FeaturePyramid& tar_;
  const VoxelGrid& occ_tar_;
  std::vector<ScaleMap> src_scales_;
  std::vector<ScaleMap> tar_scales_;
  std::vector<VoxelCoord> global_candidates_;
};

inline LevelMatch global_init(const FeaturePyramid& src, const FeaturePyramid& tar, const VoxelGrid& occ_tar,
                              const VoxelCoord& v_src) {
  return Matcher(src, tar, occ_tar).global_init(v_src);
}

inline LevelMatch refine_level(const FeaturePyramid& src, const FeaturePyramid& tar, const VoxelGrid& occ_tar,
                               const VoxelCoord& v_src, const MatchRegion& prev, std::size_t level) {
  return Matcher(src, tar, occ_tar).refine_level(v_src, prev, level);
}

/// Dense correspondence for every occupied source voxel.
inline CorrespondenceMap match_dense(const FeaturePyramid& src, const FeaturePyramid& tar, const VoxelGrid& occ_src,
                                     const VoxelGrid& occ_tar, const MatchOptions& opts = {}) {
  if (occ_src.kind() != GridKind::kOccupancy) {
    throw Error(ErrorCode::kUnsupportedKind, "source occupancy must be an occupancy grid");
  }
  if (!(occ_src.dims() == src.base_dims())) {
    throw Error(ErrorCode::kDimensionMismatch, "source pyramid base dims " + to_string(src.base_dims()) +
                                                   " vs source grid dims " + to_string(occ_src.dims()));
  }
  const Matcher matcher(src, tar, occ_tar);
  CorrespondenceMap out;
  out.source_dims = occ_src.dims();
  out.target_dims = occ_tar.dims();
  const std::vector<VoxelCoord> sources = occupied_cells(occ_src);

  // The global stage depends only on the source global cell.
  const ScaleMap& g = matcher.source_scale(0);
  std::vector<std::size_t> global_keys;
  for (const auto& v : sources) global_keys.push_back(g.coarse().index(downsample_coord(v, g)));
  std::vector<std::size_t> unique_keys = global_keys;
  std::sort(unique_keys.begin(), unique_keys.end());
  unique_keys.erase(std::unique(unique_keys.begin(), unique_keys.end()), unique_keys.end());
  std::vector<LevelMatch> globals(unique_keys.size());
  parallel_for(unique_keys.size(), opts.threads, [&](std::size_t k) {
    const VoxelCoord cell = g.coarse().coord(unique_keys[k]);
    globals[k] = matcher.global_init(block_of(cell, g).lo);
  });

  out.entries.resize(sources.size());
  parallel_for(sources.size(), opts.threads, [&](std::size_t i) {
    const auto k = std::lower_bound(unique_keys.begin(), unique_keys.end(), global_keys[i]) - unique_keys.begin();
    out.entries[i] = matcher.match_from(sources[i], globals[static_cast<std::size_t>(k)], opts.keep_regions);
  });
  return out;
}

inline nlohmann::json coord_json(const VoxelCoord& c) { return nlohmann::json::array({c.x, c.y, c.z}); }

inline VoxelCoord coord_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::kInvalidArgument, "coordinate must be [x,y,z]");
  return {j[0].get<std::uint32_t>(), j[1].get<std::uint32_t>(), j[2].get<std::uint32_t>()};
}

/// One JSON object per line: src, tar, trace, distance, region_sizes. A
/// leading header line records the grid dims of both sides.
inline void write_correspondence_jsonl(const CorrespondenceMap& cm, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << nlohmann::json{{"source_dims", {cm.source_dims.nx, cm.source_dims.ny, cm.source_dims.nz}},
                        {"target_dims", {cm.target_dims.nx, cm.target_dims.ny, cm.target_dims.nz}}}
             .dump()
      << '\n';
  for (const auto& e : cm.entries) {
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& t : e.trace) trace.push_back(coord_json(t));
    out << nlohmann::json{{"src", coord_json(e.source)},
                          {"tar", coord_json(e.target)},
                          {"trace", trace},
                          {"distance", e.distance},
                          {"region_sizes", e.region_sizes}}
               .dump()
        << '\n';
  }
}

inline CorrespondenceMap read_correspondence_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  CorrespondenceMap cm;
  std::string line;
  std::size_t lineno = 0;
  try {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      if (lineno == 1) {
        const auto& s = j.at("source_dims");
        const auto& t = j.at("target_dims");
        cm.source_dims = {s[0].get<std::uint32_t>(), s[1].get<std::uint32_t>(), s[2].get<std::uint32_t>()};
        cm.target_dims = {t[0].get<std::uint32_t>(), t[1].get<std::uint32_t>(), t[2].get<std::uint32_t>()};
        continue;
      }
      CorrespondenceEntry e;
      e.source = coord_from_json(j.at("src"));
      e.target = coord_from_json(j.at("tar"));
      for (const auto& t : j.at("trace")) e.trace.push_back(coord_from_json(t));
      e.distance = j.at("distance").get<double>();
      e.region_sizes = j.value("region_sizes", std::vector<std::uint32_t>{});
      cm.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(lineno, e.what());
  }
  std::sort(cm.entries.begin(), cm.entries.end(), [&](const auto& a, const auto& b) {
    return cm.source_dims.index(a.source) < cm.source_dims.index(b.source);
  });
  return cm;
}

}  // namespace hnsr
