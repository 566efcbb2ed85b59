// SPDX-FileCopyrightText: 2026 The HNSR Authors
// SPDX-License-Identifier: Apache-2.0

// Run configuration and backbone presets.
//
//   preset          input                resolution  timestep  layers (global; locals)
//   analytic        occupancy            32          -         0; 1, 2
//   sdf-diffusion   signed distance      32          50        1; 2, 3
//   las-diffusion   occupancy            64          45        1; 2, 3
//   trellis         structural latents   16          12        4; 6, 8, 10

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hnsr/analytic_backbone.hpp"
#include "hnsr/error.hpp"
#include "hnsr/features.hpp"
#include "hnsr/metrics.hpp"
#include "hnsr/voxelize.hpp"

namespace hnsr {

struct BackbonePreset {
  std::string id;
  GridKind input_kind;
  std::uint32_t resolution;
  std::optional<std::uint32_t> timestep;  // empty for the analytic backbone
  std::vector<int> layer_ids;             // global first
};

inline const std::vector<BackbonePreset>& backbone_presets() {
  static const std::vector<BackbonePreset> presets{
      {"analytic", GridKind::kOccupancy, 32, std::nullopt, {0, 1, 2}},
      {"sdf-diffusion", GridKind::kSignedDistance, 32, 50, {1, 2, 3}},
      {"las-diffusion", GridKind::kOccupancy, 64, 45, {1, 2, 3}},
      {"trellis", GridKind::kLatentEmbedding, 16, 12, {4, 6, 8, 10}},
  };
  return presets;
}

inline const BackbonePreset& find_preset(const std::string& id) {
  for (const auto& p : backbone_presets())
    if (p.id == id) return p;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown preset '" + id + "' (expected analytic, sdf-diffusion, las-diffusion or trellis)");
}

enum class Direction { kSourceToTarget, kTargetToSource };

inline std::string to_string(Direction d) {
  return d == Direction::kSourceToTarget ? "source-to-target" : "target-to-source";
}

inline Direction direction_from_string(const std::string& s) {
  if (s == "source-to-target") return Direction::kSourceToTarget;
  if (s == "target-to-source") return Direction::kTargetToSource;
  throw Error(ErrorCode::kInvalidArgument, "direction must be source-to-target or target-to-source, got '" + s + "'");
}

struct RunConfig {
  std::string preset = "analytic";
  std::optional<std::uint32_t> resolution;  // defaults to the preset's
  std::optional<std::string> pyramid_src;
  std::optional<std::string> pyramid_tar;
  std::vector<std::uint32_t> level_scales;  // analytic only; empty means the default ladder
  std::optional<std::uint32_t> timestep;    // defaults to the preset's
  std::uint64_t seed = 0;
  bool perturb_before = false;              // analytic only
  Direction direction = Direction::kSourceToTarget;
  double tol = kDefaultTolerance;
  unsigned threads = 1;

  std::uint32_t effective_resolution() const { return resolution.value_or(find_preset(preset).resolution); }
  std::optional<std::uint32_t> effective_timestep() const {
    return timestep ? timestep : find_preset(preset).timestep;
  }
};

inline void validate(const RunConfig& c) {
  const BackbonePreset& p = find_preset(c.preset);
  const std::uint32_t res = c.effective_resolution();
  if (!supported_resolution(res)) {
    throw Error(ErrorCode::kInvalidArgument, "resolution " + std::to_string(res) + " not in {16, 32, 64, 128}");
  }
  if (!(c.tol > 0.0)) throw Error(ErrorCode::kInvalidArgument, "tolerance must be positive");
  if (p.id == "analytic") {
    if (c.pyramid_src || c.pyramid_tar) {
      throw Error(ErrorCode::kInvalidArgument, "the analytic preset computes pyramids; drop --pyramid-src/--pyramid-tar");
    }
    if (c.timestep && (*c.timestep < 1 || static_cast<int>(*c.timestep) > kAnalyticTotalSteps)) {
      throw Error(ErrorCode::kInvalidTimestep, "timestep must lie in [1, " + std::to_string(kAnalyticTotalSteps) + "]");
    }
  } else {
    if (!c.level_scales.empty()) throw Error(ErrorCode::kInvalidArgument, "--scales applies to the analytic preset only");
    if (c.perturb_before) throw Error(ErrorCode::kInvalidArgument, "perturb_before applies to the analytic preset only");
  }
}

/// Analytic backbone settings implied by the run config. The timestep only
/// matters when perturb_before is set.
inline BackboneConfig analytic_config(const RunConfig& c) {
  const std::uint32_t res = c.effective_resolution();
  BackboneConfig cfg = default_backbone_config(res);
  if (!c.level_scales.empty()) {
    cfg.levels.clear();
    for (std::size_t i = 0; i < c.level_scales.size(); ++i) {
      cfg.levels.push_back({c.level_scales[i], i == 0 ? default_global_descriptors() : default_local_descriptors()});
    }
  }
  cfg.perturb_before = c.perturb_before;
  cfg.timestep = static_cast<int>(c.timestep.value_or(1));
  cfg.seed = c.seed;
  validate(cfg);
  return cfg;
}

/// Checks an imported pyramid against the preset it is used with.
inline void check_pyramid_against_preset(const FeaturePyramid& p, const RunConfig& c, const std::string& which) {
  const BackbonePreset& preset = find_preset(c.preset);
  const auto& meta = p.meta();
  if (meta.backbone_id != preset.id) {
    throw Error(ErrorCode::kInvalidArgument,
                which + " pyramid comes from backbone '" + meta.backbone_id + "', preset is '" + preset.id + "'");
  }
  if (meta.layer_ids != preset.layer_ids) {
    throw Error(ErrorCode::kInvalidArgument, which + " pyramid layer ids do not match the " + preset.id + " preset");
  }
  const auto t = c.effective_timestep();
  if (t && meta.timestep != static_cast<int>(*t)) {
    throw Error(ErrorCode::kInvalidTimestep, which + " pyramid was extracted at t=" + std::to_string(meta.timestep) +
                                                 ", config expects t=" + std::to_string(*t));
  }
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j{{"preset", c.preset},
                   {"resolution", c.effective_resolution()},
                   {"level_scales", c.level_scales},
                   {"seed", c.seed},
                   {"perturb_before", c.perturb_before},
                   {"direction", to_string(c.direction)},
                   {"tol", c.tol},
                   {"threads", c.threads}};
  j["pyramid_src"] = c.pyramid_src ? nlohmann::json(*c.pyramid_src) : nlohmann::json();
  j["pyramid_tar"] = c.pyramid_tar ? nlohmann::json(*c.pyramid_tar) : nlohmann::json();
  const auto t = c.effective_timestep();
  j["timestep"] = t ? nlohmann::json(*t) : nlohmann::json();
  return j;
}

/// Applies the keys present in `j` on top of `c`. Unknown keys are rejected.
inline void apply_json(RunConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "preset") c.preset = v.get<std::string>();
      else if (key == "resolution") c.resolution = v.get<std::uint32_t>();
      else if (key == "pyramid_src") c.pyramid_src = v.is_null() ? std::nullopt : std::optional(v.get<std::string>());
      else if (key == "pyramid_tar") c.pyramid_tar = v.is_null() ? std::nullopt : std::optional(v.get<std::string>());
      else if (key == "level_scales") c.level_scales = v.get<std::vector<std::uint32_t>>();
      else if (key == "timestep") c.timestep = v.is_null() ? std::nullopt : std::optional(v.get<std::uint32_t>());
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "perturb_before") c.perturb_before = v.get<bool>();
      else if (key == "direction") c.direction = direction_from_string(v.get<std::string>());
      else if (key == "tol") c.tol = v.get<double>();
      else if (key == "threads") c.threads = v.get<unsigned>();
      else throw Error(ErrorCode::kInvalidArgument, "unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("bad config value: ") + e.what());
  }
}

}  // namespace hnsr
