// SPDX-FileCopyrightText: 2026 The HNSR Authors
// SPDX-License-Identifier: Apache-2.0

// Correspondence and co-segmentation metrics.
//
// Euclidean errors are normalized by the target bounding-box diagonal;
// geodesic quantities by sqrt(surface area). Geodesics are shortest paths on
// the mesh edge graph. A vertex pair in different connected components is
// charged the largest finite distance seen during the evaluation plus one
// normalized unit.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hnsr/error.hpp"
#include "hnsr/geodesic.hpp"
#include "hnsr/mesh.hpp"
#include "hnsr/parallel.hpp"

namespace hnsr {

inline constexpr double kDefaultTolerance = 0.01;

struct AccuracyResult {
  double accuracy = 0.0;
  double avg_error = 0.0;
  std::vector<double> errors;  // per source vertex, normalized
};

struct GeodesicResult {
  double mean = 0.0;  // normalized by sqrt(area)
  std::size_t disconnected = 0;
};

struct DistortionResult {
  double ratio = 0.0;
  std::size_t edges = 0;
  std::size_t disconnected = 0;
};

struct IouResult {
  std::map<int, double> per_part;
  double mean = 0.0;
};

struct EvalReport {
  double tolerance = kDefaultTolerance;
  double accuracy_at_tol = 0.0;
  double avg_error = 0.0;
  double geodesic_error = 0.0;
  std::optional<double> edge_distortion_ratio;
  std::map<int, double> per_part_iou;
  std::optional<double> mean_iou;
  std::size_t n_pairs = 0;
  std::size_t n_disconnected = 0;
};

namespace detail {

inline void check_maps(const VertexMap& pred, const VertexMap& gt, std::size_t target_vertices) {
  if (pred.size() != gt.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "prediction covers " + std::to_string(pred.size()) +
                                                   " vertices, ground truth " + std::to_string(gt.size()));
  }
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] < 0 || static_cast<std::size_t>(gt[i]) >= target_vertices) {
      throw Error(ErrorCode::kMissingData, "no valid ground truth for source vertex " + std::to_string(i));
    }
    if (pred[i] < 0 || static_cast<std::size_t>(pred[i]) >= target_vertices) {
      throw Error(ErrorCode::kMissingData, "no valid prediction for source vertex " + std::to_string(i));
    }
  }
}

}  // namespace detail

inline AccuracyResult accuracy_and_error(const VertexMap& pred, const VertexMap& gt, const Mesh& tar,
                                         double tol = kDefaultTolerance) {
  detail::check_maps(pred, gt, tar.vertices.size());
  const double diag = tar.bbox_diagonal();
  if (!(diag > 0.0)) throw Error(ErrorCode::kInvalidArgument, "target mesh has a degenerate bounding box");
  AccuracyResult r;
  r.errors.reserve(pred.size());
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = (tar.vertices[pred[i]] - tar.vertices[gt[i]]).norm() / diag;
    r.errors.push_back(e);
    sum += e;
    if (e <= tol) ++hits;
  }
  if (!pred.empty()) {
    r.accuracy = static_cast<double>(hits) / pred.size();
    r.avg_error = sum / pred.size();
  }
  return r;
}

inline GeodesicResult geodesic_error(const VertexMap& pred, const VertexMap& gt, const Mesh& tar,
                                     unsigned threads = 1) {
  detail::check_maps(pred, gt, tar.vertices.size());
  const double norm = std::sqrt(tar.surface_area());
  if (!(norm > 0.0)) throw Error(ErrorCode::kInvalidArgument, "target mesh has zero area");
  const EdgeGraph graph(tar);

  std::map<std::int32_t, std::vector<std::size_t>> by_gt;
  for (std::size_t i = 0; i < gt.size(); ++i) by_gt[gt[i]].push_back(i);
  std::vector<std::int32_t> sources;
  for (const auto& [g, _] : by_gt) sources.push_back(g);

  std::vector<double> raw(pred.size(), 0.0);
  std::vector<double> max_finite(sources.size(), 0.0);
  parallel_for(sources.size(), threads, [&](std::size_t k) {
    const auto dist = graph.distances_from(static_cast<std::uint32_t>(sources[k]));
    for (double d : dist)
      if (d != kUnreachable) max_finite[k] = std::max(max_finite[k], d);
    for (std::size_t i : by_gt.at(sources[k])) raw[i] = dist[static_cast<std::size_t>(pred[i])];
  });
  const double penalty = *std::max_element(max_finite.begin(), max_finite.end()) / norm + 1.0;
  GeodesicResult r;
  double sum = 0.0;
  for (double d : raw) {
    if (d == kUnreachable) {
      ++r.disconnected;
      sum += penalty;
    } else {
      sum += d / norm;
    }
  }
  if (!raw.empty()) r.mean = sum / raw.size();
  return r;
}

/// Mean over source edges of mapped geodesic length over source geodesic
/// length, both normalized by their mesh's sqrt(area).
inline DistortionResult edge_distortion(const VertexMap& pred, const Mesh& src, const Mesh& tar, unsigned threads = 1) {
  if (pred.size() != src.vertices.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "prediction must cover every source vertex");
  }
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || static_cast<std::size_t>(pred[i]) >= tar.vertices.size()) {
      throw Error(ErrorCode::kMissingData, "no valid prediction for source vertex " + std::to_string(i));
    }
  }
  const double src_norm = std::sqrt(src.surface_area());
  const double tar_norm = std::sqrt(tar.surface_area());
  if (!(src_norm > 0.0) || !(tar_norm > 0.0)) throw Error(ErrorCode::kInvalidArgument, "mesh has zero area");
  const EdgeGraph gs(src), gt(tar);

  std::vector<std::vector<std::uint32_t>> upper(src.vertices.size());
  for (const auto& [a, b] : gs.edges()) upper[a].push_back(b);

  struct EdgeSample {
    double ratio_num;  // target distance (raw), kUnreachable if disconnected
    double src_len;    // raw
  };
  std::vector<std::vector<EdgeSample>> samples(src.vertices.size());
  std::vector<double> max_finite(src.vertices.size(), 0.0);
  parallel_for(src.vertices.size(), threads, [&](std::size_t u) {
    if (upper[u].empty()) return;
    const auto ds = gs.distances_until(static_cast<std::uint32_t>(u), upper[u]);
    std::vector<std::uint32_t> wanted;
    for (auto v : upper[u]) wanted.push_back(static_cast<std::uint32_t>(pred[v]));
    const auto dt = gt.distances_until(static_cast<std::uint32_t>(pred[u]), wanted);
    for (double d : dt)
      if (d != kUnreachable) max_finite[u] = std::max(max_finite[u], d);
    for (auto v : upper[u]) samples[u].push_back({dt[static_cast<std::size_t>(pred[v])], ds[v]});
  });
  const double penalty = *std::max_element(max_finite.begin(), max_finite.end()) / tar_norm + 1.0;
  DistortionResult r;
  double sum = 0.0;
  for (const auto& per_vertex : samples)
    for (const auto& s : per_vertex) {
      if (!(s.src_len > 0.0)) continue;
      const double mapped = s.ratio_num == kUnreachable ? penalty : s.ratio_num / tar_norm;
      if (s.ratio_num == kUnreachable) ++r.disconnected;
      sum += mapped / (s.src_len / src_norm);
      ++r.edges;
    }
  if (r.edges > 0) r.ratio = sum / r.edges;
  return r;
}

/// Per-part IoU over vertices; label -1 means unlabeled. Parts absent from
/// both labelings do not appear.
inline IouResult per_part_iou(const std::vector<int>& pred, const std::vector<int>& gt) {
  if (pred.size() != gt.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "label vectors differ in length");
  }
  std::map<int, std::size_t> inter, uni;
  std::set<int> parts;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (pred[i] >= 0) parts.insert(pred[i]);
    if (gt[i] >= 0) parts.insert(gt[i]);
  }
  for (std::size_t i = 0; i < gt.size(); ++i) {
    for (int p : parts) {
      const bool a = pred[i] == p, b = gt[i] == p;
      if (a && b) ++inter[p];
      if (a || b) ++uni[p];
    }
  }
  IouResult r;
  double sum = 0.0;
  for (int p : parts) {
    const double iou = static_cast<double>(inter[p]) / static_cast<double>(uni[p]);
    r.per_part[p] = iou;
    sum += iou;
  }
  if (!parts.empty()) r.mean = sum / parts.size();
  return r;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j{{"tolerance", r.tolerance},
                   {"accuracy_at_tol", r.accuracy_at_tol},
                   {"avg_error", r.avg_error},
                   {"geodesic_error", r.geodesic_error},
                   {"geodesic_error_e3", r.geodesic_error * 1e3},
                   {"n_pairs", r.n_pairs},
                   {"n_disconnected", r.n_disconnected}};
  j["edge_distortion_ratio"] = r.edge_distortion_ratio ? nlohmann::json(*r.edge_distortion_ratio) : nlohmann::json();
  nlohmann::json parts = nlohmann::json::object();
  for (const auto& [p, v] : r.per_part_iou) parts[std::to_string(p)] = v;
  j["per_part_iou"] = parts;
  j["mean_iou"] = r.mean_iou ? nlohmann::json(*r.mean_iou) : nlohmann::json();
  return j;
}

/// Plain-text table: accuracy and error in percent, geodesic error in units
/// of 1e-3, IoU in percent.
inline std::string format_table(const EvalReport& r) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-10s %-10s %-12s %-12s %-10s %-8s\n", "Acc(%)", "Err(%)", "Geo(1e-3)",
                "Distortion", "mIoU(%)", "Pairs");
  os << buf;
  const std::string distortion = r.edge_distortion_ratio ? std::to_string(*r.edge_distortion_ratio) : "-";
  const std::string iou = r.mean_iou ? std::to_string(*r.mean_iou * 100.0) : "-";
  std::snprintf(buf, sizeof buf, "%-10.2f %-10.3f %-12.3f %-12s %-10s %-8zu\n", r.accuracy_at_tol * 100.0,
                r.avg_error * 100.0, r.geodesic_error * 1e3, distortion.c_str(), iou.c_str(), r.n_pairs);
  os << buf;
  for (const auto& [p, v] : r.per_part_iou) {
    std::snprintf(buf, sizeof buf, "  part %-4d IoU %.2f\n", p, v * 100.0);
    os << buf;
  }
  return os.str();
}

}  // namespace hnsr
