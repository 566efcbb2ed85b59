// SPDX-FileCopyrightText: 2026 The HNSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <tuple>
#include <utility>
#include <vector>

#include "hnsr/mesh.hpp"

namespace hnsr {

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

/// Undirected mesh edge graph in CSR form with Euclidean edge lengths.
class EdgeGraph {
 public:
  explicit EdgeGraph(const Mesh& m) : offsets_(m.vertices.size() + 1, 0) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    edges.reserve(m.faces.size() * 3);
    for (const auto& f : m.faces)
      for (int k = 0; k < 3; ++k) {
        const auto a = f[k], b = f[(k + 1) % 3];
        edges.emplace_back(std::min(a, b), std::max(a, b));
      }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    edges_ = edges;
    for (const auto& [a, b] : edges) {
      ++offsets_[a + 1];
      ++offsets_[b + 1];
    }
    for (std::size_t i = 1; i < offsets_.size(); ++i) offsets_[i] += offsets_[i - 1];
    targets_.resize(offsets_.back());
    weights_.resize(offsets_.back());
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (const auto& [a, b] : edges) {
      const double w = (m.vertices[a] - m.vertices[b]).norm();
      targets_[fill[a]] = b;
      weights_[fill[a]++] = w;
      targets_[fill[b]] = a;
      weights_[fill[b]++] = w;
    }
  }

  std::size_t num_vertices() const { return offsets_.size() - 1; }
  const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges() const { return edges_; }

  /// Shortest-path distances from `source` to every vertex.
  std::vector<double> distances_from(std::uint32_t source) const {
    return run(source, {});
  }

  /// Shortest-path distances from `source`, stopping once every vertex in
  /// `wanted` is settled. Unsettled entries stay kUnreachable.
  std::vector<double> distances_until(std::uint32_t source, const std::vector<std::uint32_t>& wanted) const {
    return run(source, wanted);
  }

  /// For every vertex, the geodesically nearest seed, or -1 when no seed is
  /// reachable. Equal distances go to the lower seed index.
  std::vector<std::int64_t> nearest_seed(const std::vector<std::uint32_t>& seeds) const {
    std::vector<double> dist(num_vertices(), kUnreachable);
    std::vector<std::int64_t> owner(num_vertices(), -1);
    std::vector<char> done(num_vertices(), 0);
    using Item = std::tuple<double, std::int64_t, std::uint32_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    for (auto s : seeds) heap.emplace(0.0, static_cast<std::int64_t>(s), s);
    while (!heap.empty()) {
      const auto [d, seed, u] = heap.top();
      heap.pop();
      if (done[u]) continue;
      done[u] = 1;
      dist[u] = d;
      owner[u] = seed;
      for (std::size_t e = offsets_[u]; e < offsets_[u + 1]; ++e) {
        const std::uint32_t v = targets_[e];
        const double nd = d + weights_[e];
        if (!done[v] && nd <= dist[v]) {
          dist[v] = nd;
          heap.emplace(nd, seed, v);
        }
      }
    }
    return owner;
  }

 private:
  std::vector<double> run(std::uint32_t source, const std::vector<std::uint32_t>& wanted) const {
    std::vector<double> dist(num_vertices(), kUnreachable);
    std::vector<char> done(num_vertices(), 0);
    std::vector<char> want(wanted.empty() ? 0 : num_vertices(), 0);
    std::size_t remaining = 0;
    for (auto w : wanted)
      if (!want[w]) {
        want[w] = 1;
        ++remaining;
      }
    using Item = std::pair<double, std::uint32_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist[source] = 0.0;
    heap.emplace(0.0, source);
    while (!heap.empty()) {
      const auto [d, u] = heap.top();
      heap.pop();
      if (done[u]) continue;
      done[u] = 1;
      if (!want.empty() && want[u] && --remaining == 0) break;
      for (std::size_t e = offsets_[u]; e < offsets_[u + 1]; ++e) {
        const std::uint32_t v = targets_[e];
        const double nd = d + weights_[e];
        if (nd < dist[v]) {
          dist[v] = nd;
          heap.emplace(nd, v);
        }
      }
    }
    if (!want.empty()) {
      for (std::size_t i = 0; i < dist.size(); ++i)
        if (!done[i]) dist[i] = kUnreachable;
    }
    return dist;
  }

  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> targets_;
  std::vector<double> weights_;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges_;
};

}  // namespace hnsr
