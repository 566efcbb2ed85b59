// SPDX-FileCopyrightText: 2026 The HNSR Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "hnsr/metrics.hpp"

using namespace hnsr;

namespace {

Mesh cube(double side) {
  Mesh m;
  for (int i = 0; i < 8; ++i) m.vertices.emplace_back(side * (i & 1), side * ((i >> 1) & 1), side * ((i >> 2) & 1));
  const int quads[6][4] = {{0, 1, 3, 2}, {4, 6, 7, 5}, {0, 4, 5, 1}, {2, 3, 7, 6}, {0, 2, 6, 4}, {1, 5, 7, 3}};
  for (const auto& q : quads) {
    m.faces.push_back({std::uint32_t(q[0]), std::uint32_t(q[1]), std::uint32_t(q[2])});
    m.faces.push_back({std::uint32_t(q[0]), std::uint32_t(q[2]), std::uint32_t(q[3])});
  }
  return m;
}

// Octahedron with unit edges: vertices at distance 1/sqrt(2) on each axis.
Mesh octahedron() {
  Mesh m;
  const double a = 1.0 / std::sqrt(2.0);
  m.vertices = {{a, 0, 0}, {-a, 0, 0}, {0, a, 0}, {0, -a, 0}, {0, 0, a}, {0, 0, -a}};
  m.faces = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4}, {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
  return m;
}

VertexMap identity(std::size_t n) {
  VertexMap v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<std::int32_t>(i);
  return v;
}

// All-pairs shortest paths over mesh edges by Floyd-Warshall.
std::vector<std::vector<double>> floyd(const Mesh& m) {
  const std::size_t n = m.vertices.size();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, std::numeric_limits<double>::infinity()));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0;
  for (const auto& f : m.faces)
    for (int k = 0; k < 3; ++k) {
      const auto a = f[k], b = f[(k + 1) % 3];
      const double w = (m.vertices[a] - m.vertices[b]).norm();
      d[a][b] = std::min(d[a][b], w);
      d[b][a] = std::min(d[b][a], w);
    }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  return d;
}

Mesh random_grid_mesh(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> jitter(-0.3, 0.3);
  Mesh m;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) m.vertices.emplace_back(x + jitter(rng), y + jitter(rng), jitter(rng));
  for (int y = 0; y + 1 < n; ++y)
    for (int x = 0; x + 1 < n; ++x) {
      const auto a = std::uint32_t(y * n + x), b = a + 1, c = a + std::uint32_t(n), d = c + 1;
      m.faces.push_back({a, b, d});
      m.faces.push_back({a, d, c});
    }
  return m;
}

}  // namespace

TEST(Accuracy, PerfectAndHopeless) {
  const Mesh m = cube(1);
  const auto id = identity(8);
  const auto r = accuracy_and_error(id, id, m);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.avg_error, 0.0);
  VertexMap far{7, 6, 5, 4, 3, 2, 1, 0};
  EXPECT_EQ(accuracy_and_error(far, id, m).accuracy, 0.0);
}

TEST(Accuracy, FourVertexToyCase) {
  // Target diagonal sqrt(3); vertex 4 sits 5% of the diagonal from vertex 0.
  Mesh tar;
  tar.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0.05 * std::sqrt(3.0), 0, 0}};
  const VertexMap gt{0, 1, 2, 3};
  const VertexMap pred{4, 1, 2, 3};
  const auto r = accuracy_and_error(pred, gt, tar);
  EXPECT_NEAR(r.accuracy, 0.75, 1e-9);
  EXPECT_NEAR(r.avg_error, 0.0125, 1e-9);
  EXPECT_NEAR(r.errors[0], 0.05, 1e-9);
}

TEST(Accuracy, MissingOrMismatchedGroundTruth) {
  const Mesh m = cube(1);
  try {
    accuracy_and_error(identity(8), VertexMap{0, 1, 2, 3, 4, 5, 6, -1}, m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingData);
  }
  try {
    accuracy_and_error(identity(8), identity(7), m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(Accuracy, MonotoneInTolerance) {
  std::mt19937_64 rng(1);
  const Mesh m = random_grid_mesh(rng, 8);
  std::uniform_int_distribution<std::int32_t> u(0, 63);
  VertexMap pred(64), gt(64);
  for (auto& p : pred) p = u(rng);
  for (auto& g : gt) g = u(rng);
  double prev = -1;
  for (double tol : {0.0, 0.01, 0.02, 0.05, 0.1, 0.5, 2.0}) {
    const double a = accuracy_and_error(pred, gt, m, tol).accuracy;
    EXPECT_GE(a, prev);
    prev = a;
  }
  EXPECT_EQ(prev, 1.0);
}

TEST(Geodesic, ZeroWhenExact) {
  const Mesh m = octahedron();
  EXPECT_EQ(geodesic_error(identity(6), identity(6), m).mean, 0.0);
}

TEST(Geodesic, OctahedronAdjacentAndOpposite) {
  const Mesh m = octahedron();
  const double norm = std::sqrt(2.0 * std::sqrt(3.0));  // area of 8 unit triangles
  const VertexMap gt = identity(6);
  const VertexMap adjacent{2, 4, 0, 5, 1, 3};
  EXPECT_NEAR(geodesic_error(adjacent, gt, m).mean, 1.0 / norm, 1e-9);
  const VertexMap opposite{1, 0, 3, 2, 5, 4};
  EXPECT_NEAR(geodesic_error(opposite, gt, m).mean, 2.0 / norm, 1e-9);
  const VertexMap mixed{0, 4, 2, 2, 4, 5};
  EXPECT_NEAR(geodesic_error(mixed, gt, m).mean, (0 + 1 + 0 + 2 + 0 + 0) / 6.0 / norm, 1e-9);
}

TEST(Geodesic, MatchesFloydWarshall) {
  std::mt19937_64 rng(2);
  const Mesh m = random_grid_mesh(rng, 7);
  const auto d = floyd(m);
  std::uniform_int_distribution<std::int32_t> u(0, 48);
  VertexMap pred(100), gt(100);
  double want = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    pred[i] = u(rng);
    gt[i] = u(rng);
    want += d[gt[i]][pred[i]];
  }
  want /= 100 * std::sqrt(m.surface_area());
  EXPECT_NEAR(geodesic_error(pred, gt, m).mean, want, 1e-12);
  EXPECT_NEAR(geodesic_error(pred, gt, m, 4).mean, want, 1e-12);
  // Swapping prediction and ground truth leaves the mean unchanged.
  EXPECT_NEAR(geodesic_error(gt, pred, m).mean, want, 1e-12);
}

TEST(Geodesic, DisconnectedPairsArePenalized) {
  Mesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {5, 0, 0}, {6, 0, 0}, {5, 1, 0}};
  m.faces = {{0, 1, 2}, {3, 4, 5}};
  const double norm = std::sqrt(m.surface_area());
  const auto r = geodesic_error(VertexMap{3, 1}, VertexMap{0, 0}, m);
  EXPECT_EQ(r.disconnected, 1u);
  const double finite_max = 1.0;  // d(0,1) = d(0,2) = 1
  EXPECT_NEAR(r.mean, ((finite_max / norm + 1.0) + 1.0 / norm) / 2.0, 1e-12);
  EXPECT_GT(r.mean, geodesic_error(VertexMap{2, 1}, VertexMap{0, 0}, m).mean);
}

TEST(Distortion, IdentityIsOne) {
  const Mesh m = cube(1);
  const auto r = edge_distortion(identity(8), m, m);
  EXPECT_NEAR(r.ratio, 1.0, 1e-12);
  EXPECT_EQ(r.edges, 18u);
  EXPECT_EQ(r.disconnected, 0u);
}

TEST(Distortion, CollapseIsZero) {
  const Mesh m = cube(1);
  EXPECT_EQ(edge_distortion(VertexMap(8, 3), m, m).ratio, 0.0);
}

TEST(Distortion, ScaledCubeCancels) {
  const Mesh src = cube(1);
  const Mesh tar = cube(2);
  EXPECT_NEAR(edge_distortion(identity(8), src, tar).ratio, 1.0, 1e-9);
  EXPECT_NEAR(edge_distortion(identity(8), tar, src, 3).ratio, 1.0, 1e-9);
}

TEST(Distortion, MatchesFloydWarshall) {
  std::mt19937_64 rng(3);
  const Mesh src = random_grid_mesh(rng, 5);
  const Mesh tar = random_grid_mesh(rng, 6);
  const auto ds = floyd(src), dt = floyd(tar);
  std::uniform_int_distribution<std::int32_t> u(0, 35);
  VertexMap pred(25);
  for (auto& p : pred) p = u(rng);
  std::set<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (const auto& f : src.faces)
    for (int k = 0; k < 3; ++k) edges.insert({std::min(f[k], f[(k + 1) % 3]), std::max(f[k], f[(k + 1) % 3])});
  const double ns = std::sqrt(src.surface_area()), nt = std::sqrt(tar.surface_area());
  double sum = 0;
  for (const auto& [a, b] : edges) sum += (dt[pred[a]][pred[b]] / nt) / (ds[a][b] / ns);
  EXPECT_NEAR(edge_distortion(pred, src, tar).ratio, sum / edges.size(), 1e-12);
}

TEST(Iou, Examples) {
  const std::vector<int> gt{0, 0, 1, 1, 2};
  const auto same = per_part_iou(gt, gt);
  for (const auto& [p, v] : same.per_part) EXPECT_EQ(v, 1.0) << p;
  EXPECT_EQ(same.mean, 1.0);

  const auto disjoint = per_part_iou({1, 1, 0, 0, 2}, gt);
  EXPECT_EQ(disjoint.per_part.at(0), 0.0);
  EXPECT_EQ(disjoint.per_part.at(1), 0.0);
  EXPECT_EQ(disjoint.per_part.at(2), 1.0);
}

TEST(Iou, HalfOverlap) {
  std::vector<int> gt(100, 0), pred(100, -1);
  for (int i = 0; i < 50; ++i) pred[i] = 0;
  const auto r = per_part_iou(pred, gt);
  EXPECT_DOUBLE_EQ(r.per_part.at(0), 0.5);
  EXPECT_THROW(per_part_iou({0}, {0, 1}), Error);
}

TEST(Report, JsonAndTable) {
  EvalReport r;
  r.accuracy_at_tol = 0.75;
  r.avg_error = 0.0125;
  r.geodesic_error = 0.006;
  r.edge_distortion_ratio = 1.11;
  r.per_part_iou = {{0, 1.0}, {3, 0.5}};
  r.mean_iou = 0.75;
  r.n_pairs = 4;
  const auto j = to_json(r);
  EXPECT_EQ(j["accuracy_at_tol"], 0.75);
  EXPECT_NEAR(j["geodesic_error_e3"].get<double>(), 6.0, 1e-12);
  EXPECT_EQ(j["per_part_iou"]["3"], 0.5);
  const auto t = format_table(r);
  EXPECT_NE(t.find("75.00"), std::string::npos);
  EXPECT_NE(t.find("part 3"), std::string::npos);
  EvalReport empty;
  EXPECT_TRUE(to_json(empty)["edge_distortion_ratio"].is_null());
}
