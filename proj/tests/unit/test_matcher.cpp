// SPDX-FileCopyrightText: 2026 The HNSR Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "hnsr/analytic_backbone.hpp"
#include "hnsr/matcher.hpp"
#include "support/oracles.hpp"
#include "support/test_support.hpp"

using namespace hnsr;

namespace {

PyramidMeta meta2() { return {"manual", 1, 1, {0, 1}, 0, "none"}; }

FeatureGrid filled(const Dims& d, std::uint32_t channels, float v) {
  return FeatureGrid(d, channels, std::vector<float>(d.count() * channels, v));
}

// Two-level analytic config with the given scales.
BackboneConfig two_level(std::uint32_t global_scale, std::uint32_t local_scale) {
  BackboneConfig cfg;
  cfg.levels = {{global_scale, default_global_descriptors()}, {local_scale, default_local_descriptors()}};
  return cfg;
}

struct Problem {
  VoxelGrid occ_src;
  VoxelGrid occ_tar;
  FeaturePyramid src;
  FeaturePyramid tar;
};

Problem random_analytic_problem(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, 2);
  const std::uint32_t sides[] = {4, 8, 8};
  const Dims ds{sides[pick(rng)], sides[pick(rng)], sides[pick(rng)]};
  const Dims dt{sides[pick(rng)], sides[pick(rng)], sides[pick(rng)]};
  const auto cfg = pick(rng) == 0 ? two_level(4, 2) : two_level(2, 1);
  auto os = test::random_occupancy(rng, ds, 0.35);
  auto ot = test::random_occupancy(rng, dt, 0.35);
  auto ps = extract_pyramid(os, cfg);
  auto pt = extract_pyramid(ot, cfg);
  return {std::move(os), std::move(ot), std::move(ps), std::move(pt)};
}

bool same_map(const CorrespondenceMap& a, const CorrespondenceMap& b) {
  if (a.entries.size() != b.entries.size()) return false;
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    const auto& x = a.entries[i];
    const auto& y = b.entries[i];
    if (!(x.source == y.source) || !(x.target == y.target) || x.trace != y.trace || x.region_sizes != y.region_sizes)
      return false;
  }
  return true;
}

}  // namespace

TEST(GlobalInit, SingleCandidateWinsRegardlessOfFeatures) {
  std::mt19937_64 rng(1);
  const Dims base{4, 4, 4};
  const auto src = test::random_pyramid(rng, base, {2, 1}, 3);
  const auto tar = test::random_pyramid(rng, base, {2, 1}, 3);
  const auto occ = VoxelGrid::occupancy_from(base, {{2, 0, 3}, {3, 1, 2}});
  for (std::uint32_t x = 0; x < 4; ++x) {
    const auto m = global_init(src, tar, occ, {x, x, x});
    EXPECT_EQ(m.target, (VoxelCoord{1, 0, 1}));
    EXPECT_EQ(m.region.cells, (std::vector<VoxelCoord>{{2, 0, 3}, {3, 1, 2}}));
  }
}

TEST(GlobalInit, TieGoesToLexicographicallySmaller) {
  const Dims base{4, 4, 4};
  const Dims g{2, 2, 2};
  std::vector<float> gv(g.count() * 2, 0.0f);
  // Cells (1,0,0) and (0,1,0) carry the query feature; (0,0,1) is worse.
  auto set = [&](const VoxelCoord& c, float a, float b) {
    gv[g.index(c) * 2] = a;
    gv[g.index(c) * 2 + 1] = b;
  };
  set({1, 0, 0}, 1, 0);
  set({0, 1, 0}, 2, 0);
  set({0, 0, 1}, 1, 1);
  const FeaturePyramid tar(base, FeatureGrid(g, 2, gv), {filled(base, 1, 1)}, meta2());
  std::vector<float> sv(g.count() * 2, 1.0f);
  sv[0] = 3;
  sv[1] = 0;
  const FeaturePyramid src(base, FeatureGrid(g, 2, sv), {filled(base, 1, 1)}, meta2());
  const auto occ = VoxelGrid::occupancy_from(base, {{2, 0, 0}, {0, 2, 0}, {0, 0, 2}});
  EXPECT_EQ(global_init(src, tar, occ, {0, 0, 0}).target, (VoxelCoord{0, 1, 0}));
}

TEST(GlobalInit, EmptyTarget) {
  std::mt19937_64 rng(2);
  const Dims base{4, 4, 4};
  const auto p = test::random_pyramid(rng, base, {2, 1}, 3);
  try {
    global_init(p, p, VoxelGrid::occupancy_from(base, {}), {0, 0, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyTarget);
  }
}

TEST(GlobalInit, IdentityWithDistinctFeatures) {
  std::mt19937_64 rng(3);
  const Dims base{8, 8, 8};
  const auto p = test::random_pyramid(rng, base, {4, 2, 1}, 5);
  const auto occ = test::random_occupancy(rng, base, 0.3);
  const ScaleMap gm = ScaleMap::with_scale(base, 4);
  for (const auto& v : occupied_cells(occ)) {
    const auto m = global_init(p, p, occ, v);
    EXPECT_EQ(m.target, downsample_coord(v, gm));
    std::vector<VoxelCoord> own;
    for (const auto& c : occupied_cells(occ))
      if (downsample_coord(c, gm) == m.target) own.push_back(c);
    std::sort(own.begin(), own.end());
    EXPECT_EQ(m.region.cells, own);
  }
}

TEST(RefineLevel, RegionInsideOneBlockIsKept) {
  std::mt19937_64 rng(4);
  const Dims base{8, 8, 8};
  const auto p = test::random_pyramid(rng, base, {8, 4, 1}, 3);
  const auto occ = test::random_occupancy(rng, base, 0.5);
  const Matcher m(p, p, occ);
  const MatchRegion prev{0, {{4, 4, 4}, {5, 6, 7}}};
  EXPECT_EQ(m.candidates(prev, 1).coords.size(), 1u);
  const auto r = m.refine_level({0, 0, 0}, prev, 1);
  EXPECT_EQ(r.target, (VoxelCoord{1, 1, 1}));
  EXPECT_EQ(r.region.cells, prev.cells);
}

TEST(RefineLevel, BaseScaleYieldsSingleVoxel) {
  std::mt19937_64 rng(5);
  const Dims base{8, 8, 8};
  const auto p = test::random_pyramid(rng, base, {4, 1}, 3);
  const auto occ = test::random_occupancy(rng, base, 0.6);
  const Matcher m(p, p, occ);
  for (const auto& v : occupied_cells(occ)) {
    const auto g = m.global_init(v);
    EXPECT_EQ(m.refine_level(v, g.region, 1).region.cells.size(), 1u);
  }
}

TEST(RefineLevel, ContractViolations) {
  std::mt19937_64 rng(6);
  const Dims base{4, 4, 4};
  const auto p = test::random_pyramid(rng, base, {2, 1}, 3);
  const auto occ = test::random_occupancy(rng, base, 0.5);
  const Matcher m(p, p, occ);
  for (auto call : {+[](const Matcher& mm) { mm.refine_level({0, 0, 0}, MatchRegion{0, {}}, 1); },
                    +[](const Matcher& mm) { mm.refine_level({0, 0, 0}, MatchRegion{0, {{0, 0, 0}}}, 2); },
                    +[](const Matcher& mm) { mm.refine_level({0, 0, 0}, MatchRegion{0, {{0, 0, 0}}}, 0); }}) {
    try {
      call(m);
      ADD_FAILURE();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kContractViolation);
    }
  }
}

TEST(RefineLevel, IdentityShrinksToOwnBlock) {
  std::mt19937_64 rng(7);
  const Dims base{8, 8, 8};
  const auto p = test::random_pyramid(rng, base, {4, 2, 1}, 4);
  const auto occ = test::random_occupancy(rng, base, 0.4);
  const Matcher m(p, p, occ);
  for (const auto& v : occupied_cells(occ)) {
    auto lm = m.global_init(v);
    for (std::size_t i = 1; i <= 2; ++i) {
      lm = m.refine_level(v, lm.region, i);
      const ScaleMap sm = ScaleMap::with_scale(base, i == 1 ? 2 : 1);
      EXPECT_EQ(lm.target, downsample_coord(v, sm));
      for (const auto& c : lm.region.cells) EXPECT_EQ(downsample_coord(c, sm), lm.target);
    }
  }
}

TEST(Finalize, SingleCellRegion) {
  std::mt19937_64 rng(8);
  const Dims base{4, 4, 4};
  const auto p = test::random_pyramid(rng, base, {4, 2}, 3);
  const auto occ = test::random_occupancy(rng, base, 0.5);
  const Matcher m(p, p, occ);
  EXPECT_EQ(m.finalize({1, {{3, 2, 1}}}, {0, 0, 0}, {1, 1, 0}), (VoxelCoord{3, 2, 1}));
}

TEST(Finalize, EightCellRegionPicksStrictlyBest) {
  std::mt19937_64 rng(9);
  const Dims base{4, 4, 4};
  const auto occ = VoxelGrid::occupancy(base, std::vector<std::uint8_t>(64, 1));
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto src = test::random_pyramid(rng, base, {4, 2}, 4);
    const auto tar = test::random_pyramid(rng, base, {4, 2}, 4);
    const Matcher m(src, tar, occ);
    std::uniform_int_distribution<std::uint32_t> u(0, 3), b(0, 1);
    const VoxelCoord v{u(rng), u(rng), u(rng)};
    const VoxelCoord block{b(rng), b(rng), b(rng)};
    MatchRegion region{1, upsample_block(block, ScaleMap::with_scale(base, 2))};
    std::sort(region.cells.begin(), region.cells.end());
    ASSERT_EQ(region.cells.size(), 8u);

    // Exhaustive distance oracle over the eight cells.
    const auto fs = oracle::trilinear(src.level(1), 2, {v.x, v.y, v.z});
    const std::vector<float> fsf(fs.begin(), fs.end());
    std::vector<std::pair<double, VoxelCoord>> d;
    for (const auto& c : region.cells) {
      const auto ft = oracle::trilinear(tar.level(1), 2, {c.x, c.y, c.z});
      const std::vector<float> ftf(ft.begin(), ft.end());
      d.push_back({oracle::cosine_distance(fsf.data(), ftf.data(), ftf.size()), c});
    }
    std::sort(d.begin(), d.end());
    if (d[1].first - d[0].first < 1e-4) continue;
    ++checked;
    EXPECT_EQ(m.finalize(region, v, block), d[0].second);
    // The full ranking is sorted by distance.
    const auto ranked = m.rank_final(region, v, block);
    for (std::size_t i = 1; i < ranked.size(); ++i) EXPECT_LE(ranked[i - 1].distance, ranked[i].distance + kTieTolerance);
  }
  EXPECT_GT(checked, 150);
}

TEST(Finalize, TiesGoToBlockCenterThenLexicographic) {
  const Dims base{4, 4, 4};
  const FeaturePyramid p(base, filled({1, 1, 1}, 2, 1), {filled({1, 1, 1}, 2, 1)}, meta2());
  const auto occ = VoxelGrid::occupancy(base, std::vector<std::uint8_t>(64, 1));
  const Matcher m(p, p, occ);
  // One 4^3 block: the 8 central cells are equally central; the smallest wins.
  MatchRegion all{1, occupied_cells(occ)};
  EXPECT_EQ(m.finalize(all, {0, 0, 0}, {0, 0, 0}), (VoxelCoord{1, 1, 1}));
  MatchRegion corner{1, {{0, 0, 0}, {0, 0, 1}, {3, 3, 3}, {2, 1, 2}}};
  EXPECT_EQ(m.finalize(corner, {0, 0, 0}, {0, 0, 0}), (VoxelCoord{2, 1, 2}));
}

TEST(MatchDense, OracleEquivalenceOnRandomGrids) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 30; ++trial) {
    const auto pr = random_analytic_problem(rng);
    const auto cm = match_dense(pr.src, pr.tar, pr.occ_src, pr.occ_tar);
    const auto want = oracle::brute_force_match(pr.src, pr.tar, pr.occ_src, pr.occ_tar, kTieTolerance);
    EXPECT_EQ(oracle::first_mismatch(cm, want), "") << "trial " << trial;
  }
}

TEST(MatchDense, OracleEquivalenceWithRandomFeatures) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const Dims base{8, 8, 8};
    const auto os = test::random_occupancy(rng, base, 0.3);
    const auto ot = test::random_occupancy(rng, base, 0.3);
    const auto ps = test::random_pyramid(rng, base, {4, 2}, 3);
    const auto pt = test::random_pyramid(rng, base, {4, 2}, 3);
    const auto cm = match_dense(ps, pt, os, ot);
    EXPECT_EQ(oracle::first_mismatch(cm, oracle::brute_force_match(ps, pt, os, ot, kTieTolerance)), "");
  }
}

TEST(MatchDense, IdentityWithDistinctFeatures) {
  std::mt19937_64 rng(12);
  const Dims base{16, 16, 16};
  const auto occ = test::random_occupancy(rng, base, 0.2);
  const auto p = test::random_pyramid(rng, base, {4, 2, 1}, 6);
  const auto cm = match_dense(p, p, occ, occ);
  for (const auto& e : cm.entries) {
    EXPECT_EQ(e.target, e.source);
    EXPECT_NEAR(e.distance, 0.0, 1e-12);
  }
}

TEST(MatchDense, SingleTargetVoxelAbsorbsEverything) {
  std::mt19937_64 rng(13);
  const Dims base{8, 8, 8};
  const auto occ_src = test::random_occupancy(rng, base, 0.5);
  const auto occ_tar = VoxelGrid::occupancy_from(base, {{5, 2, 7}});
  const auto cfg = default_backbone_config(8);
  const auto cm = match_dense(extract_pyramid(occ_src, cfg), extract_pyramid(occ_tar, cfg), occ_src, occ_tar);
  EXPECT_EQ(cm.entries.size(), occupied_cells(occ_src).size());
  for (const auto& e : cm.entries) EXPECT_EQ(e.target, (VoxelCoord{5, 2, 7}));
}

TEST(MatchDense, NestingAndContainment) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 10; ++trial) {
    const Dims base{16, 16, 16};
    const auto os = test::random_occupancy(rng, base, 0.15);
    const auto ot = test::random_occupancy(rng, base, 0.15);
    const auto cfg = default_backbone_config(16);
    const auto ps = extract_pyramid(os, cfg), pt = extract_pyramid(ot, cfg);
    const auto cm = match_dense(ps, pt, os, ot, {2, true});
    const ScaleMap gm = ScaleMap::with_scale(base, cfg.levels[0].scale);
    for (const auto& e : cm.entries) {
      ASSERT_EQ(e.regions.size(), cfg.levels.size());
      ASSERT_EQ(e.trace.size(), cfg.levels.size());
      for (std::size_t i = 0; i < e.regions.size(); ++i) {
        ASSERT_FALSE(e.regions[i].cells.empty());
        for (const auto& c : e.regions[i].cells) EXPECT_EQ(ot.at(c), 1.0f);
        if (i > 0) {
          EXPECT_TRUE(std::includes(e.regions[i - 1].cells.begin(), e.regions[i - 1].cells.end(),
                                    e.regions[i].cells.begin(), e.regions[i].cells.end()));
        }
      }
      EXPECT_EQ(downsample_coord(e.target, gm), e.trace[0]);
      EXPECT_TRUE(std::binary_search(e.regions.back().cells.begin(), e.regions.back().cells.end(), e.target));
    }
  }
}

TEST(MatchDense, ScaleInvariance) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 10; ++trial) {
    const auto pr = random_analytic_problem(rng);
    const auto base = match_dense(pr.src, pr.tar, pr.occ_src, pr.occ_tar);
    EXPECT_TRUE(same_map(base, match_dense(pr.src.scaled(7.3f), pr.tar, pr.occ_src, pr.occ_tar)));
    EXPECT_TRUE(same_map(base, match_dense(pr.src, pr.tar.scaled(7.3f), pr.occ_src, pr.occ_tar)));
  }
}

TEST(MatchDense, ThreadCountDoesNotMatter) {
  std::mt19937_64 rng(16);
  const Dims base{16, 16, 16};
  const auto os = test::random_occupancy(rng, base, 0.3);
  const auto ot = test::random_occupancy(rng, base, 0.3);
  const auto cfg = default_backbone_config(16);
  const auto ps = extract_pyramid(os, cfg), pt = extract_pyramid(ot, cfg);
  const auto one = match_dense(ps, pt, os, ot, {1, false});
  for (unsigned t : {2u, 3u, 8u}) EXPECT_TRUE(same_map(one, match_dense(ps, pt, os, ot, {t, false})));
}

TEST(MatchDense, ShiftByGlobalStrideIsEquivariant) {
  // Translating both shapes by a multiple of the global stride translates
  // the map, since the features and the lexicographic tie order both move
  // with the shape.
  std::mt19937_64 rng(17);
  const Dims base{16, 16, 16};
  BackboneConfig cfg;
  cfg.levels = {{4, {Descriptor::kOccupancyDensity, Descriptor::kCentroidOffset}},
                {2, {Descriptor::kOccupancyDensity, Descriptor::kCentroidOffset, Descriptor::kDistanceToSurface}},
                {1, {Descriptor::kOccupancyDensity, Descriptor::kDistanceToSurface}}};
  for (int trial = 0; trial < 5; ++trial) {
    std::uniform_int_distribution<std::uint32_t> u(1, 10);
    std::vector<VoxelCoord> s, t, s2, t2;
    for (int i = 0; i < 80; ++i) {
      const VoxelCoord a{u(rng), u(rng), u(rng)}, b{u(rng), u(rng), u(rng)};
      s.push_back(a);
      t.push_back(b);
      s2.push_back({a.x + 4, a.y, a.z + 4});
      t2.push_back({b.x + 4, b.y, b.z + 4});
    }
    const auto os = VoxelGrid::occupancy_from(base, s), ot = VoxelGrid::occupancy_from(base, t);
    const auto os2 = VoxelGrid::occupancy_from(base, s2), ot2 = VoxelGrid::occupancy_from(base, t2);
    const auto a = match_dense(extract_pyramid(os, cfg), extract_pyramid(ot, cfg), os, ot);
    const auto b = match_dense(extract_pyramid(os2, cfg), extract_pyramid(ot2, cfg), os2, ot2);
    ASSERT_EQ(a.entries.size(), b.entries.size());
    for (const auto& e : a.entries) {
      const auto* f = b.find({e.source.x + 4, e.source.y, e.source.z + 4});
      ASSERT_NE(f, nullptr);
      EXPECT_EQ(f->target, (VoxelCoord{e.target.x + 4, e.target.y, e.target.z + 4}));
    }
  }
}

TEST(MatchDense, DifferentResolutions) {
  std::mt19937_64 rng(18);
  const auto os = test::random_occupancy(rng, {8, 8, 8}, 0.4);
  const auto ot = test::random_occupancy(rng, {16, 16, 16}, 0.2);
  const auto ps = extract_pyramid(os, two_level(2, 1));
  const auto pt = extract_pyramid(ot, two_level(4, 2));
  const auto cm = match_dense(ps, pt, os, ot);
  EXPECT_EQ(oracle::first_mismatch(cm, oracle::brute_force_match(ps, pt, os, ot, kTieTolerance)), "");
  for (const auto& e : cm.entries) EXPECT_EQ(ot.at(e.target), 1.0f);
}

TEST(MatchDense, Rejections) {
  std::mt19937_64 rng(19);
  const auto p8 = test::random_pyramid(rng, {8, 8, 8}, {4, 1}, 3);
  const auto p8c = test::random_pyramid(rng, {8, 8, 8}, {4, 1}, 4);
  const auto p3 = test::random_pyramid(rng, {8, 8, 8}, {4, 2, 1}, 3);
  const auto occ = test::random_occupancy(rng, {8, 8, 8}, 0.3);
  const auto occ4 = test::random_occupancy(rng, {4, 4, 4}, 0.3);
  EXPECT_THROW(match_dense(p8, p8c, occ, occ), Error);
  EXPECT_THROW(match_dense(p8, p3, occ, occ), Error);
  EXPECT_THROW(match_dense(p8, p8, occ4, occ), Error);
  EXPECT_THROW(match_dense(p8, p8, occ, occ4), Error);
}

TEST(CorrespondenceJsonl, RoundTrip) {
  std::mt19937_64 rng(20);
  const auto pr = random_analytic_problem(rng);
  const auto cm = match_dense(pr.src, pr.tar, pr.occ_src, pr.occ_tar);
  test::TempDir dir("jsonl");
  write_correspondence_jsonl(cm, dir / "m.jsonl");
  const auto back = read_correspondence_jsonl(dir / "m.jsonl");
  EXPECT_EQ(back.source_dims, cm.source_dims);
  EXPECT_EQ(back.target_dims, cm.target_dims);
  EXPECT_TRUE(same_map(cm, back));
  for (std::size_t i = 0; i < cm.entries.size(); ++i) EXPECT_EQ(back.entries[i].distance, cm.entries[i].distance);
  ASSERT_FALSE(cm.entries.empty());
  EXPECT_NE(back.find(cm.entries.back().source), nullptr);
}

TEST(CorrespondenceJsonl, BadLineReportsLineNumber) {
  test::TempDir dir("jsonl");
  {
    std::ofstream out(dir / "bad.jsonl");
    out << R"({"source_dims":[2,2,2],"target_dims":[2,2,2]})" << '\n'
        << R"({"src":[0,0,0],"tar":[0,0,0],"trace":[[0,0,0]],"distance":0})" << '\n'
        << "{oops\n";
  }
  try {
    read_correspondence_jsonl(dir / "bad.jsonl");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}
