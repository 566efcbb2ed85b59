// SPDX-FileCopyrightText: 2026 The HNSR Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "hnsr/noise.hpp"

using namespace hnsr;

namespace {

struct Moments {
  double mean;
  double var;  // unbiased
};

Moments moments(const std::vector<float>& v) {
  double sum = 0.0;
  for (float x : v) sum += x;
  const double mean = sum / v.size();
  double ss = 0.0;
  for (float x : v) ss += (x - mean) * (x - mean);
  return {mean, ss / (v.size() - 1)};
}

VoxelGrid ones(std::uint32_t n) {
  return VoxelGrid::occupancy(Dims{n, n, n}, std::vector<std::uint8_t>(std::size_t{n} * n * n, 1));
}

}  // namespace

TEST(GaussianNoise, DeterministicAndSeedDependent) {
  EXPECT_EQ(gaussian_noise(3, 17), gaussian_noise(3, 17));
  EXPECT_NE(gaussian_noise(3, 17), gaussian_noise(4, 17));
  EXPECT_NE(gaussian_noise(3, 17), gaussian_noise(3, 18));
}

TEST(GaussianNoise, StandardMoments) {
  const std::size_t n = 200000;
  double s = 0, s2 = 0, s4 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = gaussian_noise(99, i);
    s += x;
    s2 += x * x;
    s4 += x * x * x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 3.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 3.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(s4 / n, 3.0, 0.1);  // kurtosis of a normal
}

TEST(NoiseSchedule, LinearIsMonotoneInUnitInterval) {
  const auto s = NoiseSchedule::linear();
  EXPECT_EQ(s.id(), "linear-1000");
  EXPECT_EQ(s.total_steps(), 1000);
  EXPECT_NEAR(s.alpha_bar(1), 1.0 - 1e-4, 1e-15);
  for (int t = 2; t <= 1000; ++t) {
    EXPECT_LE(s.alpha_bar(t), s.alpha_bar(t - 1));
    EXPECT_GT(s.alpha_bar(t), 0.0);
  }
}

TEST(NoiseSchedule, RejectsBadValues) {
  EXPECT_THROW(NoiseSchedule("x", {}), Error);
  EXPECT_THROW(NoiseSchedule("x", {0.9, 0.95}), Error);
  EXPECT_THROW(NoiseSchedule("x", {1.5}), Error);
  EXPECT_THROW(NoiseSchedule("x", {0.0}), Error);
}

TEST(Perturb, TimestepOutOfRange) {
  const auto s = NoiseSchedule::linear(10);
  for (int t : {0, 11, -3}) {
    try {
      perturb(ones(2), s, t, 0);
      FAIL() << t;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidTimestep);
    }
  }
}

TEST(Perturb, AlphaBarOneIsIdentity) {
  const VoxelGrid sdf({2, 2, 1}, GridKind::kSignedDistance, {-0.3f, 0.1f, 0.7f, 0.0f});
  const auto out = perturb(sdf, NoiseSchedule("flat", {1.0, 1.0}), 2, 5);
  EXPECT_EQ(out.values(), sdf.values());
  EXPECT_EQ(out.kind(), GridKind::kSignedDistance);
}

TEST(Perturb, AlphaBarZeroIsPureNoise) {
  const auto out = perturb_with_alpha_bar(ones(32), 0.0, 1);
  const auto m = moments(out.values());
  const double n = static_cast<double>(out.values().size());
  EXPECT_NEAR(m.mean, 0.0, 3.0 / std::sqrt(n));
  EXPECT_NEAR(m.var, 1.0, 3.0 * std::sqrt(2.0 / (n - 1)));
}

TEST(Perturb, AffineReplay) {
  const double ab = 0.6;
  const VoxelGrid sdf({3, 2, 2}, GridKind::kSignedDistance, {0, 1, -1, 0.5f, 0.25f, 2, 3, 4, -2, 0.1f, 0.2f, 0.3f});
  const auto out = perturb_with_alpha_bar(sdf, ab, 42);
  for (std::size_t i = 0; i < out.values().size(); ++i) {
    const double expect = std::sqrt(ab) * sdf.values()[i] + std::sqrt(1 - ab) * gaussian_noise(42, i);
    EXPECT_EQ(out.values()[i], static_cast<float>(expect));
  }
}

TEST(Perturb, OccupancyBecomesMaskedLatent) {
  const auto g = VoxelGrid::occupancy_from({2, 1, 1}, {{1, 0, 0}});
  const auto out = perturb_with_alpha_bar(g, 0.5, 3);
  EXPECT_EQ(out.kind(), GridKind::kLatentEmbedding);
  ASSERT_TRUE(out.mask().has_value());
  EXPECT_EQ(*out.mask(), (std::vector<std::uint8_t>{0, 1}));
  EXPECT_EQ(occupied_cells(out).size(), 1u);
}

TEST(Perturb, RejectsLatentInput) {
  const VoxelGrid latent({1, 1, 1}, GridKind::kLatentEmbedding, {1.0f});
  EXPECT_THROW(perturb_with_alpha_bar(latent, 0.5, 0), Error);
}

TEST(Perturb, DeterministicForSeed) {
  const auto a = perturb_with_alpha_bar(ones(8), 0.3, 77);
  const auto b = perturb_with_alpha_bar(ones(8), 0.3, 77);
  const auto c = perturb_with_alpha_bar(ones(8), 0.3, 78);
  EXPECT_EQ(a.values(), b.values());
  EXPECT_NE(a.values(), c.values());
}
