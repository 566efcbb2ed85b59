// SPDX-FileCopyrightText: 2026 The HNSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "hnsr/error.hpp"
#include "hnsr/grid.hpp"

namespace hnsr {

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Uniform in (0, 1], 53-bit resolution.
inline double unit_open_closed(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

}  // namespace detail

/// Standard normal sample number `index` of stream `seed`. Counter based, so
/// any cell's noise can be replayed without generating the ones before it.
inline double gaussian_noise(std::uint64_t seed, std::uint64_t index) {
  const std::uint64_t key = detail::splitmix64(seed ^ 0x6A09E667F3BCC909ull);
  const std::uint64_t a = detail::splitmix64(key + 2 * index);
  const std::uint64_t b = detail::splitmix64(key + 2 * index + 1);
  const double u1 = detail::unit_open_closed(a);
  const double u2 = detail::unit_open_closed(b);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Cumulative signal level alpha_bar[t-1] for timesteps t = 1..T.
class NoiseSchedule {
 public:
  NoiseSchedule(std::string schedule_id, std::vector<double> alpha_bar)
      : id_(std::move(schedule_id)), alpha_bar_(std::move(alpha_bar)) {
    if (alpha_bar_.empty()) throw Error(ErrorCode::kInvalidArgument, "empty noise schedule");
    for (std::size_t i = 0; i < alpha_bar_.size(); ++i) {
      const double a = alpha_bar_[i];
      if (!(a > 0.0 && a <= 1.0)) {
        throw Error(ErrorCode::kInvalidArgument,
                    "alpha_bar[" + std::to_string(i + 1) + "] outside (0,1]");
      }
      if (i > 0 && a > alpha_bar_[i - 1]) {
        throw Error(ErrorCode::kInvalidArgument, "alpha_bar must be non-increasing in t");
      }
    }
  }

  /// DDPM linear-beta schedule, beta from 1e-4 to 2e-2.
  static NoiseSchedule linear(int total_steps = 1000) {
    if (total_steps < 1) throw Error(ErrorCode::kInvalidArgument, "total_steps must be >= 1");
    std::vector<double> ab(static_cast<std::size_t>(total_steps));
    double prod = 1.0;
    for (int i = 0; i < total_steps; ++i) {
      const double beta =
          total_steps == 1 ? 1e-4 : 1e-4 + (2e-2 - 1e-4) * i / static_cast<double>(total_steps - 1);
      prod *= 1.0 - beta;
      ab[static_cast<std::size_t>(i)] = prod;
    }
    return NoiseSchedule("linear-" + std::to_string(total_steps), std::move(ab));
  }

  const std::string& id() const { return id_; }
  int total_steps() const { return static_cast<int>(alpha_bar_.size()); }

  double alpha_bar(int t) const {
    if (t < 1 || t > total_steps()) {
      throw Error(ErrorCode::kInvalidTimestep,
                  "t=" + std::to_string(t) + " outside [1," + std::to_string(total_steps()) + "]");
    }
    return alpha_bar_[static_cast<std::size_t>(t - 1)];
  }

 private:
  std::string id_;
  std::vector<double> alpha_bar_;
};

/// Forward-diffuse a grid to level `alpha_bar`:
///   S_t = sqrt(alpha_bar) * S + sqrt(1 - alpha_bar) * eps,  eps ~ N(0, I)
/// with eps[i] = gaussian_noise(seed, i) over the flat value array. Values are
/// treated as raw scalars; a perturbed occupancy grid comes back as a
/// single-channel latent grid carrying the original occupancy as its mask.
inline VoxelGrid perturb_with_alpha_bar(const VoxelGrid& s, double alpha_bar, std::uint64_t seed) {
  if (s.kind() == GridKind::kLatentEmbedding) {
    throw Error(ErrorCode::kUnsupportedKind, "perturb expects occupancy or signed-distance input");
  }
  if (!(alpha_bar >= 0.0 && alpha_bar <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "alpha_bar outside [0,1]");
  }
  const double signal = std::sqrt(alpha_bar);
  const double noise = std::sqrt(1.0 - alpha_bar);
  std::vector<float> out(s.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = signal * s.values()[i];
    out[i] = noise == 0.0 ? static_cast<float>(v)
                          : static_cast<float>(v + noise * gaussian_noise(seed, i));
  }
  if (s.kind() == GridKind::kSignedDistance) {
    return VoxelGrid(s.dims(), GridKind::kSignedDistance, std::move(out));
  }
  std::vector<std::uint8_t> mask(s.values().size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = s.values()[i] == 1.0f ? 1 : 0;
  return VoxelGrid(s.dims(), GridKind::kLatentEmbedding, std::move(out), 1, std::move(mask));
}

inline VoxelGrid perturb(const VoxelGrid& s, const NoiseSchedule& sched, int t, std::uint64_t seed) {
  return perturb_with_alpha_bar(s, sched.alpha_bar(t), seed);
}

}  // namespace hnsr
