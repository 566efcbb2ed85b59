// SPDX-FileCopyrightText: 2026 The HNSR Authors
// SPDX-License-Identifier: Apache-2.0

// Binary interchange for feature pyramids (.hnsr) and voxel grids (.hgrid).
// Everything is little-endian regardless of host.
//
// .hnsr layout:
//   char[4]  "HNSR"
//   u32      version (1)
//   u32[3]   base dims
//   u32      level count (1 + N)
//   per level:
//     i32    layer id
//     u32[3] dims
//     u32    channels C
//     f32    payload[nx*ny*nz*C], cell-major, x fastest, channels contiguous
//   u32      meta length in bytes
//   u8       meta[length], UTF-8 JSON

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hnsr/error.hpp"
#include "hnsr/features.hpp"
#include "hnsr/grid.hpp"

namespace hnsr {

inline constexpr char kPyramidMagic[4] = {'H', 'N', 'S', 'R'};
inline constexpr char kGridMagic[4] = {'H', 'G', 'R', 'D'};
inline constexpr std::uint32_t kPyramidVersion = 1;
inline constexpr std::uint32_t kGridVersion = 1;

namespace detail {

class ByteWriter {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  void need(std::size_t n, const std::string& field) const {
    if (data_.size() - pos_ < n) {
      throw FormatError(ErrorCode::kTruncated, field,
                        "need " + std::to_string(n) + " bytes at offset " + std::to_string(pos_) +
                            ", have " + std::to_string(data_.size() - pos_));
    }
  }
  std::uint32_t u32(const std::string& field) {
    need(4, field);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{data_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }
  std::int32_t i32(const std::string& field) { return static_cast<std::int32_t>(u32(field)); }
  std::uint8_t u8(const std::string& field) {
    need(1, field);
    return data_[pos_++];
  }
  float f32(const std::string& field) { return std::bit_cast<float>(u32(field)); }
  std::span<const std::uint8_t> take(std::size_t n, const std::string& field) {
    need(n, field);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "short write to " + path.string());
}

inline constexpr std::uint32_t kMaxAxis = 1u << 16;

/// Fails with kTruncated unless `cells * channels` floats remain.
inline void need_floats(const ByteReader& r, std::size_t cells, std::uint32_t channels, const std::string& field) {
  if (cells > r.remaining() / 4 / channels) {
    throw FormatError(ErrorCode::kTruncated, field,
                      "payload of " + std::to_string(cells) + " cells x " + std::to_string(channels) +
                          " channels exceeds the " + std::to_string(r.remaining()) + " remaining bytes");
  }
}

inline Dims read_dims(ByteReader& r, const std::string& field) {
  Dims d;
  d.nx = r.u32(field + ".nx");
  d.ny = r.u32(field + ".ny");
  d.nz = r.u32(field + ".nz");
  if (!d.positive()) {
    throw FormatError(ErrorCode::kInvariantViolation, field, "dims must be positive, got " + to_string(d));
  }
  if (d.nx > kMaxAxis || d.ny > kMaxAxis || d.nz > kMaxAxis) {
    throw FormatError(ErrorCode::kInvariantViolation, field, "axis longer than " + std::to_string(kMaxAxis));
  }
  return d;
}

inline void check_magic(ByteReader& r, const char (&magic)[4], const char* field) {
  auto m = r.take(4, field);
  if (std::memcmp(m.data(), magic, 4) != 0) {
    throw FormatError(ErrorCode::kBadMagic, field,
                      std::string("expected '") + std::string(magic, 4) + "'");
  }
}

}  // namespace detail

inline nlohmann::json meta_to_json(const PyramidMeta& m) {
  return {{"backbone_id", m.backbone_id}, {"timestep", m.timestep},
          {"total_steps", m.total_steps}, {"layer_ids", m.layer_ids},
          {"noise_seed", m.noise_seed},   {"schedule_id", m.schedule_id}};
}

inline PyramidMeta meta_from_json(const nlohmann::json& j) {
  PyramidMeta m;
  auto get = [&](const char* key, auto& dst) {
    if (!j.contains(key)) {
      throw FormatError(ErrorCode::kInvariantViolation, std::string("meta.") + key, "missing key");
    }
    try {
      j.at(key).get_to(dst);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(ErrorCode::kInvariantViolation, std::string("meta.") + key, e.what());
    }
  };
  get("backbone_id", m.backbone_id);
  get("timestep", m.timestep);
  get("total_steps", m.total_steps);
  get("layer_ids", m.layer_ids);
  get("noise_seed", m.noise_seed);
  get("schedule_id", m.schedule_id);
  return m;
}

inline std::vector<std::uint8_t> encode_pyramid(const FeaturePyramid& p) {
  detail::ByteWriter w;
  w.bytes(kPyramidMagic, 4);
  w.u32(kPyramidVersion);
  w.u32(p.base_dims().nx);
  w.u32(p.base_dims().ny);
  w.u32(p.base_dims().nz);
  w.u32(static_cast<std::uint32_t>(p.num_levels()));
  for (std::size_t i = 0; i < p.num_levels(); ++i) {
    const FeatureGrid& g = p.level(i);
    w.i32(p.meta().layer_ids[i]);
    w.u32(g.dims().nx);
    w.u32(g.dims().ny);
    w.u32(g.dims().nz);
    w.u32(g.channels());
    for (float v : g.values()) w.f32(v);
  }
  const std::string meta = meta_to_json(p.meta()).dump();
  w.u32(static_cast<std::uint32_t>(meta.size()));
  w.bytes(meta.data(), meta.size());
  return w.take();
}

inline FeaturePyramid decode_pyramid(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  detail::check_magic(r, kPyramidMagic, "magic");
  const std::uint32_t version = r.u32("version");
  if (version != kPyramidVersion) {
    throw FormatError(ErrorCode::kVersionMismatch, "version",
                      "file version " + std::to_string(version) + ", reader supports " +
                          std::to_string(kPyramidVersion));
  }
  const Dims base = detail::read_dims(r, "base_dims");
  const std::uint32_t count = r.u32("level_count");
  if (count < 2) {
    throw FormatError(ErrorCode::kInvariantViolation, "level_count",
                      "need a global and at least one local level, got " + std::to_string(count));
  }
  std::vector<FeatureGrid> levels;
  std::vector<int> layer_ids;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string f = "levels[" + std::to_string(i) + "]";
    layer_ids.push_back(r.i32(f + ".layer_id"));
    const Dims d = detail::read_dims(r, f + ".dims");
    const std::uint32_t c = r.u32(f + ".channels");
    if (c == 0) throw FormatError(ErrorCode::kInvariantViolation, f + ".channels", "must be >= 1");
    if (base.nx % d.nx || base.ny % d.ny || base.nz % d.nz ||
        base.nx / d.nx != base.ny / d.ny || base.nx / d.nx != base.nz / d.nz) {
      throw FormatError(ErrorCode::kScaleMismatch, f + ".dims",
                        to_string(d) + " does not divide base " + to_string(base) +
                            " by one integer scale");
    }
    detail::need_floats(r, d.count(), c, f + ".payload");
    const std::size_t n = d.count() * c;
    std::vector<float> values(n);
    for (auto& v : values) v = r.f32(f + ".payload");
    try {
      levels.emplace_back(d, c, std::move(values));
    } catch (const Error& e) {
      throw FormatError(e.code(), f + ".payload", e.what());
    }
  }
  const std::uint32_t meta_len = r.u32("meta_length");
  auto meta_bytes = r.take(meta_len, "meta");
  if (r.remaining() != 0) {
    throw FormatError(ErrorCode::kInvariantViolation, "trailer",
                      std::to_string(r.remaining()) + " unexpected bytes after meta");
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(meta_bytes.begin(), meta_bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(ErrorCode::kInvariantViolation, "meta", e.what());
  }
  PyramidMeta meta = meta_from_json(j);
  if (meta.layer_ids != layer_ids) {
    throw FormatError(ErrorCode::kInvariantViolation, "meta.layer_ids",
                      "does not match the per-level layer ids");
  }
  FeatureGrid global = std::move(levels.front());
  levels.erase(levels.begin());
  try {
    return FeaturePyramid(base, std::move(global), std::move(levels), std::move(meta));
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw FormatError(e.code(), "levels", e.what());
  }
}

inline void write_pyramid(const FeaturePyramid& p, const std::filesystem::path& path) {
  detail::write_file_bytes(path, encode_pyramid(p));
}

inline FeaturePyramid read_pyramid(const std::filesystem::path& path) {
  return decode_pyramid(detail::read_file_bytes(path));
}

// .hgrid: "HGRD", u32 version, u32 kind, u32[3] dims, u32 channels,
// u8 has_mask, f32 payload, then dims.count() mask bytes when has_mask.
inline std::vector<std::uint8_t> encode_grid(const VoxelGrid& g) {
  detail::ByteWriter w;
  w.bytes(kGridMagic, 4);
  w.u32(kGridVersion);
  w.u32(static_cast<std::uint32_t>(g.kind()));
  w.u32(g.dims().nx);
  w.u32(g.dims().ny);
  w.u32(g.dims().nz);
  w.u32(g.channels());
  w.u8(g.mask() ? 1 : 0);
  for (float v : g.values()) w.f32(v);
  if (g.mask()) w.bytes(g.mask()->data(), g.mask()->size());
  return w.take();
}

inline VoxelGrid decode_grid(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  detail::check_magic(r, kGridMagic, "magic");
  const std::uint32_t version = r.u32("version");
  if (version != kGridVersion) {
    throw FormatError(ErrorCode::kVersionMismatch, "version", "unsupported grid version " + std::to_string(version));
  }
  const std::uint32_t kind = r.u32("kind");
  if (kind > 2) throw FormatError(ErrorCode::kInvariantViolation, "kind", "unknown grid kind");
  const Dims d = detail::read_dims(r, "dims");
  const std::uint32_t c = r.u32("channels");
  if (c == 0) throw FormatError(ErrorCode::kInvariantViolation, "channels", "must be >= 1");
  const bool has_mask = r.u8("has_mask") != 0;
  detail::need_floats(r, d.count(), c, "payload");
  std::vector<float> values(d.count() * c);
  for (auto& v : values) v = r.f32("payload");
  std::optional<std::vector<std::uint8_t>> mask;
  if (has_mask) {
    auto m = r.take(d.count(), "mask");
    mask.emplace(m.begin(), m.end());
  }
  if (r.remaining() != 0) throw FormatError(ErrorCode::kInvariantViolation, "trailer", "unexpected bytes");
  try {
    return VoxelGrid(d, static_cast<GridKind>(kind), std::move(values), c, std::move(mask));
  } catch (const Error& e) {
    throw FormatError(e.code(), "payload", e.what());
  }
}

inline void write_grid(const VoxelGrid& g, const std::filesystem::path& path) {
  detail::write_file_bytes(path, encode_grid(g));
}

inline VoxelGrid read_grid(const std::filesystem::path& path) {
  return decode_grid(detail::read_file_bytes(path));
}

}  // namespace hnsr
