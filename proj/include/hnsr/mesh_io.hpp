// SPDX-FileCopyrightText: 2026 The HNSR Authors
// SPDX-License-Identifier: Apache-2.0

// OBJ (+MTL for parts and textures) and PLY (ascii / binary little-endian,
// optional per-vertex `label`) readers and writers, plus plain-text
// per-vertex integer files for correspondences and labels.

#pragma once

#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hnsr/error.hpp"
#include "hnsr/mesh.hpp"

namespace hnsr {

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline double parse_double(std::string_view tok, std::size_t line) {
  // std::from_chars for double is not available on every supported libstdc++.
  std::string s(tok);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw ParseError(line, "expected a number, got '" + s + "'");
  return v;
}

inline long long parse_int(std::string_view tok, std::size_t line) {
  long long v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) {
    throw ParseError(line, "expected an integer, got '" + std::string(tok) + "'");
  }
  return v;
}

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct MtlEntry {
  std::optional<std::filesystem::path> map_kd;
  std::array<float, 3> kd{0.8f, 0.8f, 0.8f};
};

inline std::map<std::string, MtlEntry> read_mtl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open material library " + path.string());
  std::map<std::string, MtlEntry> out;
  std::string line, current;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    if (tok[0] == "newmtl") {
      if (tok.size() < 2) throw ParseError(lineno, "newmtl without a name");
      current = std::string(tok[1]);
      out[current];
    } else if (tok[0] == "map_Kd") {
      if (current.empty()) throw ParseError(lineno, "map_Kd before newmtl");
      if (tok.size() < 2) throw ParseError(lineno, "map_Kd without a path");
      out[current].map_kd = std::filesystem::path(std::string(tok.back()));
    } else if (tok[0] == "Kd") {
      if (current.empty()) throw ParseError(lineno, "Kd before newmtl");
      if (tok.size() < 4) throw ParseError(lineno, "Kd needs three components");
      for (int i = 0; i < 3; ++i) out[current].kd[i] = static_cast<float>(parse_double(tok[i + 1], lineno));
    }
  }
  return out;
}

}  // namespace detail

/// Reads an OBJ file. Polygons are fan-triangulated; each distinct `usemtl`
/// material becomes a part, with its diffuse map and color taken from the
/// referenced MTL library when present.
inline Mesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  Mesh m;
  std::map<std::string, detail::MtlEntry> materials;
  std::map<std::string, int> part_of;
  int current_part = -1;
  bool any_uv_ref = false;
  std::string line;
  std::size_t lineno = 0;

  auto resolve = [&](long long idx, std::size_t count, const char* what) -> std::int64_t {
    if (idx > 0 && static_cast<std::size_t>(idx) <= count) return idx - 1;
    if (idx < 0 && static_cast<std::size_t>(-idx) <= count) return static_cast<std::int64_t>(count) + idx;
    throw ParseError(lineno, std::string(what) + " index " + std::to_string(idx) + " out of range");
  };

  while (std::getline(in, line)) {
    ++lineno;
    const auto tok = detail::split_ws(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    if (tok[0] == "v") {
      if (tok.size() < 4) throw ParseError(lineno, "vertex needs three coordinates");
      m.vertices.emplace_back(detail::parse_double(tok[1], lineno), detail::parse_double(tok[2], lineno),
                              detail::parse_double(tok[3], lineno));
    } else if (tok[0] == "vt") {
      if (tok.size() < 3) throw ParseError(lineno, "texture coordinate needs two components");
      m.uvs.emplace_back(detail::parse_double(tok[1], lineno), detail::parse_double(tok[2], lineno));
    } else if (tok[0] == "f") {
      if (tok.size() < 4) throw ParseError(lineno, "face needs at least three vertices");
      std::vector<std::uint32_t> vi;
      std::vector<std::int32_t> ti;
      for (std::size_t k = 1; k < tok.size(); ++k) {
        const std::string_view t = tok[k];
        const auto s1 = t.find('/');
        vi.push_back(static_cast<std::uint32_t>(
            resolve(detail::parse_int(t.substr(0, s1), lineno), m.vertices.size(), "vertex")));
        std::int32_t uv = -1;
        if (s1 != std::string_view::npos) {
          const auto rest = t.substr(s1 + 1);
          const auto s2 = rest.find('/');
          const auto uvtok = rest.substr(0, s2);
          if (!uvtok.empty()) {
            uv = static_cast<std::int32_t>(resolve(detail::parse_int(uvtok, lineno), m.uvs.size(), "uv"));
            any_uv_ref = true;
          }
        }
        ti.push_back(uv);
      }
      for (std::size_t k = 1; k + 1 < vi.size(); ++k) {
        const Face f{vi[0], vi[k], vi[k + 1]};
        if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) throw ParseError(lineno, "degenerate face");
        m.faces.push_back(f);
        m.face_uvs.push_back({ti[0], ti[k], ti[k + 1]});
        m.face_part.push_back(current_part);
      }
    } else if (tok[0] == "mtllib") {
      if (tok.size() < 2) throw ParseError(lineno, "mtllib without a file");
      const auto lib = path.parent_path() / std::string(tok[1]);
      if (std::filesystem::exists(lib)) {
        for (auto& [k, v] : detail::read_mtl(lib)) materials[k] = v;
      }
    } else if (tok[0] == "usemtl") {
      if (tok.size() < 2) throw ParseError(lineno, "usemtl without a name");
      const std::string name(tok[1]);
      auto [it, inserted] = part_of.try_emplace(name, static_cast<int>(m.parts.size()));
      if (inserted) {
        Part p;
        p.name = name;
        if (auto mt = materials.find(name); mt != materials.end()) {
          p.color = mt->second.kd;
          if (mt->second.map_kd) {
            const auto& tex = *mt->second.map_kd;
            p.texture = tex.is_absolute() ? tex : path.parent_path() / tex;
          }
        }
        m.parts.push_back(std::move(p));
      }
      current_part = it->second;
    }
  }
  if (m.parts.empty()) {
    m.face_part.clear();
  } else {
    // Faces before the first usemtl form their own part.
    bool orphan = false;
    for (int& p : m.face_part) orphan |= p < 0;
    if (orphan) {
      const int idx = static_cast<int>(m.parts.size());
      m.parts.push_back(Part{"default", std::nullopt, {0.8f, 0.8f, 0.8f}});
      for (int& p : m.face_part)
        if (p < 0) p = idx;
    }
  }
  if (!any_uv_ref) m.face_uvs.clear();
  m.validate();
  return m;
}

/// Writes OBJ, plus `<stem>.mtl` next to it when the mesh has parts. Texture
/// paths are written as given (callers copy images beside the output).
inline void save_obj(const Mesh& m, const std::filesystem::path& path) {
  m.validate();
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  const std::string mtl_name = path.stem().string() + ".mtl";
  if (m.has_parts()) {
    out << "mtllib " << mtl_name << '\n';
    std::ofstream mtl(path.parent_path() / mtl_name);
    if (!mtl) throw Error(ErrorCode::kIo, "cannot write material library for " + path.string());
    for (const auto& p : m.parts) {
      mtl << "newmtl " << p.name << '\n';
      mtl << "Kd " << p.color[0] << ' ' << p.color[1] << ' ' << p.color[2] << '\n';
      if (p.texture) mtl << "map_Kd " << p.texture->generic_string() << '\n';
    }
  }
  for (const auto& v : m.vertices) {
    out << "v " << detail::fmt_double(v.x()) << ' ' << detail::fmt_double(v.y()) << ' '
        << detail::fmt_double(v.z()) << '\n';
  }
  for (const auto& t : m.uvs) out << "vt " << detail::fmt_double(t.x()) << ' ' << detail::fmt_double(t.y()) << '\n';
  int current = -1;
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    if (m.has_parts() && m.face_part[f] != current) {
      current = m.face_part[f];
      out << "usemtl " << m.parts[static_cast<std::size_t>(current)].name << '\n';
    }
    out << 'f';
    for (int k = 0; k < 3; ++k) {
      out << ' ' << m.faces[f][k] + 1;
      if (m.has_uvs() && m.face_uvs[f][k] >= 0) out << '/' << m.face_uvs[f][k] + 1;
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "short write to " + path.string());
}

namespace detail {

enum class PlyType { kI8, kU8, kI16, kU16, kI32, kU32, kF32, kF64 };

inline PlyType ply_type(std::string_view s, std::size_t line) {
  if (s == "char" || s == "int8") return PlyType::kI8;
  if (s == "uchar" || s == "uint8") return PlyType::kU8;
  if (s == "short" || s == "int16") return PlyType::kI16;
  if (s == "ushort" || s == "uint16") return PlyType::kU16;
  if (s == "int" || s == "int32") return PlyType::kI32;
  if (s == "uint" || s == "uint32") return PlyType::kU32;
  if (s == "float" || s == "float32") return PlyType::kF32;
  if (s == "double" || s == "float64") return PlyType::kF64;
  throw ParseError(line, "unknown PLY type '" + std::string(s) + "'");
}

inline std::size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::kI8: case PlyType::kU8: return 1;
    case PlyType::kI16: case PlyType::kU16: return 2;
    case PlyType::kI32: case PlyType::kU32: case PlyType::kF32: return 4;
    case PlyType::kF64: return 8;
  }
  return 0;
}

struct PlyProperty {
  std::string name;
  PlyType type;
  bool is_list = false;
  PlyType count_type = PlyType::kU8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> props;
};

// Pulls values either from whitespace-separated ascii lines or raw LE bytes.
class PlySource {
 public:
  PlySource(std::istream& in, bool binary, std::size_t line) : in_(in), binary_(binary), line_(line) {}

  double read(PlyType t) {
    if (binary_) return read_binary(t);
    if (pos_ >= tokens_.size()) throw ParseError(line_, "PLY element line has too few values");
    return parse_double(tokens_[pos_++], line_);
  }
  void begin_record() {
    if (binary_) return;
    do {
      if (!std::getline(in_, buffer_)) throw ParseError(line_, "PLY body ends early");
      ++line_;
      tokens_ = split_ws(buffer_);
    } while (tokens_.empty());
    pos_ = 0;
  }
  std::size_t line() const { return line_; }

 private:
  double read_binary(PlyType t) {
    unsigned char b[8] = {};
    const std::size_t n = ply_size(t);
    if (!in_.read(reinterpret_cast<char*>(b), static_cast<std::streamsize>(n))) {
      throw ParseError(line_, "binary PLY body truncated");
    }
    std::uint64_t u = 0;
    for (std::size_t i = 0; i < n; ++i) u |= std::uint64_t{b[i]} << (8 * i);
    switch (t) {
      case PlyType::kI8: return static_cast<std::int8_t>(u);
      case PlyType::kU8: return static_cast<std::uint8_t>(u);
      case PlyType::kI16: return static_cast<std::int16_t>(u);
      case PlyType::kU16: return static_cast<std::uint16_t>(u);
      case PlyType::kI32: return static_cast<std::int32_t>(u);
      case PlyType::kU32: return static_cast<std::uint32_t>(u);
      case PlyType::kF32: return std::bit_cast<float>(static_cast<std::uint32_t>(u));
      case PlyType::kF64: return std::bit_cast<double>(u);
    }
    return 0;
  }

  std::istream& in_;
  bool binary_;
  std::size_t line_;
  std::string buffer_;
  std::vector<std::string_view> tokens_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Reads a PLY mesh. Vertex properties x, y, z are required; an integer
/// `label` property fills Mesh::labels. Faces come from a `vertex_indices`
/// (or `vertex_index`) list and are fan-triangulated.
inline Mesh load_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line) || detail::split_ws(line).empty() || detail::split_ws(line)[0] != "ply") {
    throw ParseError(1, "missing 'ply' magic line");
  }
  bool binary = false;
  std::vector<detail::PlyElement> elements;
  bool header_done = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "format") {
      if (tok.size() < 2) throw ParseError(lineno, "format line incomplete");
      if (tok[1] == "ascii") binary = false;
      else if (tok[1] == "binary_little_endian") binary = true;
      else throw ParseError(lineno, "unsupported PLY format '" + std::string(tok[1]) + "'");
    } else if (tok[0] == "element") {
      if (tok.size() < 3) throw ParseError(lineno, "element line incomplete");
      detail::PlyElement e;
      e.name = std::string(tok[1]);
      e.count = static_cast<std::size_t>(detail::parse_int(tok[2], lineno));
      elements.push_back(std::move(e));
    } else if (tok[0] == "property") {
      if (elements.empty()) throw ParseError(lineno, "property before any element");
      detail::PlyProperty p;
      if (tok.size() >= 5 && tok[1] == "list") {
        p.is_list = true;
        p.count_type = detail::ply_type(tok[2], lineno);
        p.type = detail::ply_type(tok[3], lineno);
        p.name = std::string(tok[4]);
      } else if (tok.size() >= 3) {
        p.type = detail::ply_type(tok[1], lineno);
        p.name = std::string(tok[2]);
      } else {
        throw ParseError(lineno, "property line incomplete");
      }
      elements.back().props.push_back(std::move(p));
    } else if (tok[0] == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done) throw ParseError(lineno, "PLY header has no end_header");

  Mesh m;
  std::vector<int> labels;
  bool has_label = false;
  detail::PlySource src(in, binary, lineno);
  for (const auto& e : elements) {
    for (std::size_t r = 0; r < e.count; ++r) {
      src.begin_record();
      Vec3 v = Vec3::Zero();
      int label = 0;
      for (const auto& p : e.props) {
        if (p.is_list) {
          const auto n = static_cast<std::size_t>(src.read(p.count_type));
          std::vector<std::uint32_t> idx(n);
          for (auto& i : idx) {
            const double d = src.read(p.type);
            if (d < 0) throw ParseError(src.line(), "negative face index");
            i = static_cast<std::uint32_t>(d);
          }
          if (e.name == "face" && (p.name == "vertex_indices" || p.name == "vertex_index")) {
            if (n < 3) throw ParseError(src.line(), "face with fewer than three vertices");
            for (std::size_t k = 1; k + 1 < n; ++k) m.faces.push_back({idx[0], idx[k], idx[k + 1]});
          }
          continue;
        }
        const double val = src.read(p.type);
        if (e.name != "vertex") continue;
        if (p.name == "x") v.x() = val;
        else if (p.name == "y") v.y() = val;
        else if (p.name == "z") v.z() = val;
        else if (p.name == "label") {
          label = static_cast<int>(val);
          has_label = true;
        }
      }
      if (e.name == "vertex") {
        m.vertices.push_back(v);
        labels.push_back(label);
      }
    }
  }
  if (has_label) m.labels = std::move(labels);
  try {
    m.validate();
  } catch (const Error& e) {
    throw ParseError(src.line(), e.what());
  }
  return m;
}

/// Writes an ascii PLY with an `int label` vertex property when labels exist.
inline void save_ply(const Mesh& m, const std::filesystem::path& path) {
  m.validate();
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << m.vertices.size() << '\n';
  out << "property double x\nproperty double y\nproperty double z\n";
  if (m.labels) out << "property int label\n";
  out << "element face " << m.faces.size() << '\n';
  out << "property list uchar int vertex_indices\nend_header\n";
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    const auto& v = m.vertices[i];
    out << detail::fmt_double(v.x()) << ' ' << detail::fmt_double(v.y()) << ' ' << detail::fmt_double(v.z());
    if (m.labels) out << ' ' << (*m.labels)[i];
    out << '\n';
  }
  for (const auto& f : m.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  if (!out) throw Error(ErrorCode::kIo, "short write to " + path.string());
}

/// One integer per line, `#` comments and blank lines skipped. Used for
/// vertex maps (-1 = none) and per-vertex labels.
inline std::vector<std::int32_t> load_int_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::int32_t> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tok = detail::split_ws(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    if (tok.size() != 1) throw ParseError(lineno, "expected one integer per line");
    const long long v = detail::parse_int(tok[0], lineno);
    if (v < std::numeric_limits<std::int32_t>::min() || v > std::numeric_limits<std::int32_t>::max()) {
      throw ParseError(lineno, "value out of range");
    }
    out.push_back(static_cast<std::int32_t>(v));
  }
  return out;
}

inline void save_int_list(std::span<const std::int32_t> values, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  for (auto v : values) out << v << '\n';
  if (!out) throw Error(ErrorCode::kIo, "short write to " + path.string());
}

inline Mesh load_mesh(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".obj") return load_obj(path);
  if (ext == ".ply") return load_ply(path);
  throw Error(ErrorCode::kInvalidArgument, "unsupported mesh format '" + ext + "'");
}

inline void save_mesh(const Mesh& m, const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".obj") return save_obj(m, path);
  if (ext == ".ply") return save_ply(m, path);
  throw Error(ErrorCode::kInvalidArgument, "unsupported mesh format '" + ext + "'");
}

}  // namespace hnsr
