// SPDX-FileCopyrightText: 2026 The HNSR Authors
// SPDX-License-Identifier: Apache-2.0

// hnsr: voxelize meshes, extract analytic pyramids, match, evaluate and run
// the applications. Every command writes into a run directory (--out) with a
// manifest.json recording the config hash and input digests.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "hnsr/hnsr.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hnsr;

namespace {

// ---------------------------------------------------------------------------
// Digests and the run directory

std::string hex(const unsigned char* p, unsigned n) {
  std::ostringstream os;
  for (unsigned i = 0; i < n; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(p[i]);
  return os.str();
}

std::string sha256(const void* data, std::size_t size) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  if (EVP_Digest(data, size, md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kInvariantViolation, "SHA-256 failed");
  }
  return hex(md, len);
}

std::string sha256_file(const fs::path& p) {
  const auto bytes = detail::read_file_bytes(p);
  return sha256(bytes.data(), bytes.size());
}

class RunDir {
 public:
  RunDir(fs::path dir, std::string command, const RunConfig& cfg) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create run directory " + dir_.string() + ": " + ec.message());
    const std::string canonical = to_json(cfg).dump();
    manifest_ = {{"command", std::move(command)},
                 {"config", to_json(cfg)},
                 {"config_sha256", sha256(canonical.data(), canonical.size())},
                 {"inputs", json::object()},
                 {"outputs", json::array()}};
  }

  fs::path operator/(const std::string& name) const { return dir_ / name; }

  void input(const std::string& role, const fs::path& p) {
    manifest_["inputs"][role] = {{"path", p.string()}, {"sha256", sha256_file(p)}};
  }

  fs::path output(const std::string& name) {
    manifest_["outputs"].push_back(name);
    return dir_ / name;
  }

  void write_json(const std::string& name, const json& j) {
    std::ofstream out(output(name));
    out << j.dump(2) << '\n';
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + (dir_ / name).string());
  }

  void finish() {
    std::ofstream out(dir_ / "manifest.json");
    out << manifest_.dump(2) << '\n';
    if (!out) throw Error(ErrorCode::kIo, "cannot write manifest");
  }

 private:
  fs::path dir_;
  json manifest_;
};

// ---------------------------------------------------------------------------
// Shared flags

struct Flags {
  std::optional<std::string> preset;
  std::optional<std::uint32_t> resolution;
  std::optional<std::string> pyramid_src;
  std::optional<std::string> pyramid_tar;
  std::vector<std::uint32_t> scales;
  std::optional<std::uint32_t> timestep;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> direction;
  std::optional<double> tol;
  std::optional<unsigned> threads;
  bool perturb_before = false;
  std::string config_path;
  std::string out = "hnsr_run";
};

void add_flags(CLI::App& app, Flags& f) {
  app.add_option("--preset", f.preset, "Backbone preset: analytic, sdf-diffusion, las-diffusion or trellis");
  app.add_option("--resolution", f.resolution, "Voxel grid resolution (16, 32, 64 or 128); defaults to the preset's");
  app.add_option("--pyramid-src", f.pyramid_src, "Exported .hnsr pyramid for the source shape");
  app.add_option("--pyramid-tar", f.pyramid_tar, "Exported .hnsr pyramid for the target shape");
  app.add_option("--scales", f.scales, "Analytic level scales, global first (e.g. 4 2 1)");
  app.add_option("--timestep", f.timestep, "Diffusion timestep; defaults to the preset's");
  app.add_option("--seed", f.seed, "Noise seed");
  app.add_option("--direction", f.direction, "source-to-target or target-to-source");
  app.add_option("--tol", f.tol, "Correspondence tolerance as a fraction of the bounding-box diagonal");
  app.add_option("--threads", f.threads, "Worker threads; results do not depend on it")->check(CLI::Range(1u, 1024u));
  app.add_flag("--perturb-before", f.perturb_before, "Analytic preset: diffuse and re-binarize before extraction");
  app.add_option("--config", f.config_path, "JSON run config; its keys override the flags")->check(CLI::ExistingFile);
  app.add_option("--out,-o", f.out, "Run directory")->capture_default_str();
}

RunConfig build_config(const Flags& f) {
  RunConfig c;
  if (f.preset) c.preset = *f.preset;
  c.resolution = f.resolution;
  c.pyramid_src = f.pyramid_src;
  c.pyramid_tar = f.pyramid_tar;
  c.level_scales = f.scales;
  c.timestep = f.timestep;
  if (f.seed) c.seed = *f.seed;
  if (f.direction) c.direction = direction_from_string(*f.direction);
  if (f.tol) c.tol = *f.tol;
  if (f.threads) c.threads = *f.threads;
  c.perturb_before = f.perturb_before;
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kInvalidArgument, "config " + f.config_path + ": " + e.what());
    }
    apply_json(c, j);
  }
  validate(c);
  return c;
}

/// Vertex labels from a file, the mesh's own labels, or its parts.
std::vector<int> labels_for(const Mesh& m, const std::string& file, const std::string& which) {
  std::vector<int> out;
  if (!file.empty()) {
    const auto raw = load_int_list(file);
    out.assign(raw.begin(), raw.end());
  } else if (m.labels) {
    out = *m.labels;
  } else if (m.has_parts()) {
    out = m.vertex_parts();
  } else {
    throw Error(ErrorCode::kMissingData, which + " mesh has no labels or parts; pass a label file");
  }
  if (out.size() != m.vertices.size()) {
    throw Error(ErrorCode::kDimensionMismatch, which + " labels cover " + std::to_string(out.size()) +
                                                   " vertices, mesh has " + std::to_string(m.vertices.size()));
  }
  return out;
}

json match_summary(const CorrespondenceMap& cm, const VertexMap& map, Direction dir) {
  json levels = json::array();
  const std::size_t n_levels = cm.entries.empty() ? 0 : cm.entries.front().region_sizes.size();
  for (std::size_t l = 0; l < n_levels; ++l) {
    std::uint32_t lo = std::numeric_limits<std::uint32_t>::max(), hi = 0;
    double sum = 0;
    for (const auto& e : cm.entries) {
      lo = std::min(lo, e.region_sizes[l]);
      hi = std::max(hi, e.region_sizes[l]);
      sum += e.region_sizes[l];
    }
    levels.push_back({{"level", l}, {"min", lo}, {"mean", sum / static_cast<double>(cm.entries.size())}, {"max", hi}});
  }
  std::size_t self = 0;
  double dist = 0;
  for (const auto& e : cm.entries) {
    self += e.target == e.source;
    dist += e.distance;
  }
  const auto n = static_cast<double>(std::max<std::size_t>(1, cm.entries.size()));
  return {{"direction", to_string(dir)},
          {"source_dims", to_string(cm.source_dims)},
          {"target_dims", to_string(cm.target_dims)},
          {"entries", cm.entries.size()},
          {"region_sizes", levels},
          {"self_hits", self},
          {"self_hit_percent", 100.0 * static_cast<double>(self) / n},
          {"mean_final_distance", dist / n},
          {"vertices", map.size()},
          {"unmatched_vertices", std::count(map.begin(), map.end(), -1)}};
}

void print_summary(const json& s) {
  std::printf("%zu voxel correspondences (%s, %s -> %s)\n", s["entries"].get<std::size_t>(),
              s["direction"].get<std::string>().c_str(), s["source_dims"].get<std::string>().c_str(),
              s["target_dims"].get<std::string>().c_str());
  for (const auto& l : s["region_sizes"]) {
    std::printf("  level %zu region size: min %u  mean %.2f  max %u\n", l["level"].get<std::size_t>(),
                l["min"].get<unsigned>(), l["mean"].get<double>(), l["max"].get<unsigned>());
  }
  std::printf("  self-hits: %.2f%%\n", s["self_hit_percent"].get<double>());
  std::printf("  unmatched vertices: %zu of %zu\n", s["unmatched_vertices"].get<std::size_t>(),
              s["vertices"].get<std::size_t>());
}

/// Runs the pipeline with roles swapped for target-to-source.
PairMatch run_match(const Mesh& src, const Mesh& tar, const RunConfig& c, Direction dir) {
  if (dir == Direction::kSourceToTarget) return match_meshes(src, tar, c, c.pyramid_src, c.pyramid_tar);
  return match_meshes(tar, src, c, c.pyramid_tar, c.pyramid_src);
}

// ---------------------------------------------------------------------------
// Commands

int cmd_voxelize(const Flags& f, const std::string& mesh_path) {
  const RunConfig c = build_config(f);
  RunDir run(f.out, "voxelize", c);
  run.input("mesh", mesh_path);
  const auto v = voxelize(load_mesh(mesh_path), c.effective_resolution());
  write_grid(v.grid, run.output("grid.hgrd"));
  run.write_json("vertex_map.json", vertex_map_to_json(v.map));
  run.write_json("normalization.json", to_json(v.normalization));
  run.finish();
  std::printf("%s grid, %zu occupied voxels -> %s\n", to_string(v.grid.dims()).c_str(), occupied_cells(v.grid).size(),
              (run / "grid.hgrd").c_str());
  return 0;
}

int cmd_extract(const Flags& f, const std::string& input) {
  const RunConfig c = build_config(f);
  if (c.preset != "analytic") {
    throw Error(ErrorCode::kInvalidArgument, "extract computes analytic pyramids; preset " + c.preset +
                                                 " pyramids come from the exporter");
  }
  RunDir run(f.out, "extract", c);
  run.input("shape", input);
  const fs::path p(input);
  VoxelGrid grid = p.extension() == ".hgrd" ? read_grid(p) : voxelize(load_mesh(p), c.effective_resolution()).grid;
  const auto pyramid = extract_pyramid(grid, analytic_config(c));
  write_pyramid(pyramid, run.output("pyramid.hnsr"));
  run.write_json("pyramid.meta.json", meta_to_json(pyramid.meta()));
  run.finish();
  std::printf("%zu levels over %s -> %s\n", pyramid.num_levels(), to_string(pyramid.base_dims()).c_str(),
              (run / "pyramid.hnsr").c_str());
  return 0;
}

int cmd_match(const Flags& f, const std::string& src_path, const std::string& tar_path) {
  const RunConfig c = build_config(f);
  RunDir run(f.out, "match", c);
  run.input("source", src_path);
  run.input("target", tar_path);
  if (c.pyramid_src) run.input("pyramid_src", *c.pyramid_src);
  if (c.pyramid_tar) run.input("pyramid_tar", *c.pyramid_tar);
  const auto pm = run_match(load_mesh(src_path), load_mesh(tar_path), c, c.direction);
  write_correspondence_jsonl(pm.cm, run.output("correspondence.jsonl"));
  save_int_list(pm.map, run.output("vertex_map.txt"));
  const json summary = match_summary(pm.cm, pm.map, c.direction);
  run.write_json("summary.json", summary);
  run.finish();
  print_summary(summary);
  return 0;
}

struct EvalArgs {
  std::string pred, gt, tar, src, pred_labels, gt_labels;
};

int cmd_eval(const Flags& f, const EvalArgs& a) {
  const RunConfig c = build_config(f);
  RunDir run(f.out, "eval", c);
  run.input("pred", a.pred);
  run.input("gt", a.gt);
  run.input("target", a.tar);
  const VertexMap pred = load_int_list(a.pred);
  const VertexMap gt = load_int_list(a.gt);
  const Mesh tar = load_mesh(a.tar);

  EvalReport r;
  r.tolerance = c.tol;
  r.n_pairs = pred.size();
  const auto acc = accuracy_and_error(pred, gt, tar, c.tol);
  r.accuracy_at_tol = acc.accuracy;
  r.avg_error = acc.avg_error;
  const auto geo = geodesic_error(pred, gt, tar, c.threads);
  r.geodesic_error = geo.mean;
  r.n_disconnected = geo.disconnected;
  if (!a.src.empty()) {
    run.input("source", a.src);
    r.edge_distortion_ratio = edge_distortion(pred, load_mesh(a.src), tar, c.threads).ratio;
  }
  if (!a.pred_labels.empty() || !a.gt_labels.empty()) {
    if (a.pred_labels.empty() || a.gt_labels.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "IoU needs both --pred-labels and --gt-labels");
    }
    run.input("pred_labels", a.pred_labels);
    run.input("gt_labels", a.gt_labels);
    const auto pl = load_int_list(a.pred_labels), gl = load_int_list(a.gt_labels);
    const auto iou = per_part_iou({pl.begin(), pl.end()}, {gl.begin(), gl.end()});
    r.per_part_iou = iou.per_part;
    r.mean_iou = iou.mean;
  }
  run.write_json("eval.json", to_json(r));
  run.finish();
  std::fputs(format_table(r).c_str(), stdout);
  return 0;
}

int cmd_coseg(const Flags& f, const std::string& src_path, const std::string& tar_path, const std::string& src_labels,
              const std::string& tar_labels) {
  const RunConfig c = build_config(f);
  RunDir run(f.out, "coseg", c);
  run.input("source", src_path);
  run.input("target", tar_path);
  Mesh src = load_mesh(src_path);
  const Mesh tar = load_mesh(tar_path);
  if (!src_labels.empty()) run.input("source_labels", src_labels);
  src.labels = labels_for(src, src_labels, "source");

  // Label transfer pulls from the source, so matching runs target to source.
  const auto pm = run_match(src, tar, c, Direction::kTargetToSource);
  const auto labels = cosegment(src, tar, pm.map);
  const std::vector<std::int32_t> out(labels.begin(), labels.end());
  save_int_list(out, run.output("labels.txt"));

  json report{{"vertices", labels.size()}};
  if (!tar_labels.empty() || tar.labels || tar.has_parts()) {
    if (!tar_labels.empty()) run.input("target_labels", tar_labels);
    const auto iou = per_part_iou(labels, labels_for(tar, tar_labels, "target"));
    json parts = json::object();
    for (const auto& [p, v] : iou.per_part) parts[std::to_string(p)] = v;
    report["per_part_iou"] = parts;
    report["mean_iou"] = iou.mean;
    std::printf("mean IoU %.4f over %zu parts\n", iou.mean, iou.per_part.size());
    for (const auto& [p, v] : iou.per_part) std::printf("  part %d: %.4f\n", p, v);
  } else {
    std::printf("%zu target vertices labeled\n", labels.size());
  }
  run.write_json("coseg.json", report);
  run.finish();
  return 0;
}

struct KeypointArgs {
  std::optional<std::uint32_t> vertex;
  std::vector<double> point;
  std::uint32_t k = 1;
};

int cmd_keypoint(const Flags& f, const std::string& src_path, const std::string& tar_path, const KeypointArgs& a) {
  const RunConfig c = build_config(f);
  RunDir run(f.out, "keypoint", c);
  run.input("source", src_path);
  run.input("target", tar_path);
  KeypointQuery q;
  q.vertex = a.vertex;
  if (!a.point.empty()) q.point = Vec3(a.point[0], a.point[1], a.point[2]);
  q.k = a.k;
  const auto pm = run_match(load_mesh(src_path), load_mesh(tar_path), c, c.direction);
  const Matcher matcher(pm.from.pyramid, pm.to.pyramid, pm.to.vox.grid);
  const auto r = match_keypoint(q, pm.cm, pm.from.vox, pm.to.vox, &matcher);
  json cands = json::array();
  for (const auto& cand : r.candidates) {
    cands.push_back({{"vertex", cand.vertex}, {"cell", coord_json(cand.cell)}, {"distance", cand.distance}});
  }
  run.write_json("keypoint.json", {{"source_cell", coord_json(r.source_cell)},
                                   {"snapped", r.snapped},
                                   {"direction", to_string(c.direction)},
                                   {"candidates", cands}});
  run.finish();
  if (r.snapped) std::printf("query snapped to occupied voxel %s\n", to_string(r.source_cell).c_str());
  for (const auto& cand : r.candidates) {
    std::printf("vertex %d  cell %s  distance %.6f\n", cand.vertex, to_string(cand.cell).c_str(), cand.distance);
  }
  return 0;
}

int cmd_texture(const Flags& f, const std::string& src_path, const std::string& tar_path) {
  const RunConfig c = build_config(f);
  RunDir run(f.out, "texture", c);
  run.input("source", src_path);
  run.input("target", tar_path);
  const Mesh src = load_mesh(src_path);
  const Mesh tar = load_mesh(tar_path);
  // Votes flow from source parts, so matching runs source to target.
  const auto pm = run_match(src, tar, c, Direction::kSourceToTarget);
  const auto t = transfer_texture(src, tar, pm.map);
  save_textured_obj(t.mesh, run.output("textured.obj"));
  run.write_json("texture.json", to_json(t, src, tar));
  run.finish();
  for (const auto& [tp, sp] : t.assignment) {
    std::printf("%s <- %s\n", tar.parts[static_cast<std::size_t>(tp)].name.c_str(),
                src.parts[static_cast<std::size_t>(sp)].name.c_str());
  }
  for (const auto& w : t.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  return 0;
}

bool is_config_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kInvalidTimestep:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kScaleMismatch:
    case ErrorCode::kUnsupportedKind:
    case ErrorCode::kMissingData:
      return true;
    default:
      return false;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical feature-pyramid shape correspondence"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags flags;
  add_flags(app, flags);

  std::string mesh, src, tar, src_labels, tar_labels;
  auto* vox = app.add_subcommand("voxelize", "Voxelize a mesh into an occupancy grid with vertex map");
  vox->add_option("mesh", mesh, "Input mesh (.obj or .ply)")->required()->check(CLI::ExistingFile);

  auto* ext = app.add_subcommand("extract", "Compute an analytic feature pyramid");
  ext->add_option("shape", mesh, "Input mesh or .hgrd grid")->required()->check(CLI::ExistingFile);

  auto pair = [&](CLI::App* sub) {
    sub->add_option("source", src, "Source mesh")->required()->check(CLI::ExistingFile);
    sub->add_option("target", tar, "Target mesh")->required()->check(CLI::ExistingFile);
  };
  auto* match = app.add_subcommand("match", "Dense correspondence between two meshes");
  pair(match);

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Evaluate a predicted vertex map against ground truth");
  eval->add_option("--pred", ea.pred, "Predicted vertex map (one target index per line)")->required()->check(CLI::ExistingFile);
  eval->add_option("--gt", ea.gt, "Ground-truth vertex map")->required()->check(CLI::ExistingFile);
  eval->add_option("--tar-mesh", ea.tar, "Target mesh")->required()->check(CLI::ExistingFile);
  eval->add_option("--src-mesh", ea.src, "Source mesh; enables edge distortion")->check(CLI::ExistingFile);
  eval->add_option("--pred-labels", ea.pred_labels, "Predicted per-vertex labels")->check(CLI::ExistingFile);
  eval->add_option("--gt-labels", ea.gt_labels, "Ground-truth per-vertex labels")->check(CLI::ExistingFile);

  auto* coseg = app.add_subcommand("coseg", "Transfer part labels from source to target (matches target to source)");
  pair(coseg);
  coseg->add_option("--src-labels", src_labels, "Source labels; defaults to the mesh's labels or parts")
      ->check(CLI::ExistingFile);
  coseg->add_option("--tar-labels", tar_labels, "Target ground-truth labels for an IoU report")->check(CLI::ExistingFile);

  KeypointArgs ka;
  auto* kp = app.add_subcommand("keypoint", "Locate the target vertex matching a source keypoint");
  pair(kp);
  auto* kv = kp->add_option("--vertex", ka.vertex, "Source vertex index");
  auto* kpt = kp->add_option("--point", ka.point, "Point in the source's normalized unit cube")->expected(3);
  kv->excludes(kpt);
  kp->add_option("--k", ka.k, "Number of candidates")->check(CLI::Range(1u, 1000u))->capture_default_str();

  auto* tex = app.add_subcommand("texture", "Transfer part textures from source to target (matches source to target)");
  pair(tex);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*vox) return cmd_voxelize(flags, mesh);
    if (*ext) return cmd_extract(flags, mesh);
    if (*match) return cmd_match(flags, src, tar);
    if (*eval) return cmd_eval(flags, ea);
    if (*coseg) return cmd_coseg(flags, src, tar, src_labels, tar_labels);
    if (*kp) {
      if (!ka.vertex && ka.point.empty()) throw Error(ErrorCode::kInvalidArgument, "keypoint needs --vertex or --point");
      return cmd_keypoint(flags, src, tar, ka);
    }
    if (*tex) return cmd_texture(flags, src, tar);
  } catch (const Error& e) {
    std::fprintf(stderr, "hnsr: %s\n", e.what());
    return is_config_error(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "hnsr: %s\n", e.what());
    return 1;
  }
  return 2;
}
