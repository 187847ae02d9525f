#pragma once

// Per-asset preprocessing (load, normalize, watertight, query and surface
// sampling, FPS, camera rigs, condition renders) and the batch driver.

#include "forge/camera.hpp"
#include "forge/io.hpp"
#include "forge/isosurface.hpp"
#include "forge/mesh_io.hpp"
#include "forge/render.hpp"
#include "forge/sampler.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cctype>
#include <chrono>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace forge {

struct StageToggles {
  bool query = true;
  bool surface = true;
  bool render = true;
  bool texture_rig = true;
  bool save_grid = false;
};

struct PipelineConfig {
  int grid_resolution = 256;
  double grid_margin = 0.05;
  std::size_t n_near = 249'856;
  std::size_t n_uniform = 249'856;
  std::vector<double> near_sigmas{0.01, 0.05};
  QueryComposition composition = QueryComposition::kNearUniform;
  std::size_t surface_total = 124'928;
  double surface_uniform_fraction = 0.5;
  double sharp_threshold_deg = 30.0;
  double sharp_offset = 0.01;
  std::size_t fps_uniform = 1536;
  std::size_t fps_sharp = 1536;
  std::size_t camera_count = 150;
  int render_width = 512;
  int render_height = 512;
  double fov_min_deg = 10.0;
  double fov_max_deg = 70.0;
  std::optional<double> canonical_fov_deg;
  std::uint64_t seed = 0;
  StageToggles stages;

  std::size_t surface_uniform_count() const {
    return static_cast<std::size_t>(std::llround(surface_total * surface_uniform_fraction));
  }
  std::size_t surface_sharp_count() const { return surface_total - surface_uniform_count(); }

  void validate() const {
    if (grid_resolution < 8) throw Error("config: grid_resolution must be at least 8");
    if (!(grid_margin >= 0.0)) throw Error("config: grid_margin must be non-negative");
    if (n_near < 1 || n_uniform < 1 || surface_total < 1 || camera_count < 1)
      throw Error("config: sample and camera counts must be at least 1");
    if (!(surface_uniform_fraction >= 0.0 && surface_uniform_fraction <= 1.0))
      throw Error("config: surface_uniform_fraction must lie in [0, 1]");
    if (fps_uniform > surface_uniform_count() || fps_sharp > surface_sharp_count())
      throw Error("config: fps budget exceeds the surface sample count it draws from");
    if (render_width < 1 || render_height < 1) throw Error("config: render size must be positive");
    if (near_sigmas.empty()) throw Error("config: near_sigmas must not be empty");
    if (!(fov_min_deg > 0.0 && fov_min_deg <= fov_max_deg && fov_max_deg < 180.0))
      throw Error("config: fov range must satisfy 0 < min <= max < 180");
  }
};

inline std::string composition_name(QueryComposition c) {
  return c == QueryComposition::kNearUniform ? "near+uniform" : "near+surface";
}

inline nlohmann::json config_to_json(const PipelineConfig& c) {
  nlohmann::json j = {
      {"grid_resolution", c.grid_resolution},
      {"grid_margin", c.grid_margin},
      {"n_near", c.n_near},
      {"n_uniform", c.n_uniform},
      {"near_sigmas", c.near_sigmas},
      {"query_composition", composition_name(c.composition)},
      {"surface_total", c.surface_total},
      {"surface_uniform_fraction", c.surface_uniform_fraction},
      {"sharp_threshold_deg", c.sharp_threshold_deg},
      {"sharp_offset", c.sharp_offset},
      {"fps_uniform", c.fps_uniform},
      {"fps_sharp", c.fps_sharp},
      {"camera_count", c.camera_count},
      {"render_width", c.render_width},
      {"render_height", c.render_height},
      {"fov_min_deg", c.fov_min_deg},
      {"fov_max_deg", c.fov_max_deg},
      {"canonical_fov_deg", c.canonical_fov_deg ? nlohmann::json(*c.canonical_fov_deg) : nlohmann::json(nullptr)},
      {"seed", c.seed},
      {"stages",
       {{"query", c.stages.query},
        {"surface", c.stages.surface},
        {"render", c.stages.render},
        {"texture_rig", c.stages.texture_rig},
        {"save_grid", c.stages.save_grid}}}};
  return j;
}

/// Overlays the keys present in j onto base. Unknown keys are an error.
inline PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig c = {}) {
  if (!j.is_object()) throw Error("config: expected a JSON object");
  static const std::set<std::string> known = {
      "grid_resolution", "grid_margin",  "n_near",         "n_uniform",   "near_sigmas",
      "query_composition", "surface_total", "surface_uniform_fraction", "sharp_threshold_deg", "sharp_offset",
      "fps_uniform",     "fps_sharp",    "camera_count",   "render_width", "render_height",
      "fov_min_deg",     "fov_max_deg",  "canonical_fov_deg", "seed",     "stages"};
  try {
    for (const auto& [key, value] : j.items())
      if (!known.contains(key)) throw Error("config: unknown key '" + key + "'");
    auto take = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    take("grid_resolution", c.grid_resolution);
    take("grid_margin", c.grid_margin);
    take("n_near", c.n_near);
    take("n_uniform", c.n_uniform);
    take("near_sigmas", c.near_sigmas);
    if (j.contains("query_composition")) {
      const std::string s = j.at("query_composition");
      if (s == "near+uniform") c.composition = QueryComposition::kNearUniform;
      else if (s == "near+surface") c.composition = QueryComposition::kNearSurface;
      else throw Error("config: query_composition must be 'near+uniform' or 'near+surface'");
    }
    take("surface_total", c.surface_total);
    take("surface_uniform_fraction", c.surface_uniform_fraction);
    take("sharp_threshold_deg", c.sharp_threshold_deg);
    take("sharp_offset", c.sharp_offset);
    take("fps_uniform", c.fps_uniform);
    take("fps_sharp", c.fps_sharp);
    take("camera_count", c.camera_count);
    take("render_width", c.render_width);
    take("render_height", c.render_height);
    take("fov_min_deg", c.fov_min_deg);
    take("fov_max_deg", c.fov_max_deg);
    if (j.contains("canonical_fov_deg")) {
      if (j.at("canonical_fov_deg").is_null()) c.canonical_fov_deg.reset();
      else c.canonical_fov_deg = j.at("canonical_fov_deg").get<double>();
    }
    take("seed", c.seed);
    if (j.contains("stages")) {
      const auto& s = j.at("stages");
      for (const auto& [key, value] : s.items()) {
        if (key == "query") c.stages.query = value.get<bool>();
        else if (key == "surface") c.stages.surface = value.get<bool>();
        else if (key == "render") c.stages.render = value.get<bool>();
        else if (key == "texture_rig") c.stages.texture_rig = value.get<bool>();
        else if (key == "save_grid") c.stages.save_grid = value.get<bool>();
        else throw Error("config: unknown stage '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
  return c;
}

struct AssetResult {
  std::string asset_id;
  bool ok = false;
  std::string failed_stage;
  std::string error;
  fs::path directory;  // final record directory on success
  nlohmann::json record;
};

namespace detail {

inline nlohmann::json report_json(const WatertightReport& r) {
  return {{"is_closed", r.is_closed},
          {"is_edge_manifold", r.is_edge_manifold},
          {"connected_components", r.connected_components},
          {"euler_characteristic", r.euler_characteristic},
          {"boundary_edge_count", r.boundary_edge_count},
          {"vertex_count", r.vertex_count},
          {"edge_count", r.edge_count},
          {"face_count", r.face_count}};
}

inline std::vector<float> flatten(const std::vector<Vec3>& pts) {
  std::vector<float> out;
  out.reserve(pts.size() * 3);
  for (const Vec3& p : pts)
    for (int a = 0; a < 3; ++a) out.push_back(static_cast<float>(p[a]));
  return out;
}

inline std::vector<float> flatten(const SurfaceSamples& s) {
  std::vector<float> out;
  out.reserve(s.size() * 6);
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (int a = 0; a < 3; ++a) out.push_back(static_cast<float>(s.positions[i][a]));
    for (int a = 0; a < 3; ++a) out.push_back(static_cast<float>(s.normals[i][a]));
  }
  return out;
}

inline std::vector<std::uint32_t> as_u32(const std::vector<std::size_t>& idx) {
  return {idx.begin(), idx.end()};
}

/// Records every file under root (recursively) with its hash, keyed by the
/// relative path; the manifest itself is excluded.
inline nlohmann::json hash_tree(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root))
    if (entry.is_regular_file() && entry.path().filename() != "manifest.json") files.push_back(entry.path());
  std::ranges::sort(files);
  nlohmann::json out = nlohmann::json::object();
  for (const fs::path& f : files)
    out[fs::relative(f, root).generic_string()] = {{"sha256", sha256_file(f)}, {"bytes", fs::file_size(f)}};
  return out;
}

class StageClock {
 public:
  explicit StageClock(nlohmann::json& timings) : timings_(timings) {}
  void begin(const std::string& stage) {
    stage_ = stage;
    start_ = std::chrono::steady_clock::now();
  }
  void end() {
    timings_[stage_] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }
  const std::string& stage() const { return stage_; }

 private:
  nlohmann::json& timings_;
  std::string stage_ = "setup";
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline void render_rig(const Bvh& bvh, const CameraRig& rig, const fs::path& dir) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < rig.cameras.size(); ++i) write_images(render(bvh, rig.cameras[i]), rig.cameras[i], dir, i);
}

}  // namespace detail

inline std::string sanitize_asset_id(const std::string& key) {
  std::string id;
  for (char c : key) id += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
  if (id.empty() || id == "." || id == "..") throw Error("cannot derive an asset id from '" + key + "'");
  return id;
}

/// Runs every enabled stage for one mesh and moves the finished record to
/// out_root/asset_id. On failure nothing is left under out_root.
inline AssetResult process_asset(const fs::path& input, const fs::path& out_root, const PipelineConfig& config,
                                 const std::string& asset_id, std::uint64_t seed) {
  AssetResult result;
  result.asset_id = asset_id;
  const fs::path final_dir = out_root / asset_id;
  const fs::path staging = out_root / (".staging-" + asset_id);
  nlohmann::json timings = nlohmann::json::object();
  detail::StageClock clock(timings);
  try {
    clock.begin("setup");
    config.validate();
    fs::create_directories(out_root);
    fs::remove_all(staging);
    fs::create_directories(staging);
    clock.end();

    nlohmann::json record;
    record["asset_id"] = asset_id;
    record["seed"] = seed;
    record["rng"] = {{"algorithm", RngStream::kAlgorithm},
                     {"streams",
                      {{"surface", static_cast<int>(StreamId::kSurface)},
                       {"sharp", static_cast<int>(StreamId::kSharp)},
                       {"near", static_cast<int>(StreamId::kNear)},
                       {"volume", static_cast<int>(StreamId::kVolume)},
                       {"cameras", static_cast<int>(StreamId::kCameras)},
                       {"on_surface", static_cast<int>(StreamId::kOnSurface)},
                       {"reference", static_cast<int>(StreamId::kReference)}}}};
    record["config"] = config_to_json(config);

    clock.begin("load");
    const std::string input_bytes = read_bytes(input);
    record["input"] = {{"file", input.filename().string()}, {"sha256", sha256_hex(input_bytes)}};
    const LoadedMesh loaded = load_mesh(input);
    record["input"]["vertices"] = loaded.mesh.vertex_count();
    record["input"]["faces"] = loaded.mesh.face_count();
    record["input"]["dropped_faces"] = loaded.dropped_faces;
    clock.end();

    clock.begin("normalize");
    const auto [normalized, transform] = normalize_mesh(loaded.mesh);
    record["normalization"] = {{"translation", vec_json(transform.translation)}, {"scale", transform.scale}};
    clock.end();

    clock.begin("watertight");
    const int n = config.grid_resolution;
    const Bvh source_bvh(normalized);
    const Aabb bounds = watertight_grid_bounds(source_bvh.bounds(), n, config.grid_margin);
    SdfGrid grid = bake_sdf_grid(source_bvh, {n, n, n}, bounds);
    seal_grid_boundary(grid);
    const Mesh watertight = marching_cubes(grid, 0.0);
    const WatertightReport report = check_watertight(watertight);
    record["watertight"] = detail::report_json(report);
    record["grid"] = {{"resolution", {n, n, n}}, {"bounds", {{"min", vec_json(bounds.min)}, {"max", vec_json(bounds.max)}}}};
    if (!report.is_closed) throw Error("marching cubes output is not closed");
    write_ply(staging / "watertight.ply", watertight);
    if (config.stages.save_grid) write_sdf_grid(staging, "sdf_grid", grid);
    grid.values.clear();
    grid.values.shrink_to_fit();
    const Bvh bvh(watertight);
    clock.end();

    nlohmann::json counts = nlohmann::json::object();
    if (config.stages.query) {
      clock.begin("query");
      QueryConfig qc;
      qc.n_near = config.n_near;
      qc.n_uniform = config.n_uniform;
      qc.near.sigmas = config.near_sigmas;
      qc.composition = config.composition;
      const QuerySet q = build_query_set(watertight, bvh, qc, seed);
      const nlohmann::json meta = {{"seed", seed}, {"composition", composition_name(config.composition)}};
      write_array<float>(staging, "query_points", detail::flatten(q.points), {q.size(), 3}, meta);
      std::vector<float> sdf(q.sdf.begin(), q.sdf.end()), sigma(q.sigma.begin(), q.sigma.end());
      write_array<float>(staging, "query_sdf", sdf, {q.size()}, meta);
      write_array<float>(staging, "query_sigma", sigma, {q.size()}, meta);
      std::vector<std::uint8_t> tags;
      for (Provenance p : q.provenance) tags.push_back(static_cast<std::uint8_t>(p));
      write_array<std::uint8_t>(staging, "query_provenance", tags, {q.size()},
                                {{"tags", {{"0", "near-surface"}, {"1", "uniform-volume"}, {"2", "on-surface"}}}});
      counts["query"] = q.size();
      counts["near_surface"] = q.count(Provenance::kNearSurface);
      counts["uniform_volume"] = q.count(Provenance::kUniformVolume);
      counts["on_surface"] = q.count(Provenance::kOnSurface);
      clock.end();
    }

    if (config.stages.surface) {
      clock.begin("surface");
      const SurfaceSamples uniform =
          sample_surface_uniform(watertight, config.surface_uniform_count(), RngStream(seed, StreamId::kSurface));
      const SharpSamples sharp =
          sample_surface_sharp(watertight, config.surface_sharp_count(), RngStream(seed, StreamId::kSharp),
                               {config.sharp_threshold_deg, config.sharp_offset});
      const nlohmann::json layout = {{"fields", {"x", "y", "z", "nx", "ny", "nz"}}, {"seed", seed}};
      write_array<float>(staging, "surface_random", detail::flatten(uniform), {uniform.size(), 6}, layout);
      nlohmann::json sharp_meta = layout;
      sharp_meta["fallback_to_uniform"] = sharp.fallback;
      sharp_meta["sharp_edge_count"] = sharp.sharp_edge_count;
      write_array<float>(staging, "surface_sharp", detail::flatten(sharp.samples), {sharp.samples.size(), 6},
                         sharp_meta);
      record["sharp"] = {{"fallback_to_uniform", sharp.fallback}, {"sharp_edge_count", sharp.sharp_edge_count}};
      counts["surface_random"] = uniform.size();
      counts["surface_sharp"] = sharp.samples.size();
      clock.end();

      clock.begin("fps");
      const auto fps_u = detail::as_u32(farthest_point_sampling(uniform.positions, config.fps_uniform));
      const auto fps_s = detail::as_u32(farthest_point_sampling(sharp.samples.positions, config.fps_sharp));
      write_array<std::uint32_t>(staging, "fps_random", fps_u, {fps_u.size()}, {{"indexes", "surface_random"}});
      write_array<std::uint32_t>(staging, "fps_sharp", fps_s, {fps_s.size()}, {{"indexes", "surface_sharp"}});
      counts["fps_random"] = fps_u.size();
      counts["fps_sharp"] = fps_s.size();
      clock.end();
    }

    clock.begin("cameras");
    ConditionRigOptions rig_opts;
    rig_opts.count = config.camera_count;
    rig_opts.fov_min_deg = config.fov_min_deg;
    rig_opts.fov_max_deg = config.fov_max_deg;
    rig_opts.width = config.render_width;
    rig_opts.height = config.render_height;
    const CameraRig rig = build_condition_rig(seed, rig_opts);
    write_json(staging / "cameras.json", rig_json(rig));
    std::optional<CameraRig> canonical;
    if (config.canonical_fov_deg) {
      rig_opts.fixed_fov_deg = config.canonical_fov_deg;
      canonical = build_condition_rig(seed, rig_opts);
      write_json(staging / "cameras_canonical.json", rig_json(*canonical));
    }
    if (config.stages.texture_rig) write_json(staging / "texture_rig.json", rig_json(build_texture_rig(seed)));
    counts["cameras"] = rig.cameras.size();
    clock.end();

    if (config.stages.render) {
      clock.begin("render");
      const Bvh render_bvh(normalized);
      detail::render_rig(render_bvh, rig, staging / "renders");
      if (canonical) detail::render_rig(render_bvh, *canonical, staging / "renders_canonical");
      counts["views"] = rig.cameras.size();
      clock.end();
    }

    clock.begin("manifest");
    record["counts"] = counts;
    record["artifacts"] = detail::hash_tree(staging);
    record["timings_s"] = timings;
    record["status"] = "ok";
    write_json(staging / "manifest.json", record);
    fs::remove_all(final_dir);
    fs::rename(staging, final_dir);
    clock.end();

    result.ok = true;
    result.directory = final_dir;
    result.record = record;
  } catch (const std::exception& e) {
    std::error_code ignored;
    fs::remove_all(staging, ignored);
    result.ok = false;
    result.failed_stage = clock.stage();
    result.error = e.what();
    result.record = {{"asset_id", asset_id}, {"status", "failed"}, {"stage", clock.stage()}, {"error", e.what()}};
  }
  return result;
}

struct BatchSummary {
  std::size_t ok = 0;
  std::size_t failed = 0;
  std::vector<AssetResult> assets;  // manifest order
  nlohmann::json json;
};

struct BatchEntry {
  fs::path path;
  std::string key;  // path relative to the manifest directory, generic form
  std::string asset_id;
};

inline std::vector<BatchEntry> read_batch_manifest(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error("cannot read manifest: " + manifest.string());
  const fs::path base = manifest.parent_path();
  std::vector<BatchEntry> entries;
  std::set<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    const fs::path rel(line.substr(first, last - first + 1));
    BatchEntry e;
    e.path = rel.is_absolute() ? rel : base / rel;
    e.key = rel.lexically_normal().generic_string();
    e.asset_id = sanitize_asset_id(e.key);
    if (!ids.insert(e.asset_id).second) throw Error("manifest lists asset '" + e.key + "' twice");
    entries.push_back(std::move(e));
  }
  if (entries.empty()) throw Error("manifest lists no assets: " + manifest.string());
  return entries;
}

/// Processes every manifest entry with a pool of workers. Per-asset seeds
/// depend only on the global seed and the entry's relative path.
inline BatchSummary run_batch(const fs::path& manifest, const fs::path& out_root, const PipelineConfig& config,
                              unsigned workers) {
  config.validate();
  const std::vector<BatchEntry> entries = read_batch_manifest(manifest);
  fs::create_directories(out_root);
  const auto start = std::chrono::steady_clock::now();
  BatchSummary summary;
  summary.assets.resize(entries.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < entries.size(); i = next++) {
      const BatchEntry& e = entries[i];
      summary.assets[i] = process_asset(e.path, out_root, config, e.asset_id, derive_seed(config.seed, e.key));
    }
  };
  {
    std::vector<std::jthread> pool;
    const unsigned n = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(entries.size())));
    for (unsigned w = 0; w < n; ++w) pool.emplace_back(work);
  }
  nlohmann::json assets = nlohmann::json::array();
  double aggregate = 0.0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const AssetResult& r = summary.assets[i];
    (r.ok ? summary.ok : summary.failed) += 1;
    nlohmann::json a = {{"asset_id", r.asset_id}, {"input", entries[i].key}, {"status", r.ok ? "ok" : "failed"}};
    if (r.ok) {
      double seconds = 0.0;
      for (const auto& [stage, t] : r.record["timings_s"].items()) seconds += t.get<double>();
      a["seconds"] = seconds;
      aggregate += seconds;
    } else {
      a["stage"] = r.failed_stage;
      a["error"] = r.error;
    }
    assets.push_back(a);
  }
  summary.json = {{"ok", summary.ok},
                  {"failed", summary.failed},
                  {"workers", workers},
                  {"asset_seconds_total", aggregate},
                  {"wall_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()},
                  {"assets", assets}};
  write_json(out_root / "summary.json", summary.json);
  return summary;
}

struct ValidationResult {
  WatertightReport report;
  std::vector<std::string> problems;
  bool ok() const { return problems.empty(); }
};

/// Re-hashes every artifact, re-checks the stored mesh, and compares array
/// shapes with the config counts (the record's own config unless one is given).
inline ValidationResult validate_record(const fs::path& dir, const std::optional<PipelineConfig>& expected = {}) {
  ValidationResult out;
  const nlohmann::json record = read_json(dir / "manifest.json");
  if (record.value("status", "") != "ok") out.problems.push_back("record status is not ok");
  const PipelineConfig config = expected ? *expected : config_from_json(record.at("config"));

  for (const auto& [name, info] : record.at("artifacts").items()) {
    const fs::path file = dir / name;
    if (!fs::exists(file)) {
      out.problems.push_back("missing artifact: " + name);
      continue;
    }
    const std::string actual = sha256_file(file);
    if (actual != info.at("sha256").get<std::string>())
      out.problems.push_back("hash mismatch: " + name + " (expected " + info.at("sha256").get<std::string>() +
                             ", actual " + actual + ")");
  }
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().filename() == "manifest.json") continue;
    const std::string rel = fs::relative(entry.path(), dir).generic_string();
    if (!record.at("artifacts").contains(rel)) out.problems.push_back("unlisted file: " + rel);
  }

  try {
    LoadOptions keep;
    keep.drop_zero_area = false;
    out.report = check_watertight(load_mesh(dir / "watertight.ply", keep).mesh);
    if (!out.report.is_closed) out.problems.push_back("watertight.ply is not closed");
    if (!out.report.is_edge_manifold) out.problems.push_back("watertight.ply is not edge-manifold");
  } catch (const std::exception& e) {
    out.problems.push_back(std::string("cannot check watertight.ply: ") + e.what());
  }

  auto check_rows = [&](const std::string& stem, std::size_t expected_rows) {
    const fs::path sidecar = dir / (stem + ".json");
    if (!fs::exists(sidecar)) {
      out.problems.push_back("missing array: " + stem);
      return;
    }
    try {
      const auto meta = read_json(sidecar);
      const auto rows = meta.at("shape").at(0).get<std::size_t>();
      if (rows != expected_rows)
        out.problems.push_back("count mismatch: " + stem + " expected " + std::to_string(expected_rows) +
                               ", actual " + std::to_string(rows));
      std::size_t elements = 1;
      for (const auto& s : meta.at("shape")) elements *= s.get<std::size_t>();
      const std::string dtype = meta.at("dtype");
      const std::size_t width = dtype == "u8" ? 1 : 4;
      const fs::path payload = dir / (stem + ".bin");
      if (fs::exists(payload) && fs::file_size(payload) != elements * width)
        out.problems.push_back("size mismatch: " + stem + ".bin expected " + std::to_string(elements * width) +
                               " bytes, actual " + std::to_string(fs::file_size(payload)));
    } catch (const std::exception& e) {
      out.problems.push_back("unreadable sidecar " + stem + ": " + e.what());
    }
  };
  if (config.stages.query) {
    const std::size_t total = config.n_near + config.n_uniform;
    for (const char* stem : {"query_points", "query_sdf", "query_sigma", "query_provenance"}) check_rows(stem, total);
  }
  if (config.stages.surface) {
    check_rows("surface_random", config.surface_uniform_count());
    check_rows("surface_sharp", config.surface_sharp_count());
    check_rows("fps_random", config.fps_uniform);
    check_rows("fps_sharp", config.fps_sharp);
  }
  try {
    const auto cams = read_json(dir / "cameras.json").at("cameras").size();
    if (cams != config.camera_count)
      out.problems.push_back("count mismatch: cameras expected " + std::to_string(config.camera_count) + ", actual " +
                             std::to_string(cams));
  } catch (const std::exception& e) {
    out.problems.push_back(std::string("cannot read cameras.json: ") + e.what());
  }
  if (config.stages.render) {
    std::size_t views = 0;
    if (fs::is_directory(dir / "renders"))
      for (const auto& entry : fs::directory_iterator(dir / "renders"))
        views += entry.path().filename().string().ends_with("_mask.png");
    if (views != config.camera_count)
      out.problems.push_back("count mismatch: views expected " + std::to_string(config.camera_count) + ", actual " +
                             std::to_string(views));
  }
  return out;
}

}  // namespace forge
