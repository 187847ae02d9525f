#include "forge/mesh_io.hpp"
#include "forge/pipeline.hpp"
#include "forge/primitives.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <string>

namespace fs = std::filesystem;
using namespace forge;

namespace {

PipelineConfig small_config() {
  PipelineConfig c;
  c.grid_resolution = 40;
  c.n_near = 1200;
  c.n_uniform = 800;
  c.surface_total = 1000;
  c.fps_uniform = 64;
  c.fps_sharp = 32;
  c.camera_count = 6;
  c.render_width = 32;
  c.render_height = 24;
  c.seed = 11;
  return c;
}

// Three small meshes on disk plus a manifest listing them.
fs::path write_assets(const fs::path& dir) {
  fs::create_directories(dir / "meshes");
  write_obj(dir / "meshes" / "ico.obj", make_icosphere(0.6, 2));
  write_stl(dir / "meshes" / "slab.stl", make_box(Vec3(-1.0, -0.4, -0.1), Vec3(1.0, 0.4, 0.1)));
  write_ply(dir / "meshes" / "torus.ply", make_torus(0.6, 0.2, 24, 12));
  std::ofstream(dir / "manifest.txt") << "# test assets\nmeshes/ico.obj\n\nmeshes/slab.stl\nmeshes/torus.ply\n";
  return dir / "manifest.txt";
}

nlohmann::json artifact_hashes(const fs::path& record) { return read_json(record / "manifest.json").at("artifacts"); }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(FORGE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, JsonRoundTrip) {
  PipelineConfig c = small_config();
  c.canonical_fov_deg = 40.0;
  c.composition = QueryComposition::kNearSurface;
  c.stages.render = false;
  const PipelineConfig back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(config_from_json({{"grid_res", 64}}), Error);
  EXPECT_THROW(config_from_json({{"stages", {{"paint", true}}}}), Error);
  EXPECT_THROW(config_from_json({{"query_composition", "near+far"}}), Error);
  PipelineConfig c = small_config();
  c.fps_uniform = c.surface_uniform_count() + 1;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Config, DefaultCounts) {
  const PipelineConfig c;
  EXPECT_EQ(c.n_near, 249'856u);
  EXPECT_EQ(c.n_uniform, 249'856u);
  EXPECT_EQ(c.surface_total, 124'928u);
  EXPECT_EQ(c.surface_uniform_count() + c.surface_sharp_count(), 124'928u);
  EXPECT_EQ(c.camera_count, 150u);
  EXPECT_NO_THROW(c.validate());
}

TEST(Process, WritesValidRecord) {
  const fs::path dir = oracle::temp_dir("process");
  write_assets(dir);
  const PipelineConfig c = small_config();
  const AssetResult r = process_asset(dir / "meshes" / "slab.stl", dir / "out", c, "slab", 5);
  ASSERT_TRUE(r.ok) << r.failed_stage << ": " << r.error;
  EXPECT_EQ(r.directory, dir / "out" / "slab");
  EXPECT_FALSE(fs::exists(dir / "out" / ".staging-slab"));

  const auto counts = r.record.at("counts");
  EXPECT_EQ(counts.at("query"), 2000);
  EXPECT_EQ(counts.at("near_surface"), 1200);
  EXPECT_EQ(counts.at("uniform_volume"), 800);
  EXPECT_EQ(counts.at("surface_random"), 500);
  EXPECT_EQ(counts.at("surface_sharp"), 500);
  EXPECT_EQ(counts.at("fps_random"), 64);
  EXPECT_EQ(counts.at("views"), 6);
  // A box has twelve sharp edges, so the sharp sampler must not fall back.
  EXPECT_FALSE(r.record.at("sharp").at("fallback_to_uniform").get<bool>());
  EXPECT_TRUE(r.record.at("watertight").at("is_closed").get<bool>());

  const ValidationResult v = validate_record(r.directory);
  EXPECT_TRUE(v.ok()) << (v.problems.empty() ? "" : v.problems.front());
  EXPECT_TRUE(v.report.is_edge_manifold);

  const Image mask = read_png(r.directory / "renders" / "view_000_mask.png");
  EXPECT_EQ(mask.width, 32);
  EXPECT_EQ(mask.height, 24);
}

TEST(Process, SdfSignsMatchWatertightMesh) {
  const fs::path dir = oracle::temp_dir("process_sdf");
  write_obj(dir / "ico.obj", make_icosphere(0.5, 3));
  const AssetResult r = process_asset(dir / "ico.obj", dir / "out", small_config(), "ico", 3);
  ASSERT_TRUE(r.ok) << r.error;
  const auto pts = from_little_endian_bytes<float>(read_bytes(r.directory / "query_points.bin"));
  const auto sdf = from_little_endian_bytes<float>(read_bytes(r.directory / "query_sdf.bin"));
  ASSERT_EQ(pts.size(), 3 * sdf.size());
  // The normalized sphere has radius 0.5; the grid-resolution surface is within a cell of it.
  const double cell = 1.1 / 39.0;
  for (std::size_t i = 0; i < sdf.size(); ++i) {
    const Vec3 p(pts[3 * i], pts[3 * i + 1], pts[3 * i + 2]);
    EXPECT_NEAR(sdf[i], p.norm() - 0.5, cell) << i;
  }
}

TEST(Process, DeterministicAcrossRuns) {
  const fs::path dir = oracle::temp_dir("process_det");
  write_assets(dir);
  const PipelineConfig c = small_config();
  const AssetResult a = process_asset(dir / "meshes" / "torus.ply", dir / "a", c, "torus", 99);
  const AssetResult b = process_asset(dir / "meshes" / "torus.ply", dir / "b", c, "torus", 99);
  ASSERT_TRUE(a.ok && b.ok);
  EXPECT_EQ(artifact_hashes(a.directory), artifact_hashes(b.directory));
  const AssetResult other = process_asset(dir / "meshes" / "torus.ply", dir / "c", c, "torus", 100);
  ASSERT_TRUE(other.ok);
  EXPECT_NE(artifact_hashes(a.directory).at("query_points.bin"),
            artifact_hashes(other.directory).at("query_points.bin"));
}

TEST(Process, UnreadableInputLeavesNoDirectory) {
  const fs::path dir = oracle::temp_dir("process_bad");
  std::ofstream(dir / "broken.obj") << "v 0 0 0\nv 1 0\nf 1 2 3\n";
  const AssetResult missing = process_asset(dir / "nope.obj", dir / "out", small_config(), "nope", 1);
  EXPECT_FALSE(missing.ok);
  EXPECT_EQ(missing.failed_stage, "load");
  EXPECT_FALSE(missing.error.empty());
  const AssetResult broken = process_asset(dir / "broken.obj", dir / "out", small_config(), "broken", 1);
  EXPECT_FALSE(broken.ok);
  EXPECT_EQ(broken.record.at("status"), "failed");
  EXPECT_FALSE(fs::exists(dir / "out" / "nope"));
  EXPECT_FALSE(fs::exists(dir / "out" / "broken"));
  EXPECT_FALSE(fs::exists(dir / "out" / ".staging-broken"));
}

TEST(Process, OptionalOutputs) {
  const fs::path dir = oracle::temp_dir("process_opt");
  write_obj(dir / "ico.obj", make_icosphere(0.5, 2));
  PipelineConfig c = small_config();
  c.canonical_fov_deg = 30.0;
  c.composition = QueryComposition::kNearSurface;
  c.stages.texture_rig = false;
  c.stages.save_grid = true;
  const AssetResult r = process_asset(dir / "ico.obj", dir / "out", c, "ico", 8);
  ASSERT_TRUE(r.ok) << r.error;
  EXPECT_TRUE(fs::exists(r.directory / "cameras_canonical.json"));
  EXPECT_TRUE(fs::is_directory(r.directory / "renders_canonical"));
  EXPECT_FALSE(fs::exists(r.directory / "texture_rig.json"));
  EXPECT_EQ(r.record.at("counts").at("on_surface"), 800);
  EXPECT_EQ(r.record.at("counts").at("uniform_volume"), 0);
  for (const auto& cam : read_json(r.directory / "cameras_canonical.json").at("cameras"))
    EXPECT_DOUBLE_EQ(cam.at("fov_deg").get<double>(), 30.0);
  const SdfGrid grid = read_sdf_grid(r.directory, "sdf_grid");
  EXPECT_EQ(grid.resolution[0], 40);
  EXPECT_TRUE(validate_record(r.directory).ok());
}

TEST(Batch, WorkerCountDoesNotChangeArtifacts) {
  const fs::path dir = oracle::temp_dir("batch_workers");
  const fs::path manifest = write_assets(dir);
  const PipelineConfig c = small_config();
  const BatchSummary one = run_batch(manifest, dir / "w1", c, 1);
  const BatchSummary three = run_batch(manifest, dir / "w3", c, 3);
  ASSERT_EQ(one.ok, 3u);
  ASSERT_EQ(three.ok, 3u);
  for (const auto& r : one.assets) EXPECT_EQ(artifact_hashes(dir / "w1" / r.asset_id), artifact_hashes(dir / "w3" / r.asset_id)) << r.asset_id;
  EXPECT_EQ(read_json(dir / "w3" / "summary.json").at("ok"), 3);
}

TEST(Batch, CorruptAssetIsIsolated) {
  const fs::path dir = oracle::temp_dir("batch_corrupt");
  write_assets(dir);
  std::ofstream(dir / "meshes" / "corrupt.stl") << "solid x\nfacet normal 0 0\n";
  std::ofstream(dir / "m.txt") << "meshes/ico.obj\nmeshes/corrupt.stl\nmeshes/slab.stl\n";
  const BatchSummary s = run_batch(dir / "m.txt", dir / "out", small_config(), 2);
  EXPECT_EQ(s.ok, 2u);
  EXPECT_EQ(s.failed, 1u);
  EXPECT_FALSE(s.assets[1].ok);
  EXPECT_EQ(s.assets[1].failed_stage, "load");
  const auto summary = read_json(dir / "out" / "summary.json");
  EXPECT_EQ(summary.at("failed"), 1);
  EXPECT_EQ(summary.at("assets").at(1).at("status"), "failed");
  EXPECT_FALSE(fs::exists(dir / "out" / s.assets[1].asset_id));
}

TEST(Batch, ManifestErrors) {
  const fs::path dir = oracle::temp_dir("batch_manifest");
  std::ofstream(dir / "empty.txt") << "# nothing\n\n";
  EXPECT_THROW(run_batch(dir / "empty.txt", dir / "out", small_config(), 1), Error);
  std::ofstream(dir / "dup.txt") << "a.obj\n./a.obj\n";
  EXPECT_THROW(read_batch_manifest(dir / "dup.txt"), Error);
  EXPECT_THROW(read_batch_manifest(dir / "absent.txt"), Error);
}

TEST(Validate, DetectsTampering) {
  const fs::path dir = oracle::temp_dir("validate");
  write_obj(dir / "ico.obj", make_icosphere(0.5, 2));
  const AssetResult r = process_asset(dir / "ico.obj", dir / "out", small_config(), "ico", 4);
  ASSERT_TRUE(r.ok);
  ASSERT_TRUE(validate_record(r.directory).ok());

  const fs::path sdf = r.directory / "query_sdf.bin";
  fs::resize_file(sdf, fs::file_size(sdf) - 4);
  const ValidationResult v = validate_record(r.directory);
  ASSERT_FALSE(v.ok());
  bool named = false, sized = false;
  for (const auto& p : v.problems) {
    named |= p.starts_with("hash mismatch: query_sdf.bin");
    sized |= p.starts_with("size mismatch: query_sdf.bin");
  }
  EXPECT_TRUE(named);
  EXPECT_TRUE(sized);

  std::ofstream(r.directory / "stray.txt") << "x";
  bool stray = false;
  for (const auto& p : validate_record(r.directory).problems) stray |= p == "unlisted file: stray.txt";
  EXPECT_TRUE(stray);
}

TEST(Validate, ExpectedConfigMismatch) {
  const fs::path dir = oracle::temp_dir("validate_cfg");
  write_obj(dir / "ico.obj", make_icosphere(0.5, 2));
  const AssetResult r = process_asset(dir / "ico.obj", dir / "out", small_config(), "ico", 4);
  ASSERT_TRUE(r.ok);
  PipelineConfig other = small_config();
  other.n_near = 1300;
  other.camera_count = 7;
  const ValidationResult v = validate_record(r.directory, other);
  bool query = false, cams = false;
  for (const auto& p : v.problems) {
    query |= p == "count mismatch: query_points expected 2100, actual 2000";
    cams |= p == "count mismatch: cameras expected 7, actual 6";
  }
  EXPECT_TRUE(query);
  EXPECT_TRUE(cams);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = oracle::temp_dir("cli");
  const fs::path manifest = write_assets(dir);
  const std::string small = " --grid 32 --views 3 --res 16x16 --near 300 --uniform 300 --surface 400 --seed 2";
  const std::string mesh = (dir / "meshes" / "ico.obj").string();

  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("process --input " + mesh), 2);
  EXPECT_EQ(run_cli("process --input " + mesh + " --out " + (dir / "o").string() + " --res 16by16"), 2);
  EXPECT_EQ(run_cli("process --input " + mesh + " --out " + (dir / "o").string() + " --grid 4"), 2);
  EXPECT_EQ(run_cli("process --input " + (dir / "missing.obj").string() + " --out " + (dir / "o").string() + small), 1);
  EXPECT_EQ(run_cli("process --input " + mesh + " --out " + (dir / "o").string() + small), 0);
  EXPECT_TRUE(fs::exists(dir / "o" / "ico.obj" / "manifest.json"));
  EXPECT_EQ(run_cli("validate " + (dir / "o" / "ico.obj").string()), 0);

  std::ofstream(dir / "bad.txt") << "meshes/ico.obj\nmeshes/none.obj\n";
  EXPECT_EQ(run_cli("batch --manifest " + (dir / "bad.txt").string() + " --out " + (dir / "b").string() + small), 1);
  EXPECT_EQ(run_cli("batch --manifest " + manifest.string() + " --out " + (dir / "b").string() + small + " --workers 2"), 0);
  std::ofstream(dir / "empty.txt") << "\n";
  EXPECT_EQ(run_cli("batch --manifest " + (dir / "empty.txt").string() + " --out " + (dir / "b").string()), 2);

  fs::resize_file(dir / "o" / "ico.obj" / "cameras.json", 10);
  EXPECT_EQ(run_cli("validate " + (dir / "o" / "ico.obj").string()), 1);

  std::ofstream(dir / "cfg.json") << R"({"grid_resolution": 32, "bogus": 1})";
  EXPECT_EQ(run_cli("process --input " + mesh + " --out " + (dir / "o").string() + " --config " + (dir / "cfg.json").string()), 2);

  EXPECT_EQ(run_cli("cameras --n 5 --seed 3 --json"), 0);
  EXPECT_EQ(run_cli("flow-demo --steps 20 --out " + (dir / "trace.csv").string()), 0);
  std::ifstream trace(dir / "trace.csv");
  std::size_t lines = 0;
  for (std::string line; std::getline(trace, line);) ++lines;
  EXPECT_EQ(lines, 22u);
}

TEST(Cli, BatchSeedsDependOnRelativePath) {
  // Moving the whole dataset directory must not change any artifact.
  const fs::path dir = oracle::temp_dir("cli_move");
  write_assets(dir / "one");
  fs::create_directories(dir / "two");
  fs::copy(dir / "one", dir / "two" / "nested", fs::copy_options::recursive);
  const std::string small = " --grid 24 --views 2 --res 8x8 --near 100 --uniform 100 --surface 200 --seed 9";
  ASSERT_EQ(run_cli("batch --manifest " + (dir / "one" / "manifest.txt").string() + " --out " + (dir / "a").string() + small), 0);
  ASSERT_EQ(run_cli("batch --manifest " + (dir / "two" / "nested" / "manifest.txt").string() + " --out " + (dir / "b").string() + small), 0);
  for (const char* id : {"meshes_ico.obj", "meshes_slab.stl", "meshes_torus.ply"})
    EXPECT_EQ(artifact_hashes(dir / "a" / id), artifact_hashes(dir / "b" / id)) << id;
}
