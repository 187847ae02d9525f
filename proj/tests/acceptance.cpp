// Prints one PASS/FAIL line per acceptance criterion; exits non-zero if any fail.

#include "forge/camera.hpp"
#include "forge/field.hpp"
#include "forge/flowmatch.hpp"
#include "forge/isosurface.hpp"
#include "forge/mesh_io.hpp"
#include "forge/pipeline.hpp"
#include "forge/primitives.hpp"
#include "forge/sampler.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;
using namespace forge;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Checks {
 public:
  void require(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  Outcome done(const std::string& summary) const {
    if (failures_.empty()) return {true, summary};
    std::string d = summary + "; failed: " + failures_.front();
    if (failures_.size() > 1) d += " (+" + std::to_string(failures_.size() - 1) + " more)";
    return {false, d};
  }

 private:
  std::vector<std::string> failures_;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome framing_law() {
  const double wide = radius_for_fov(70.0), narrow = radius_for_fov(10.0);
  Checks c;
  c.require(std::abs(wide - 1.51) <= 0.005, "r(70)");
  c.require(std::abs(narrow - 9.94) <= 0.01, "r(10)");
  return c.done(fmt("r(70)=%.4f r(10)=%.4f", wide, narrow));
}

Outcome default_pipeline() {
  const fs::path dir = oracle::temp_dir("acceptance_default");
  write_obj(dir / "sphere.obj", make_icosphere(0.4, 5));
  PipelineConfig config;
  config.grid_resolution = 128;
  config.render_width = 256;
  config.render_height = 256;
  config.seed = 2024;
  const auto t0 = std::chrono::steady_clock::now();
  const AssetResult r = process_asset(dir / "sphere.obj", dir / "out", config, "sphere", derive_seed(config.seed, "sphere.obj"));
  const double elapsed = seconds_since(t0);
  if (!r.ok) return {false, "stage " + r.failed_stage + ": " + r.error};
  const auto& n = r.record.at("counts");
  Checks c;
  c.require(n.at("near_surface") == 249'856, "near-surface count");
  c.require(n.at("uniform_volume") == 249'856, "uniform count");
  c.require(n.at("surface_random").get<std::size_t>() + n.at("surface_sharp").get<std::size_t>() == 124'928,
            "surface count");
  c.require(n.at("cameras") == 150 && n.at("views") == 150, "camera/view count");
  c.require(validate_record(r.directory).ok(), "record validation");
  c.require(elapsed < 120.0, "runtime");
  fs::remove_all(dir);
  return c.done(fmt("249856+249856 queries, 124928 surface, 150 views; %.1f s at 128^3/256^2 on %.0f hardware thread(s)",
                    elapsed, std::max(1u, std::thread::hardware_concurrency())));
}

Outcome watertighting() {
  Checks c;
  int closed = 0;
  const auto fixtures = oracle::defective_fixtures();
  for (const auto& f : fixtures) {
    const WatertightReport r = check_watertight(make_watertight(f.mesh, {128, 128, 128}));
    const bool ok = r.is_closed && r.is_edge_manifold && r.boundary_edge_count == 0 && r.face_count > 0;
    c.require(ok, f.name);
    closed += ok;
  }
  return c.done(fmt("%.0f/%.0f fixtures closed and edge-manifold at 128^3", closed, static_cast<double>(fixtures.size())));
}

Outcome sdf_oracle() {
  const Mesh sphere = make_icosphere(0.4, 5);
  const Bvh bvh(sphere);
  double worst = 0.0;
  std::size_t classified = 0, mismatched = 0;
  for (const Vec3& q : oracle::random_points(10'000, -1.0, 1.0, 4)) {
    worst = std::max(worst, std::abs(signed_distance(bvh, q) - (q.norm() - 0.4)));
    if (bvh.closest_point(q).distance <= 1e-4) continue;
    ++classified;
    mismatched += (bvh.winding_number(q) > 0.5) != (q.norm() < 0.4);
  }
  Checks c;
  c.require(sphere.face_count() >= 20'000, "face count");
  c.require(worst < 2e-3, "sdf error");
  c.require(mismatched == 0, "inside/outside");
  return c.done(fmt("%.0f faces, max |sdf error| %.2e, %.0f misclassified", static_cast<double>(sphere.face_count()),
                    worst, static_cast<double>(mismatched)) +
                " of " + std::to_string(classified));
}

Outcome marching_cubes_volume() {
  SdfGrid g{{128, 128, 128}, Aabb(Vec3::Constant(-1), Vec3::Constant(1)), {}};
  g.values.resize(std::size_t{128} * 128 * 128);
  for (int k = 0; k < 128; ++k)
    for (int j = 0; j < 128; ++j)
      for (int i = 0; i < 128; ++i) g.values[g.index(i, j, k)] = static_cast<float>(g.lattice_point(i, j, k).norm() - 0.3);
  const Mesh m = marching_cubes(g);
  const WatertightReport r = check_watertight(m);
  const double exact = 4.0 / 3.0 * std::numbers::pi * 0.027;
  const double rel = std::abs(m.signed_volume() - exact) / exact;
  Checks c;
  c.require(rel <= 0.01, "volume");
  c.require(r.euler_characteristic == 2, "euler");
  c.require(r.is_closed, "closed");
  return c.done(fmt("volume %.6f (exact %.6f, %.3f%% off)", m.signed_volume(), exact, 100 * rel) +
                ", euler " + std::to_string(r.euler_characteristic));
}

Outcome fps_equivalence() {
  std::mt19937_64 gen(77);
  Checks c;
  int ties = 0, matched = 0;
  for (int set = 0; set < 100; ++set) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 512)(gen);
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, std::min<std::size_t>(n, 64))(gen);
    std::vector<Vec3> pts;
    if (set % 4 == 0) {
      // Integer lattice points make equal distances common, exercising the tie-break.
      std::uniform_int_distribution<int> cell(0, 3);
      for (std::size_t i = 0; i < n; ++i) pts.emplace_back(cell(gen), cell(gen), cell(gen));
      ++ties;
    } else {
      std::uniform_real_distribution<double> u(-1, 1);
      for (std::size_t i = 0; i < n; ++i) pts.emplace_back(u(gen), u(gen), u(gen));
    }
    const std::size_t start = std::uniform_int_distribution<std::size_t>(0, n - 1)(gen);
    const bool same = farthest_point_sampling(pts, k, start) == oracle::fps(pts, k, start);
    c.require(same, "set " + std::to_string(set));
    matched += same;
  }
  return c.done(std::to_string(matched) + "/100 index sequences match, " + std::to_string(ties) + " sets with lattice ties");
}

/// Exact star discrepancy of a 2D point set in the unit square.
double star_discrepancy(const std::vector<Vec2>& pts) {
  std::vector<double> xs{1.0}, ys{1.0};
  for (const Vec2& p : pts) {
    xs.push_back(p.x());
    ys.push_back(p.y());
  }
  const auto n = static_cast<double>(pts.size());
  double d = 0.0;
  for (double x : xs)
    for (double y : ys) {
      std::size_t open = 0, closed = 0;
      for (const Vec2& p : pts) {
        open += p.x() < x && p.y() < y;
        closed += p.x() <= x && p.y() <= y;
      }
      d = std::max({d, closed / n - x * y, x * y - open / n});
    }
  return d;
}

Outcome hammersley() {
  Checks c;
  const std::map<std::uint64_t, double> expected{{0, 0.0}, {1, 0.5}, {2, 0.25}, {3, 0.75}, {5, 0.625}};
  for (const auto& [i, v] : expected) c.require(radical_inverse(2, i) == v, "radical_inverse(2, " + std::to_string(i) + ")");

  const CameraRig rig = build_condition_rig(2024);
  const std::vector<Vec2> square = hammersley_2d(rig.cameras.size(), rig.offset);
  for (std::size_t i = 0; i < square.size(); ++i)
    c.require((rig.cameras[i].position.normalized() - sphere_from_unit_square(square[i])).norm() < 1e-12,
              "rig direction " + std::to_string(i));
  const double rig_d = star_discrepancy(square);
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0, 1);
  double best_random = 1.0;
  int beaten = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Vec2> pts(rig.cameras.size());
    for (Vec2& p : pts) p = Vec2(u(gen), u(gen));
    const double d = star_discrepancy(pts);
    best_random = std::min(best_random, d);
    beaten += rig_d < d;
  }
  c.require(beaten == 100, "discrepancy dominance");
  return c.done(fmt("radical inverse exact; 150-point rig star discrepancy %.4f < best of 100 random %.4f (beats %.0f/100)",
                    rig_d, best_random, beaten));
}

Outcome flow_matching() {
  using namespace flow;
  const auto t0 = std::chrono::steady_clock::now();
  Checks c;
  std::mt19937_64 gen(8);
  std::normal_distribution<double> normal;
  double worst_grad = 0.0;
  for (Architecture arch : {Architecture::kAffine, Architecture::kTanhMlp}) {
    VelocityModel model(arch, 3, 2, 16);
    model.randomize(RngStream(3, StreamId::kFlow));
    FlowBatch b{Matrix(32, 3), Matrix(32, 3), Vector(32), Matrix(32, 2)};
    for (Eigen::Index i = 0; i < 32; ++i) {
      b.t[i] = std::uniform_real_distribution<double>(0, 1)(gen);
      for (int k = 0; k < 3; ++k) {
        b.x0(i, k) = normal(gen);
        b.x1(i, k) = 1.5 + normal(gen);
      }
      for (int k = 0; k < 2; ++k) b.cond(i, k) = normal(gen);
    }
    worst_grad = std::max(worst_grad, gradient_check(model, b));
  }
  c.require(worst_grad < 1e-4, "gradient check");

  Matrix x0(64, 2), x1(64, 2);
  for (Eigen::Index i = 0; i < 64; ++i)
    for (int k = 0; k < 2; ++k) {
      x0(i, k) = normal(gen);
      x1(i, k) = 3.0 + normal(gen);
    }
  const auto oracle_field = [&](const Matrix&, const Vector&, const Matrix&) { return Matrix(x1 - x0); };
  const double euler_err = (euler_sample(oracle_field, x0, 1) - x1).cwiseAbs().maxCoeff();
  c.require(euler_err <= 1e-12, "one-step Euler");

  Vector target(2);
  target << 3.0, 0.0;
  const GaussianPairSampler data = GaussianPairSampler::standard_to(target);
  TrainConfig cfg;
  cfg.seed = 1;
  const TrainResult r = train_toy(VelocityModel(Architecture::kAffine, 2), data, cfg);
  const double ratio = r.trace.back() / r.trace.front();
  const Matrix samples = euler_sample(r.model, data.noise(4000, RngStream(2, StreamId::kFlow), 0), 100);
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  const double mean_err = (mean.transpose() - target).norm();
  const double elapsed = seconds_since(t0);
  c.require(ratio <= 0.10, "loss ratio");
  c.require(mean_err <= 0.1, "sample mean");
  c.require(elapsed < 30.0, "runtime");
  return c.done(fmt("grad rel err %.1e, one-step Euler err %.1e, ", worst_grad, euler_err) +
                fmt("loss %.4f -> %.6f (%.4f of initial), ", r.trace.front(), r.trace.back(), ratio) +
                fmt("sample mean (%.3f, %.3f), %.2f s", mean[0], mean[1], elapsed));
}

Outcome kl_closed_form() {
  const double one = flow::kl_diag_gaussian(flow::Vector::Ones(1), flow::Vector::Zero(1));
  const double zero = flow::kl_diag_gaussian(flow::Vector::Zero(1), flow::Vector::Zero(1));
  Checks c;
  c.require(one == 0.5, "kl(1, 0)");
  c.require(zero == 0.0, "kl(0, 0)");
  return c.done(fmt("kl(1,0)=%.17g kl(0,0)=%.17g", one, zero));
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(FORGE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// Content hash of every file under root except run logs that carry timings.
std::map<std::string, std::string> tree_hashes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const std::string name = e.path().filename().string();
    if (name == "manifest.json" || name == "summary.json") continue;
    out[fs::relative(e.path(), root).generic_string()] = sha256_file(e.path());
  }
  return out;
}

Outcome batch_determinism() {
  const fs::path dir = oracle::temp_dir("acceptance_batch");
  fs::create_directories(dir / "assets");
  write_obj(dir / "assets" / "sphere.obj", make_icosphere(0.5, 3));
  write_stl(dir / "assets" / "slab.stl", make_box(Vec3(-1, -0.3, -0.1), Vec3(1, 0.3, 0.1)));
  write_ply(dir / "assets" / "torus.ply", make_torus(0.6, 0.2, 32, 16));
  write_obj(dir / "assets" / "patch.obj", oracle::flipped_patch());
  std::ofstream(dir / "manifest.txt") << "assets/sphere.obj\nassets/slab.stl\nassets/torus.ply\nassets/patch.obj\n";
  const std::string common = " --manifest " + (dir / "manifest.txt").string() +
                             " --grid 64 --views 12 --res 64x64 --near 20000 --uniform 20000 --surface 20000 --seed 31";
  const int a = run_cli("batch" + common + " --out " + (dir / "w1").string() + " --workers 1");
  const int b = run_cli("batch" + common + " --out " + (dir / "w4").string() + " --workers 4");
  if (a != 0 || b != 0) return {false, "forge batch exit codes " + std::to_string(a) + ", " + std::to_string(b)};
  const auto ha = tree_hashes(dir / "w1"), hb = tree_hashes(dir / "w4");
  std::size_t differing = 0;
  for (const auto& [name, h] : ha) differing += !hb.contains(name) || hb.at(name) != h;
  Checks c;
  c.require(ha.size() == hb.size(), "file sets");
  c.require(differing == 0, "content hashes");
  c.require(ha.size() > 4 * 20, "artifact count");
  fs::remove_all(dir);
  return c.done(std::to_string(ha.size()) + " artifacts compared across --workers 1 and 4, " + std::to_string(differing) +
                " differ");
}

Outcome texture_rig() {
  const CameraRig rig = build_texture_rig(2024);
  Checks c;
  c.require(rig.cameras.size() == 96, "camera count");
  std::map<long, std::set<long>> azimuths;
  for (const CameraSpec& cam : rig.cameras) {
    c.require(cam.width == 512 && cam.height == 512, "resolution");
    azimuths[std::lround(elevation_deg(cam) * 1e6)].insert(std::lround(azimuth_deg(cam) * 1e6));
  }
  for (long e : {-20L, 0L, 20L}) c.require(azimuths.contains(e * 1'000'000), "elevation " + std::to_string(e));
  std::set<long> expected;
  for (long k = 0; k < 24; ++k) expected.insert(k * 15'000'000);
  for (const auto& [e, az] : azimuths) c.require(az == expected, "azimuth set at elevation " + std::to_string(e / 1e6));

  const RngStream rng(2024, StreamId::kReference);
  int point = 0;
  for (std::uint64_t i = 0; i < 10'000; ++i) point += sample_reference_view(rng, i).light.kind == LightKind::kPoint;
  const double fraction = point / 10'000.0;
  c.require(std::abs(fraction - 0.30) <= 0.02, "point-light fraction");
  return c.done(std::to_string(rig.cameras.size()) + " cameras, " + std::to_string(azimuths.size()) +
                " elevations x 24 azimuths at 15 deg, " + fmt("point-light fraction %.4f", fraction));
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, framing_law},         {2, default_pipeline},   {3, watertighting}, {4, sdf_oracle},
      {5, marching_cubes_volume}, {6, fps_equivalence},  {7, hammersley},    {8, flow_matching},
      {9, kl_closed_form},      {10, batch_determinism}, {11, texture_rig}};
  int failed = 0;
  for (const auto& [id, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %2d: %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
