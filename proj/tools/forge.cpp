#include "forge/flowmatch.hpp"
#include "forge/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

using forge::PipelineConfig;

constexpr int kExitOk = 0;
constexpr int kExitAssetFailed = 1;
constexpr int kExitUsage = 2;

struct UsageError : forge::Error {
  using forge::Error::Error;
};

struct ConfigFlags {
  std::string config_file;
  std::optional<int> grid;
  std::optional<std::size_t> views;
  std::string res;
  std::optional<std::uint64_t> seed;
  std::optional<double> canonical_fov;
  std::optional<std::size_t> n_near, n_uniform, surface;
  std::string composition;
  bool no_render = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "JSON config file; flags override its values");
    cmd->add_option("--grid", grid, "SDF grid resolution per axis");
    cmd->add_option("--views", views, "condition camera count");
    cmd->add_option("--res", res, "render resolution WxH");
    cmd->add_option("--seed", seed, "global seed");
    cmd->add_option("--canonical-fov", canonical_fov, "also emit a fixed-fov rig with this fov (degrees)");
    cmd->add_option("--near", n_near, "near-surface query count");
    cmd->add_option("--uniform", n_uniform, "uniform-volume (or on-surface) query count");
    cmd->add_option("--surface", surface, "total surface sample count");
    cmd->add_option("--composition", composition, "query set: near+uniform or near+surface");
    cmd->add_flag("--no-render", no_render, "skip condition renders");
  }

  PipelineConfig resolve() const {
    PipelineConfig c;
    try {
      if (!config_file.empty()) c = forge::config_from_json(forge::read_json(config_file));
      nlohmann::json overrides = nlohmann::json::object();
      if (grid) overrides["grid_resolution"] = *grid;
      if (views) overrides["camera_count"] = *views;
      if (seed) overrides["seed"] = *seed;
      if (canonical_fov) overrides["canonical_fov_deg"] = *canonical_fov;
      if (n_near) overrides["n_near"] = *n_near;
      if (n_uniform) overrides["n_uniform"] = *n_uniform;
      if (surface) overrides["surface_total"] = *surface;
      if (!composition.empty()) overrides["query_composition"] = composition;
      if (!res.empty()) {
        int w = 0, h = 0;
        char x = 0, extra = 0;
        if (std::sscanf(res.c_str(), "%d%c%d%c", &w, &x, &h, &extra) != 3 || (x != 'x' && x != 'X'))
          throw forge::Error("--res expects WxH, got '" + res + "'");
        overrides["render_width"] = w;
        overrides["render_height"] = h;
      }
      if (no_render) overrides["stages"] = {{"render", false}};
      c = forge::config_from_json(overrides, c);
      // Shrinking the surface total below the default fps budget scales the budget down with it.
      if (surface && config_file.empty()) {
        c.fps_uniform = std::min(c.fps_uniform, c.surface_uniform_count());
        c.fps_sharp = std::min(c.fps_sharp, c.surface_sharp_count());
      }
      c.validate();
    } catch (const forge::Error& e) {
      throw UsageError(e.what());
    }
    return c;
  }
};

int run_process(const std::string& input, const std::string& out, const std::string& id, const PipelineConfig& config) {
  const std::string key = std::filesystem::path(input).filename().string();
  const std::string asset_id = id.empty() ? forge::sanitize_asset_id(key) : forge::sanitize_asset_id(id);
  const forge::AssetResult r =
      forge::process_asset(input, out, config, asset_id, forge::derive_seed(config.seed, key));
  if (!r.ok) {
    std::cerr << "forge: " << asset_id << " failed in stage '" << r.failed_stage << "': " << r.error << "\n";
    return kExitAssetFailed;
  }
  std::cout << r.directory.string() << "\n";
  return kExitOk;
}

int run_batch(const std::string& manifest, const std::string& out, unsigned workers, const PipelineConfig& config) {
  forge::BatchSummary s;
  try {
    s = forge::run_batch(manifest, out, config, workers);
  } catch (const forge::Error& e) {
    throw UsageError(e.what());
  }
  for (const auto& a : s.assets)
    if (!a.ok) std::cerr << "forge: " << a.asset_id << " failed in stage '" << a.failed_stage << "': " << a.error << "\n";
  std::cout << "ok " << s.ok << " failed " << s.failed << "\n";
  return s.failed == 0 ? kExitOk : kExitAssetFailed;
}

int run_cameras(std::size_t n, std::uint64_t seed, bool json, bool texture) {
  forge::ConditionRigOptions opts;
  opts.count = n;
  const forge::CameraRig rig = texture ? forge::build_texture_rig(seed) : forge::build_condition_rig(seed, opts);
  if (json) {
    std::cout << forge::rig_json(rig).dump(2) << "\n";
    return kExitOk;
  }
  for (std::size_t i = 0; i < rig.cameras.size(); ++i) {
    const auto& c = rig.cameras[i];
    std::printf("%3zu  pos %+.6f %+.6f %+.6f  fov %.4f  r %.6f\n", i, c.position.x(), c.position.y(), c.position.z(),
                c.fov_deg, c.radius);
  }
  return kExitOk;
}

int run_validate(const std::string& dir, const std::string& config_file) {
  std::optional<PipelineConfig> expected;
  if (!config_file.empty()) {
    try {
      expected = forge::config_from_json(forge::read_json(config_file));
    } catch (const forge::Error& e) {
      throw UsageError(e.what());
    }
  }
  const forge::ValidationResult v = forge::validate_record(dir, expected);
  std::cout << "closed " << v.report.is_closed << " manifold " << v.report.is_edge_manifold << " components "
            << v.report.connected_components << " euler " << v.report.euler_characteristic << "\n";
  for (const std::string& p : v.problems) std::cout << "problem: " << p << "\n";
  std::cout << (v.ok() ? "valid" : "invalid") << "\n";
  return v.ok() ? kExitOk : kExitAssetFailed;
}

int run_flow_demo(int steps, double lr, const std::string& trace_path, const std::string& samples_path,
                  const std::string& arch, const std::string& coupling, std::uint64_t seed) {
  using namespace forge::flow;
  if (arch != "affine" && arch != "mlp") throw UsageError("--arch must be affine or mlp");
  if (coupling != "ot" && coupling != "independent") throw UsageError("--coupling must be ot or independent");
  VelocityModel model(arch == "affine" ? Architecture::kAffine : Architecture::kTanhMlp, 2, 0, 16);
  if (arch == "mlp") model.randomize(forge::RngStream(seed, forge::StreamId::kFlow));
  Vector target(2);
  target << 3.0, 0.0;
  const GaussianPairSampler data =
      GaussianPairSampler::standard_to(target, coupling == "ot" ? Coupling::kOptimalTransport : Coupling::kIndependent);
  TrainConfig cfg;
  cfg.steps = steps;
  cfg.lr = lr;
  cfg.seed = seed;
  const TrainResult r = train_toy(model, data, cfg);

  std::ofstream trace(trace_path);
  if (!trace) throw forge::Error("cannot write " + trace_path);
  trace << "step,loss\n";
  for (std::size_t i = 0; i < r.trace.size(); ++i) trace << i << ',' << r.trace[i] << '\n';

  const Matrix noise = data.noise(1000, forge::RngStream(seed + 1, forge::StreamId::kFlow), 0);
  const Matrix samples = euler_sample(r.model, noise, 100);
  if (!samples_path.empty()) {
    std::ofstream out(samples_path);
    if (!out) throw forge::Error("cannot write " + samples_path);
    out << "x0,y0,x1,y1\n";
    for (Eigen::Index i = 0; i < samples.rows(); ++i)
      out << noise(i, 0) << ',' << noise(i, 1) << ',' << samples(i, 0) << ',' << samples(i, 1) << '\n';
  }
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  std::printf("initial loss %.6f final loss %.6f ratio %.4f sample mean (%.4f, %.4f)\n", r.trace.front(),
              r.trace.back(), r.trace.back() / r.trace.front(), mean[0], mean[1]);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"forge: 3D asset preprocessing for shape-model training"};
  app.require_subcommand(1);

  auto* process = app.add_subcommand("process", "preprocess one mesh into a dataset record");
  std::string input, out, id;
  ConfigFlags process_flags;
  process->add_option("--input", input, "mesh file (obj, stl, ply)")->required();
  process->add_option("--out", out, "output root; the record goes to <out>/<asset id>")->required();
  process->add_option("--id", id, "asset id (default: input file name)");
  process_flags.attach(process);

  auto* batch = app.add_subcommand("batch", "preprocess every mesh listed in a manifest");
  std::string manifest, batch_out;
  unsigned workers = 1;
  ConfigFlags batch_flags;
  batch->add_option("--manifest", manifest, "text file with one mesh path per line")->required();
  batch->add_option("--out", batch_out, "output root")->required();
  batch->add_option("--workers", workers, "concurrent assets")->check(CLI::PositiveNumber);
  batch_flags.attach(batch);

  auto* cameras = app.add_subcommand("cameras", "print a camera rig");
  std::size_t n_cameras = 150;
  std::uint64_t camera_seed = 0;
  bool as_json = false, texture = false;
  cameras->add_option("--n", n_cameras, "camera count")->check(CLI::PositiveNumber);
  cameras->add_option("--seed", camera_seed, "seed");
  cameras->add_flag("--json", as_json, "emit JSON");
  cameras->add_flag("--texture", texture, "texture rig (96 views) instead of the condition rig");

  auto* validate = app.add_subcommand("validate", "re-check a dataset record");
  std::string record_dir, validate_config;
  validate->add_option("record", record_dir, "record directory")->required();
  validate->add_option("--config", validate_config, "check counts against this config instead of the record's");

  auto* flow = app.add_subcommand("flow-demo", "train the toy flow-matching model");
  int steps = 500;
  double lr = 0.05;
  std::string trace_path = "trace.csv", samples_path, arch = "affine", coupling = "ot";
  std::uint64_t flow_seed = 0;
  flow->add_option("--steps", steps, "training steps")->check(CLI::NonNegativeNumber);
  flow->add_option("--lr", lr, "learning rate");
  flow->add_option("--out", trace_path, "loss trace CSV");
  flow->add_option("--samples", samples_path, "Euler samples CSV");
  flow->add_option("--arch", arch, "affine or mlp");
  flow->add_option("--coupling", coupling, "ot or independent");
  flow->add_option("--seed", flow_seed, "seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*process) return run_process(input, out, id, process_flags.resolve());
    if (*batch) return run_batch(manifest, batch_out, workers, batch_flags.resolve());
    if (*cameras) return run_cameras(n_cameras, camera_seed, as_json, texture);
    if (*validate) return run_validate(record_dir, validate_config);
    if (*flow) return run_flow_demo(steps, lr, trace_path, samples_path, arch, coupling, flow_seed);
  } catch (const UsageError& e) {
    std::cerr << "forge: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "forge: " << e.what() << "\n";
    return kExitAssetFailed;
  }
  return kExitUsage;
}
