#pragma once

#include "forge/geometry.hpp"
#include "forge/rng.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace forge {

using Mat4 = Eigen::Matrix4d;

/// Half-diagonal of the side-1 normalization cube.
inline const double kUnitCubeBoundRadius = std::sqrt(3.0) / 2.0;

struct CameraSpec {
  Vec3 position = Vec3::Zero();
  Vec3 target = Vec3::Zero();
  Vec3 up = Vec3::UnitY();
  double fov_deg = 40.0;
  double radius = 0.0;
  int width = 512;
  int height = 512;
};

enum class LightKind { kPoint, kHdr };

struct LightSpec {
  LightKind kind = LightKind::kHdr;
  Vec3 position = Vec3::Zero();  // point lights only
  double intensity = 0.0;        // point lights only
  int environment_id = -1;       // hdr only
};

struct ReferenceView {
  CameraSpec camera;
  LightSpec light;
  double elevation_deg = 0.0;
  double azimuth_deg = 0.0;
};

struct CameraRig {
  std::string kind;
  std::uint64_t seed = 0;
  Vec2 offset = Vec2::Zero();
  std::vector<CameraSpec> cameras;
  std::vector<ReferenceView> reference_views;
};

inline double radical_inverse(unsigned base, std::uint64_t i) {
  if (base < 2) throw Error("radical inverse base must be at least 2");
  const double inv_base = 1.0 / base;
  double factor = inv_base, result = 0.0;
  while (i > 0) {
    result += static_cast<double>(i % base) * factor;
    i /= base;
    factor *= inv_base;
  }
  return result;
}

inline double fractional(double x) { return x - std::floor(x); }

/// Hammersley points (i/n, radical_inverse(2, i)) shifted by offset modulo 1.
inline std::vector<Vec2> hammersley_2d(std::size_t n, const Vec2& offset = Vec2::Zero()) {
  std::vector<Vec2> pts(n);
  for (std::size_t i = 0; i < n; ++i)
    pts[i] = Vec2(fractional(static_cast<double>(i) / static_cast<double>(n) + offset.x()),
                  fractional(radical_inverse(2, i) + offset.y()));
  return pts;
}

inline Vec3 sphere_from_unit_square(const Vec2& ab) {
  const double z = 1.0 - 2.0 * ab.x();
  const double phi = 2.0 * std::numbers::pi * ab.y();
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return Vec3(r * std::cos(phi), r * std::sin(phi), z);
}

inline std::vector<Vec3> hammersley_sphere(std::size_t n, const Vec2& offset = Vec2::Zero()) {
  if (n == 0) throw Error("hammersley_sphere needs n >= 1");
  std::vector<Vec3> dirs;
  dirs.reserve(n);
  for (const Vec2& p : hammersley_2d(n, offset)) dirs.push_back(sphere_from_unit_square(p));
  return dirs;
}

/// Distance at which a sphere of bound_radius exactly fills the field of view.
inline double radius_for_fov(double fov_deg, double bound_radius = kUnitCubeBoundRadius) {
  if (!(fov_deg > 0.0 && fov_deg < 180.0)) throw Error("fov must lie in (0, 180) degrees");
  return bound_radius / std::sin(deg_to_rad(fov_deg) / 2.0);
}

/// Y-up unless the view direction is nearly vertical.
inline Vec3 choose_up(const Vec3& view_dir) {
  return std::abs(view_dir.normalized().dot(Vec3::UnitY())) > 0.999 ? Vec3::UnitZ() : Vec3::UnitY();
}

inline CameraSpec make_camera(const Vec3& direction, double fov_deg, double radius, int width, int height) {
  CameraSpec c;
  c.position = radius * direction.normalized();
  c.target = Vec3::Zero();
  c.up = choose_up(-direction);
  c.fov_deg = fov_deg;
  c.radius = radius;
  c.width = width;
  c.height = height;
  return c;
}

struct ConditionRigOptions {
  std::size_t count = 150;
  double fov_min_deg = 10.0;
  double fov_max_deg = 70.0;
  double bound_radius = kUnitCubeBoundRadius;
  int width = 512;
  int height = 512;
  std::optional<double> fixed_fov_deg;  // canonical rig: one fov for every camera
};

inline CameraRig build_condition_rig(std::uint64_t seed, const ConditionRigOptions& opts = {}) {
  if (opts.count == 0) throw Error("camera rig needs at least one camera");
  const RngStream rng(seed, StreamId::kCameras);
  CameraRig rig;
  rig.kind = opts.fixed_fov_deg ? "condition-canonical" : "condition";
  rig.seed = seed;
  Draws offset_draws = rng.at(0);
  rig.offset.x() = offset_draws.uniform();
  rig.offset.y() = offset_draws.uniform();
  const std::vector<Vec3> dirs = hammersley_sphere(opts.count, rig.offset);
  for (std::size_t i = 0; i < opts.count; ++i) {
    double fov = opts.fixed_fov_deg.value_or(0.0);
    if (!opts.fixed_fov_deg) fov = rng.at(i + 1).uniform(opts.fov_min_deg, opts.fov_max_deg);
    rig.cameras.push_back(make_camera(dirs[i], fov, radius_for_fov(fov, opts.bound_radius), opts.width, opts.height));
  }
  return rig;
}

/// Position on a y-up orbit; azimuth 0 looks from +z.
inline Vec3 orbit_position(double radius, double elevation_deg, double azimuth_deg) {
  const double e = deg_to_rad(elevation_deg), a = deg_to_rad(azimuth_deg);
  return radius * Vec3(std::cos(e) * std::sin(a), std::sin(e), std::cos(e) * std::cos(a));
}

struct TextureRigOptions {
  double fov_deg = 40.0;
  int width = 512;
  int height = 512;
  int azimuth_count = 24;
  double random_elevation_min_deg = -30.0;
  double random_elevation_max_deg = 70.0;
};

inline constexpr int kHdrEnvironmentCount = 8;
inline constexpr double kPointLightProbability = 0.3;

inline ReferenceView sample_reference_view(const RngStream& rng, std::uint64_t index = 0, const TextureRigOptions& opts = {}) {
  Draws d = rng.at(index);
  ReferenceView view;
  view.elevation_deg = d.uniform(-30.0, 70.0);
  view.azimuth_deg = d.uniform(0.0, 360.0);
  const double radius = radius_for_fov(opts.fov_deg);
  view.camera = make_camera(orbit_position(1.0, view.elevation_deg, view.azimuth_deg), opts.fov_deg, radius,
                            opts.width, opts.height);
  if (d.uniform() < kPointLightProbability) {
    view.light.kind = LightKind::kPoint;
    const Vec2 ab(d.uniform(), d.uniform());
    view.light.position = 2.0 * radius * sphere_from_unit_square(ab);
    view.light.intensity = d.uniform(0.5, 1.5);
  } else {
    view.light.kind = LightKind::kHdr;
    view.light.environment_id = static_cast<int>(d.next_u32() % kHdrEnvironmentCount);
  }
  return view;
}

inline CameraRig build_texture_rig(std::uint64_t random_elevation_seed, const TextureRigOptions& opts = {}) {
  const RngStream rng(random_elevation_seed, StreamId::kReference);
  CameraRig rig;
  rig.kind = "texture";
  rig.seed = random_elevation_seed;
  const double random_elevation = rng.at(0).uniform(opts.random_elevation_min_deg, opts.random_elevation_max_deg);
  const double radius = radius_for_fov(opts.fov_deg);
  const double step = 360.0 / opts.azimuth_count;
  for (double elevation : {-20.0, 0.0, 20.0, random_elevation})
    for (int k = 0; k < opts.azimuth_count; ++k)
      rig.cameras.push_back(make_camera(orbit_position(1.0, elevation, k * step), opts.fov_deg, radius, opts.width,
                                        opts.height));
  rig.reference_views.push_back(sample_reference_view(rng, 1, opts));
  return rig;
}

inline double elevation_deg(const CameraSpec& c) {
  const Vec3 d = (c.position - c.target).normalized();
  return rad_to_deg(std::asin(std::clamp(d.y(), -1.0, 1.0)));
}

inline double azimuth_deg(const CameraSpec& c) {
  const Vec3 d = c.position - c.target;
  const double a = rad_to_deg(std::atan2(d.x(), d.z()));
  return a < 0.0 ? a + 360.0 : a;
}

/// World-to-camera transform; the camera looks down -z.
inline Mat4 look_at_matrix(const CameraSpec& spec) {
  const Vec3 f = spec.target - spec.position;
  if (f.norm() == 0.0) throw Error("camera position coincides with its target");
  const Vec3 forward = f.normalized();
  const Vec3 side_raw = forward.cross(spec.up);
  if (side_raw.norm() < 1e-9 * spec.up.norm()) throw Error("camera up vector is parallel to the view direction");
  const Vec3 side = side_raw.normalized();
  const Vec3 up = side.cross(forward);
  Mat4 m = Mat4::Identity();
  m.block<1, 3>(0, 0) = side.transpose();
  m.block<1, 3>(1, 0) = up.transpose();
  m.block<1, 3>(2, 0) = -forward.transpose();
  m.block<3, 1>(0, 3) = -m.block<3, 3>(0, 0) * spec.position;
  return m;
}

inline nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

inline nlohmann::json camera_json(const CameraSpec& c) {
  return {{"position", vec_json(c.position)}, {"target", vec_json(c.target)}, {"up", vec_json(c.up)},
          {"fov_deg", c.fov_deg},            {"radius", c.radius},           {"width", c.width},
          {"height", c.height}};
}

inline nlohmann::json light_json(const LightSpec& l) {
  if (l.kind == LightKind::kPoint)
    return {{"kind", "point"}, {"position", vec_json(l.position)}, {"intensity", l.intensity}};
  return {{"kind", "hdr"}, {"environment_id", l.environment_id}};
}

inline nlohmann::json rig_json(const CameraRig& rig) {
  nlohmann::json j;
  j["kind"] = rig.kind;
  j["seed"] = rig.seed;
  j["offset"] = {rig.offset.x(), rig.offset.y()};
  j["cameras"] = nlohmann::json::array();
  for (const CameraSpec& c : rig.cameras) j["cameras"].push_back(camera_json(c));
  j["lights"] = nlohmann::json::array();
  for (const ReferenceView& v : rig.reference_views) {
    nlohmann::json view = {{"camera", camera_json(v.camera)},
                           {"light", light_json(v.light)},
                           {"elevation_deg", v.elevation_deg},
                           {"azimuth_deg", v.azimuth_deg}};
    j["lights"].push_back(view);
  }
  return j;
}

}  // namespace forge
