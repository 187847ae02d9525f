#pragma once

#include "forge/bvh.hpp"
#include "forge/camera.hpp"
#include "forge/io.hpp"
#include "forge/parallel.hpp"
#include "forge/png.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

namespace forge {

struct RenderBuffers {
  int width = 0;
  int height = 0;
  std::vector<double> depth;  // distance from the eye along the ray, +inf on miss
  std::vector<Vec3> normal;   // world-space face normal, zero on miss
  std::vector<std::uint8_t> mask;

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  double coverage() const {
    std::size_t hits = 0;
    for (auto m : mask) hits += m;
    return static_cast<double>(hits) / static_cast<double>(mask.size());
  }
};

/// Unit direction of the primary ray through pixel (x, y); row 0 is the top.
inline Vec3 pixel_ray(const CameraSpec& spec, const Mat4& world_to_camera, double x, double y) {
  const double tan_half = std::tan(deg_to_rad(spec.fov_deg) / 2.0);
  const double aspect = static_cast<double>(spec.width) / spec.height;
  const double px = (2.0 * (x + 0.5) / spec.width - 1.0) * tan_half * aspect;
  const double py = (1.0 - 2.0 * (y + 0.5) / spec.height) * tan_half;
  const Eigen::Matrix3d r = world_to_camera.block<3, 3>(0, 0);
  // Camera axes in world space are the rows of r.
  return (px * r.row(0).transpose() + py * r.row(1).transpose() - r.row(2).transpose()).normalized();
}

inline RenderBuffers render(const Bvh& bvh, const CameraSpec& spec) {
  RenderBuffers out;
  out.width = spec.width;
  out.height = spec.height;
  const std::size_t n = static_cast<std::size_t>(spec.width) * spec.height;
  out.depth.assign(n, kInf);
  out.normal.assign(n, Vec3::Zero());
  out.mask.assign(n, 0);
  const Mat4 w2c = look_at_matrix(spec);
  const Mesh& mesh = bvh.mesh();
  parallel_for(static_cast<std::size_t>(spec.height), [&](std::size_t y0, std::size_t y1) {
    for (auto y = static_cast<int>(y0); y < static_cast<int>(y1); ++y)
      for (int x = 0; x < spec.width; ++x) {
        const Vec3 dir = pixel_ray(spec, w2c, x, y);
        const RayCast hit = bvh.raycast(spec.position, dir);
        if (!hit.hit) continue;
        const std::size_t i = out.index(x, y);
        out.depth[i] = hit.t;
        out.normal[i] = mesh.face_normal(hit.face);
        out.mask[i] = 1;
      }
  });
  return out;
}

/// Depth range covering a bound sphere around the target.
inline std::pair<double, double> depth_range(const CameraSpec& spec, double bound_radius = kUnitCubeBoundRadius) {
  return {std::max(0.0, spec.radius - bound_radius), spec.radius + bound_radius};
}

inline std::uint8_t encode_normal_component(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp((v + 1.0) / 2.0, 0.0, 1.0) * 255.0));
}

inline std::uint16_t encode_depth(double d, double near, double far) {
  return static_cast<std::uint16_t>(std::lround(std::clamp((d - near) / (far - near), 0.0, 1.0) * 65535.0));
}

inline double decode_depth(std::uint16_t v, double near, double far) { return near + (far - near) * v / 65535.0; }

struct ViewFiles {
  std::filesystem::path mask, normal, depth, meta;
};

inline std::string view_stem(std::size_t view) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "view_%03zu", view);
  return buf;
}

/// Writes mask, normal and depth PNGs plus a JSON sidecar. Depth misses are 0
/// and the mask tells them apart from hits at the near plane.
inline ViewFiles write_images(const RenderBuffers& buf, const CameraSpec& spec, const std::filesystem::path& dir,
                              std::size_t view) {
  if (!std::filesystem::is_directory(dir)) throw Error("output directory does not exist: " + dir.string());
  const std::string stem = view_stem(view);
  const ViewFiles files{dir / (stem + "_mask.png"), dir / (stem + "_normal.png"), dir / (stem + "_depth.png"),
                        dir / (stem + ".json")};
  const auto [near, far] = depth_range(spec);

  Image mask = make_image(buf.width, buf.height, 1, 8);
  Image normal = make_image(buf.width, buf.height, 3, 8);
  Image depth = make_image(buf.width, buf.height, 1, 16);
  for (int y = 0; y < buf.height; ++y)
    for (int x = 0; x < buf.width; ++x) {
      const std::size_t i = buf.index(x, y);
      if (!buf.mask[i]) continue;
      mask.at(x, y) = 255;
      for (int c = 0; c < 3; ++c) normal.at(x, y, c) = encode_normal_component(buf.normal[i][c]);
      depth.at(x, y) = encode_depth(buf.depth[i], near, far);
    }
  write_png(files.mask, mask);
  write_png(files.normal, normal);
  write_png(files.depth, depth);
  write_json(files.meta, {{"view", view},
                          {"camera", camera_json(spec)},
                          {"depth", {{"near", near}, {"far", far}, {"encoding", "u16 linear over [near, far], 0 on miss"}}},
                          {"normal", {{"encoding", "rgb8 (n + 1) / 2 * 255, world space"}}},
                          {"coverage", buf.coverage()}});
  return files;
}

}  // namespace forge
