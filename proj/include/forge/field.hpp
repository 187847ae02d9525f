#pragma once

#include "forge/bvh.hpp"
#include "forge/parallel.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <fstream>
#include <vector>

namespace forge {

/// Interior points (winding number strictly above 0.5) are negative; ties
/// and exterior points are positive.
inline double signed_distance(const Bvh& bvh, const Vec3& q) {
  const ClosestPoint c = bvh.closest_point(q);
  if (c.distance == 0.0) return 0.0;
  return bvh.winding_number(q, c.distance) > 0.5 ? -c.distance : c.distance;
}

using GridResolution = std::array<int, 3>;

/// Dense scalar field sampled at the lattice points of `bounds`, x fastest.
struct SdfGrid {
  GridResolution resolution{0, 0, 0};
  Aabb bounds;
  std::vector<float> values;

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(resolution[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(resolution[1]) * static_cast<std::size_t>(k));
  }

  float at(int i, int j, int k) const { return values[index(i, j, k)]; }

  Vec3 spacing() const {
    const Vec3 e = bounds.extent();
    return {e.x() / (resolution[0] - 1), e.y() / (resolution[1] - 1), e.z() / (resolution[2] - 1)};
  }

  Vec3 lattice_point(int i, int j, int k) const {
    const Vec3 e = bounds.extent();
    return bounds.min + Vec3(e.x() * i / (resolution[0] - 1), e.y() * j / (resolution[1] - 1),
                             e.z() * k / (resolution[2] - 1));
  }

  /// Trilinear interpolation; p is clamped into the grid box.
  double sample(const Vec3& p) const {
    const Vec3 s = spacing();
    double f[3];
    int base[3];
    for (int a = 0; a < 3; ++a) {
      const double u = std::clamp((p[a] - bounds.min[a]) / s[a], 0.0, static_cast<double>(resolution[a] - 1));
      base[a] = std::min(static_cast<int>(u), resolution[a] - 2);
      f[a] = u - base[a];
    }
    double result = 0.0;
    for (int c = 0; c < 8; ++c) {
      const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
      const double w = (dx ? f[0] : 1 - f[0]) * (dy ? f[1] : 1 - f[1]) * (dz ? f[2] : 1 - f[2]);
      result += w * at(base[0] + dx, base[1] + dy, base[2] + dz);
    }
    return result;
  }
};

/// Evaluates signed_distance at every lattice point. Slabs along z are
/// distributed over threads; values are a pure per-point function, so the
/// result does not depend on the schedule.
inline SdfGrid bake_sdf_grid(const Bvh& bvh, const GridResolution& resolution, const Aabb& bounds) {
  for (int n : resolution)
    if (n < 2) throw Error("grid resolution must be at least 2 along every axis");
  if (!bounds.strictly_contains(bvh.bounds())) throw Error("grid bounds must strictly contain the mesh bounding box");

  SdfGrid grid{resolution, bounds, {}};
  grid.values.resize(static_cast<std::size_t>(resolution[0]) * resolution[1] * resolution[2]);
  parallel_for(static_cast<std::size_t>(resolution[2]), [&](std::size_t k0, std::size_t k1) {
    for (auto k = static_cast<int>(k0); k < static_cast<int>(k1); ++k)
      for (int j = 0; j < resolution[1]; ++j)
        for (int i = 0; i < resolution[0]; ++i)
          grid.values[grid.index(i, j, k)] = static_cast<float>(signed_distance(bvh, grid.lattice_point(i, j, k)));
  });
  return grid;
}

inline nlohmann::json sdf_grid_metadata(const SdfGrid& grid) {
  return {
      {"dtype", "f32"},
      {"endianness", "little"},
      {"shape", {grid.resolution[0], grid.resolution[1], grid.resolution[2]}},
      {"order", "x-fastest"},
      {"bounds",
       {{"min", {grid.bounds.min.x(), grid.bounds.min.y(), grid.bounds.min.z()}},
        {"max", {grid.bounds.max.x(), grid.bounds.max.y(), grid.bounds.max.z()}}}},
      {"sign", "negative-inside"},
  };
}

}  // namespace forge
