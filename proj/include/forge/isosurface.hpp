#pragma once

#include "forge/field.hpp"
#include "forge/mc_tables.hpp"

#include <numeric>
#include <unordered_map>
#include <vector>

namespace forge {

struct WatertightReport {
  bool is_edge_manifold = false;  // no edge has more than two incident faces
  bool is_closed = false;         // every edge has exactly two incident faces
  std::size_t connected_components = 0;
  long long euler_characteristic = 0;
  std::size_t boundary_edge_count = 0;
  std::size_t vertex_count = 0;  // vertices referenced by at least one face
  std::size_t edge_count = 0;
  std::size_t face_count = 0;
};

namespace detail {

// Corner layout matching the case tables: corners 0-3 form one face loop and
// corner i+4 sits above corner i.
inline constexpr std::array<std::array<int, 3>, 8> kCorner = {{
    {0, 0, 0}, {1, 0, 0}, {1, 0, 1}, {0, 0, 1}, {0, 1, 0}, {1, 1, 0}, {1, 1, 1}, {0, 1, 1},
}};

inline constexpr std::array<std::array<int, 2>, 12> kEdgeCorners = {{
    {0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6}, {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7},
}};

struct CellEdge {
  std::array<int, 3> lower;  // offset of the lower endpoint within the cell
  int axis;
};

inline constexpr std::array<CellEdge, 12> make_cell_edges() {
  std::array<CellEdge, 12> out{};
  for (int e = 0; e < 12; ++e) {
    const auto& a = kCorner[kEdgeCorners[e][0]];
    const auto& b = kCorner[kEdgeCorners[e][1]];
    int axis = 0;
    for (int d = 0; d < 3; ++d)
      if (a[d] != b[d]) axis = d;
    out[e] = {{a[0] < b[0] ? a[0] : b[0], a[1] < b[1] ? a[1] : b[1], a[2] < b[2] ? a[2] : b[2]}, axis};
  }
  return out;
}

inline constexpr std::array<CellEdge, 12> kCellEdges = make_cell_edges();

// With this corner layout the table winding already faces increasing field;
// the flag exists for mirrored layouts.
inline constexpr bool kFlipWinding = false;

struct UnionFind {
  std::vector<std::uint32_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0u); }
  std::uint32_t find(std::uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace detail

/// Extracts the `level` isosurface. Output vertices sit on lattice edges at the
/// linearly interpolated crossing and are shared by every cell touching that
/// edge, so the result is closed wherever the surface stays inside the grid.
/// Triangles face toward increasing field values.
inline Mesh marching_cubes(const SdfGrid& grid, double level = 0.0) {
  const auto [nx, ny, nz] = grid.resolution;
  if (nx < 2 || ny < 2 || nz < 2) throw Error("marching cubes needs at least 2 samples per axis");
  if (grid.values.size() != static_cast<std::size_t>(nx) * ny * nz) throw Error("grid value count mismatch");
  double lo = kInf, hi = -kInf;
  for (float v : grid.values) {
    if (!std::isfinite(v)) throw Error("grid contains non-finite values");
    lo = std::min(lo, static_cast<double>(v));
    hi = std::max(hi, static_cast<double>(v));
  }
  if (!(lo < level && level < hi)) throw Error("iso level lies outside the field range; surface would be empty");

  const double nudge = 1e-7 * (hi - lo);
  auto value = [&](int i, int j, int k) {
    const double v = grid.at(i, j, k);
    return v == level ? v + nudge : v;
  };
  auto edge_key = [&](int i, int j, int k, int axis) {
    return static_cast<std::uint64_t>(grid.index(i, j, k)) * 3 + static_cast<std::uint64_t>(axis);
  };

  const auto slabs = static_cast<std::size_t>(nz - 1);
  std::vector<std::vector<std::array<std::uint64_t, 3>>> slab_tris(slabs);
  parallel_for(slabs, [&](std::size_t k0, std::size_t k1) {
    for (auto k = static_cast<int>(k0); k < static_cast<int>(k1); ++k) {
      auto& tris = slab_tris[static_cast<std::size_t>(k)];
      for (int j = 0; j < ny - 1; ++j) {
        for (int i = 0; i < nx - 1; ++i) {
          int cube = 0;
          for (int c = 0; c < 8; ++c) {
            const auto& o = detail::kCorner[c];
            if (value(i + o[0], j + o[1], k + o[2]) < level) cube |= 1 << c;
          }
          if (mc::kEdgeTable[cube] == 0) continue;
          const auto& row = mc::kTriTable[cube];
          for (int t = 0; row[t] != -1; t += 3) {
            std::array<std::uint64_t, 3> tri;
            for (int v = 0; v < 3; ++v) {
              const auto& ce = detail::kCellEdges[row[t + v]];
              tri[v] = edge_key(i + ce.lower[0], j + ce.lower[1], k + ce.lower[2], ce.axis);
            }
            if (detail::kFlipWinding) std::swap(tri[1], tri[2]);
            tris.push_back(tri);
          }
        }
      }
    }
  });

  // Ordered weld: vertex ids follow first appearance in slab order.
  Mesh mesh;
  std::unordered_map<std::uint64_t, std::uint32_t> vertex_of;
  const Vec3 spacing = grid.spacing();
  auto crossing = [&](std::uint64_t key) {
    const int axis = static_cast<int>(key % 3);
    std::size_t lattice = key / 3;
    const int i = static_cast<int>(lattice % static_cast<std::size_t>(nx));
    lattice /= static_cast<std::size_t>(nx);
    const int j = static_cast<int>(lattice % static_cast<std::size_t>(ny));
    const int k = static_cast<int>(lattice / static_cast<std::size_t>(ny));
    const int di = axis == 0, dj = axis == 1, dk = axis == 2;
    const double v0 = value(i, j, k);
    const double v1 = value(i + di, j + dj, k + dk);
    const double t = (level - v0) / (v1 - v0);
    Vec3 p = grid.lattice_point(i, j, k);
    p[axis] += t * spacing[axis];
    return p;
  };
  for (const auto& tris : slab_tris) {
    for (const auto& tri : tris) {
      Face f;
      for (int v = 0; v < 3; ++v) {
        const auto [it, inserted] = vertex_of.try_emplace(tri[v], static_cast<std::uint32_t>(mesh.vertices.size()));
        if (inserted) mesh.vertices.push_back(crossing(tri[v]));
        f[v] = it->second;
      }
      mesh.faces.push_back(f);
    }
  }
  return mesh;
}

/// Edge-incidence topology of a mesh. Vertices not referenced by any face are
/// ignored for the Euler characteristic and component count.
inline WatertightReport check_watertight(const Mesh& mesh) {
  WatertightReport report;
  std::unordered_map<std::uint64_t, std::uint32_t> edge_faces;
  edge_faces.reserve(mesh.faces.size() * 2);
  std::vector<bool> referenced(mesh.vertices.size(), false);
  detail::UnionFind components(mesh.vertices.size());
  for (const Face& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      const std::uint32_t a = f[k], b = f[(k + 1) % 3];
      const std::uint64_t key = (std::uint64_t{std::min(a, b)} << 32) | std::max(a, b);
      ++edge_faces[key];
      referenced[a] = true;
      components.unite(a, b);
    }
  }
  report.face_count = mesh.faces.size();
  report.edge_count = edge_faces.size();
  report.is_edge_manifold = true;
  for (const auto& [key, count] : edge_faces) {
    if (count == 1) ++report.boundary_edge_count;
    if (count > 2) report.is_edge_manifold = false;
  }
  report.is_closed = !mesh.faces.empty() &&
                     std::all_of(edge_faces.begin(), edge_faces.end(), [](const auto& e) { return e.second == 2; });
  for (std::uint32_t v = 0; v < mesh.vertices.size(); ++v) {
    if (!referenced[v]) continue;
    ++report.vertex_count;
    if (components.find(v) == v) ++report.connected_components;
  }
  report.euler_characteristic = static_cast<long long>(report.vertex_count) -
                                static_cast<long long>(report.edge_count) +
                                static_cast<long long>(report.face_count);
  return report;
}

/// Cube around the mesh box padded by `margin_fraction` of the longest edge
/// (and by at least two grid cells), so every boundary lattice point lies
/// outside the convex hull and is classified exterior.
inline Aabb watertight_grid_bounds(const Aabb& mesh_box, int resolution, double margin_fraction = 0.05) {
  const double half = 0.5 * mesh_box.max_extent();
  // Two cells of the padded grid: pad >= 4 (half + pad) / (n - 1).
  const double min_pad = resolution > 5 ? 4.0 * half / (resolution - 5) : half;
  return Aabb::cube(mesh_box.center(), half + std::max(margin_fraction * 2.0 * half, min_pad));
}

/// Forces the outermost lattice layer to the exterior. Badly oriented input
/// can push the winding number above one half outside the hull, which would
/// let the surface reach the grid boundary and stay open.
inline void seal_grid_boundary(SdfGrid& grid) {
  const auto [nx, ny, nz] = grid.resolution;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        if (i != 0 && j != 0 && k != 0 && i != nx - 1 && j != ny - 1 && k != nz - 1) continue;
        float& v = grid.values[grid.index(i, j, k)];
        v = std::abs(v);
      }
}

inline Mesh make_watertight(const Bvh& bvh, const GridResolution& resolution, const Aabb& bounds) {
  SdfGrid grid = bake_sdf_grid(bvh, resolution, bounds);
  seal_grid_boundary(grid);
  return marching_cubes(grid, 0.0);
}

inline Mesh make_watertight(const Mesh& mesh, const GridResolution& resolution) {
  const Bvh bvh(mesh);
  const int n = std::min({resolution[0], resolution[1], resolution[2]});
  return make_watertight(bvh, resolution, watertight_grid_bounds(bvh.bounds(), n));
}

}  // namespace forge
