#pragma once

// Procedural meshes used as fixtures by the CLI demo and the test suites.

#include "forge/mesh.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <utility>

namespace forge {

/// Axis-aligned box with outward-facing triangles (8 vertices, 12 faces).
inline Mesh make_box(const Vec3& lo, const Vec3& hi) {
  Mesh m;
  for (int c = 0; c < 8; ++c)
    m.vertices.emplace_back((c & 1) ? hi.x() : lo.x(), (c & 2) ? hi.y() : lo.y(), (c & 4) ? hi.z() : lo.z());
  m.faces = {
      {0, 2, 1}, {1, 2, 3},  // z = lo
      {4, 5, 6}, {5, 7, 6},  // z = hi
      {0, 1, 4}, {1, 5, 4},  // y = lo
      {2, 6, 3}, {3, 6, 7},  // y = hi
      {0, 4, 2}, {2, 4, 6},  // x = lo
      {1, 3, 5}, {3, 7, 5},  // x = hi
  };
  return m;
}

/// Subdivided icosahedron projected onto a sphere; 20 * 4^subdivisions faces.
inline Mesh make_icosphere(double radius, int subdivisions, const Vec3& center = Vec3::Zero()) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                             {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (Vec3& v : verts) v.normalize();
  std::vector<Face> faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                             {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                             {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoint;
    auto mid = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      const auto [it, inserted] = midpoint.try_emplace(key, static_cast<std::uint32_t>(verts.size()));
      if (inserted) verts.push_back((0.5 * (verts[a] + verts[b])).normalized());
      return it->second;
    };
    std::vector<Face> next;
    next.reserve(faces.size() * 4);
    for (const Face& f : faces) {
      const std::uint32_t ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }
  Mesh m;
  m.faces = std::move(faces);
  m.vertices.reserve(verts.size());
  for (const Vec3& v : verts) m.vertices.push_back(center + radius * v);
  return m;
}

/// Torus around the z axis: `ring` x `tube` quads split into triangles.
inline Mesh make_torus(double major, double minor, int ring, int tube) {
  Mesh m;
  for (int i = 0; i < ring; ++i) {
    const double u = 2.0 * std::numbers::pi * i / ring;
    for (int j = 0; j < tube; ++j) {
      const double v = 2.0 * std::numbers::pi * j / tube;
      const double r = major + minor * std::cos(v);
      m.vertices.emplace_back(r * std::cos(u), r * std::sin(u), minor * std::sin(v));
    }
  }
  auto id = [&](int i, int j) { return static_cast<std::uint32_t>(((i + ring) % ring) * tube + (j + tube) % tube); };
  for (int i = 0; i < ring; ++i) {
    for (int j = 0; j < tube; ++j) {
      m.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return m;
}

/// Concatenates meshes without welding.
inline Mesh merge_meshes(const Mesh& a, const Mesh& b) {
  Mesh out = a;
  const auto offset = static_cast<std::uint32_t>(a.vertices.size());
  out.vertices.insert(out.vertices.end(), b.vertices.begin(), b.vertices.end());
  for (const Face& f : b.faces) out.faces.push_back({f[0] + offset, f[1] + offset, f[2] + offset});
  out.normals.clear();
  return out;
}

}  // namespace forge
