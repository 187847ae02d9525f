#pragma once

#include "forge/geometry.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace forge {

using Face = std::array<std::uint32_t, 3>;

/// Indexed triangle mesh. Normals, when present, are per-vertex unit vectors.
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::vector<Vec3> normals;

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t face_count() const { return faces.size(); }
  bool has_normals() const { return !normals.empty(); }

  std::array<Vec3, 3> corners(std::size_t f) const {
    const Face& t = faces[f];
    return {vertices[t[0]], vertices[t[1]], vertices[t[2]]};
  }

  // Unnormalized; length is twice the face area.
  Vec3 face_cross(std::size_t f) const {
    const auto [a, b, c] = corners(f);
    return (b - a).cross(c - a);
  }

  double face_area(std::size_t f) const { return 0.5 * face_cross(f).norm(); }

  Vec3 face_normal(std::size_t f) const {
    const Vec3 n = face_cross(f);
    const double len = n.norm();
    return len > 0.0 ? Vec3(n / len) : Vec3::Zero();
  }

  double surface_area() const {
    double total = 0.0;
    for (std::size_t f = 0; f < faces.size(); ++f) total += face_area(f);
    return total;
  }

  /// Signed enclosed volume by the divergence theorem; positive for closed
  /// outward-oriented meshes.
  double signed_volume() const {
    double total = 0.0;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      const auto [a, b, c] = corners(f);
      total += a.dot(b.cross(c));
    }
    return total / 6.0;
  }

  /// Throws forge::Error when an index is out of range, a face repeats an
  /// index, or a stored normal is not unit length.
  void validate() const {
    const auto n = static_cast<std::uint32_t>(vertices.size());
    for (const Face& f : faces) {
      for (std::uint32_t i : f)
        if (i >= n) throw Error("face index out of range: " + std::to_string(i) + " >= " + std::to_string(n));
      if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) throw Error("face repeats a vertex index");
    }
    if (!normals.empty()) {
      if (normals.size() != vertices.size()) throw Error("normal count does not match vertex count");
      for (const Vec3& v : normals)
        if (std::abs(v.norm() - 1.0) > 1e-6) throw Error("stored normal is not unit length");
    }
  }
};

inline Aabb compute_aabb(std::span<const Vec3> points) {
  if (points.empty()) throw Error("cannot compute bounding box of an empty point set");
  Aabb box;
  for (const Vec3& p : points) box.expand(p);
  return box;
}

inline Aabb compute_aabb(const Mesh& mesh) {
  if (mesh.vertices.empty()) throw Error("cannot compute bounding box of an empty mesh");
  return compute_aabb(std::span<const Vec3>(mesh.vertices));
}

/// Uniform similarity: output = (input + translation) * scale.
struct NormalizationTransform {
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;

  Vec3 apply(const Vec3& p) const { return (p + translation) * scale; }
  Vec3 invert(const Vec3& p) const { return p / scale - translation; }
};

/// Centers the bounding box at the origin and scales the longest box edge to
/// 1, so the result fits in [-0.5, 0.5]^3 with aspect ratio preserved.
inline std::pair<Mesh, NormalizationTransform> normalize_mesh(const Mesh& mesh) {
  const Aabb box = compute_aabb(mesh);
  const double longest = box.max_extent();
  if (!(longest > 0.0)) throw Error("cannot normalize a mesh with zero extent");

  NormalizationTransform xf{-box.center(), 1.0 / longest};
  Mesh out = mesh;
  for (Vec3& v : out.vertices) v = xf.apply(v);
  return {std::move(out), xf};
}

/// Centers on the centroid and scales so the farthest point has norm 1.
inline std::pair<std::vector<Vec3>, NormalizationTransform> normalize_point_cloud(std::span<const Vec3> points) {
  if (points.empty()) throw Error("cannot normalize an empty point cloud");
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());

  double radius = 0.0;
  for (const Vec3& p : points) radius = std::max(radius, (p - centroid).norm());
  if (!(radius > 0.0)) throw Error("cannot normalize a point cloud whose points are all identical");

  NormalizationTransform xf{-centroid, 1.0 / radius};
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const Vec3& p : points) out.push_back(xf.apply(p));
  return {std::move(out), xf};
}

}  // namespace forge
