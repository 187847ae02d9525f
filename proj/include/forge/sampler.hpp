#pragma once

#include "forge/bvh.hpp"
#include "forge/field.hpp"
#include "forge/mesh.hpp"
#include "forge/parallel.hpp"
#include "forge/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <unordered_map>
#include <vector>

namespace forge {

struct SurfaceSamples {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;
  std::vector<std::uint32_t> source_face;

  std::size_t size() const { return positions.size(); }
  void resize(std::size_t n) {
    positions.resize(n);
    normals.resize(n);
    source_face.resize(n);
  }
  void append(const SurfaceSamples& other) {
    positions.insert(positions.end(), other.positions.begin(), other.positions.end());
    normals.insert(normals.end(), other.normals.begin(), other.normals.end());
    source_face.insert(source_face.end(), other.source_face.begin(), other.source_face.end());
  }
};

enum class Provenance : std::uint8_t { kNearSurface = 0, kUniformVolume = 1, kOnSurface = 2 };

struct QuerySet {
  std::vector<Vec3> points;
  std::vector<double> sdf;
  std::vector<Provenance> provenance;
  std::vector<double> sigma;  // noise scale per point, 0 when not perturbed

  std::size_t size() const { return points.size(); }
  void append(const QuerySet& other) {
    points.insert(points.end(), other.points.begin(), other.points.end());
    sdf.insert(sdf.end(), other.sdf.begin(), other.sdf.end());
    provenance.insert(provenance.end(), other.provenance.begin(), other.provenance.end());
    sigma.insert(sigma.end(), other.sigma.begin(), other.sigma.end());
  }
  std::size_t count(Provenance tag) const { return static_cast<std::size_t>(std::ranges::count(provenance, tag)); }
};

namespace detail {

inline constexpr std::size_t kSampleChunk = 4096;

/// Area-weighted face picker; zero-area faces can never be selected.
class FacePicker {
 public:
  explicit FacePicker(const Mesh& mesh) : mesh_(&mesh), cdf_(mesh.face_count()) {
    double total = 0.0;
    for (std::size_t f = 0; f < mesh.face_count(); ++f) {
      total += mesh.face_area(f);
      cdf_[f] = total;
    }
    if (!(total > 0.0)) throw Error("cannot sample a mesh with zero surface area");
  }

  std::uint32_t pick(double u) const {
    const double target = u * cdf_.back();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
    if (it == cdf_.end()) {
      // Rounding pushed the target to the total; take the last face with area.
      --it;
      while (it != cdf_.begin() && *(it - 1) == *it) --it;
    }
    return static_cast<std::uint32_t>(it - cdf_.begin());
  }

  /// Uniform point on the face via the square-root barycentric map.
  Vec3 point_on(std::uint32_t f, double r1, double r2) const {
    const auto [a, b, c] = mesh_->corners(f);
    const double s = std::sqrt(r1);
    return (1.0 - s) * a + s * (1.0 - r2) * b + s * r2 * c;
  }

 private:
  const Mesh* mesh_;
  std::vector<double> cdf_;
};

}  // namespace detail

inline SurfaceSamples sample_surface_uniform(const Mesh& mesh, std::size_t n, const RngStream& rng) {
  const detail::FacePicker picker(mesh);
  SurfaceSamples out;
  out.resize(n);
  parallel_for(
      n,
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
          Draws d = rng.at(i);
          const std::uint32_t f = picker.pick(d.uniform());
          const double r1 = d.uniform(), r2 = d.uniform();
          out.positions[i] = picker.point_on(f, r1, r2);
          out.normals[i] = mesh.face_normal(f);
          out.source_face[i] = f;
        }
      },
      detail::kSampleChunk);
  return out;
}

struct SharpEdge {
  std::uint32_t a, b;
  std::array<std::uint32_t, 2> faces;
  double angle_deg;
  double weight;
};

/// Interior edges whose incident face normals differ by more than
/// threshold_deg. Edges with other than two incident faces are ignored, as
/// are pairs involving a zero-area face.
inline std::vector<SharpEdge> find_sharp_edges(const Mesh& mesh, double threshold_deg = 30.0) {
  struct Incidence {
    std::uint32_t count = 0;
    std::array<std::uint32_t, 2> faces{};
  };
  std::unordered_map<std::uint64_t, Incidence> edges;
  std::vector<std::uint64_t> order;
  edges.reserve(mesh.face_count() * 2);
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    for (int k = 0; k < 3; ++k) {
      const std::uint32_t a = mesh.faces[f][k], b = mesh.faces[f][(k + 1) % 3];
      if (a == b) continue;
      const std::uint64_t key = (std::uint64_t{std::min(a, b)} << 32) | std::max(a, b);
      auto [it, inserted] = edges.try_emplace(key);
      if (inserted) order.push_back(key);
      if (it->second.count < 2) it->second.faces[it->second.count] = static_cast<std::uint32_t>(f);
      ++it->second.count;
    }
  }
  std::vector<SharpEdge> sharp;
  for (std::uint64_t key : order) {
    const Incidence& inc = edges.at(key);
    if (inc.count != 2) continue;
    const Vec3 n0 = mesh.face_cross(inc.faces[0]), n1 = mesh.face_cross(inc.faces[1]);
    if (n0.norm() == 0.0 || n1.norm() == 0.0) continue;
    const double angle = rad_to_deg(std::atan2(n0.cross(n1).norm(), n0.dot(n1)));
    if (angle <= threshold_deg) continue;
    const auto a = static_cast<std::uint32_t>(key >> 32), b = static_cast<std::uint32_t>(key & 0xffffffffu);
    const double length = (mesh.vertices[a] - mesh.vertices[b]).norm();
    sharp.push_back({a, b, inc.faces, angle, length * (angle - threshold_deg)});
  }
  return sharp;
}

struct SharpSampleOptions {
  double threshold_deg = 30.0;
  double offset = 0.01;
};

struct SharpSamples {
  SurfaceSamples samples;
  bool fallback = false;  // no sharp edges; samples are area-uniform
  std::size_t sharp_edge_count = 0;
};

namespace detail {

/// Largest step from p (on edge a-b) along in-plane direction d that stays
/// inside triangle (a, b, c).
inline double exit_distance(const Vec3& p, const Vec3& d, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 n = (b - a).cross(c - a);
  double best = kInf;
  for (const auto& [u, v] : {std::pair{a, c}, std::pair{b, c}}) {
    // Solve p + t d = u + s (v - u) inside the plane.
    const Vec3 e = v - u;
    const double denom = n.dot(d.cross(e));
    if (std::abs(denom) < 1e-300) continue;
    const double t = n.dot((u - p).cross(e)) / denom;
    if (t > 0.0) best = std::min(best, t);
  }
  return best;
}

}  // namespace detail

inline SharpSamples sample_surface_sharp(const Mesh& mesh, std::size_t n, const RngStream& rng,
                                         const SharpSampleOptions& opts = {}) {
  const std::vector<SharpEdge> edges = find_sharp_edges(mesh, opts.threshold_deg);
  SharpSamples out;
  out.sharp_edge_count = edges.size();
  if (edges.empty()) {
    out.samples = sample_surface_uniform(mesh, n, rng);
    out.fallback = true;
    return out;
  }
  std::vector<double> cdf(edges.size());
  double total = 0.0;
  for (std::size_t e = 0; e < edges.size(); ++e) cdf[e] = total += edges[e].weight;

  out.samples.resize(n);
  parallel_for(
      n,
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
          Draws d = rng.at(i);
          auto it = std::upper_bound(cdf.begin(), cdf.end(), d.uniform() * total);
          if (it == cdf.end()) --it;
          const SharpEdge& edge = edges[static_cast<std::size_t>(it - cdf.begin())];
          const Vec3& a = mesh.vertices[edge.a];
          const Vec3& b = mesh.vertices[edge.b];
          const Vec3 p = a + d.uniform() * (b - a);
          const std::uint32_t f = edge.faces[d.next_u32() & 1u];
          const auto corners = mesh.corners(f);
          std::uint32_t third = 0;
          for (std::uint32_t k = 0; k < 3; ++k)
            if (mesh.faces[f][k] != edge.a && mesh.faces[f][k] != edge.b) third = k;
          const Vec3& c = corners[third];
          const Vec3 axis = (b - a).normalized();
          Vec3 dir = (c - p) - (c - p).dot(axis) * axis;
          const double len = dir.norm();
          double step = d.uniform(0.0, opts.offset);
          Vec3 q = p;
          if (len > 0.0) {
            dir /= len;
            step = std::min(step, detail::exit_distance(p, dir, a, b, c));
            q = p + step * dir;
          }
          out.samples.positions[i] = q;
          out.samples.normals[i] = mesh.face_normal(f);
          out.samples.source_face[i] = f;
        }
      },
      detail::kSampleChunk);
  return out;
}

struct NearSurfaceOptions {
  // Points are split evenly across these noise scales, in order.
  std::vector<double> sigmas{0.01, 0.05};
};

inline QuerySet sample_near_surface(const Mesh& mesh, const Bvh& bvh, std::size_t n, const RngStream& rng,
                                    const NearSurfaceOptions& opts = {}) {
  if (opts.sigmas.empty()) throw Error("near-surface sampling needs at least one sigma");
  const detail::FacePicker picker(mesh);
  const std::size_t groups = opts.sigmas.size();
  QuerySet out;
  out.points.resize(n);
  out.sdf.resize(n);
  out.sigma.resize(n);
  out.provenance.assign(n, Provenance::kNearSurface);
  parallel_for(
      n,
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
          const double sigma = opts.sigmas[std::min(groups - 1, i * groups / n)];
          Draws d = rng.at(i);
          const std::uint32_t f = picker.pick(d.uniform());
          const double r1 = d.uniform(), r2 = d.uniform();
          Vec3 p = picker.point_on(f, r1, r2);
          for (int a = 0; a < 3; ++a) p[a] = std::clamp(p[a] + sigma * d.normal(), -1.0, 1.0);
          out.points[i] = p;
          out.sigma[i] = sigma;
          out.sdf[i] = signed_distance(bvh, p);
        }
      },
      detail::kSampleChunk / 4);
  return out;
}

inline QuerySet sample_volume_uniform(const Bvh& bvh, std::size_t n, const RngStream& rng) {
  QuerySet out;
  out.points.resize(n);
  out.sdf.resize(n);
  out.sigma.assign(n, 0.0);
  out.provenance.assign(n, Provenance::kUniformVolume);
  parallel_for(
      n,
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
          Draws d = rng.at(i);
          Vec3 p;
          for (int a = 0; a < 3; ++a) p[a] = d.uniform(-1.0, 1.0);
          out.points[i] = p;
          out.sdf[i] = signed_distance(bvh, p);
        }
      },
      detail::kSampleChunk / 4);
  return out;
}

/// Area-uniform points on the surface tagged as query points (sdf of the
/// stored mesh at those points, which is zero up to rounding).
inline QuerySet sample_on_surface_queries(const Mesh& mesh, const Bvh& bvh, std::size_t n, const RngStream& rng) {
  const SurfaceSamples s = sample_surface_uniform(mesh, n, rng);
  QuerySet out;
  out.points = s.positions;
  out.sdf.resize(n);
  out.sigma.assign(n, 0.0);
  out.provenance.assign(n, Provenance::kOnSurface);
  parallel_for(
      n,
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) out.sdf[i] = signed_distance(bvh, out.points[i]);
      },
      detail::kSampleChunk / 4);
  return out;
}

/// Greedy max-min selection. Ties go to the lowest index.
inline std::vector<std::size_t> farthest_point_sampling(const std::vector<Vec3>& points, std::size_t k,
                                                        std::size_t start = 0) {
  const std::size_t n = points.size();
  if (n == 0) throw Error("farthest point sampling needs at least one point");
  if (k > n) throw Error("farthest point sampling: k exceeds the number of points");
  if (start >= n) throw Error("farthest point sampling: start index out of range");
  std::vector<std::size_t> chosen;
  chosen.reserve(k);
  if (k == 0) return chosen;
  std::vector<double> dmin(n, kInf);
  std::size_t current = start;
  chosen.push_back(current);
  while (chosen.size() < k) {
    const Vec3 c = points[current];
    double best = -1.0;
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < n; ++i) {
      dmin[i] = std::min(dmin[i], (points[i] - c).squaredNorm());
      if (dmin[i] > best) {
        best = dmin[i];
        best_i = i;
      }
    }
    current = best_i;
    chosen.push_back(current);
  }
  return chosen;
}

enum class QueryComposition { kNearUniform, kNearSurface };

struct QueryConfig {
  std::size_t n_near = 249'856;
  std::size_t n_uniform = 249'856;  // second component size in either composition
  NearSurfaceOptions near;
  QueryComposition composition = QueryComposition::kNearUniform;
};

inline QuerySet build_query_set(const Mesh& mesh, const Bvh& bvh, const QueryConfig& config, std::uint64_t seed) {
  QuerySet out = sample_near_surface(mesh, bvh, config.n_near, RngStream(seed, StreamId::kNear), config.near);
  if (config.composition == QueryComposition::kNearUniform)
    out.append(sample_volume_uniform(bvh, config.n_uniform, RngStream(seed, StreamId::kVolume)));
  else
    out.append(sample_on_surface_queries(mesh, bvh, config.n_uniform, RngStream(seed, StreamId::kOnSurface)));
  return out;
}

}  // namespace forge
