#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace forge {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

struct Aabb {
  Vec3 min = Vec3::Constant(kInf);
  Vec3 max = Vec3::Constant(-kInf);

  Aabb() = default;
  Aabb(const Vec3& lo, const Vec3& hi) : min(lo), max(hi) {}

  static Aabb cube(const Vec3& center, double half_side) {
    return {center.array() - half_side, center.array() + half_side};
  }

  bool empty() const { return (min.array() > max.array()).any(); }

  void expand(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  void expand(const Aabb& b) {
    min = min.cwiseMin(b.min);
    max = max.cwiseMax(b.max);
  }

  Vec3 center() const { return 0.5 * (min + max); }
  Vec3 extent() const { return max - min; }
  double max_extent() const { return extent().maxCoeff(); }

  double surface_area() const {
    if (empty()) return 0.0;
    const Vec3 e = extent();
    return 2.0 * (e.x() * e.y() + e.y() * e.z() + e.z() * e.x());
  }

  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  bool contains(const Aabb& b) const { return contains(b.min) && contains(b.max); }
  bool strictly_contains(const Aabb& b) const {
    return (b.min.array() > min.array()).all() && (b.max.array() < max.array()).all();
  }

  double squared_distance(const Vec3& p) const {
    const Vec3 d = (min - p).cwiseMax(p - max).cwiseMax(Vec3::Zero());
    return d.squaredNorm();
  }

  Aabb inflated(double eps) const { return {min.array() - eps, max.array() + eps}; }

  friend bool operator==(const Aabb& a, const Aabb& b) { return a.min == b.min && a.max == b.max; }
};

// Closest point on triangle (a, b, c) to p, following the Voronoi-region walk
// from Ericson's "Real-Time Collision Detection".
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return a + v * ab;
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return a + w * ac;
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return b + w * (c - b);
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom;
  const double w = vc * denom;
  return a + ab * v + ac * w;
}

// Signed solid angle subtended by triangle (a, b, c) at q, arctangent form
// (Van Oosterom & Strackee). Positive when q sees the back of a
// counter-clockwise triangle, so a closed outward-oriented surface gives 4*pi
// for interior points.
inline double solid_angle(const Vec3& q, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 va = a - q;
  const Vec3 vb = b - q;
  const Vec3 vc = c - q;
  const double la = va.norm();
  const double lb = vb.norm();
  const double lc = vc.norm();
  const double num = va.dot(vb.cross(vc));
  const double den = la * lb * lc + va.dot(vb) * lc + va.dot(vc) * lb + vb.dot(vc) * la;
  return 2.0 * std::atan2(num, den);
}

struct RayHit {
  double t = kInf;
  double u = 0.0;
  double v = 0.0;
};

// Möller-Trumbore; returns false for parallel rays and zero-area triangles.
inline bool intersect_ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                                   const Vec3& c, RayHit& hit) {
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 pvec = dir.cross(e2);
  const double det = e1.dot(pvec);
  if (std::abs(det) < 1e-300) return false;
  const double inv = 1.0 / det;
  const Vec3 tvec = origin - a;
  const double u = tvec.dot(pvec) * inv;
  if (u < 0.0 || u > 1.0) return false;
  const Vec3 qvec = tvec.cross(e1);
  const double v = dir.dot(qvec) * inv;
  if (v < 0.0 || u + v > 1.0) return false;
  const double t = e2.dot(qvec) * inv;
  if (t <= 0.0) return false;
  hit = {t, u, v};
  return true;
}

// Slab test; returns entry distance or +inf on miss.
inline double intersect_ray_aabb(const Vec3& origin, const Vec3& inv_dir, const Aabb& box, double t_max) {
  double t0 = 0.0;
  double t1 = t_max;
  for (int axis = 0; axis < 3; ++axis) {
    double lo = (box.min[axis] - origin[axis]) * inv_dir[axis];
    double hi = (box.max[axis] - origin[axis]) * inv_dir[axis];
    if (lo > hi) std::swap(lo, hi);
    // NaN from 0 * inf compares false and leaves the interval untouched.
    t0 = lo > t0 ? lo : t0;
    t1 = hi < t1 ? hi : t1;
    if (t0 > t1) return kInf;
  }
  return t0;
}

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

}  // namespace forge
