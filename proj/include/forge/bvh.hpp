#pragma once

#include "forge/mesh.hpp"

#include <algorithm>
#include <cstdint>
#include <numbers>
#include <unordered_map>
#include <utility>
#include <vector>

namespace forge {

struct ClosestPoint {
  Vec3 point = Vec3::Zero();
  double distance = kInf;
  std::uint32_t face = 0;
};

struct RayCast {
  bool hit = false;
  double t = kInf;
  std::uint32_t face = 0;
  Vec3 point = Vec3::Zero();
};

/// Bounding volume hierarchy over a triangle mesh, built with a binned
/// surface-area heuristic (leaves hold at most kLeafSize triangles).
///
/// Besides closest-point and ray queries it evaluates the generalized winding
/// number exactly. Every internal node stores the boundary loop of its
/// triangle patch; for a query outside the node box the patch and its fan cap
/// (apex at the box center) form a closed chain inside a convex region that
/// does not contain the query, so the patch contribution equals the cap
/// contribution with the orientation reversed. Nodes whose boundary is not
/// smaller than their triangle count are always descended.
class Bvh {
 public:
  static constexpr std::uint32_t kLeafSize = 4;

  struct Node {
    Aabb box;
    std::uint32_t first = 0;  // leaf: first triangle slot; internal: left child
    std::uint32_t second = 0; // internal: right child
    std::uint32_t count = 0;  // leaf triangle count, 0 for internal nodes
    std::uint32_t cap_begin = 0;
    std::uint32_t cap_end = 0;
    bool use_cap = false;

    bool is_leaf() const { return count > 0; }
  };

  explicit Bvh(Mesh mesh) : mesh_(std::move(mesh)) {
    mesh_.validate();
    if (mesh_.faces.empty()) throw Error("cannot build a BVH over a mesh without faces");
    build();
    build_caps();
  }

  const Mesh& mesh() const { return mesh_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  /// Slot -> source face index; leaves reference contiguous slot ranges.
  const std::vector<std::uint32_t>& face_order() const { return order_; }
  const Aabb& bounds() const { return nodes_.front().box; }

  ClosestPoint closest_point(const Vec3& q) const {
    ClosestPoint best;
    double best_sq = kInf;
    std::uint32_t stack[64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const Node& node = nodes_[stack[--top]];
      if (node.box.squared_distance(q) >= best_sq) continue;
      if (node.is_leaf()) {
        for (std::uint32_t s = node.first; s < node.first + node.count; ++s) {
          const auto& t = tris_[s];
          const Vec3 p = closest_point_on_triangle(q, t[0], t[1], t[2]);
          const double d = (p - q).squaredNorm();
          if (d < best_sq || (d == best_sq && order_[s] < best.face)) {
            best_sq = d;
            best.point = p;
            best.face = order_[s];
          }
        }
        continue;
      }
      const double dl = nodes_[node.first].box.squared_distance(q);
      const double dr = nodes_[node.second].box.squared_distance(q);
      // Push the farther child first so the nearer one is visited next.
      if (dl <= dr) {
        stack[top++] = node.second;
        stack[top++] = node.first;
      } else {
        stack[top++] = node.first;
        stack[top++] = node.second;
      }
    }
    best.distance = std::sqrt(best_sq);
    return best;
  }

  RayCast raycast(const Vec3& origin, const Vec3& dir, double t_max = kInf) const {
    RayCast best;
    best.t = t_max;
    const Vec3 inv_dir = dir.cwiseInverse();
    std::uint32_t stack[64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const Node& node = nodes_[stack[--top]];
      if (intersect_ray_aabb(origin, inv_dir, node.box, best.t) == kInf) continue;
      if (node.is_leaf()) {
        for (std::uint32_t s = node.first; s < node.first + node.count; ++s) {
          const auto& t = tris_[s];
          RayHit h;
          if (intersect_ray_triangle(origin, dir, t[0], t[1], t[2], h) &&
              (h.t < best.t || (h.t == best.t && best.hit && order_[s] < best.face))) {
            best.hit = true;
            best.t = h.t;
            best.face = order_[s];
          }
        }
        continue;
      }
      const double tl = intersect_ray_aabb(origin, inv_dir, nodes_[node.first].box, best.t);
      const double tr = intersect_ray_aabb(origin, inv_dir, nodes_[node.second].box, best.t);
      if (tl <= tr) {
        if (tr != kInf) stack[top++] = node.second;
        if (tl != kInf) stack[top++] = node.first;
      } else {
        if (tl != kInf) stack[top++] = node.first;
        stack[top++] = node.second;
      }
    }
    if (best.hit) best.point = origin + best.t * dir;
    else best.t = kInf;
    return best;
  }

  /// Generalized winding number, summed exactly over all triangles. For
  /// queries within 1e-12 of the surface the solid-angle sum is undefined;
  /// there the mean of the two one-sided values 1e-9 away along a fixed
  /// direction is returned (0.5 on the face of a closed mesh).
  double winding_number(const Vec3& q) const {
    return winding_number(q, closest_point(q).distance);
  }

  /// Same as winding_number(q) when `surface_distance` is the closest-point
  /// distance of q, which callers often have at hand already.
  double winding_number(const Vec3& q, double surface_distance) const {
    if (surface_distance < 1e-12) {
      const Vec3 step = 1e-9 * perturb_direction();
      return 0.5 * (raw_winding_number(q + step) + raw_winding_number(q - step));
    }
    return raw_winding_number(q);
  }

  /// Solid-angle sum without the on-surface nudge.
  double raw_winding_number(const Vec3& q) const {
    double total = 0.0;
    std::uint32_t stack[64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const Node& node = nodes_[stack[--top]];
      if (node.use_cap && !node.box.inflated(cap_margin_).contains(q)) {
        const Vec3 apex = node.box.center();
        for (std::uint32_t e = node.cap_begin; e < node.cap_end; ++e) {
          const auto [a, b] = cap_edges_[e];
          total += solid_angle(q, apex, mesh_.vertices[a], mesh_.vertices[b]);
        }
        continue;
      }
      if (node.is_leaf()) {
        for (std::uint32_t s = node.first; s < node.first + node.count; ++s) {
          const auto& t = tris_[s];
          total += solid_angle(q, t[0], t[1], t[2]);
        }
        continue;
      }
      stack[top++] = node.second;
      stack[top++] = node.first;
    }
    return total / (4.0 * std::numbers::pi);
  }

  static Vec3 perturb_direction() { return Vec3(1.0, 2.0, 3.0).normalized(); }

 private:
  struct BuildItem {
    Aabb box;
    Vec3 centroid;
  };

  void build() {
    const std::size_t n = mesh_.faces.size();
    std::vector<BuildItem> items(n);
    order_.resize(n);
    for (std::size_t f = 0; f < n; ++f) {
      Aabb box;
      for (const Vec3& v : mesh_.corners(f)) box.expand(v);
      items[f] = {box, box.center()};
      order_[f] = static_cast<std::uint32_t>(f);
    }
    nodes_.reserve(2 * n / kLeafSize + 1);
    nodes_.emplace_back();
    build_node(0, 0, static_cast<std::uint32_t>(n), items, 0);

    tris_.resize(n);
    for (std::size_t s = 0; s < n; ++s) tris_[s] = mesh_.corners(order_[s]);
    cap_margin_ = 1e-12 * std::max(1.0, bounds().max_extent());
  }

  void build_node(std::uint32_t index, std::uint32_t begin, std::uint32_t end, const std::vector<BuildItem>& items,
                  int depth) {
    Aabb box;
    Aabb centroid_box;
    for (std::uint32_t s = begin; s < end; ++s) {
      box.expand(items[order_[s]].box);
      centroid_box.expand(items[order_[s]].centroid);
    }
    nodes_[index].box = box;
    const std::uint32_t count = end - begin;
    if (count <= kLeafSize || depth >= 60) {
      if (count > kLeafSize) throw Error("BVH depth limit reached");
      nodes_[index].first = begin;
      nodes_[index].count = count;
      return;
    }

    std::uint32_t mid = split_sah(begin, end, items, centroid_box);
    if (mid == begin || mid == end) mid = begin + count / 2;

    const auto left = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    nodes_.emplace_back();
    nodes_[index].first = left;
    nodes_[index].second = left + 1;
    nodes_[index].count = 0;
    build_node(left, begin, mid, items, depth + 1);
    build_node(left + 1, mid, end, items, depth + 1);
  }

  std::uint32_t split_sah(std::uint32_t begin, std::uint32_t end, const std::vector<BuildItem>& items,
                          const Aabb& centroid_box) {
    constexpr int kBins = 16;
    const Vec3 extent = centroid_box.extent();
    double best_cost = kInf;
    int best_axis = -1;
    int best_bin = -1;
    for (int axis = 0; axis < 3; ++axis) {
      if (!(extent[axis] > 0.0)) continue;
      const double scale = kBins / extent[axis];
      auto bin_of = [&](std::uint32_t f) {
        const int b = static_cast<int>((items[f].centroid[axis] - centroid_box.min[axis]) * scale);
        return std::clamp(b, 0, kBins - 1);
      };
      std::array<Aabb, kBins> bins;
      std::array<std::uint32_t, kBins> counts{};
      for (std::uint32_t s = begin; s < end; ++s) {
        const int b = bin_of(order_[s]);
        bins[b].expand(items[order_[s]].box);
        ++counts[b];
      }
      std::array<double, kBins> right_cost{};
      Aabb acc;
      std::uint32_t acc_n = 0;
      for (int b = kBins - 1; b > 0; --b) {
        acc.expand(bins[b]);
        acc_n += counts[b];
        right_cost[b] = acc_n == 0 ? 0.0 : acc.surface_area() * acc_n;
      }
      acc = Aabb();
      acc_n = 0;
      for (int b = 0; b < kBins - 1; ++b) {
        acc.expand(bins[b]);
        acc_n += counts[b];
        const double cost = (acc_n == 0 ? 0.0 : acc.surface_area() * acc_n) + right_cost[b + 1];
        if (acc_n > 0 && acc_n < end - begin && cost < best_cost) {
          best_cost = cost;
          best_axis = axis;
          best_bin = b;
        }
      }
    }
    if (best_axis < 0) return begin + (end - begin) / 2;

    const double scale = kBins / extent[best_axis];
    auto goes_left = [&](std::uint32_t f) {
      const int b = static_cast<int>((items[f].centroid[best_axis] - centroid_box.min[best_axis]) * scale);
      return std::clamp(b, 0, kBins - 1) <= best_bin;
    };
    const auto it = std::stable_partition(order_.begin() + begin, order_.begin() + end, goes_left);
    return static_cast<std::uint32_t>(it - order_.begin());
  }

  using EdgeKey = std::uint64_t;
  static EdgeKey edge_key(std::uint32_t lo, std::uint32_t hi) { return (EdgeKey{lo} << 32) | hi; }

  // Net oriented boundary of a patch: +k means k copies of lo->hi.
  using Boundary = std::unordered_map<EdgeKey, int>;

  void build_caps() {
    Boundary root = collect_boundary(0);
    (void)root;
  }

  Boundary collect_boundary(std::uint32_t index) {
    Node& node = nodes_[index];
    Boundary boundary;
    std::uint32_t triangles = 0;
    if (node.is_leaf()) {
      triangles = node.count;
      for (std::uint32_t s = node.first; s < node.first + node.count; ++s) {
        const Face& f = mesh_.faces[order_[s]];
        for (int k = 0; k < 3; ++k) add_edge(boundary, f[k], f[(k + 1) % 3]);
      }
      // Leaves are summed directly; a cap never beats <= 4 triangles enough.
      return boundary;
    }
    const std::uint32_t left = node.first;
    const std::uint32_t right = node.second;
    boundary = collect_boundary(left);
    Boundary other = collect_boundary(right);
    if (other.size() > boundary.size()) std::swap(boundary, other);
    for (const auto& [key, n] : other) {
      auto& slot = boundary[key];
      slot += n;
      if (slot == 0) boundary.erase(key);
    }
    triangles = subtree_triangles(index);

    std::size_t edges = 0;
    for (const auto& [key, n] : boundary) edges += static_cast<std::size_t>(std::abs(n));
    Node& self = nodes_[index];
    if (edges < triangles) {
      std::vector<std::pair<EdgeKey, int>> sorted(boundary.begin(), boundary.end());
      std::sort(sorted.begin(), sorted.end());
      self.cap_begin = static_cast<std::uint32_t>(cap_edges_.size());
      for (const auto& [key, n] : sorted) {
        const auto lo = static_cast<std::uint32_t>(key >> 32);
        const auto hi = static_cast<std::uint32_t>(key);
        for (int k = 0; k < std::abs(n); ++k) cap_edges_.emplace_back(n > 0 ? lo : hi, n > 0 ? hi : lo);
      }
      self.cap_end = static_cast<std::uint32_t>(cap_edges_.size());
      self.use_cap = true;
    }
    return boundary;
  }

  std::uint32_t subtree_triangles(std::uint32_t index) const {
    const Node& node = nodes_[index];
    if (node.is_leaf()) return node.count;
    return subtree_triangles(node.first) + subtree_triangles(node.second);
  }

  static void add_edge(Boundary& boundary, std::uint32_t a, std::uint32_t b) {
    const EdgeKey key = a < b ? edge_key(a, b) : edge_key(b, a);
    auto& slot = boundary[key];
    slot += a < b ? 1 : -1;
    if (slot == 0) boundary.erase(key);
  }

  Mesh mesh_;
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> order_;
  std::vector<std::array<Vec3, 3>> tris_;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> cap_edges_;
  double cap_margin_ = 0.0;
};

}  // namespace forge
