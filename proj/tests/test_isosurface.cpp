#include "forge/isosurface.hpp"
#include "forge/primitives.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace forge;

namespace {

SdfGrid analytic_grid(int n, const Aabb& bounds, const std::function<double(const Vec3&)>& f) {
  SdfGrid g{{n, n, n}, bounds, {}};
  g.values.resize(static_cast<std::size_t>(n) * n * n);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) g.values[g.index(i, j, k)] = static_cast<float>(f(g.lattice_point(i, j, k)));
  return g;
}

SdfGrid sphere_grid(double r, int n) {
  return analytic_grid(n, Aabb(Vec3::Constant(-1), Vec3::Constant(1)), [r](const Vec3& p) { return p.norm() - r; });
}

}  // namespace

TEST(MarchingCubes, SphereIsClosedGenusZeroWithAccurateVolume) {
  const Mesh m = marching_cubes(sphere_grid(0.3, 128));
  const WatertightReport r = check_watertight(m);
  EXPECT_TRUE(r.is_closed);
  EXPECT_TRUE(r.is_edge_manifold);
  EXPECT_EQ(r.boundary_edge_count, 0u);
  EXPECT_EQ(r.euler_characteristic, 2);
  EXPECT_EQ(r.connected_components, 1u);
  const double exact = 4.0 / 3.0 * std::numbers::pi * 0.027;
  EXPECT_NEAR(exact, 0.1131, 1e-4);
  EXPECT_NEAR(m.signed_volume(), exact, 0.01 * exact);
}

TEST(MarchingCubes, TrianglesFaceIncreasingField) {
  const Mesh m = marching_cubes(sphere_grid(0.5, 24));
  EXPECT_GT(m.signed_volume(), 0.0);
  for (std::size_t f = 0; f < m.face_count(); ++f) {
    const auto [a, b, c] = m.corners(f);
    const Vec3 centroid = (a + b + c) / 3.0;
    if (m.face_area(f) > 1e-8) {
      EXPECT_GT(m.face_normal(f).dot(centroid.normalized()), 0.0);
    }
  }
}

TEST(MarchingCubes, ConstantFieldHasNoSurface) {
  const SdfGrid g = analytic_grid(8, Aabb(Vec3::Constant(-1), Vec3::Constant(1)), [](const Vec3&) { return 1.0; });
  EXPECT_THROW(marching_cubes(g, 0.0), Error);
}

TEST(MarchingCubes, VerticesInterpolateToLevel) {
  const SdfGrid g = analytic_grid(40, Aabb(Vec3::Constant(-1), Vec3::Constant(1)), [](const Vec3& p) {
    return std::sin(3 * p.x()) * std::cos(2 * p.y()) + 0.5 * p.z() * p.z() - 0.2;
  });
  const double level = 0.1;
  const Mesh m = marching_cubes(g, level);
  double lo = kInf, hi = -kInf;
  for (float v : g.values) {
    lo = std::min<double>(lo, v);
    hi = std::max<double>(hi, v);
  }
  for (const Vec3& v : m.vertices) EXPECT_NEAR(g.sample(v), level, 1e-5 * (hi - lo));
}

// Randomized smooth fields that are positive on the grid boundary: the
// extracted surface must be closed and edge-manifold every time.
TEST(MarchingCubes, RandomSmoothFieldsGiveClosedManifoldSurfaces) {
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 40; ++trial) {
    std::array<Vec3, 4> freq, phase;
    std::array<double, 4> amp;
    for (int t = 0; t < 4; ++t) {
      freq[t] = Vec3(u(gen), u(gen), u(gen)) * 6.0;
      phase[t] = Vec3(u(gen), u(gen), u(gen)) * 3.0;
      amp[t] = 0.3 * u(gen);
    }
    const double bias = 0.25 * u(gen);
    const auto field = [&](const Vec3& p) {
      double s = p.squaredNorm() - 0.5 + bias;
      for (int t = 0; t < 4; ++t) s += amp[t] * std::sin(freq[t].dot(p) + phase[t].x());
      return std::max(s, 1.5 * (p.cwiseAbs().maxCoeff() - 0.9));
    };
    const int n = 24 + trial % 9;
    const SdfGrid g = analytic_grid(n, Aabb(Vec3::Constant(-1), Vec3::Constant(1)), field);
    bool exact_zero = false;
    for (float v : g.values) exact_zero |= v == 0.0f;
    if (exact_zero) continue;
    Mesh m;
    try {
      m = marching_cubes(g);
    } catch (const Error&) {
      continue;  // field without a crossing
    }
    const WatertightReport r = check_watertight(m);
    EXPECT_TRUE(r.is_closed) << "trial " << trial;
    EXPECT_TRUE(r.is_edge_manifold) << "trial " << trial;
  }
}

TEST(MarchingCubes, ExactZeroLatticeValuesAreNudged) {
  // Plane through lattice points: many values are exactly zero.
  const SdfGrid g = analytic_grid(9, Aabb(Vec3::Constant(-1), Vec3::Constant(1)),
                                  [](const Vec3& p) { return std::max(p.cwiseAbs().maxCoeff() - 0.5, -1.0); });
  const Mesh m = marching_cubes(g);
  const WatertightReport r = check_watertight(m);
  EXPECT_TRUE(r.is_closed);
  for (std::size_t f = 0; f < m.face_count(); ++f) EXPECT_GT(m.face_area(f), 0.0);
}

TEST(MarchingCubes, OutputIsScheduleIndependent) {
  const SdfGrid g = sphere_grid(0.45, 48);
  setenv("FORGE_THREADS", "1", 1);
  const Mesh serial = marching_cubes(g);
  setenv("FORGE_THREADS", "4", 1);
  const Mesh parallel = marching_cubes(g);
  unsetenv("FORGE_THREADS");
  EXPECT_EQ(serial.faces, parallel.faces);
  EXPECT_EQ(serial.vertices, parallel.vertices);
}

TEST(CheckWatertight, Examples) {
  const WatertightReport cube = check_watertight(make_box(Vec3::Zero(), Vec3::Ones()));
  EXPECT_TRUE(cube.is_closed);
  EXPECT_EQ(cube.euler_characteristic, 2);
  EXPECT_EQ(cube.boundary_edge_count, 0u);

  Mesh tri;
  tri.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  tri.faces = {{0, 1, 2}};
  const WatertightReport t = check_watertight(tri);
  EXPECT_FALSE(t.is_closed);
  EXPECT_EQ(t.boundary_edge_count, 3u);
  EXPECT_EQ(t.euler_characteristic, 1);

  const WatertightReport torus = check_watertight(make_torus(0.5, 0.2, 24, 12));
  EXPECT_TRUE(torus.is_closed);
  EXPECT_EQ(torus.euler_characteristic, 0);

  const WatertightReport two = check_watertight(oracle::touching_boxes());
  EXPECT_EQ(two.connected_components, 2u);

  // Three faces on one edge.
  Mesh fan;
  fan.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, -1, 0), Vec3(0, 0, 1)};
  fan.faces = {{0, 1, 2}, {1, 0, 3}, {0, 1, 4}};
  EXPECT_FALSE(check_watertight(fan).is_edge_manifold);
}

TEST(MakeWatertight, DefectiveFixturesBecomeClosed) {
  for (const auto& fixture : oracle::defective_fixtures()) {
    const Mesh out = make_watertight(fixture.mesh, {64, 64, 64});
    const WatertightReport r = check_watertight(out);
    EXPECT_TRUE(r.is_closed) << fixture.name;
    EXPECT_TRUE(r.is_edge_manifold) << fixture.name;
  }
}

TEST(MakeWatertight, OpenBoxAndOverlappingSpheres) {
  const WatertightReport box = check_watertight(make_watertight(oracle::open_box(), {96, 96, 96}));
  EXPECT_TRUE(box.is_closed);

  const WatertightReport pair = check_watertight(make_watertight(oracle::overlapping_spheres(), {96, 96, 96}));
  EXPECT_TRUE(pair.is_closed);
  EXPECT_EQ(pair.connected_components, 1u);
}

TEST(MakeWatertight, ClosedInputKeepsVolumeAndInterior) {
  const Mesh sphere = make_icosphere(0.4, 4);
  const Mesh out = make_watertight(sphere, {128, 128, 128});
  EXPECT_TRUE(check_watertight(out).is_closed);
  EXPECT_NEAR(out.signed_volume(), sphere.signed_volume(), 0.02 * sphere.signed_volume());

  const Bvh bvh(out);
  int checked = 0;
  for (const Vec3& q : oracle::random_points(20000, -0.4, 0.4, 51)) {
    if (q.norm() > 0.37 || checked == 1000) continue;
    ++checked;
    EXPECT_LT(signed_distance(bvh, q), 0.0);
  }
  EXPECT_EQ(checked, 1000);
}
