#include "forge/camera.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace forge;

namespace {

/// Largest gap between sorted values on [0, 1], endpoints included.
double max_gap(std::vector<double> xs) {
  std::ranges::sort(xs);
  double gap = xs.front();
  for (std::size_t i = 1; i < xs.size(); ++i) gap = std::max(gap, xs[i] - xs[i - 1]);
  return std::max(gap, 1.0 - xs.back());
}

double max_marginal_gap(const std::vector<Vec2>& pts) {
  std::vector<double> a, b;
  for (const Vec2& p : pts) {
    a.push_back(p.x());
    b.push_back(p.y());
  }
  return std::max(max_gap(a), max_gap(b));
}

double ks_uniform_pvalue(std::vector<double> xs, double lo, double hi) {
  std::ranges::sort(xs);
  double d = 0.0;
  const auto n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double cdf = (xs[i] - lo) / (hi - lo);
    d = std::max({d, std::abs(cdf - i / n), std::abs(cdf - (i + 1) / n)});
  }
  return oracle::ks_pvalue(d, xs.size());
}

}  // namespace

TEST(RadicalInverse, Examples) {
  EXPECT_EQ(radical_inverse(2, 0), 0.0);
  EXPECT_EQ(radical_inverse(2, 1), 0.5);
  EXPECT_EQ(radical_inverse(2, 2), 0.25);
  EXPECT_EQ(radical_inverse(2, 3), 0.75);
  EXPECT_EQ(radical_inverse(2, 5), 0.625);
  EXPECT_NEAR(radical_inverse(3, 1), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(radical_inverse(3, 5), 2.0 / 3.0 + 1.0 / 9.0, 1e-15);  // 12 base 3
  EXPECT_THROW(radical_inverse(1, 3), Error);
}

TEST(Hammersley, HandEvaluatedPoints) {
  const auto one = hammersley_sphere(1);
  EXPECT_EQ(one[0], Vec3(0, 0, 1));
  const auto two = hammersley_sphere(2);
  EXPECT_NEAR((two[1] - Vec3(-1, 0, 0)).norm(), 0.0, 1e-15);
}

TEST(Hammersley, UnitLengthAndBalanced) {
  const auto dirs = hammersley_sphere(150, Vec2(0.37, 0.81));
  Vec3 sum = Vec3::Zero();
  for (const Vec3& d : dirs) {
    EXPECT_NEAR(d.norm(), 1.0, 1e-12);
    sum += d;
  }
  EXPECT_LT((sum / 150.0).norm(), 0.05);
}

TEST(Hammersley, BeatsRandomSetsOnMarginalGaps) {
  const double hammersley = max_marginal_gap(hammersley_2d(150));
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> random_gaps;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Vec2> pts(150);
    for (Vec2& p : pts) p = Vec2(u(gen), u(gen));
    random_gaps.push_back(max_marginal_gap(pts));
  }
  std::ranges::sort(random_gaps);
  EXPECT_LT(hammersley, random_gaps[50]);
}

TEST(Hammersley, HeightsAreEquidistributed) {
  double mean_p = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const CameraRig rig = build_condition_rig(seed);
    std::vector<double> z;
    for (const CameraSpec& c : rig.cameras) z.push_back(c.position.normalized().z());
    mean_p += ks_uniform_pvalue(z, -1.0, 1.0) / 100.0;
  }
  EXPECT_GT(mean_p, 0.01);
}

TEST(RadiusForFov, FramingLawEndpoints) {
  EXPECT_NEAR(radius_for_fov(70.0), 1.51, 0.005);
  EXPECT_NEAR(radius_for_fov(10.0), 9.94, 0.01);
  EXPECT_NEAR(radius_for_fov(180.0 - 1e-9), kUnitCubeBoundRadius, 1e-9);
  EXPECT_NEAR(radius_for_fov(60.0, 1.0), 2.0, 1e-12);
  EXPECT_THROW(radius_for_fov(0.0), Error);
  EXPECT_THROW(radius_for_fov(180.0), Error);
}

TEST(ConditionRig, DefaultsFollowFramingLaw) {
  const CameraRig rig = build_condition_rig(42);
  ASSERT_EQ(rig.cameras.size(), 150u);
  std::set<double> fovs;
  for (const CameraSpec& c : rig.cameras) {
    EXPECT_GE(c.fov_deg, 10.0);
    EXPECT_LE(c.fov_deg, 70.0);
    EXPECT_NEAR(c.radius, kUnitCubeBoundRadius / std::sin(deg_to_rad(c.fov_deg) / 2), 1e-6);
    EXPECT_GE(c.radius, 1.51 - 0.005);
    EXPECT_LE(c.radius, 9.94 + 0.01);
    EXPECT_NEAR((c.position - c.target).norm(), c.radius, 1e-9);
    EXPECT_EQ(c.width, 512);
    EXPECT_EQ(c.height, 512);
    EXPECT_LT(std::abs((c.target - c.position).normalized().dot(c.up)), 0.9995);
    fovs.insert(c.fov_deg);
  }
  EXPECT_GT(fovs.size(), 100u);  // per-camera fov
  EXPECT_EQ(rig_json(build_condition_rig(42)), rig_json(rig));
  EXPECT_NE(rig_json(build_condition_rig(43)), rig_json(rig));
}

TEST(ConditionRig, CanonicalFov) {
  ConditionRigOptions opts;
  opts.fixed_fov_deg = 40.0;
  const CameraRig rig = build_condition_rig(5, opts);
  for (const CameraSpec& c : rig.cameras) {
    EXPECT_EQ(c.fov_deg, 40.0);
    EXPECT_NEAR(c.radius, radius_for_fov(40.0), 1e-12);
  }
}

TEST(TextureRig, ElevationsAndAzimuths) {
  const CameraRig rig = build_texture_rig(9);
  ASSERT_EQ(rig.cameras.size(), 96u);
  std::map<long, std::multiset<long>> by_elevation;
  for (const CameraSpec& c : rig.cameras) {
    EXPECT_EQ(c.width, 512);
    EXPECT_EQ(c.height, 512);
    EXPECT_NEAR(c.radius, 2.53, 0.005);
    by_elevation[std::lround(elevation_deg(c) * 1000)].insert(std::lround(azimuth_deg(c)) % 360);
  }
  ASSERT_EQ(by_elevation.size(), 4u);
  for (long e : {-20000L, 0L, 20000L}) EXPECT_TRUE(by_elevation.contains(e)) << e;
  std::multiset<long> expected;
  for (int k = 0; k < 24; ++k) expected.insert(15 * k);
  for (const auto& [e, az] : by_elevation) {
    EXPECT_EQ(az, expected);
    EXPECT_GE(e, -30000);
    EXPECT_LE(e, 70000);
  }
  ASSERT_EQ(rig.reference_views.size(), 1u);
}

TEST(ReferenceView, LightAndElevationDistribution) {
  const RngStream rng(11, StreamId::kReference);
  int point = 0;
  for (std::uint64_t i = 0; i < 10'000; ++i) {
    const ReferenceView v = sample_reference_view(rng, i);
    EXPECT_GE(v.elevation_deg, -30.0);
    EXPECT_LE(v.elevation_deg, 70.0);
    EXPECT_NEAR(elevation_deg(v.camera), v.elevation_deg, 1e-9);
    EXPECT_GE(v.azimuth_deg, 0.0);
    EXPECT_LT(v.azimuth_deg, 360.0);
    if (v.light.kind == LightKind::kPoint) {
      ++point;
      EXPECT_GT(v.light.intensity, 0.0);
    } else {
      EXPECT_GE(v.light.environment_id, 0);
    }
  }
  EXPECT_NEAR(point / 10'000.0, 0.30, 0.02);
  const ReferenceView a = sample_reference_view(rng, 17), b = sample_reference_view(rng, 17);
  EXPECT_EQ(a.camera.position, b.camera.position);
  EXPECT_EQ(a.light.kind, b.light.kind);
}

TEST(LookAt, Examples) {
  CameraSpec c;
  c.position = Vec3(0, 0, 2);
  c.target = Vec3::Zero();
  c.up = Vec3::UnitY();
  c.radius = 2;
  const Mat4 m = look_at_matrix(c);
  EXPECT_NEAR((m * Eigen::Vector4d(0, 0, 0, 1) - Eigen::Vector4d(0, 0, -2, 1)).norm(), 0.0, 1e-15);

  for (const CameraSpec& cam : build_condition_rig(3).cameras) {
    const Mat4 w2c = look_at_matrix(cam);
    const Eigen::Matrix3d r = w2c.block<3, 3>(0, 0);
    EXPECT_NEAR((r * r.transpose() - Eigen::Matrix3d::Identity()).norm(), 0.0, 1e-9);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-9);
    const Eigen::Vector4d t = w2c * Eigen::Vector4d(0, 0, 0, 1);
    EXPECT_NEAR((t.head<3>() - Vec3(0, 0, -cam.radius)).norm(), 0.0, 1e-9);
    const Eigen::Vector4d back = w2c.inverse() * Eigen::Vector4d(0, 0, 0, 1);
    EXPECT_NEAR((back.head<3>() - cam.position).norm(), 0.0, 1e-9);
  }

  c.up = Vec3::UnitZ();
  EXPECT_THROW(look_at_matrix(c), Error);
}
