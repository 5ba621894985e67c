#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

using namespace nlos_calib;
using namespace nlos_calib::testing;

namespace {

MirrorPlane plane(double nx, double ny, double nz, double d) {
  return normalize_plane(RawPlane(nx, ny, nz, d));
}

void expect_near(const Eigen::Vector3d& a, const Eigen::Vector3d& b, double tol) {
  EXPECT_LT((a - b).norm(), tol) << a.transpose() << " vs " << b.transpose();
}

}  // namespace

TEST(NormalizePlane, RescalesToUnitNormal) {
  const MirrorPlane a = plane(0, 0, 2, -8);
  expect_near(a.normal, {0, 0, 1}, 1e-15);
  EXPECT_DOUBLE_EQ(a.offset, -4.0);

  const MirrorPlane b = plane(0, 0, 1, 5);
  expect_near(b.normal, {0, 0, 1}, 0.0 + 1e-15);
  EXPECT_DOUBLE_EQ(b.offset, 5.0);

  const MirrorPlane c = plane(3, 4, 0, 10);
  expect_near(c.normal, {0.6, 0.8, 0}, 1e-15);
  EXPECT_DOUBLE_EQ(c.offset, 2.0);
}

TEST(NormalizePlane, DegenerateNormalThrows) {
  EXPECT_THROW(plane(0, 0, 0, 1), DegeneratePlaneError);
  EXPECT_THROW(plane(1e-13, 0, 0, 1), DegeneratePlaneError);
  EXPECT_NO_THROW(plane(1e-11, 0, 0, 1));
}

TEST(ReflectPoint, HandExamples) {
  const MirrorPlane z0 = plane(0, 0, 1, 0);
  expect_near(reflect_point({1, 2, 3}, z0), {1, 2, -3}, 1e-15);
  expect_near(reflect_point({5, 7, 0}, z0), {5, 7, 0}, 1e-15);
  expect_near(reflect_point({0, 0, 1}, plane(0, 0, 1, -4)), {0, 0, 7}, 1e-15);
}

TEST(ReflectPoint, InvolutionAndFixedPlane) {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const MirrorPlane m = random_plane(rng);
    const ScenePoint p = random_point(rng, 5.0);
    expect_near(reflect_point(reflect_point(p, m), m), p, 1e-12);
    const ScenePoint on = p - m.signed_distance(p) * m.normal;
    expect_near(reflect_point(on, m), on, 1e-12);
  }
}

TEST(PathLength, HandExamples) {
  const DevicePair dev;
  const MirrorPlane m = plane(0, 0, 1, -5);
  EXPECT_NEAR(path_length(dev, {0, 0, 4}, {0, 0, 4}, m), 10.0, 1e-14);
  EXPECT_NEAR(path_length(dev, {1, 0, 4}, {-1, 0, 4}, m),
              2.0 * std::sqrt(17.0) + std::sqrt(8.0), 1e-12);
}

TEST(PathLength, ScaleInvarianceOfRawPlane) {
  Rng rng(12);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int i = 0; i < 200; ++i) {
    const DevicePair dev{random_point(rng), random_point(rng)};
    const ScenePoint l = random_point(rng, 3.0), c = random_point(rng, 3.0);
    const RawPlane raw = random_plane(rng).raw();
    const double s = scale(rng);
    EXPECT_NEAR(path_length(dev, l, c, normalize_plane(raw)),
                path_length(dev, l, c, normalize_plane(s * raw)), 1e-10);
  }
}

TEST(PathLength, Reciprocity) {
  Rng rng(13);
  for (int i = 0; i < 500; ++i) {
    const DevicePair dev{random_point(rng), random_point(rng)};
    const DevicePair swapped{dev.laser, dev.camera};
    const ScenePoint l = random_point(rng, 3.0), c = random_point(rng, 3.0);
    const MirrorPlane m = random_plane(rng);
    // |L - S_L| + |C - L'| + |C - S_C| with L' = refl(L); swapping uses
    // |C - refl(L)| = |refl(C) - L|, equal up to rounding of the reflection.
    EXPECT_NEAR(path_length(dev, l, c, m), path_length(swapped, c, l, m), 1e-12);
  }
}

TEST(ReflectionPoint, HandExamples) {
  const MirrorPlane m = plane(0, 0, 1, -5);
  auto r = reflection_point({0, 0, 4}, {0, 0, 4}, m);
  ASSERT_TRUE(r);
  expect_near(*r, {0, 0, 5}, 1e-15);
  r = reflection_point({1, 0, 4}, {-1, 0, 4}, m);
  ASSERT_TRUE(r);
  expect_near(*r, {0, 0, 5}, 1e-15);
  r = reflection_point({0, 0, 4}, {0, 0, 3}, m);
  ASSERT_TRUE(r);
  expect_near(*r, {0, 0, 5}, 1e-15);
}

TEST(ReflectionPoint, OppositeSidesHaveNoPath) {
  const MirrorPlane m = plane(0, 0, 1, -5);
  EXPECT_FALSE(reflection_point({0, 0, 4}, {0, 0, 6}, m));
}

TEST(ReflectionPoint, VirtualSourceEquivalence) {
  Rng rng(14);
  int checked = 0;
  for (int i = 0; i < 2000; ++i) {
    const MirrorPlane m = random_plane(rng);
    const ScenePoint l = random_point(rng, 3.0), c = random_point(rng, 3.0);
    const auto r = reflection_point(l, c, m);
    if (!r) continue;
    ++checked;
    EXPECT_NEAR(m.signed_distance(*r), 0.0, 1e-12);
    EXPECT_NEAR((l - *r).norm() + (*r - c).norm(),
                (reflect_point(l, m) - c).norm(), 1e-9);
  }
  EXPECT_GT(checked, 500);
}

TEST(MirrorExtent, ClosedRectangle) {
  const MirrorPlane m = plane(0, 0, 1, -5);
  const MirrorExtent e{{1, 2, 5}, {0.5, 0, 0}, {0, 0.25, 0}};
  EXPECT_TRUE(within_mirror_extent(e.center, m, e));
  EXPECT_TRUE(within_mirror_extent(e.center + e.half_u, m, e));
  EXPECT_TRUE(within_mirror_extent(e.center - e.half_v, m, e));
  EXPECT_TRUE(within_mirror_extent(e.center + e.half_u + e.half_v, m, e));
  EXPECT_FALSE(within_mirror_extent(e.center + 1.01 * e.half_u, m, e));
  EXPECT_FALSE(within_mirror_extent(e.center - 1.01 * e.half_v, m, e));
}

TEST(EvaluatePath, GradientMatchesFiniteDifferences) {
  Rng rng(15);
  const double h = 1e-6;
  for (int i = 0; i < 200; ++i) {
    const DevicePair dev{random_point(rng), random_point(rng)};
    const ScenePoint l = random_point(rng, 3.0), c = random_point(rng, 3.0);
    const RawPlane raw = 2.0 * random_plane(rng).raw();
    const PathEvaluation e = evaluate_path(dev, l, c, raw);
    EXPECT_NEAR(e.length, path_length(dev, l, c, normalize_plane(raw)), 1e-12);
    auto f = [&](const ScenePoint& ll, const ScenePoint& cc, const RawPlane& pp) {
      return evaluate_path(dev, ll, cc, pp).length;
    };
    for (int k = 0; k < 3; ++k) {
      const ScenePoint dk = h * ScenePoint::Unit(k);
      EXPECT_NEAR(e.gradient.d_laser[k], (f(l + dk, c, raw) - f(l - dk, c, raw)) / (2 * h), 1e-6);
      EXPECT_NEAR(e.gradient.d_pixel[k], (f(l, c + dk, raw) - f(l, c - dk, raw)) / (2 * h), 1e-6);
    }
    for (int k = 0; k < 4; ++k) {
      const RawPlane dk = h * RawPlane::Unit(k);
      EXPECT_NEAR(e.gradient.d_plane[k], (f(l, c, raw + dk) - f(l, c, raw - dk)) / (2 * h), 1e-6);
    }
  }
}

TEST(EvaluatePath, CoincidentPointsAreFlaggedNotFatal) {
  const DevicePair dev;
  const PathEvaluation e = evaluate_path(dev, {0, 0, 0}, {0, 0, 4}, RawPlane(0, 0, 1, -5));
  EXPECT_TRUE(e.gradient.degenerate);
  EXPECT_TRUE(e.gradient.d_laser.allFinite());
  EXPECT_NEAR(e.length, 0.0 + 6.0 + 4.0, 1e-12);
}

TEST(Rigid, PathLengthsInvariant) {
  Rng rng(16);
  for (int i = 0; i < 200; ++i) {
    const RigidTransform t = random_rigid(rng);
    const DevicePair dev{random_point(rng), random_point(rng)};
    const ScenePoint l = random_point(rng, 3.0), c = random_point(rng, 3.0);
    const MirrorPlane m = random_plane(rng);
    const DevicePair moved{t.apply(dev.camera), t.apply(dev.laser)};
    EXPECT_NEAR(path_length(dev, l, c, m),
                path_length(moved, t.apply(l), t.apply(c), t.apply(m)), 1e-10);
  }
}

TEST(Rigid, InverseAndCompose) {
  Rng rng(17);
  const RigidTransform a = random_rigid(rng), b = random_rigid(rng);
  const ScenePoint p = random_point(rng);
  expect_near(a.inverse().apply(a.apply(p)), p, 1e-12);
  expect_near(a.compose(b).apply(p), a.apply(b.apply(p)), 1e-12);
}
