#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "test_util.hpp"

using namespace nlos_calib;
using namespace nlos_calib::testing;

namespace {

std::vector<ScenePoint> random_points(Rng& rng, std::size_t n) {
  std::vector<ScenePoint> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_point(rng, 2.0));
  return out;
}

double aligned_sq(const RigidTransform& t, const std::vector<ScenePoint>& p,
                  const std::vector<ScenePoint>& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (t.apply(p[i]) - q[i]).squaredNorm();
  return s;
}

}  // namespace

TEST(Kabsch, IdentityForEqualSets) {
  Rng rng(51);
  const auto p = random_points(rng, 10);
  const RigidTransform t = kabsch_align(p, p);
  EXPECT_LT((t.rotation - Eigen::Matrix3d::Identity()).norm(), 1e-12);
  EXPECT_LT(t.translation.norm(), 1e-12);
}

TEST(Kabsch, RecoversRandomRigidMotions) {
  Rng rng(52);
  for (int trial = 0; trial < 200; ++trial) {
    const RigidTransform truth = random_rigid(rng);
    const auto p = random_points(rng, 12);
    std::vector<ScenePoint> q;
    for (const auto& x : p) q.push_back(truth.apply(x));
    const RigidTransform t = kabsch_align(p, q);
    EXPECT_LT((t.rotation - truth.rotation).norm(), 1e-9);
    EXPECT_LT((t.translation - truth.translation).norm(), 1e-9);
    EXPECT_LT(std::sqrt(aligned_sq(t, p, q) / 12.0), 1e-9);
    EXPECT_NEAR(t.rotation.determinant(), 1.0, 1e-12);
  }
}

TEST(Kabsch, ReflectionYieldsBestProperRotation) {
  Rng rng(53);
  for (int trial = 0; trial < 5; ++trial) {
    const auto p = random_points(rng, 4);
    std::vector<ScenePoint> q;
    for (const auto& x : p) q.emplace_back(-x.x(), x.y(), x.z());
    const RigidTransform t = kabsch_align(p, q);
    EXPECT_NEAR(t.rotation.determinant(), 1.0, 1e-12);
    const double cost = aligned_sq(t, p, q);
    EXPECT_GT(cost, 1e-6);

    // Oracle: brute-force search over rotations (Euler grid, then local
    // refinement), translation solved in closed form from the centroids.
    auto cost_of = [&](const Eigen::Matrix3d& r) {
      ScenePoint cp = ScenePoint::Zero(), cq = ScenePoint::Zero();
      for (std::size_t i = 0; i < p.size(); ++i) {
        cp += p[i];
        cq += q[i];
      }
      cp /= double(p.size());
      cq /= double(q.size());
      RigidTransform x{r, cq - r * cp};
      return aligned_sq(x, p, q);
    };
    auto rot = [](double a, double b, double c) {
      return (Eigen::AngleAxisd(a, Eigen::Vector3d::UnitZ()) *
              Eigen::AngleAxisd(b, Eigen::Vector3d::UnitY()) *
              Eigen::AngleAxisd(c, Eigen::Vector3d::UnitX()))
          .toRotationMatrix();
    };
    const int steps = 36;
    const double pi = std::numbers::pi;
    double best = std::numeric_limits<double>::infinity();
    Eigen::Vector3d angles = Eigen::Vector3d::Zero();
    for (int i = 0; i < steps; ++i)
      for (int j = 0; j <= steps / 2; ++j)
        for (int k = 0; k < steps; ++k) {
          const Eigen::Vector3d a(2 * pi * i / steps - pi, pi * j / (steps / 2) - pi / 2,
                                  2 * pi * k / steps - pi);
          const double c = cost_of(rot(a[0], a[1], a[2]));
          if (c < best) {
            best = c;
            angles = a;
          }
        }
    double step = 2 * pi / steps;
    while (step > 1e-7) {
      bool improved = false;
      for (int axis = 0; axis < 3; ++axis)
        for (double sgn : {-1.0, 1.0}) {
          Eigen::Vector3d a = angles;
          a[axis] += sgn * step;
          const double c = cost_of(rot(a[0], a[1], a[2]));
          if (c < best) {
            best = c;
            angles = a;
            improved = true;
          }
        }
      if (!improved) step *= 0.5;
    }
    EXPECT_LE(cost, best + 1e-9);
    EXPECT_NEAR(cost, best, 1e-6 * std::max(1.0, best));
  }
}

TEST(Kabsch, DegenerateInputsThrow) {
  std::vector<ScenePoint> two = {{0, 0, 0}, {1, 0, 0}};
  EXPECT_THROW(kabsch_align(two, two), DegenerateConfigurationError);
  std::vector<ScenePoint> line = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
  EXPECT_THROW(kabsch_align(line, line), DegenerateConfigurationError);
  std::vector<ScenePoint> three = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  EXPECT_THROW(kabsch_align(three, two), LengthMismatchError);
}

TEST(SetupRms, Examples) {
  const SyntheticSetup s = small_setup(54);
  EXPECT_EQ(setup_rms(s.scene, s.scene, false), 0.0);
  EXPECT_LT(setup_rms(s.scene, s.scene, true), 1e-12);

  SceneEstimate shifted = s.scene;
  shifted.devices.camera.x() += 1.0;
  shifted.devices.laser.x() += 1.0;
  for (auto& p : shifted.lasers) p.x() += 1.0;
  for (auto& p : shifted.pixels) p.x() += 1.0;
  EXPECT_NEAR(setup_rms(s.scene, shifted, false), 1.0, 1e-12);
  const std::size_t n = calibration_points(s.scene).size();
  EXPECT_NEAR(setup_rms(s.scene, shifted, false, RmsConvention::RawSum),
              std::sqrt(double(n)), 1e-12);
  EXPECT_LT(setup_rms(s.scene, shifted, true), 1e-9);
}

TEST(SetupRms, RigidInvarianceAndSymmetry) {
  Rng rng(55);
  const SyntheticSetup s = small_setup(55);
  SceneEstimate noisy = perturb_setup(s.scene, 0.1, rng);
  noisy.devices.laser += random_point(rng, 0.1);
  const double base = setup_rms(noisy, s.scene, true);
  EXPECT_GT(base, 0.0);
  for (int trial = 0; trial < 50; ++trial) {
    const RigidTransform t = random_rigid(rng);
    EXPECT_NEAR(setup_rms(t.apply(noisy), s.scene, true), base, 1e-9);
    EXPECT_NEAR(setup_rms(noisy, t.apply(s.scene), true), base, 1e-9);
  }
  EXPECT_NEAR(setup_rms(s.scene, noisy, true), base, 1e-9);
  EXPECT_EQ(setup_rms(s.scene, noisy, false), setup_rms(noisy, s.scene, false));
}

TEST(SetupRms, MirrorsExcluded) {
  Rng rng(56);
  const SyntheticSetup s = small_setup(56);
  SceneEstimate other = s.scene;
  for (auto& m : other.mirrors) m = random_plane(rng);
  EXPECT_EQ(setup_rms(other, s.scene, false), 0.0);
}

TEST(SetupRms, CountMismatchThrows) {
  const SyntheticSetup a = small_setup(57, 4), b = small_setup(57, 3);
  EXPECT_THROW(setup_rms(a.scene, b.scene, true), LengthMismatchError);
}
