#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "test_util.hpp"

using namespace nlos_calib;
using namespace nlos_calib::testing;

namespace {

std::vector<double> vec(std::initializer_list<double> v) { return v; }

SensorPattern square_pattern(int n) {
  return SensorPattern(n, n, 1.0, 1.0);
}

Eigen::VectorXd random_vector(Rng& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = g(rng);
  return v;
}

// Random valid parameters: normalized planes, and for the grid kind a
// homography near identity so the scene stays well defined.
Eigen::VectorXd random_parameters(Rng& rng, const Parameterization& param,
                                  const SceneCounts& c) {
  Eigen::VectorXd p = random_vector(rng, param.size(c));
  if (param.kind() == ParameterizationKind::RegularGrid) {
    const double id[8] = {1, 0, 0, 0, 1, 0, 0, 0};
    for (int i = 0; i < 8; ++i) p[i] = id[i] + 0.05 * p[i];
  }
  const Eigen::Index planes = p.size() - 4 * static_cast<Eigen::Index>(c.mirrors);
  for (Eigen::Index m = planes; m < p.size(); m += 4) {
    p.segment<4>(m) = normalize_plane(p.segment<4>(m)).raw();
  }
  return p;
}

}  // namespace

TEST(CountParameters, StandardSetup) {
  EXPECT_EQ(count_parameters(ParameterizationKind::General, 8, 25, 4), 115u);
  EXPECT_EQ(count_parameters(ParameterizationKind::PlanarWall, 8, 25, 4), 83u);
  EXPECT_EQ(count_parameters(ParameterizationKind::RegularGrid, 8, 25, 4), 41u);
}

TEST(CountParameters, MatchesPackedLengthForRandomCounts) {
  Rng rng(21);
  std::uniform_int_distribution<int> n(1, 9);
  for (int trial = 0; trial < 50; ++trial) {
    const int w = n(rng) + 1, h = n(rng) + 1;
    const SensorPattern pattern(w, h, 0.3, 0.2);
    const SceneCounts c{std::size_t(n(rng)), pattern.live_count(), std::size_t(n(rng))};
    for (auto kind : {ParameterizationKind::General, ParameterizationKind::PlanarWall,
                      ParameterizationKind::RegularGrid}) {
      const Parameterization param = parameterization_for(kind, pattern);
      const Eigen::VectorXd p = random_parameters(rng, param, c);
      const SceneEstimate s = param.unpack(as_span(p), c, {});
      EXPECT_EQ(param.pack(s).size(),
                Eigen::Index(count_parameters(kind, c.lasers, c.pixels, c.mirrors)));
    }
  }
}

TEST(UnpackGeneral, Examples) {
  const SceneEstimate empty = unpack_general({}, {0, 0, 0}, {});
  EXPECT_TRUE(empty.lasers.empty() && empty.pixels.empty() && empty.mirrors.empty());

  const auto one = vec({1, 2, 3});
  const SceneEstimate l = unpack_general(one, {1, 0, 0}, {});
  ASSERT_EQ(l.lasers.size(), 1u);
  EXPECT_EQ(l.lasers[0], ScenePoint(1, 2, 3));

  const auto plane = vec({0, 0, 2, -8});
  const SceneEstimate m = unpack_general(plane, {0, 0, 1}, {});
  ASSERT_EQ(m.mirrors.size(), 1u);
  EXPECT_EQ(m.mirrors[0].normal, Eigen::Vector3d(0, 0, 1));
  EXPECT_DOUBLE_EQ(m.mirrors[0].offset, -4.0);
}

TEST(UnpackGeneral, LengthMismatchThrows) {
  const auto p = vec({1, 2});
  EXPECT_THROW(unpack_general(p, {1, 0, 0}, {}), LengthMismatchError);
}

TEST(UnpackPlanar, Examples) {
  const auto origin = vec({4, 0, 0});
  EXPECT_EQ(unpack_planar(origin, {1, 0, 0}, {}).lasers[0], ScenePoint(0, 4, 0));
  const auto p = vec({4, 1, -1});
  EXPECT_EQ(unpack_planar(p, {1, 0, 0}, {}).lasers[0], ScenePoint(1, 4, -1));
}

TEST(UnpackGrid, Examples) {
  const SensorPattern single(1, 1, 1.0, 1.0);
  const auto identity = vec({1, 0, 0, 0, 1, 0, 0, 0, 3});
  EXPECT_EQ(unpack_grid(identity, single, 0, 0, {}).pixels[0], ScenePoint(0, 3, 0));

  const SensorPattern at11(1, 1, 1.0, 1.0, {}, {}, {}, {Eigen::Vector2d(1, 1)});
  const auto scale = vec({2, 0, 0, 0, 2, 0, 0, 0, 0});
  EXPECT_EQ(unpack_grid(scale, at11, 0, 0, {}).pixels[0], ScenePoint(2, 0, 2));

  const SensorPattern at01(1, 1, 1.0, 1.0, {}, {}, {}, {Eigen::Vector2d(0, 1)});
  const auto projective = vec({1, 0, 0, 0, 1, 0, 0, 1, 0});
  const ScenePoint w = unpack_grid(projective, at01, 0, 0, {}).pixels[0];
  EXPECT_NEAR(w.x(), 0.0, 1e-15);
  EXPECT_NEAR(w.z(), 0.5, 1e-15);
}

TEST(UnpackGrid, IdentityHomographyMatchesPlanar) {
  Rng rng(22);
  const SensorPattern pattern(4, 3, 0.5, 0.7);
  const SceneCounts c{3, pattern.live_count(), 2};
  Eigen::VectorXd grid = random_parameters(rng, Parameterization::grid(pattern), c);
  const double id[8] = {1, 0, 0, 0, 1, 0, 0, 0};
  for (int i = 0; i < 8; ++i) grid[i] = id[i];
  const SceneEstimate g = Parameterization::grid(pattern).unpack(as_span(grid), c, {});

  // Same scene expressed in planar form.
  Eigen::VectorXd planar(static_cast<Eigen::Index>(count_parameters(
      ParameterizationKind::PlanarWall, c.lasers, c.pixels, c.mirrors)));
  Eigen::Index at = 0;
  planar[at++] = grid[8];
  for (std::size_t i = 0; i < c.lasers; ++i) {
    planar[at++] = grid[9 + 2 * i];
    planar[at++] = grid[10 + 2 * i];
  }
  for (const auto& s : pattern.coordinates()) {
    planar[at++] = s.x();
    planar[at++] = s.y();
  }
  planar.tail(4 * c.mirrors) = grid.tail(4 * c.mirrors);
  const SceneEstimate p = unpack_planar(as_span(planar), c, {});
  for (std::size_t i = 0; i < c.pixels; ++i) EXPECT_EQ(g.pixels[i], p.pixels[i]);
  for (std::size_t i = 0; i < c.lasers; ++i) EXPECT_EQ(g.lasers[i], p.lasers[i]);
}

TEST(PackUnpack, RoundTripAllKinds) {
  Rng rng(23);
  const SensorPattern pattern(3, 4, 0.4, 0.25, {}, {}, {{1, 1}});
  const SceneCounts c{5, pattern.live_count(), 3};
  for (auto kind : {ParameterizationKind::General, ParameterizationKind::PlanarWall,
                    ParameterizationKind::RegularGrid}) {
    const Parameterization param = parameterization_for(kind, pattern);
    for (int trial = 0; trial < 50; ++trial) {
      Eigen::VectorXd p = random_parameters(rng, param, c);
      if (kind == ParameterizationKind::PlanarWall) {
        // Offset is recovered as the mean wall height, so every point must
        // share it, which holds by construction.
      }
      const SceneEstimate s = param.unpack(as_span(p), c, {});
      const Eigen::VectorXd q = param.pack(s);
      ASSERT_EQ(q.size(), p.size());
      EXPECT_LT((q - p).cwiseAbs().maxCoeff(), 1e-9) << to_string(kind);
    }
  }
}

TEST(PackUnpack, PreservesCorrespondenceOrder) {
  const SyntheticSetup s = small_setup(3);
  const Parameterization param = Parameterization::planar();
  const SceneEstimate back =
      param.unpack(as_span(param.pack(s.scene)), counts_of(s.scene), s.scene.devices);
  for (std::size_t i = 0; i < s.scene.pixels.size(); ++i)
    EXPECT_LT((back.pixels[i] - s.scene.pixels[i]).norm(), 1e-12);
  for (std::size_t i = 0; i < s.scene.lasers.size(); ++i)
    EXPECT_LT((back.lasers[i] - s.scene.lasers[i]).norm(), 1e-12);
}

TEST(SensorPattern, DeadRowsAndColumnsRemoved) {
  const SensorPattern p(32, 32, 1.0, 1.0, {6, 19}, {3, 14, 15, 27});
  EXPECT_EQ(p.live_count(), 30u * 28u);
  EXPECT_TRUE(p.is_dead(6, 0));
  EXPECT_TRUE(p.is_dead(0, 27));
  EXPECT_FALSE(p.is_dead(0, 0));
  for (const auto& [r, c] : p.live_pixels()) EXPECT_FALSE(p.is_dead(r, c));
}

TEST(SensorPattern, RemapMustMatchLiveCount) {
  EXPECT_THROW(SensorPattern(2, 2, 1, 1, {}, {}, {}, {Eigen::Vector2d(0, 0)}),
               LengthMismatchError);
  EXPECT_THROW(SensorPattern(2, 1, 1, 1, {}, {}, {},
                             {Eigen::Vector2d(0, 0), Eigen::Vector2d(0, 0)}),
               std::invalid_argument);
}

TEST(Planarize, AlreadyOnWallIsIdentity) {
  SceneEstimate s;
  for (int i = 0; i < 5; ++i) s.lasers.emplace_back(i * 0.3 - 0.6, 4.0, 0.2 * i * i);
  for (int i = 0; i < 6; ++i) s.pixels.emplace_back(std::sin(i), 4.0, std::cos(i));
  const PlanarInitialization init = planarize_initialization(s);
  EXPECT_LT((init.transform.rotation - Eigen::Matrix3d::Identity()).norm(), 1e-12);
  EXPECT_NEAR(init.parameters[0], 4.0, 1e-12);
  EXPECT_NEAR(init.parameters[1], s.lasers[0].x(), 1e-12);
  EXPECT_NEAR(init.parameters[2], s.lasers[0].z(), 1e-12);
}

TEST(Planarize, TiltedExactPlaneIsFlattened) {
  Rng rng(24);
  for (int trial = 0; trial < 20; ++trial) {
    const RigidTransform tilt = random_rigid(rng, 0.0);
    SceneEstimate s;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 8; ++i) s.lasers.push_back(tilt.apply({u(rng), 4.0, u(rng)}));
    for (int i = 0; i < 9; ++i) s.pixels.push_back(tilt.apply({u(rng), 4.0, u(rng)}));
    const PlanarInitialization init = planarize(s);
    const SceneEstimate moved = init.transform.apply(s);
    const double offset = init.parameters[0];
    for (const auto& p : moved.lasers) EXPECT_NEAR(p.y(), offset, 1e-9);
    for (const auto& p : moved.pixels) EXPECT_NEAR(p.y(), offset, 1e-9);
    EXPECT_NEAR(std::abs(offset), 4.0, 1e-9);
    // Camera stays at the origin.
    EXPECT_LT(init.transform.translation.norm(), 1e-15);
  }
}

TEST(FitPlane, NoisyPointsAgreeWithExhaustiveSearch) {
  Rng rng(25);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.01);
  for (int trial = 0; trial < 10; ++trial) {
    const RigidTransform tilt = random_rigid(rng, 0.0);
    const Eigen::Vector3d truth = tilt.rotation * Eigen::Vector3d::UnitY();
    std::vector<ScenePoint> pts;
    // Wall-sized instance: 25 points over 3 x 3 units.
    for (int i = 0; i < 25; ++i)
      pts.push_back(tilt.apply({1.5 * u(rng), 4.0 + noise(rng), 1.5 * u(rng)}));
    const PlaneFit fit = fit_plane(pts);

    // Oracle: scan unit normals on a fine sphere grid, minimizing squared
    // orthogonal distance through the centroid.
    Eigen::Vector3d best = Eigen::Vector3d::UnitZ();
    double best_cost = std::numeric_limits<double>::infinity();
    const int steps = 400;
    for (int a = 0; a <= steps; ++a) {
      const double theta = std::numbers::pi * 0.5 * a / steps;  // hemisphere
      for (int b = 0; b < 4 * steps; ++b) {
        const double phi = 2.0 * std::numbers::pi * b / (4 * steps);
        const Eigen::Vector3d n(std::sin(theta) * std::cos(phi),
                                std::sin(theta) * std::sin(phi), std::cos(theta));
        double cost = 0.0;
        for (const auto& p : pts) {
          const double d = n.dot(p - fit.centroid);
          cost += d * d;
        }
        if (cost < best_cost) {
          best_cost = cost;
          best = n;
        }
      }
    }
    const double grid_angle = std::acos(std::min(1.0, std::abs(best.dot(fit.normal))));
    EXPECT_LT(grid_angle, 2.0 * std::numbers::pi / steps);
    const double truth_angle = std::acos(std::min(1.0, std::abs(truth.dot(fit.normal))));
    EXPECT_LT(truth_angle, 1e-2);
  }
}

TEST(FitPlane, CollinearPointsThrow) {
  std::vector<ScenePoint> pts = {{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {3, 3, 3}};
  EXPECT_THROW(fit_plane(pts), DegenerateConfigurationError);
}

TEST(Homography, FitRecoversProjectiveMap) {
  Homography h;
  h.matrix << 1.2, 0.1, 0.3, -0.2, 0.9, -0.1, 0.05, -0.02, 1.0;
  const SensorPattern pattern = square_pattern(4);
  std::vector<Eigen::Vector2d> wall;
  for (const auto& s : pattern.coordinates()) wall.push_back(h.apply(s));
  const Homography fit = fit_homography(pattern.coordinates(), wall);
  EXPECT_LT((fit.matrix - h.matrix).norm(), 1e-10);
}
