#pragma once

// Synthetic calibration scenes, initialization noise and forward ToF
// simulation.
//
// All builders put the devices at the origin and the wall around
// y = wall_distance, so a planar scene is already in the planar gauge.
// Pixel (row, col) of the sensor lands at wall (x, z) = frustum/2 * sensor
// coordinate, with sensor coordinates spanning [-1, 1].

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "nlos_calib/geometry.hpp"
#include "nlos_calib/measurement.hpp"
#include "nlos_calib/param.hpp"
#include "nlos_calib/random.hpp"
#include "nlos_calib/types.hpp"

namespace nlos_calib {

enum class WallShape { Planar, Cylindrical };

struct StandardSetupConfig {
  int grid = 5;  ///< pixels per sensor side
  std::size_t lasers = 8;
  std::size_t mirrors = 40;
  double frustum = 2.0;  ///< side of the square view frustum on the wall
  double wall_distance = 4.0;
  /// Mirror depth band, as fractions of the wall distance.
  double mirror_depth_min = 0.25;
  double mirror_depth_max = 0.75;
  /// Lateral mirror spread, as a fraction of the frustum (half-width).
  double mirror_lateral = 0.75;
  /// Laser ring half-size beyond the frustum edge, fraction of frustum.
  double laser_margin = 0.125;
  double mirror_half_extent = 0.3;
  /// Mirrors aim at a uniform point within this fraction of the frustum.
  double mirror_aim = 1.0;
  WallShape wall = WallShape::Planar;
  double cylinder_radius = 2.0;
  std::vector<int> dead_rows;
  std::vector<int> dead_cols;

  void check() const {
    if (grid < 2 || lasers == 0 || mirrors == 0 || !(frustum > 0.0) ||
        !(wall_distance > 0.0) || !(mirror_depth_min > 0.0) ||
        !(mirror_depth_max >= mirror_depth_min) || !(cylinder_radius > 0.0)) {
      throw std::invalid_argument("invalid synthetic setup configuration");
    }
  }

  /// The experimental setup's dimensions in meters: 6.6 m wall distance,
  /// 1.35 m frustum, 32x32 sensor with broken rows and columns, 7 laser
  /// spots and 7 mirror placements.
  static StandardSetupConfig real_twin() {
    StandardSetupConfig c;
    c.grid = 32;
    c.lasers = 7;
    c.mirrors = 7;
    c.frustum = 1.35;
    c.wall_distance = 6.6;
    c.mirror_half_extent = 0.25;
    c.dead_rows = {6, 19};
    c.dead_cols = {3, 14, 15, 27};
    return c;
  }

  /// Pixels and lasers on a cylindrical wall section.
  static StandardSetupConfig curved() {
    StandardSetupConfig c;
    c.lasers = 6;
    c.mirrors = 6;
    c.wall = WallShape::Cylindrical;
    return c;
  }
};

struct SyntheticSetup {
  SceneEstimate scene;
  std::vector<MirrorExtent> extents;
  SensorPattern pattern;
};

namespace detail {

// Wall point for lateral coordinates (x, z). A cylindrical wall has its axis
// along z and bends toward the devices away from x = 0.
inline ScenePoint wall_point(const StandardSetupConfig& cfg, double x,
                             double z) {
  if (cfg.wall == WallShape::Planar) return {x, cfg.wall_distance, z};
  const double r = cfg.cylinder_radius;
  const double theta = x / r;
  return {r * std::sin(theta), cfg.wall_distance - r * (1.0 - std::cos(theta)),
          z};
}

inline MirrorExtent extent_for(const ScenePoint& center,
                               const Eigen::Vector3d& normal,
                               double half_extent) {
  Eigen::Vector3d helper = std::abs(normal.z()) < 0.9
                               ? Eigen::Vector3d::UnitZ()
                               : Eigen::Vector3d::UnitX();
  const Eigen::Vector3d u = normal.cross(helper).normalized();
  const Eigen::Vector3d v = normal.cross(u).normalized();
  return {center, half_extent * u, half_extent * v};
}

}  // namespace detail

/// Sensor pattern with coordinates spanning [-1, 1] on both axes.
inline SensorPattern make_pattern(const StandardSetupConfig& cfg) {
  const double pitch = 2.0 / (cfg.grid - 1);
  return SensorPattern(cfg.grid, cfg.grid, pitch, pitch, cfg.dead_rows,
                       cfg.dead_cols);
}

/// Devices at the origin; pixels on a regular grid filling the frustum on
/// the wall; laser spots around the frustum perimeter; mirrors in the slab
/// between devices and wall, each facing a random point of the frustum.
inline SyntheticSetup build_standard_setup(const StandardSetupConfig& cfg,
                                           std::uint64_t seed) {
  cfg.check();
  Rng rng = make_rng(seed, {static_cast<std::uint64_t>(Stream::Scene)});
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);

  SyntheticSetup out;
  out.pattern = make_pattern(cfg);
  const double half = 0.5 * cfg.frustum;
  for (const auto& s : out.pattern.coordinates()) {
    out.scene.pixels.push_back(
        detail::wall_point(cfg, half * s.x(), half * s.y()));
  }

  // Evenly spaced angles around the square ring with jitter of up to half a
  // slot, projected onto the square.
  const double ring = half + cfg.laser_margin * cfg.frustum;
  const double slot = 2.0 * std::numbers::pi / static_cast<double>(cfg.lasers);
  for (std::size_t i = 0; i < cfg.lasers; ++i) {
    const double a =
        slot * (static_cast<double>(i) + 0.5 * jitter(rng)) + 0.25 * slot;
    const double c = std::cos(a);
    const double s = std::sin(a);
    const double scale = ring / std::max(std::abs(c), std::abs(s));
    out.scene.lasers.push_back(detail::wall_point(cfg, scale * c, scale * s));
  }

  std::uniform_real_distribution<double> depth(
      cfg.mirror_depth_min * cfg.wall_distance,
      cfg.mirror_depth_max * cfg.wall_distance);
  const double lateral = cfg.mirror_lateral * cfg.frustum;
  for (std::size_t j = 0; j < cfg.mirrors; ++j) {
    const ScenePoint center(lateral * unit(rng), depth(rng),
                            lateral * unit(rng));
    const ScenePoint target =
        detail::wall_point(cfg, cfg.mirror_aim * half * unit(rng),
                           cfg.mirror_aim * half * unit(rng));
    const Eigen::Vector3d n = (target - center).normalized();
    out.scene.mirrors.push_back({n, -n.dot(center)});
    out.extents.push_back(
        detail::extent_for(center, n, cfg.mirror_half_extent));
  }
  return out;
}

/// Keeps the listed lasers and mirrors (in the given order).
inline SyntheticSetup select_subset(const SyntheticSetup& full,
                                    std::span<const std::size_t> lasers,
                                    std::span<const std::size_t> mirrors) {
  SyntheticSetup out;
  out.pattern = full.pattern;
  out.scene.devices = full.scene.devices;
  out.scene.pixels = full.scene.pixels;
  for (std::size_t i : lasers) out.scene.lasers.push_back(full.scene.lasers.at(i));
  for (std::size_t j : mirrors) {
    out.scene.mirrors.push_back(full.scene.mirrors.at(j));
    if (!full.extents.empty()) out.extents.push_back(full.extents.at(j));
  }
  return out;
}

/// Random subset of k of n indices, in increasing order.
inline std::vector<std::size_t> random_subset(std::size_t n, std::size_t k,
                                              Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min(k, n));
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// Initialization noise of level n: N(0, n^2) per laser and pixel
/// coordinate, N(0, (n/4)^2) per normal component followed by
/// renormalization, N(0, n^2) on plane offsets. Devices are untouched.
inline SceneEstimate perturb_setup(const SceneEstimate& scene, double n,
                                   Rng& rng) {
  if (!(n >= 0.0)) throw std::invalid_argument("noise level must be >= 0");
  if (n == 0.0) return scene;
  std::normal_distribution<double> point(0.0, n);
  std::normal_distribution<double> normal(0.0, n / 4.0);
  SceneEstimate out = scene;
  for (auto& p : out.lasers) p += ScenePoint(point(rng), point(rng), point(rng));
  for (auto& p : out.pixels) p += ScenePoint(point(rng), point(rng), point(rng));
  for (auto& m : out.mirrors) {
    Eigen::Vector3d v = m.normal;
    v += Eigen::Vector3d(normal(rng), normal(rng), normal(rng));
    const double offset = m.offset + point(rng);
    m = normalize_plane(RawPlane(v.x(), v.y(), v.z(), offset * v.norm()));
  }
  return out;
}

inline SceneEstimate perturb_setup(const SceneEstimate& scene, double n,
                                   std::uint64_t seed) {
  Rng rng = make_rng(seed, {static_cast<std::uint64_t>(Stream::Perturb)});
  return perturb_setup(scene, n, rng);
}

/// Grid-style initialization: instead of moving every pixel, the four
/// frustum corners receive N(0, n^2) noise and the pixels are
/// bilinearly interpolated between them. Lasers and mirrors as in
/// perturb_setup. Expects a wall at constant y.
inline SceneEstimate perturb_frustum_corners(const SceneEstimate& scene,
                                             const SensorPattern& pattern,
                                             double n, Rng& rng) {
  SceneEstimate out = perturb_setup(scene, n, rng);
  std::vector<Eigen::Vector2d> wall;
  double y = 0.0;
  for (const auto& p : scene.pixels) {
    wall.emplace_back(p.x(), p.z());
    y += p.y();
  }
  y /= static_cast<double>(scene.pixels.size());
  const Homography h = fit_homography(pattern.coordinates(), wall);
  const auto sensor_corners = pattern.corners();
  std::normal_distribution<double> noise(0.0, n > 0.0 ? n : 1.0);
  std::array<ScenePoint, 4> corners;
  for (std::size_t i = 0; i < 4; ++i) {
    const Eigen::Vector2d w = h.apply(sensor_corners[i]);
    corners[i] = ScenePoint(w.x(), y, w.y());
    if (n > 0.0) corners[i] += ScenePoint(noise(rng), noise(rng), noise(rng));
  }
  const Eigen::Vector2d lo = sensor_corners[0];
  const Eigen::Vector2d span = sensor_corners[2] - sensor_corners[0];
  for (std::size_t k = 0; k < pattern.live_count(); ++k) {
    const Eigen::Vector2d s = pattern.coordinates()[k];
    const double a = span.x() != 0.0 ? (s.x() - lo.x()) / span.x() : 0.0;
    const double b = span.y() != 0.0 ? (s.y() - lo.y()) / span.y() : 0.0;
    out.pixels[k] = (1 - a) * (1 - b) * corners[0] + a * (1 - b) * corners[1] +
                    a * b * corners[2] + (1 - a) * b * corners[3];
  }
  return out;
}

/// ToF per path: exact path length plus N(0, tof_sigma^2). With extents,
/// paths whose reflection point misses the mirror patch are inactive.
inline MeasurementSet simulate_tofs(
    const SceneEstimate& scene, std::vector<PathMeasurement> paths,
    double tof_sigma, Rng& rng,
    std::span<const MirrorExtent> extents = {}) {
  if (!(tof_sigma >= 0.0)) throw std::invalid_argument("tof sigma must be >= 0");
  std::normal_distribution<double> noise(0.0, tof_sigma > 0.0 ? tof_sigma : 1.0);
  MeasurementSet out;
  out.paths = std::move(paths);
  for (auto& p : out.paths) {
    const ScenePoint& l = scene.lasers.at(p.laser);
    const ScenePoint& c = scene.pixels.at(p.pixel);
    const MirrorPlane& m = scene.mirrors.at(p.mirror);
    p.tof = path_length(scene.devices, l, c, m);
    if (tof_sigma > 0.0) p.tof += noise(rng);
    p.active = true;
    if (!extents.empty()) {
      const auto r = reflection_point(l, c, m);
      p.active = r.has_value() && within_mirror_extent(*r, m, extents[p.mirror]);
    }
  }
  return out;
}

inline MeasurementSet simulate_tofs(const SceneEstimate& scene,
                                    double tof_sigma, std::uint64_t seed,
                                    std::span<const MirrorExtent> extents = {}) {
  Rng rng = make_rng(seed, {static_cast<std::uint64_t>(Stream::Tof)});
  return simulate_tofs(scene, fully_connected(counts_of(scene)), tof_sigma,
                       rng, extents);
}

}  // namespace nlos_calib
