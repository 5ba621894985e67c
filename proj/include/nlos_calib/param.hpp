#pragma once

// Parameterizations g: flat parameter vector -> scene.
//
// Layouts (fixed; serialized results depend on them):
//   General      [lasers (x,y,z)..., pixels (x,y,z)..., mirrors (a,b,c,e)...]
//   PlanarWall   [wall offset, lasers (u,v)..., pixels (u,v)..., mirrors...]
//   RegularGrid  [homography h0..h7, wall offset, lasers (u,v)..., mirrors...]
//
// The planar gauge puts the wall at y = offset; a wall coordinate (u, v)
// lifts to (u, offset, v). Mirrors are raw 4-vectors, normalized on unpack.

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "nlos_calib/geometry.hpp"
#include "nlos_calib/homography.hpp"
#include "nlos_calib/rigid.hpp"
#include "nlos_calib/types.hpp"

namespace nlos_calib {

enum class ParameterizationKind { General, PlanarWall, RegularGrid };

inline std::string to_string(ParameterizationKind kind) {
  switch (kind) {
    case ParameterizationKind::General: return "general";
    case ParameterizationKind::PlanarWall: return "planar";
    case ParameterizationKind::RegularGrid: return "grid";
  }
  return "unknown";
}

inline ParameterizationKind parse_kind(const std::string& name) {
  if (name == "general") return ParameterizationKind::General;
  if (name == "planar") return ParameterizationKind::PlanarWall;
  if (name == "grid") return ParameterizationKind::RegularGrid;
  throw std::invalid_argument("unknown parameterization '" + name + "'");
}

/// Degrees of freedom of each parameterization. For RegularGrid the pixel
/// count does not enter.
inline std::size_t count_parameters(ParameterizationKind kind,
                                    std::size_t lasers, std::size_t pixels,
                                    std::size_t mirrors) {
  switch (kind) {
    case ParameterizationKind::General:
      return 3 * pixels + 3 * lasers + 4 * mirrors;
    case ParameterizationKind::PlanarWall:
      return 2 * pixels + 2 * lasers + 4 * mirrors + 1;
    case ParameterizationKind::RegularGrid:
      return 2 * lasers + 4 * mirrors + 9;
  }
  return 0;
}

/// Live pixels of a rectangular sensor in sensor coordinates. Pixel (row,
/// col) sits at ((col - (w-1)/2) * pitch_u, (row - (h-1)/2) * pitch_v)
/// unless a per-pixel remap (precomputed lens distortion) replaces it. Live
/// pixels are enumerated row-major.
class SensorPattern {
 public:
  SensorPattern() = default;

  SensorPattern(int width, int height, double pitch_u, double pitch_v,
                const std::vector<int>& dead_rows = {},
                const std::vector<int>& dead_cols = {},
                const std::vector<std::pair<int, int>>& dead_pixels = {},
                std::vector<Eigen::Vector2d> remap = {})
      : width_(width), height_(height), pitch_u_(pitch_u), pitch_v_(pitch_v) {
    if (width <= 0 || height <= 0) {
      throw std::invalid_argument("sensor pattern needs positive resolution");
    }
    dead_.assign(static_cast<std::size_t>(width * height), false);
    for (int r : dead_rows) {
      check_row(r);
      for (int c = 0; c < width; ++c) dead_[index(r, c)] = true;
    }
    for (int c : dead_cols) {
      check_col(c);
      for (int r = 0; r < height; ++r) dead_[index(r, c)] = true;
    }
    for (const auto& [r, c] : dead_pixels) {
      check_row(r);
      check_col(c);
      dead_[index(r, c)] = true;
    }
    for (int r = 0; r < height; ++r) {
      for (int c = 0; c < width; ++c) {
        if (dead_[index(r, c)]) continue;
        live_.emplace_back(r, c);
        coords_.emplace_back((c - 0.5 * (width - 1)) * pitch_u,
                             (r - 0.5 * (height - 1)) * pitch_v);
      }
    }
    if (!remap.empty()) {
      if (remap.size() != coords_.size()) {
        throw LengthMismatchError("sensor remap has " +
                                  std::to_string(remap.size()) +
                                  " entries for " +
                                  std::to_string(coords_.size()) +
                                  " live pixels");
      }
      coords_ = std::move(remap);
    }
    std::set<std::pair<double, double>> seen;
    for (const auto& s : coords_) {
      if (!seen.emplace(s.x(), s.y()).second) {
        throw std::invalid_argument("sensor coordinates must be unique");
      }
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  double pitch_u() const { return pitch_u_; }
  double pitch_v() const { return pitch_v_; }
  std::size_t live_count() const { return coords_.size(); }
  bool is_dead(int row, int col) const { return dead_[index(row, col)]; }
  const std::vector<Eigen::Vector2d>& coordinates() const { return coords_; }
  /// (row, col) of each live pixel, aligned with coordinates().
  const std::vector<std::pair<int, int>>& live_pixels() const { return live_; }

  /// Sensor coordinates of the four outer corners of the full grid.
  std::array<Eigen::Vector2d, 4> corners() const {
    const double hu = 0.5 * (width_ - 1) * pitch_u_;
    const double hv = 0.5 * (height_ - 1) * pitch_v_;
    return {Eigen::Vector2d(-hu, -hv), Eigen::Vector2d(hu, -hv),
            Eigen::Vector2d(hu, hv), Eigen::Vector2d(-hu, hv)};
  }

 private:
  std::size_t index(int r, int c) const {
    return static_cast<std::size_t>(r * width_ + c);
  }
  void check_row(int r) const {
    if (r < 0 || r >= height_) throw IndexError("dead row out of range");
  }
  void check_col(int c) const {
    if (c < 0 || c >= width_) throw IndexError("dead column out of range");
  }

  int width_ = 0;
  int height_ = 0;
  double pitch_u_ = 1.0;
  double pitch_v_ = 1.0;
  std::vector<bool> dead_;
  std::vector<std::pair<int, int>> live_;
  std::vector<Eigen::Vector2d> coords_;
};

/// Scene as seen by the objective: planes kept as raw coefficients so that
/// derivatives can flow through the normalization.
struct RawScene {
  DevicePair devices;
  std::vector<ScenePoint> lasers;
  std::vector<ScenePoint> pixels;
  std::vector<RawPlane> planes;
};

/// Objective gradient with respect to every scene entity.
struct SceneGradient {
  std::vector<Eigen::Vector3d> lasers;
  std::vector<Eigen::Vector3d> pixels;
  std::vector<Eigen::Vector4d> planes;

  explicit SceneGradient(const SceneCounts& c)
      : lasers(c.lasers, Eigen::Vector3d::Zero()),
        pixels(c.pixels, Eigen::Vector3d::Zero()),
        planes(c.mirrors, Eigen::Vector4d::Zero()) {}
};

inline SceneEstimate normalized(const RawScene& raw) {
  SceneEstimate out;
  out.devices = raw.devices;
  out.lasers = raw.lasers;
  out.pixels = raw.pixels;
  out.mirrors.reserve(raw.planes.size());
  for (const auto& p : raw.planes) out.mirrors.push_back(normalize_plane(p));
  return out;
}

/// One of the three parameterizations, carrying the sensor pattern for the
/// grid kind.
class Parameterization {
 public:
  static Parameterization general() {
    return Parameterization(ParameterizationKind::General, std::nullopt);
  }
  static Parameterization planar() {
    return Parameterization(ParameterizationKind::PlanarWall, std::nullopt);
  }
  static Parameterization grid(SensorPattern pattern) {
    return Parameterization(ParameterizationKind::RegularGrid,
                            std::move(pattern));
  }

  ParameterizationKind kind() const { return kind_; }
  const SensorPattern& pattern() const { return *pattern_; }

  std::size_t size(const SceneCounts& c) const {
    return count_parameters(kind_, c.lasers, c.pixels, c.mirrors);
  }

  /// Counts must match the pattern for the grid kind.
  void check_counts(const SceneCounts& c) const {
    if (kind_ == ParameterizationKind::RegularGrid &&
        c.pixels != pattern_->live_count()) {
      throw LengthMismatchError(
          "grid parameterization expects " +
          std::to_string(pattern_->live_count()) + " pixels, scene has " +
          std::to_string(c.pixels));
    }
  }

  RawScene unpack_raw(std::span<const double> p, const SceneCounts& c,
                      const DevicePair& dev) const {
    check_counts(c);
    const std::size_t expected = size(c);
    if (p.size() != expected) {
      throw LengthMismatchError("parameter vector has length " +
                                std::to_string(p.size()) + ", expected " +
                                std::to_string(expected));
    }
    RawScene raw;
    raw.devices = dev;
    raw.lasers.reserve(c.lasers);
    raw.pixels.reserve(c.pixels);
    raw.planes.reserve(c.mirrors);
    std::size_t at = 0;
    switch (kind_) {
      case ParameterizationKind::General:
        for (std::size_t i = 0; i < c.lasers; ++i, at += 3)
          raw.lasers.emplace_back(p[at], p[at + 1], p[at + 2]);
        for (std::size_t i = 0; i < c.pixels; ++i, at += 3)
          raw.pixels.emplace_back(p[at], p[at + 1], p[at + 2]);
        break;
      case ParameterizationKind::PlanarWall: {
        const double offset = p[at++];
        for (std::size_t i = 0; i < c.lasers; ++i, at += 2)
          raw.lasers.emplace_back(p[at], offset, p[at + 1]);
        for (std::size_t i = 0; i < c.pixels; ++i, at += 2)
          raw.pixels.emplace_back(p[at], offset, p[at + 1]);
        break;
      }
      case ParameterizationKind::RegularGrid: {
        const Homography h = Homography::from_entries(p.subspan(0, 8));
        const double offset = p[8];
        at = 9;
        for (std::size_t i = 0; i < c.lasers; ++i, at += 2)
          raw.lasers.emplace_back(p[at], offset, p[at + 1]);
        for (const auto& s : pattern_->coordinates()) {
          const Eigen::Vector2d w = h.apply(s);
          raw.pixels.emplace_back(w.x(), offset, w.y());
        }
        break;
      }
    }
    for (std::size_t i = 0; i < c.mirrors; ++i, at += 4)
      raw.planes.emplace_back(p[at], p[at + 1], p[at + 2], p[at + 3]);
    return raw;
  }

  SceneEstimate unpack(std::span<const double> p, const SceneCounts& c,
                       const DevicePair& dev) const {
    return normalized(unpack_raw(p, c, dev));
  }

  /// Inverse of unpack for a scene already in this parameterization's gauge.
  /// Planar: u = x, v = z, offset = mean y of wall points. Grid: the
  /// homography is fitted to the pixels' (x, z).
  Eigen::VectorXd pack(const SceneEstimate& scene) const {
    const SceneCounts c = counts_of(scene);
    check_counts(c);
    Eigen::VectorXd p(static_cast<Eigen::Index>(size(c)));
    Eigen::Index at = 0;
    auto put3 = [&](const ScenePoint& x) {
      p[at++] = x.x(); p[at++] = x.y(); p[at++] = x.z();
    };
    auto put_uv = [&](const ScenePoint& x) {
      p[at++] = x.x(); p[at++] = x.z();
    };
    switch (kind_) {
      case ParameterizationKind::General:
        for (const auto& x : scene.lasers) put3(x);
        for (const auto& x : scene.pixels) put3(x);
        break;
      case ParameterizationKind::PlanarWall:
        p[at++] = mean_wall_offset(scene);
        for (const auto& x : scene.lasers) put_uv(x);
        for (const auto& x : scene.pixels) put_uv(x);
        break;
      case ParameterizationKind::RegularGrid: {
        std::vector<Eigen::Vector2d> wall;
        wall.reserve(scene.pixels.size());
        for (const auto& x : scene.pixels) wall.emplace_back(x.x(), x.z());
        const Homography h =
            fit_homography(pattern_->coordinates(), wall);
        std::array<double, 8> entries{};
        h.write_entries(entries);
        for (double e : entries) p[at++] = e;
        p[at++] = mean_wall_offset(scene);
        for (const auto& x : scene.lasers) put_uv(x);
        break;
      }
    }
    for (const auto& m : scene.mirrors) {
      p[at++] = m.normal.x(); p[at++] = m.normal.y();
      p[at++] = m.normal.z(); p[at++] = m.offset;
    }
    return p;
  }

  /// Chains a scene-level gradient back onto the parameter vector p.
  Eigen::VectorXd pullback(std::span<const double> p,
                           const SceneGradient& g) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.size()));
    Eigen::Index at = 0;
    switch (kind_) {
      case ParameterizationKind::General:
        for (const auto& v : g.lasers) { out.segment<3>(at) = v; at += 3; }
        for (const auto& v : g.pixels) { out.segment<3>(at) = v; at += 3; }
        break;
      case ParameterizationKind::PlanarWall: {
        const Eigen::Index offset_at = at++;
        for (const auto& v : g.lasers) {
          out[at++] = v.x(); out[at++] = v.z(); out[offset_at] += v.y();
        }
        for (const auto& v : g.pixels) {
          out[at++] = v.x(); out[at++] = v.z(); out[offset_at] += v.y();
        }
        break;
      }
      case ParameterizationKind::RegularGrid: {
        const Homography h = Homography::from_entries(p.subspan(0, 8));
        const auto& coords = pattern_->coordinates();
        for (std::size_t k = 0; k < coords.size(); ++k) {
          const Eigen::Vector2d& s = coords[k];
          const Eigen::Vector3d num =
              h.matrix * Eigen::Vector3d(s.x(), s.y(), 1.0);
          const double w = num.z();
          const double u = num.x() / w;
          const double v = num.y() / w;
          const Eigen::Vector3d& gp = g.pixels[k];
          const double gu = gp.x() / w;
          const double gv = gp.z() / w;
          out[0] += gu * s.x(); out[1] += gu * s.y(); out[2] += gu;
          out[3] += gv * s.x(); out[4] += gv * s.y(); out[5] += gv;
          out[6] -= (gu * u + gv * v) * s.x();
          out[7] -= (gu * u + gv * v) * s.y();
          out[8] += gp.y();
        }
        at = 9;
        for (const auto& v : g.lasers) {
          out[at++] = v.x(); out[at++] = v.z(); out[8] += v.y();
        }
        break;
      }
    }
    for (const auto& v : g.planes) { out.segment<4>(at) = v; at += 4; }
    return out;
  }

 private:
  Parameterization(ParameterizationKind kind,
                   std::optional<SensorPattern> pattern)
      : kind_(kind), pattern_(std::move(pattern)) {}

  static double mean_wall_offset(const SceneEstimate& scene) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& x : scene.lasers) { sum += x.y(); ++n; }
    for (const auto& x : scene.pixels) { sum += x.y(); ++n; }
    return n > 0 ? sum / static_cast<double>(n) : 0.0;
  }

  ParameterizationKind kind_;
  std::optional<SensorPattern> pattern_;
};

// Free-function forms of the three unpackers.

inline SceneEstimate unpack_general(std::span<const double> p,
                                    const SceneCounts& c,
                                    const DevicePair& dev) {
  return Parameterization::general().unpack(p, c, dev);
}

inline SceneEstimate unpack_planar(std::span<const double> p,
                                   const SceneCounts& c,
                                   const DevicePair& dev) {
  return Parameterization::planar().unpack(p, c, dev);
}

inline SceneEstimate unpack_grid(std::span<const double> p,
                                 const SensorPattern& pattern,
                                 std::size_t lasers, std::size_t mirrors,
                                 const DevicePair& dev) {
  return Parameterization::grid(pattern).unpack(
      p, {lasers, pattern.live_count(), mirrors}, dev);
}

/// Total-least-squares plane through a point set.
struct PlaneFit {
  Eigen::Vector3d normal;
  ScenePoint centroid;
};

inline PlaneFit fit_plane(std::span<const ScenePoint> points) {
  if (points.size() < 3) {
    throw DegenerateConfigurationError("plane fit needs >= 3 points");
  }
  ScenePoint centroid = ScenePoint::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector3d d = p - centroid;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const Eigen::Vector3d ev = eig.eigenvalues();  // ascending
  if (!(ev[1] > 1e-12 * std::max(ev[2], 1e-300))) {
    throw DegenerateConfigurationError(
        "plane fit: points are collinear or coincident");
  }
  return {eig.eigenvectors().col(0).normalized(), centroid};
}

struct PlanarInitialization {
  Eigen::VectorXd parameters;
  /// Maps the input frame onto the planar-gauge frame. Pure rotation, so the
  /// camera stays at the origin.
  RigidTransform transform;
};

/// Fits a plane through lasers and pixels and rotates the scene so that
/// plane becomes y = offset; wall points are then projected onto it.
inline PlanarInitialization planarize(const SceneEstimate& general) {
  std::vector<ScenePoint> wall;
  wall.reserve(general.lasers.size() + general.pixels.size());
  wall.insert(wall.end(), general.lasers.begin(), general.lasers.end());
  wall.insert(wall.end(), general.pixels.begin(), general.pixels.end());
  const PlaneFit fit = fit_plane(wall);
  Eigen::Vector3d n = fit.normal;
  if (n.dot(fit.centroid) < 0.0) n = -n;
  RigidTransform t;
  t.rotation =
      Eigen::Quaterniond::FromTwoVectors(n, Eigen::Vector3d::UnitY())
          .toRotationMatrix();
  const SceneEstimate rotated = t.apply(general);
  return {Parameterization::planar().pack(rotated), t};
}

/// Planar-wall parameters for a general initialization, plus the rotation
/// into the planar gauge.
inline PlanarInitialization planarize_initialization(
    const SceneEstimate& general) {
  return planarize(general);
}

/// Initial parameters for any parameterization from a general scene.
inline PlanarInitialization initial_parameters(const Parameterization& param,
                                               const SceneEstimate& init) {
  switch (param.kind()) {
    case ParameterizationKind::General:
      return {param.pack(init), RigidTransform::identity()};
    case ParameterizationKind::PlanarWall:
      return planarize(init);
    case ParameterizationKind::RegularGrid: {
      PlanarInitialization planar = planarize(init);
      const SceneEstimate rotated = planar.transform.apply(init);
      return {param.pack(rotated), planar.transform};
    }
  }
  return {};
}

}  // namespace nlos_calib
