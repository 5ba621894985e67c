#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace nlos_calib {

/// A 3D position in scene units. The camera sits at the origin by convention.
using ScenePoint = Eigen::Vector3d;

/// Unnormalized plane coefficients (a, b, c, e) of a x + b y + c z + e = 0,
/// as seen by the optimizer.
using RawPlane = Eigen::Vector4d;

/// Plane in Hesse normal form: normal . x + offset = 0 with a unit normal.
struct MirrorPlane {
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  double offset = 0.0;

  double signed_distance(const ScenePoint& p) const {
    return normal.dot(p) + offset;
  }
  RawPlane raw() const {
    return {normal.x(), normal.y(), normal.z(), offset};
  }
};

/// Camera (S_C) and laser (S_L) positions. Neither is optimized.
struct DevicePair {
  ScenePoint camera = ScenePoint::Zero();
  ScenePoint laser = ScenePoint::Zero();
};

/// Full scene: devices, laser spots and projected pixels on the wall, mirror
/// placements. Index order is the measurement correspondence.
struct SceneEstimate {
  DevicePair devices;
  std::vector<ScenePoint> lasers;
  std::vector<ScenePoint> pixels;
  std::vector<MirrorPlane> mirrors;
};

/// Numbers of lasers, pixels and mirrors in a scene.
struct SceneCounts {
  std::size_t lasers = 0;
  std::size_t pixels = 0;
  std::size_t mirrors = 0;

  friend bool operator==(const SceneCounts&, const SceneCounts&) = default;
};

inline SceneCounts counts_of(const SceneEstimate& scene) {
  return {scene.lasers.size(), scene.pixels.size(), scene.mirrors.size()};
}

inline bool is_finite(const ScenePoint& p) {
  return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z());
}

// Errors

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegeneratePlaneError : public CalibrationError {
 public:
  using CalibrationError::CalibrationError;
};

class LengthMismatchError : public CalibrationError {
 public:
  using CalibrationError::CalibrationError;
};

class DegenerateConfigurationError : public CalibrationError {
 public:
  using CalibrationError::CalibrationError;
};

class IndexError : public CalibrationError {
 public:
  using CalibrationError::CalibrationError;
};

/// Raised when a residual or gradient turns non-finite; carries the path.
class NonFiniteError : public CalibrationError {
 public:
  NonFiniteError(const std::string& what, std::size_t path)
      : CalibrationError(what + " (path " + std::to_string(path) + ")"),
        path_index(path) {}
  std::size_t path_index;
};

}  // namespace nlos_calib
