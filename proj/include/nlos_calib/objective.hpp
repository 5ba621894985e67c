#pragma once

// Calibration objective: sum over active paths of
//   (path_length(scene(p), laser, pixel, mirror) - tof)^2
// with an exact gradient obtained by the chain rule through the path
// geometry, the plane normalization and the parameterization.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "nlos_calib/geometry.hpp"
#include "nlos_calib/measurement.hpp"
#include "nlos_calib/param.hpp"
#include "nlos_calib/types.hpp"

namespace nlos_calib {

struct ObjectiveEvaluation {
  double value = 0.0;
  Eigen::VectorXd gradient;
  /// Paths with a zero-length segment (derivative taken as 0).
  std::size_t degenerate_paths = 0;
};

class CalibrationProblem {
 public:
  CalibrationProblem(Parameterization param, SceneCounts counts,
                     DevicePair devices, const MeasurementSet& meas)
      : param_(std::move(param)), counts_(counts), devices_(devices) {
    param_.check_counts(counts_);
    validate(meas, counts_);
    for (std::size_t i = 0; i < meas.paths.size(); ++i) {
      if (!meas.paths[i].active) continue;
      active_.push_back(meas.paths[i]);
      source_index_.push_back(i);
    }
  }

  const Parameterization& parameterization() const { return param_; }
  const SceneCounts& counts() const { return counts_; }
  const DevicePair& devices() const { return devices_; }
  std::size_t dimension() const { return param_.size(counts_); }
  std::size_t path_count() const { return active_.size(); }
  /// Position of active path i in the original measurement list.
  std::size_t source_index(std::size_t i) const { return source_index_[i]; }

  SceneEstimate scene(std::span<const double> p) const {
    return param_.unpack(p, counts_, devices_);
  }

  /// One residual f - t per active path, in measurement order.
  Eigen::VectorXd residuals(std::span<const double> p) const {
    const RawScene raw = param_.unpack_raw(p, counts_, devices_);
    std::vector<MirrorPlane> planes;
    planes.reserve(raw.planes.size());
    for (const auto& r : raw.planes) planes.push_back(normalize_plane(r));
    Eigen::VectorXd out(static_cast<Eigen::Index>(active_.size()));
    for (std::size_t i = 0; i < active_.size(); ++i) {
      const auto& m = active_[i];
      const double r = path_length(raw.devices, raw.lasers[m.laser],
                                   raw.pixels[m.pixel], planes[m.mirror]) -
                       m.tof;
      if (!std::isfinite(r)) {
        throw NonFiniteError("non-finite residual", source_index_[i]);
      }
      out[static_cast<Eigen::Index>(i)] = r;
    }
    return out;
  }

  double value(std::span<const double> p) const {
    const Eigen::VectorXd r = residuals(p);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) sum += r[i] * r[i];
    return sum;
  }

  ObjectiveEvaluation evaluate(std::span<const double> p) const {
    const RawScene raw = param_.unpack_raw(p, counts_, devices_);
    SceneGradient g(counts_);
    ObjectiveEvaluation out;
    for (std::size_t i = 0; i < active_.size(); ++i) {
      const auto& m = active_[i];
      const PathEvaluation e =
          evaluate_path(raw.devices, raw.lasers[m.laser], raw.pixels[m.pixel],
                        raw.planes[m.mirror]);
      const double r = e.length - m.tof;
      const double w = 2.0 * r;
      if (!std::isfinite(r) || !e.gradient.d_laser.allFinite() ||
          !e.gradient.d_pixel.allFinite() || !e.gradient.d_plane.allFinite()) {
        throw NonFiniteError("non-finite gradient", source_index_[i]);
      }
      out.value += r * r;
      out.degenerate_paths += e.gradient.degenerate ? 1 : 0;
      g.lasers[m.laser] += w * e.gradient.d_laser;
      g.pixels[m.pixel] += w * e.gradient.d_pixel;
      g.planes[m.mirror] += w * e.gradient.d_plane;
    }
    out.gradient = param_.pullback(p, g);
    return out;
  }

  Eigen::VectorXd gradient(std::span<const double> p) const {
    return evaluate(p).gradient;
  }

 private:
  Parameterization param_;
  SceneCounts counts_;
  DevicePair devices_;
  std::vector<PathMeasurement> active_;
  std::vector<std::size_t> source_index_;
};

inline std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace nlos_calib
