#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SVD>

#include "nlos_calib/rigid.hpp"
#include "nlos_calib/types.hpp"

namespace nlos_calib {

/// Least-squares rigid transform T with T(p[i]) ~ q[i] (Kabsch). The
/// rotation is always proper; a reflection is never returned.
inline RigidTransform kabsch_align(std::span<const ScenePoint> p,
                                   std::span<const ScenePoint> q) {
  if (p.size() != q.size()) {
    throw LengthMismatchError("kabsch: point sets differ in size");
  }
  if (p.size() < 3) {
    throw DegenerateConfigurationError("kabsch: needs >= 3 points");
  }
  const double count = static_cast<double>(p.size());
  Eigen::Vector3d cp = Eigen::Vector3d::Zero();
  Eigen::Vector3d cq = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < p.size(); ++i) {
    cp += p[i];
    cq += q[i];
  }
  cp /= count;
  cq /= count;

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d spread_p = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Eigen::Vector3d a = p[i] - cp;
    cov += a * (q[i] - cq).transpose();
    spread_p += a * a.transpose();
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> spread(spread_p);
  const Eigen::Vector3d sv = spread.singularValues();
  if (!(sv[1] > 1e-12 * std::max(sv[0], 1e-300))) {
    throw DegenerateConfigurationError(
        "kabsch: points are collinear or coincident");
  }

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov,
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  Eigen::Matrix3d fix = Eigen::Matrix3d::Identity();
  fix(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;

  RigidTransform t;
  t.rotation = v * fix * u.transpose();
  t.translation = cq - t.rotation * cp;
  return t;
}

/// Points that define a calibration: S_C, S_L, lasers, then pixels.
/// Mirrors are not part of the result.
inline std::vector<ScenePoint> calibration_points(const SceneEstimate& s) {
  std::vector<ScenePoint> out;
  out.reserve(2 + s.lasers.size() + s.pixels.size());
  out.push_back(s.devices.camera);
  out.push_back(s.devices.laser);
  out.insert(out.end(), s.lasers.begin(), s.lasers.end());
  out.insert(out.end(), s.pixels.begin(), s.pixels.end());
  return out;
}

enum class RmsConvention {
  /// sqrt(sum |P_i - Q_i|^2 / N)
  Mean,
  /// sqrt(sum |P_i - Q_i|^2), the plain root of the sum
  RawSum,
};

struct SetupComparison {
  double rms = 0.0;
  RigidTransform alignment;
  /// |T(P_i) - Q_i| in calibration_points order.
  std::vector<double> point_errors;
};

/// Compares P against reference Q, optionally after rigidly aligning P
/// onto Q.
inline SetupComparison compare_setups(const SceneEstimate& p,
                                      const SceneEstimate& q, bool align,
                                      RmsConvention convention =
                                          RmsConvention::Mean) {
  if (!(counts_of(p).lasers == counts_of(q).lasers &&
        counts_of(p).pixels == counts_of(q).pixels)) {
    throw LengthMismatchError("setups differ in laser or pixel count");
  }
  const std::vector<ScenePoint> pp = calibration_points(p);
  const std::vector<ScenePoint> qq = calibration_points(q);
  SetupComparison out;
  if (align) out.alignment = kabsch_align(pp, qq);
  double sum = 0.0;
  out.point_errors.reserve(pp.size());
  for (std::size_t i = 0; i < pp.size(); ++i) {
    const double e = (out.alignment.apply(pp[i]) - qq[i]).norm();
    out.point_errors.push_back(e);
    sum += e * e;
  }
  if (convention == RmsConvention::Mean) sum /= static_cast<double>(pp.size());
  out.rms = std::sqrt(sum);
  return out;
}

inline double setup_rms(const SceneEstimate& p, const SceneEstimate& q,
                        bool align,
                        RmsConvention convention = RmsConvention::Mean) {
  return compare_setups(p, q, align, convention).rms;
}

}  // namespace nlos_calib
