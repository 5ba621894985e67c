#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SVD>

#include "nlos_calib/types.hpp"

namespace nlos_calib {

/// Projective map from sensor coordinates to wall (u, v). The lower right
/// entry is pinned to 1, leaving 8 free entries.
struct Homography {
  Eigen::Matrix3d matrix = Eigen::Matrix3d::Identity();

  static Homography from_entries(std::span<const double> h) {
    Homography out;
    out.matrix << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0;
    return out;
  }

  void write_entries(std::span<double> h) const {
    h[0] = matrix(0, 0); h[1] = matrix(0, 1); h[2] = matrix(0, 2);
    h[3] = matrix(1, 0); h[4] = matrix(1, 1); h[5] = matrix(1, 2);
    h[6] = matrix(2, 0); h[7] = matrix(2, 1);
  }

  Eigen::Vector2d apply(const Eigen::Vector2d& s) const {
    const Eigen::Vector3d w = matrix * Eigen::Vector3d(s.x(), s.y(), 1.0);
    return w.head<2>() / w.z();
  }

  bool invertible(double tol = 1e-12) const {
    return std::abs(matrix.determinant()) > tol;
  }
};

namespace detail {

// Similarity that moves the centroid to 0 and the mean distance to sqrt(2).
inline Eigen::Matrix3d conditioning(std::span<const Eigen::Vector2d> pts) {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  double spread = 0.0;
  for (const auto& p : pts) spread += (p - mean).norm();
  spread /= static_cast<double>(pts.size());
  const double s = spread > 0.0 ? std::sqrt(2.0) / spread : 1.0;
  Eigen::Matrix3d t;
  t << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
  return t;
}

}  // namespace detail

/// Least-squares homography (normalized DLT) mapping src[i] to dst[i].
/// Requires at least 4 correspondences in general position.
inline Homography fit_homography(std::span<const Eigen::Vector2d> src,
                                 std::span<const Eigen::Vector2d> dst) {
  if (src.size() != dst.size() || src.size() < 4) {
    throw DegenerateConfigurationError(
        "homography fit needs >= 4 matched points");
  }
  const Eigen::Matrix3d ts = detail::conditioning(src);
  const Eigen::Matrix3d td = detail::conditioning(dst);
  const auto n = static_cast<Eigen::Index>(src.size());
  Eigen::MatrixXd a(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const Eigen::Vector3d s = ts * Eigen::Vector3d(src[k].x(), src[k].y(), 1);
    const Eigen::Vector3d d = td * Eigen::Vector3d(dst[k].x(), dst[k].y(), 1);
    a.row(2 * i) << s.x(), s.y(), 1, 0, 0, 0, -d.x() * s.x(), -d.x() * s.y(),
        -d.x();
    a.row(2 * i + 1) << 0, 0, 0, s.x(), s.y(), 1, -d.y() * s.x(),
        -d.y() * s.y(), -d.y();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
  Eigen::Matrix3d m = td.inverse() * hn * ts;
  if (std::abs(m(2, 2)) < 1e-14) {
    throw DegenerateConfigurationError("homography has vanishing (3,3) entry");
  }
  m /= m(2, 2);
  return Homography{m};
}

}  // namespace nlos_calib
