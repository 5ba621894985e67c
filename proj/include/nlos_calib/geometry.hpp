#pragma once

// Closed-form geometry of the specular three-bounce path
//   S_L -> L (wall) -> mirror -> C (wall) -> S_C.
// The mirror sub-path L -> M^r -> C has the length of the straight segment
// from the virtual source L' (L mirrored at the plane) to C.

#include <cmath>
#include <optional>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "nlos_calib/types.hpp"

namespace nlos_calib {

inline constexpr double kDegenerateNormal = 1e-12;

/// Rescales raw plane coefficients to Hesse normal form. Throws
/// DegeneratePlaneError when the normal part vanishes.
inline MirrorPlane normalize_plane(const RawPlane& raw) {
  const Eigen::Vector3d n = raw.head<3>();
  const double len = n.norm();
  if (!(len >= kDegenerateNormal)) {
    throw DegeneratePlaneError("plane normal has length " +
                               std::to_string(len));
  }
  return {n / len, raw[3] / len};
}

/// Mirror image of p in plane m (m normalized).
inline ScenePoint reflect_point(const ScenePoint& p, const MirrorPlane& m) {
  return p - 2.0 * m.signed_distance(p) * m.normal;
}

/// Total geometric length of S_L -> l -> mirror -> c -> S_C.
inline double path_length(const DevicePair& dev, const ScenePoint& l,
                          const ScenePoint& c, const MirrorPlane& m) {
  const ScenePoint virtual_source = reflect_point(l, m);
  return (l - dev.laser).norm() + (c - virtual_source).norm() +
         (dev.camera - c).norm();
}

/// Point on the mirror at which light from l is reflected towards c.
/// Empty when no specular path exists: l and c on opposite sides of the
/// plane, or the segment from the virtual source to c does not cross it.
inline std::optional<ScenePoint> reflection_point(const ScenePoint& l,
                                                  const ScenePoint& c,
                                                  const MirrorPlane& m) {
  const double dl = m.signed_distance(l);
  const double dc = m.signed_distance(c);
  if (dl * dc < 0.0) return std::nullopt;

  const ScenePoint virtual_source = reflect_point(l, m);
  const double dv = -dl;  // signed distance of the virtual source
  const double denom = dv - dc;
  if (std::abs(denom) < 1e-300) {
    // Both on the plane: the path degenerates to the plane point itself.
    if (dl == 0.0 && dc == 0.0) return l;
    return std::nullopt;
  }
  const double s = dv / denom;
  if (s < 0.0 || s > 1.0) return std::nullopt;
  ScenePoint r = virtual_source + s * (c - virtual_source);
  // Snap onto the plane to remove rounding drift.
  r -= m.signed_distance(r) * m.normal;
  return r;
}

/// Rectangular mirror patch: center plus two in-plane half-axes whose
/// lengths are the half extents.
struct MirrorExtent {
  ScenePoint center = ScenePoint::Zero();
  Eigen::Vector3d half_u = Eigen::Vector3d::UnitX();
  Eigen::Vector3d half_v = Eigen::Vector3d::UnitY();
};

/// Closed-rectangle membership test for a point already on the plane.
inline bool within_mirror_extent(const ScenePoint& r, const MirrorPlane& m,
                                 const MirrorExtent& extent) {
  (void)m;
  const Eigen::Vector3d d = r - extent.center;
  constexpr double slack = 1e-12;
  const double su = d.dot(extent.half_u) / extent.half_u.squaredNorm();
  const double sv = d.dot(extent.half_v) / extent.half_v.squaredNorm();
  return std::abs(su) <= 1.0 + slack && std::abs(sv) <= 1.0 + slack;
}

/// Partial derivatives of path_length with respect to the laser spot, the
/// pixel, and the raw (unnormalized) plane coefficients.
struct PathGradient {
  Eigen::Vector3d d_laser = Eigen::Vector3d::Zero();
  Eigen::Vector3d d_pixel = Eigen::Vector3d::Zero();
  Eigen::Vector4d d_plane = Eigen::Vector4d::Zero();
  /// Set when a segment had zero length; its derivative is taken as 0.
  bool degenerate = false;
};

struct PathEvaluation {
  double length = 0.0;
  PathGradient gradient;
};

namespace detail {

// Unit direction of v, or zero (and flags) for a zero-length segment.
inline Eigen::Vector3d unit_or_zero(const Eigen::Vector3d& v, double len,
                                    bool& degenerate) {
  if (len > 0.0) return v / len;
  degenerate = true;
  return Eigen::Vector3d::Zero();
}

}  // namespace detail

/// Path length and its gradient, differentiating through plane
/// normalization.
inline PathEvaluation evaluate_path(const DevicePair& dev, const ScenePoint& l,
                                    const ScenePoint& c, const RawPlane& raw) {
  const Eigen::Vector3d a = raw.head<3>();
  const double alen = a.norm();
  if (!(alen >= kDegenerateNormal)) {
    throw DegeneratePlaneError("plane normal has length " +
                               std::to_string(alen));
  }
  const Eigen::Vector3d n = a / alen;
  const double d = raw[3] / alen;
  const double dist = n.dot(l) + d;
  const ScenePoint virtual_source = l - 2.0 * dist * n;

  const Eigen::Vector3d seg_laser = l - dev.laser;
  const Eigen::Vector3d seg_mirror = c - virtual_source;
  const Eigen::Vector3d seg_camera = c - dev.camera;
  const double len_laser = seg_laser.norm();
  const double len_mirror = seg_mirror.norm();
  const double len_camera = seg_camera.norm();

  PathEvaluation out;
  out.length = len_laser + len_mirror + len_camera;

  PathGradient& g = out.gradient;
  const Eigen::Vector3d e_laser =
      detail::unit_or_zero(seg_laser, len_laser, g.degenerate);
  const Eigen::Vector3d e =
      detail::unit_or_zero(seg_mirror, len_mirror, g.degenerate);
  const Eigen::Vector3d e_camera =
      detail::unit_or_zero(seg_camera, len_camera, g.degenerate);

  const double ne = n.dot(e);
  // d L'/d L = I - 2 n n^T (symmetric)
  g.d_laser = e_laser - (e - 2.0 * ne * n);
  g.d_pixel = e + e_camera;

  // Derivatives with respect to the normalized (n, d).
  const Eigen::Vector3d g_n = 2.0 * (dist * e + ne * l);
  const double g_d = 2.0 * ne;
  // Chain through n = a/|a|, d = e/|a|.
  const Eigen::Vector3d g_a =
      (g_n - n * n.dot(g_n) - g_d * d * n) / alen;
  g.d_plane.head<3>() = g_a;
  g.d_plane[3] = g_d / alen;
  return out;
}

}  // namespace nlos_calib
