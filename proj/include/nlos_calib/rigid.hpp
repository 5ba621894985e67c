#pragma once

#include <Eigen/Core>

#include "nlos_calib/types.hpp"

namespace nlos_calib {

/// x -> rotation * x + translation, with a proper rotation.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }

  ScenePoint apply(const ScenePoint& p) const {
    return rotation * p + translation;
  }

  MirrorPlane apply(const MirrorPlane& m) const {
    const Eigen::Vector3d n = rotation * m.normal;
    return {n, m.offset - n.dot(translation)};
  }

  SceneEstimate apply(const SceneEstimate& scene) const {
    SceneEstimate out;
    out.devices.camera = apply(scene.devices.camera);
    out.devices.laser = apply(scene.devices.laser);
    out.lasers.reserve(scene.lasers.size());
    for (const auto& p : scene.lasers) out.lasers.push_back(apply(p));
    out.pixels.reserve(scene.pixels.size());
    for (const auto& p : scene.pixels) out.pixels.push_back(apply(p));
    out.mirrors.reserve(scene.mirrors.size());
    for (const auto& m : scene.mirrors) out.mirrors.push_back(apply(m));
    return out;
  }

  RigidTransform inverse() const {
    RigidTransform inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(inv.rotation * translation);
    return inv;
  }

  /// (*this) after (first).
  RigidTransform compose(const RigidTransform& first) const {
    return {rotation * first.rotation,
            rotation * first.translation + translation};
  }
};

}  // namespace nlos_calib
