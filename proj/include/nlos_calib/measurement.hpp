#pragma once

#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "nlos_calib/types.hpp"

namespace nlos_calib {

/// One S_L -> laser spot -> mirror -> pixel -> S_C path and its measured
/// time of flight, already converted to a path length.
struct PathMeasurement {
  std::size_t laser = 0;
  std::size_t mirror = 0;
  std::size_t pixel = 0;
  double tof = 0.0;
  bool active = true;
};

struct MeasurementSet {
  std::vector<PathMeasurement> paths;

  std::size_t active_count() const {
    std::size_t n = 0;
    for (const auto& p : paths) n += p.active ? 1 : 0;
    return n;
  }
};

/// Checks the structural invariants against a scene's counts: indices in
/// range, no duplicate triples, finite positive ToF on active paths, at
/// least one active path.
inline void validate(const MeasurementSet& meas, const SceneCounts& c) {
  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> seen;
  for (std::size_t i = 0; i < meas.paths.size(); ++i) {
    const auto& p = meas.paths[i];
    if (p.laser >= c.lasers || p.mirror >= c.mirrors || p.pixel >= c.pixels) {
      throw IndexError("measurement " + std::to_string(i) +
                       " references an index outside the scene");
    }
    if (!seen.emplace(p.laser, p.mirror, p.pixel).second) {
      throw std::invalid_argument("duplicate path (" + std::to_string(p.laser) +
                                  ", " + std::to_string(p.mirror) + ", " +
                                  std::to_string(p.pixel) + ")");
    }
    if (p.active && !(std::isfinite(p.tof) && p.tof > 0.0)) {
      throw std::invalid_argument("measurement " + std::to_string(i) +
                                  " has non-positive or non-finite ToF");
    }
  }
  if (meas.active_count() == 0) {
    throw std::invalid_argument("measurement set has no active path");
  }
}

/// Every (laser, mirror, pixel) triple in laser-major order.
inline std::vector<PathMeasurement> fully_connected(const SceneCounts& c) {
  std::vector<PathMeasurement> out;
  out.reserve(c.lasers * c.mirrors * c.pixels);
  for (std::size_t l = 0; l < c.lasers; ++l)
    for (std::size_t m = 0; m < c.mirrors; ++m)
      for (std::size_t k = 0; k < c.pixels; ++k)
        out.push_back({l, m, k, 0.0, true});
  return out;
}

}  // namespace nlos_calib
