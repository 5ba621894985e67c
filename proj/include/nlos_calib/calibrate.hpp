#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "nlos_calib/bfgs.hpp"
#include "nlos_calib/measurement.hpp"
#include "nlos_calib/objective.hpp"
#include "nlos_calib/param.hpp"
#include "nlos_calib/rigid.hpp"

namespace nlos_calib {

struct CalibrationConfig {
  std::size_t max_iterations = 5000;
  double gradient_tolerance = 1e-9;
  double objective_tolerance = 1e-12;
  /// Carried into run manifests; the optimizer itself is deterministic.
  std::uint64_t seed = 0;
  bool record_history = false;

  void check() const {
    if (!(gradient_tolerance > 0.0) || !(objective_tolerance > 0.0)) {
      throw std::invalid_argument("calibration tolerances must be positive");
    }
  }
};

struct CalibrationResult {
  SceneEstimate scene;
  Eigen::VectorXd parameters;
  ParameterizationKind kind = ParameterizationKind::General;
  /// Maps the initialization frame onto the result frame (planar gauges
  /// rotate the scene).
  RigidTransform gauge;
  double objective = 0.0;
  double initial_objective = 0.0;
  double gradient_norm = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  std::size_t hessian_resets = 0;
  BfgsStatus status = BfgsStatus::MaxIterations;
  /// Residual f - t per active path and its index into the measurement list.
  std::vector<double> residuals;
  std::vector<std::size_t> residual_paths;
  std::size_t degenerate_paths = 0;
  std::vector<std::string> warnings;
  std::vector<double> history;

  bool converged() const { return nlos_calib::converged(status); }
};

/// Minimizes the ToF misfit from an initial scene with BFGS.
inline CalibrationResult calibrate(const SceneEstimate& init,
                                   const Parameterization& param,
                                   const MeasurementSet& meas,
                                   const CalibrationConfig& config = {}) {
  config.check();
  const SceneCounts counts = counts_of(init);
  const PlanarInitialization start = initial_parameters(param, init);
  const DevicePair devices{start.transform.apply(init.devices.camera),
                           start.transform.apply(init.devices.laser)};
  const CalibrationProblem problem(param, counts, devices, meas);

  std::size_t degenerate = 0;
  auto fg = [&](const Eigen::VectorXd& x) -> std::pair<double, Eigen::VectorXd> {
    try {
      ObjectiveEvaluation e = problem.evaluate(as_span(x));
      degenerate = std::max(degenerate, e.degenerate_paths);
      return {e.value, std::move(e.gradient)};
    } catch (const DegeneratePlaneError&) {
    } catch (const NonFiniteError&) {
    }
    return {std::numeric_limits<double>::infinity(),
            Eigen::VectorXd::Zero(x.size())};
  };

  BfgsOptions opt;
  opt.gradient_tolerance = config.gradient_tolerance;
  opt.objective_tolerance = config.objective_tolerance;
  opt.max_iterations = config.max_iterations;
  opt.record_history = config.record_history;

  CalibrationResult out;
  out.kind = param.kind();
  out.gauge = start.transform;
  out.initial_objective = problem.value(as_span(start.parameters));
  BfgsResult r = minimize_bfgs(fg, start.parameters, opt);

  out.parameters = std::move(r.x);
  out.scene = problem.scene(as_span(out.parameters));
  out.objective = r.value;
  out.gradient_norm = r.gradient.norm();
  out.iterations = r.iterations;
  out.evaluations = r.evaluations;
  out.hessian_resets = r.hessian_resets;
  out.status = r.status;
  out.history = std::move(r.history);
  out.degenerate_paths = degenerate;

  const Eigen::VectorXd res = problem.residuals(as_span(out.parameters));
  out.residuals.assign(res.data(), res.data() + res.size());
  for (std::size_t i = 0; i < problem.path_count(); ++i) {
    out.residual_paths.push_back(problem.source_index(i));
  }

  if (degenerate > 0) {
    out.warnings.push_back(std::to_string(degenerate) +
                           " path(s) hit a zero-length segment");
  }
  if (param.kind() == ParameterizationKind::RegularGrid &&
      !Homography::from_entries(as_span(out.parameters).subspan(0, 8))
           .invertible()) {
    out.warnings.push_back("recovered homography is not invertible");
  }
  return out;
}

}  // namespace nlos_calib
