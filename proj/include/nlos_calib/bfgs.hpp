#pragma once

// Dense BFGS with a strong-Wolfe line search (bracketing + cubic zoom).
// The inverse Hessian approximation is reset to a scaled identity when the
// line search fails along a quasi-Newton direction.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace nlos_calib {

struct BfgsOptions {
  double gradient_tolerance = 1e-9;
  double objective_tolerance = 1e-12;
  std::size_t max_iterations = 5000;
  double armijo = 1e-4;
  double curvature = 0.9;
  int max_line_search = 40;
  bool record_history = false;
};

enum class BfgsStatus {
  GradientTolerance,
  ObjectiveTolerance,
  MaxIterations,
  LineSearchFailure,
};

inline std::string to_string(BfgsStatus s) {
  switch (s) {
    case BfgsStatus::GradientTolerance: return "gradient_tolerance";
    case BfgsStatus::ObjectiveTolerance: return "objective_tolerance";
    case BfgsStatus::MaxIterations: return "max_iterations";
    case BfgsStatus::LineSearchFailure: return "line_search_failure";
  }
  return "unknown";
}

inline bool converged(BfgsStatus s) {
  return s == BfgsStatus::GradientTolerance ||
         s == BfgsStatus::ObjectiveTolerance;
}

struct BfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  BfgsStatus status = BfgsStatus::MaxIterations;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  std::size_t hessian_resets = 0;
  /// Objective after each accepted iteration (only with record_history).
  std::vector<double> history;
};

namespace detail {

struct LinePoint {
  double step = 0.0;
  double value = 0.0;
  double slope = 0.0;
  Eigen::VectorXd gradient;
};

// Minimizer of the cubic matching values and slopes at a and b, clamped to
// the interior of [a, b] (in either order).
inline double cubic_step(const LinePoint& a, const LinePoint& b) {
  const double lo = std::min(a.step, b.step);
  const double hi = std::max(a.step, b.step);
  const double margin = 0.1 * (hi - lo);
  const double d1 = a.slope + b.slope -
                    3.0 * (a.value - b.value) / (a.step - b.step);
  const double disc = d1 * d1 - a.slope * b.slope;
  double t = 0.5 * (lo + hi);
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), b.step - a.step);
    const double denom = b.slope - a.slope + 2.0 * d2;
    if (denom != 0.0) {
      const double c =
          b.step - (b.step - a.step) * (b.slope + d2 - d1) / denom;
      if (std::isfinite(c)) t = c;
    }
  }
  return std::clamp(t, lo + margin, hi - margin);
}

}  // namespace detail

/// Minimizes fg, a callable mapping x to (value, gradient).
template <class ValueAndGradient>
BfgsResult minimize_bfgs(ValueAndGradient&& fg, Eigen::VectorXd x0,
                         const BfgsOptions& opt = {}) {
  using Eigen::VectorXd;
  const Eigen::Index n = x0.size();
  BfgsResult res;
  res.x = std::move(x0);
  auto [f0, g0] = fg(res.x);
  res.value = f0;
  res.gradient = std::move(g0);
  res.evaluations = 1;
  if (opt.record_history) res.history.push_back(res.value);

  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
  bool fresh = true;      // h is a (scaled) identity
  bool scaled = false;    // initial scaling applied
  double identity_scale = 1.0;

  auto probe = [&](const VectorXd& dir, double step) {
    detail::LinePoint p;
    p.step = step;
    auto [v, g] = fg(res.x + step * dir);
    ++res.evaluations;
    p.value = v;
    p.gradient = std::move(g);
    p.slope = p.gradient.dot(dir);
    return p;
  };

  // Strong-Wolfe search along dir; returns a point with step > 0 on
  // success, step == 0 on failure.
  auto line_search = [&](const VectorXd& dir, double slope0,
                         double first_step) -> detail::LinePoint {
    detail::LinePoint origin{0.0, res.value, slope0, res.gradient};
    const double armijo_slope = opt.armijo * slope0;
    auto sufficient = [&](const detail::LinePoint& p) {
      return std::isfinite(p.value) &&
             p.value <= res.value + p.step * armijo_slope;
    };
    auto zoom = [&](detail::LinePoint lo, detail::LinePoint hi) {
      for (int i = 0; i < opt.max_line_search; ++i) {
        const double t = detail::cubic_step(lo, hi);
        if (std::abs(hi.step - lo.step) < 1e-18) break;
        detail::LinePoint p = probe(dir, t);
        if (!sufficient(p) || p.value >= lo.value) {
          hi = std::move(p);
        } else {
          if (std::abs(p.slope) <= -opt.curvature * slope0) return p;
          if (p.slope * (hi.step - lo.step) >= 0.0) hi = lo;
          lo = std::move(p);
        }
      }
      // Accept the best sufficient-decrease point found.
      if (lo.step > 0.0 && lo.value < res.value) return lo;
      return detail::LinePoint{};
    };

    detail::LinePoint prev = origin;
    double step = first_step;
    for (int i = 0; i < opt.max_line_search; ++i) {
      detail::LinePoint p = probe(dir, step);
      if (!std::isfinite(p.value) || !p.gradient.allFinite()) {
        // Step into an invalid region: shrink toward the last good point.
        step = prev.step + 0.25 * (step - prev.step);
        continue;
      }
      if (!sufficient(p) || (i > 0 && p.value >= prev.value)) {
        return zoom(prev, p);
      }
      if (std::abs(p.slope) <= -opt.curvature * slope0) return p;
      if (p.slope >= 0.0) return zoom(p, prev);
      prev = std::move(p);
      step *= 2.0;
    }
    if (prev.step > 0.0) return prev;
    return detail::LinePoint{};
  };

  for (res.iterations = 0; res.iterations < opt.max_iterations;) {
    if (res.gradient.norm() <= opt.gradient_tolerance) {
      res.status = BfgsStatus::GradientTolerance;
      return res;
    }
    VectorXd dir = -(h * res.gradient);
    double slope0 = res.gradient.dot(dir);
    if (!(slope0 < 0.0)) {
      h.setIdentity();
      h *= identity_scale;
      fresh = true;
      ++res.hessian_resets;
      dir = -(h * res.gradient);
      slope0 = res.gradient.dot(dir);
    }
    double first_step = 1.0;
    if (!scaled) first_step = std::min(1.0, 1.0 / res.gradient.norm());

    detail::LinePoint next = line_search(dir, slope0, first_step);
    if (next.step <= 0.0) {
      if (fresh) {
        res.status = BfgsStatus::LineSearchFailure;
        return res;
      }
      h.setIdentity();
      h *= identity_scale;
      fresh = true;
      ++res.hessian_resets;
      continue;
    }

    const VectorXd s = next.step * dir;
    const VectorXd y = next.gradient - res.gradient;
    const double previous = res.value;
    res.x += s;
    res.value = next.value;
    res.gradient = std::move(next.gradient);
    ++res.iterations;
    if (opt.record_history) res.history.push_back(res.value);

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm() && sy > 0.0) {
      if (!scaled || fresh) {
        identity_scale = sy / y.squaredNorm();
        h.setIdentity();
        h *= identity_scale;
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const VectorXd hy = h * y;
      const double yhy = y.dot(hy);
      h.noalias() -= rho * (s * hy.transpose() + hy * s.transpose());
      h.noalias() += (rho * rho * yhy + rho) * (s * s.transpose());
      fresh = false;
    }

    // Relative decrease; a zero objective only stops via the gradient test.
    const double scale = std::max(std::abs(previous), std::abs(res.value));
    if (previous - res.value <= opt.objective_tolerance * scale) {
      res.status = res.gradient.norm() <= opt.gradient_tolerance
                       ? BfgsStatus::GradientTolerance
                       : BfgsStatus::ObjectiveTolerance;
      return res;
    }
  }
  res.status = BfgsStatus::MaxIterations;
  return res;
}

}  // namespace nlos_calib
