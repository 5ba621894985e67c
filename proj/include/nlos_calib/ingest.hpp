#pragma once

// Real-measurement pipeline: transient histograms to path lengths.
//
// Bin coordinates: count i is sampled at coordinate i, i.e. at time
// time_origin + i * bin_width.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nlos_calib/geometry.hpp"
#include "nlos_calib/io.hpp"
#include "nlos_calib/measurement.hpp"
#include "nlos_calib/param.hpp"

namespace nlos_calib {

inline constexpr double kDefaultBinWidth = 250e-12;
/// Chosen so that one 250 ps bin is exactly 7.495 cm of path.
inline constexpr double kSpeedOfLight = 2.998e8;

struct TransientHistogram {
  std::vector<double> counts;
  double bin_width = kDefaultBinWidth;
  double time_origin = 0.0;
  std::size_t laser = 0;
  std::size_t mirror = 0;
  std::size_t pixel = 0;

  void check() const {
    if (counts.size() < 4) {
      throw std::invalid_argument("histogram needs at least 4 bins");
    }
    for (double c : counts) {
      if (!std::isfinite(c) || c < 0.0) {
        throw std::invalid_argument("histogram counts must be finite and >= 0");
      }
    }
    if (!(bin_width > 0.0) || !std::isfinite(time_origin)) {
      throw std::invalid_argument("histogram timing must be finite");
    }
  }
};

struct DeviceTimingConfig {
  double speed_of_light = kSpeedOfLight;
  /// Camera to laser trigger offset, subtracted before conversion.
  double signal_offset = 0.0;
  /// Metadata only.
  double pulse_length = 500e-12;
};

inline double tof_to_length(double tof_seconds, const DeviceTimingConfig& cfg = {}) {
  return (tof_seconds - cfg.signal_offset) * cfg.speed_of_light;
}

struct PeakFitOptions {
  int half_window = 5;
  int max_iterations = 200;
};

struct PeakFit {
  double tof_seconds = 0.0;
  /// Fitted mean in bin coordinates.
  double center = 0.0;
  /// In the units of the input counts.
  double amplitude = 0.0;
  double sigma = 0.0;  // bins
  double floor = 0.0;
  double quality = 0.0;
  bool converged = false;
};

namespace detail {

struct GaussianModel {
  // a * exp(-(x - mu)^2 / (2 s^2)) + b
  static double value(const Eigen::Vector4d& p, double x) {
    const double z = (x - p[1]) / p[2];
    return p[0] * std::exp(-0.5 * z * z) + p[3];
  }
  static Eigen::Vector4d jacobian(const Eigen::Vector4d& p, double x) {
    const double dx = x - p[1];
    const double s = p[2];
    const double g = std::exp(-0.5 * dx * dx / (s * s));
    return {g, p[0] * g * dx / (s * s), p[0] * g * dx * dx / (s * s * s), 1.0};
  }
};

}  // namespace detail

/// Levenberg-Marquardt fit of a Gaussian plus constant floor over a window
/// around the maximum bin. Counts are normalized by their maximum, so the
/// fitted center does not depend on the overall count scale.
inline PeakFit fit_peak(const TransientHistogram& h, const PeakFitOptions& opt = {}) {
  h.check();
  const auto max_it = std::max_element(h.counts.begin(), h.counts.end());
  const double peak = *max_it;
  const double low = *std::min_element(h.counts.begin(), h.counts.end());
  if (peak <= 0.0) throw std::invalid_argument("histogram is empty");
  if (peak == low) throw std::invalid_argument("histogram is flat");

  const int n = static_cast<int>(h.counts.size());
  const int arg = static_cast<int>(max_it - h.counts.begin());
  const int lo = std::max(0, arg - opt.half_window);
  const int hi = std::min(n - 1, arg + opt.half_window);
  const int m = hi - lo + 1;

  Eigen::VectorXd x(m), y(m);
  for (int i = 0; i < m; ++i) {
    x[i] = lo + i;
    y[i] = h.counts[static_cast<std::size_t>(lo + i)] / peak;
  }

  PeakFit out;
  out.center = arg;
  out.tof_seconds = h.time_origin + arg * h.bin_width;
  const double mean_y = y.mean();
  const double sst = (y.array() - mean_y).square().sum();
  if (m < 5 || sst <= 0.0) return out;  // too few points for four parameters

  // Moment-based start.
  Eigen::Vector4d p;
  const double b0 = y.minCoeff();
  double w = 0.0, mu = 0.0;
  for (int i = 0; i < m; ++i) {
    w += y[i] - b0;
    mu += (y[i] - b0) * x[i];
  }
  mu = w > 0.0 ? mu / w : arg;
  double var = 0.0;
  for (int i = 0; i < m; ++i) var += (y[i] - b0) * (x[i] - mu) * (x[i] - mu);
  var = w > 0.0 ? var / w : 1.0;
  p << 1.0 - b0, mu, std::clamp(std::sqrt(var), 0.5, double(opt.half_window)), b0;

  auto sse_of = [&](const Eigen::Vector4d& q) {
    double s = 0.0;
    for (int i = 0; i < m; ++i) {
      const double r = y[i] - detail::GaussianModel::value(q, x[i]);
      s += r * r;
    }
    return s;
  };

  double sse = sse_of(p);
  double lambda = 1e-3;
  bool converged = false;
  for (int it = 0; it < opt.max_iterations && !converged; ++it) {
    Eigen::Matrix4d jtj = Eigen::Matrix4d::Zero();
    Eigen::Vector4d jtr = Eigen::Vector4d::Zero();
    for (int i = 0; i < m; ++i) {
      const Eigen::Vector4d j = detail::GaussianModel::jacobian(p, x[i]);
      const double r = y[i] - detail::GaussianModel::value(p, x[i]);
      jtj += j * j.transpose();
      jtr += j * r;
    }
    if (jtr.norm() <= 1e-14) {
      converged = true;
      break;
    }
    bool accepted = false;
    while (lambda < 1e12) {
      Eigen::Matrix4d a = jtj;
      a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Eigen::Vector4d step = a.ldlt().solve(jtr);
      const Eigen::Vector4d q = p + step;
      const double next = q[2] > 0.0 && q.allFinite() ? sse_of(q)
                                                      : std::numeric_limits<double>::infinity();
      if (next <= sse) {
        const double drop = sse - next;
        p = q;
        sse = next;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        if (drop <= 1e-15 * std::max(sse, 1e-30) ||
            step.norm() <= 1e-12 * (p.norm() + 1e-12) || sse <= 1e-28) {
          converged = true;
        }
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) converged = true;  // no further decrease possible
  }

  if (!converged || !p.allFinite() || p[1] < lo || p[1] > hi) return out;
  out.center = p[1];
  out.tof_seconds = h.time_origin + p[1] * h.bin_width;
  out.amplitude = p[0] * peak;
  out.sigma = std::abs(p[2]);
  out.floor = p[3] * peak;
  out.quality = std::max(0.0, 1.0 - sse / sst);
  out.converged = true;
  return out;
}

// Invalid-path screening

enum class InvalidReason { None, Inactive, DeadPixel, PoorFit, Implausible, Outlier };

inline std::string to_string(InvalidReason r) {
  switch (r) {
    case InvalidReason::None: return "none";
    case InvalidReason::Inactive: return "inactive";
    case InvalidReason::DeadPixel: return "dead_pixel";
    case InvalidReason::PoorFit: return "poor_fit";
    case InvalidReason::Implausible: return "implausible";
    case InvalidReason::Outlier: return "outlier";
  }
  return "unknown";
}

struct ScreeningOptions {
  double quality_threshold = 0.5;
  /// Plausibility band half-width in units of noise_scale.
  double plausibility_factor = 3.0;
  /// Init-noise scale; the plausibility test runs only when this is > 0
  /// and a reference scene is given.
  double noise_scale = 0.0;
  /// Robust z-score threshold over paths sharing a mirror.
  double outlier_threshold = 5.0;
  double max_inactive_fraction = 0.5;
};

struct PathScreening {
  std::vector<InvalidReason> reasons;
  std::size_t inactive = 0;
  bool warning = false;
  std::string message;

  bool active(std::size_t i) const { return reasons[i] == InvalidReason::None; }
};

/// Screens paths in order: dead pixel, fit quality, plausibility against
/// the reference scene, then per-mirror robust outliers. The outlier test
/// uses the residual ToF - predicted length when a reference is given and
/// the raw ToF otherwise (then it only makes sense within one pixel).
///
/// fit_quality may be empty (no test) and dead_pixels is indexed by pixel
/// (may be empty). Already inactive paths stay inactive.
inline PathScreening detect_invalid_paths(const MeasurementSet& meas,
                                          std::span<const double> fit_quality,
                                          const std::vector<bool>& dead_pixels,
                                          const SceneEstimate* reference = nullptr,
                                          const ScreeningOptions& opt = {}) {
  const std::size_t n = meas.paths.size();
  if (!fit_quality.empty() && fit_quality.size() != n) {
    throw LengthMismatchError("fit quality list does not match measurements");
  }
  PathScreening s;
  s.reasons.assign(n, InvalidReason::None);
  std::vector<double> residual(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = meas.paths[i];
    auto& r = s.reasons[i];
    if (!p.active) {
      r = InvalidReason::Inactive;
    } else if (p.pixel < dead_pixels.size() && dead_pixels[p.pixel]) {
      r = InvalidReason::DeadPixel;
    } else if (!fit_quality.empty() && !(fit_quality[i] >= opt.quality_threshold)) {
      r = InvalidReason::PoorFit;
    } else if (!std::isfinite(p.tof)) {
      r = InvalidReason::Implausible;
    }
    if (r != InvalidReason::None || reference == nullptr) {
      residual[i] = p.tof;
      continue;
    }
    const auto& ref = *reference;
    if (p.laser >= ref.lasers.size() || p.pixel >= ref.pixels.size() ||
        p.mirror >= ref.mirrors.size()) {
      throw IndexError("path " + std::to_string(i) + " outside reference scene");
    }
    residual[i] = p.tof - path_length(ref.devices, ref.lasers[p.laser],
                                      ref.pixels[p.pixel], ref.mirrors[p.mirror]);
    if (opt.noise_scale > 0.0 &&
        std::abs(residual[i]) > opt.plausibility_factor * opt.noise_scale) {
      r = InvalidReason::Implausible;
    }
  }

  // Per-mirror robust z-score, 1.4826 * MAD estimating the std deviation.
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) {
    if (s.reasons[i] == InvalidReason::None) groups[meas.paths[i].mirror].push_back(i);
  }
  for (const auto& [mirror, idx] : groups) {
    if (idx.size() < 3) continue;
    std::vector<double> v;
    for (std::size_t i : idx) v.push_back(residual[i]);
    auto median = [](std::vector<double> a) {
      const std::size_t k = a.size() / 2;
      std::nth_element(a.begin(), a.begin() + k, a.end());
      const double hi = a[k];
      if (a.size() % 2) return hi;
      return 0.5 * (hi + *std::max_element(a.begin(), a.begin() + k));
    };
    const double med = median(v);
    for (double& e : v) e = std::abs(e - med);
    const double scale = 1.4826 * median(v);
    if (!(scale > 0.0)) continue;
    for (std::size_t i : idx) {
      if (std::abs(residual[i] - med) > opt.outlier_threshold * scale) {
        s.reasons[i] = InvalidReason::Outlier;
      }
    }
  }

  for (auto r : s.reasons) s.inactive += r != InvalidReason::None ? 1 : 0;
  if (n > 0 && double(s.inactive) > opt.max_inactive_fraction * double(n)) {
    s.warning = true;
    std::ostringstream os;
    os << "data quality: " << s.inactive << " of " << n << " paths inactive";
    s.message = os.str();
  }
  return s;
}

/// Dead mask over full-grid pixel indices (row * width + col), for
/// measurement sets that index every sensor pixel.
inline std::vector<bool> dead_mask(const SensorPattern& pattern) {
  std::vector<bool> dead(static_cast<std::size_t>(pattern.width() * pattern.height()));
  for (int r = 0; r < pattern.height(); ++r)
    for (int c = 0; c < pattern.width(); ++c)
      dead[static_cast<std::size_t>(r * pattern.width() + c)] = pattern.is_dead(r, c);
  return dead;
}

inline MeasurementSet apply_screening(MeasurementSet meas, const PathScreening& s) {
  for (std::size_t i = 0; i < meas.paths.size(); ++i) {
    if (!s.active(i)) meas.paths[i].active = false;
  }
  return meas;
}

// Histogram files and manifests

/// ".bin": little-endian uint32 counts. Anything else: numbers separated by
/// commas, whitespace or newlines.
inline std::vector<double> read_histogram_file(const std::filesystem::path& path) {
  std::vector<double> counts;
  if (path.extension() == ".bin") {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    unsigned char b[4];
    while (in.read(reinterpret_cast<char*>(b), 4)) {
      const std::uint32_t v = std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 |
                              std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
      counts.push_back(v);
    }
    if (in.gcount() != 0) {
      throw SchemaError(path.string() + ": truncated binary histogram");
    }
    return counts;
  }
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string token;
  std::stringstream all;
  all << in.rdbuf();
  std::string text = all.str();
  std::replace(text.begin(), text.end(), ',', ' ');
  std::istringstream tokens(text);
  while (tokens >> token) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size()) {
      throw SchemaError(path.string() + ": bad histogram value '" + token + "'");
    }
    counts.push_back(v);
  }
  return counts;
}

inline void write_histogram_file(const std::filesystem::path& path,
                                 std::span<const std::uint32_t> counts) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (path.extension() == ".bin") {
    std::ofstream out(path, std::ios::binary);
    for (std::uint32_t v : counts) {
      const unsigned char b[4] = {static_cast<unsigned char>(v),
                                  static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 24)};
      out.write(reinterpret_cast<const char*>(b), 4);
    }
    return;
  }
  std::ofstream out(path);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    out << (i ? "," : "") << counts[i];
  }
  out << '\n';
}

struct IngestResult {
  MeasurementSet measurements;
  std::vector<PeakFit> fits;
  PathScreening screening;
  /// Manifest entries on dead pixels; they have no live pixel index.
  std::size_t dropped_dead = 0;
  DeviceTimingConfig timing;
  std::optional<SensorPattern> pattern;
};

/// Manifest: {bin_width?, time_origin?, timing?{speed_of_light,
/// signal_offset, pulse_length}, sensor_pattern?, fit?{half_window},
/// screening?{quality_threshold, outlier_threshold, max_inactive_fraction,
/// noise_scale, plausibility_factor}, paths[{laser, mirror, pixel | row+col,
/// file}]}. Files are resolved relative to the manifest.
inline IngestResult ingest_manifest(const std::filesystem::path& manifest,
                                    const SceneEstimate* reference = nullptr) {
  const json j = read_json_file(manifest);
  detail::check_version(j, "ingest manifest");
  const auto base = manifest.parent_path();
  IngestResult out;
  ScreeningOptions screen;
  PeakFitOptions fit_opt;
  double bin_width = kDefaultBinWidth, origin = 0.0;
  try {
    bin_width = j.value("bin_width", kDefaultBinWidth);
    origin = j.value("time_origin", 0.0);
    if (j.contains("timing")) {
      const json& t = j["timing"];
      out.timing.speed_of_light = t.value("speed_of_light", kSpeedOfLight);
      out.timing.signal_offset = t.value("signal_offset", 0.0);
      out.timing.pulse_length = t.value("pulse_length", 500e-12);
    }
    if (!std::isfinite(out.timing.signal_offset)) {
      throw SchemaError("ingest manifest: signal offset must be finite");
    }
    if (j.contains("sensor_pattern")) {
      out.pattern = sensor_pattern_from_json(j["sensor_pattern"]);
    }
    if (j.contains("fit")) fit_opt.half_window = j["fit"].value("half_window", 5);
    if (j.contains("screening")) {
      const json& s = j["screening"];
      screen.quality_threshold = s.value("quality_threshold", screen.quality_threshold);
      screen.outlier_threshold = s.value("outlier_threshold", screen.outlier_threshold);
      screen.max_inactive_fraction =
          s.value("max_inactive_fraction", screen.max_inactive_fraction);
      screen.noise_scale = s.value("noise_scale", screen.noise_scale);
      screen.plausibility_factor =
          s.value("plausibility_factor", screen.plausibility_factor);
    }

    std::map<std::pair<int, int>, std::size_t> live_index;
    if (out.pattern) {
      const auto& live = out.pattern->live_pixels();
      for (std::size_t i = 0; i < live.size(); ++i) live_index[live[i]] = i;
    }

    std::vector<double> quality;
    for (const auto& e : j.at("paths")) {
      TransientHistogram h;
      h.bin_width = bin_width;
      h.time_origin = origin;
      h.laser = e.at("laser").get<std::size_t>();
      h.mirror = e.at("mirror").get<std::size_t>();
      if (e.contains("row")) {
        if (!out.pattern) {
          throw SchemaError("ingest manifest: row/col needs a sensor_pattern");
        }
        const int r = e.at("row").get<int>();
        const int c = e.at("col").get<int>();
        if (r < 0 || c < 0 || r >= out.pattern->height() || c >= out.pattern->width()) {
          throw IndexError("ingest manifest: pixel outside the sensor");
        }
        const auto it = live_index.find({r, c});
        if (it == live_index.end()) {
          ++out.dropped_dead;
          continue;
        }
        h.pixel = it->second;
      } else {
        h.pixel = e.at("pixel").get<std::size_t>();
      }
      h.counts = read_histogram_file(base / e.at("file").get<std::string>());
      PeakFit f;
      try {
        f = fit_peak(h, fit_opt);
      } catch (const std::invalid_argument&) {
        f = PeakFit{};  // empty or flat: unusable, quality 0
      }
      PathMeasurement p;
      p.laser = h.laser;
      p.mirror = h.mirror;
      p.pixel = h.pixel;
      p.tof = tof_to_length(f.tof_seconds, out.timing);
      out.measurements.paths.push_back(p);
      out.fits.push_back(f);
      quality.push_back(f.quality);
    }
    out.screening =
        detect_invalid_paths(out.measurements, quality, {}, reference, screen);
    out.measurements = apply_screening(std::move(out.measurements), out.screening);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("ingest manifest: ") + e.what());
  }
  return out;
}

}  // namespace nlos_calib
