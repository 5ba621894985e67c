#pragma once

// Seeded experiment sweeps: for each cell and seed, pick a laser/mirror
// subset of a synthetic setup, perturb it, simulate ToFs, calibrate and
// score the result by aligned RMS against the ground truth.
//
// RNG streams are keyed by (master seed, scenario, seed, purpose). The
// scenario hashes everything in a cell except the parameterization, so
// cells that differ only in parameterization see identical data.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "nlos_calib/calibrate.hpp"
#include "nlos_calib/eval.hpp"
#include "nlos_calib/random.hpp"
#include "nlos_calib/synth.hpp"

namespace nlos_calib {

enum class SceneKind { Standard, Curved, RealTwin };

inline std::string to_string(SceneKind k) {
  switch (k) {
    case SceneKind::Standard: return "standard";
    case SceneKind::Curved: return "curved";
    case SceneKind::RealTwin: return "realtwin";
  }
  return "unknown";
}

inline SceneKind parse_scene_kind(const std::string& s) {
  if (s == "standard") return SceneKind::Standard;
  if (s == "curved") return SceneKind::Curved;
  if (s == "realtwin") return SceneKind::RealTwin;
  throw std::invalid_argument("unknown scene kind '" + s + "'");
}

inline StandardSetupConfig setup_for(SceneKind k) {
  switch (k) {
    case SceneKind::Standard: return {};
    case SceneKind::Curved: return StandardSetupConfig::curved();
    case SceneKind::RealTwin: return StandardSetupConfig::real_twin();
  }
  return {};
}

struct SweepCell {
  ParameterizationKind kind = ParameterizationKind::PlanarWall;
  std::size_t lasers = 8;
  std::size_t mirrors = 4;
  /// Init noise is drawn uniformly from [min, max] per run.
  double init_noise_min = 0.5;
  double init_noise_max = 0.5;
  double tof_noise = 0.02;
};

struct SweepSpec {
  std::string name = "custom";
  SceneKind scene = SceneKind::Standard;
  StandardSetupConfig setup;
  std::vector<SweepCell> cells;
  std::size_t seeds = 100;
  std::uint64_t master_seed = 0;
  double success_threshold = 0.2;
  /// Perturb frustum corners instead of individual pixels.
  bool corner_init = false;
  CalibrationConfig calibration;
  /// 0: NLOS_CALIB_THREADS or hardware concurrency.
  std::size_t threads = 0;
};

struct SweepRun {
  std::size_t cell = 0;
  std::size_t seed = 0;
  ParameterizationKind kind = ParameterizationKind::PlanarWall;
  std::size_t lasers = 0;
  std::size_t mirrors = 0;
  /// Laser/mirror combinations; every one yields a ToF per pixel.
  std::size_t measurements = 0;
  std::size_t paths = 0;
  std::size_t dof = 0;
  double init_noise = 0.0;
  double tof_noise = 0.0;
  double rms = 0.0;
  double init_rms = 0.0;
  bool success = false;
  bool failed = false;
  std::string status;
  std::size_t iterations = 0;
  double objective = 0.0;
  std::string error;
};

struct CellSummary {
  std::size_t cell = 0;
  std::size_t count = 0;
  std::size_t failures = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
  double success_rate = 0.0;
};

struct SweepResult {
  SweepSpec spec;
  std::vector<SweepRun> runs;  // cell-major, then seed
  std::vector<CellSummary> summaries;

  std::vector<double> rms_of(std::size_t cell) const {
    std::vector<double> out;
    for (const auto& r : runs)
      if (r.cell == cell && !r.failed) out.push_back(r.rms);
    return out;
  }
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline std::uint64_t scenario_key(const SweepCell& c) {
  return derive_seed(c.lasers, {c.mirrors, bits_of(c.init_noise_min),
                                bits_of(c.init_noise_max),
                                bits_of(c.tof_noise)});
}

inline std::size_t sweep_threads(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("NLOS_CALIB_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// One seeded perturb -> simulate -> calibrate -> score run.
inline SweepRun run_single(const SweepSpec& spec, const SyntheticSetup& full,
                           std::size_t cell_index, std::size_t seed) {
  const SweepCell& cell = spec.cells.at(cell_index);
  SweepRun run;
  run.cell = cell_index;
  run.seed = seed;
  run.kind = cell.kind;
  run.lasers = cell.lasers;
  run.mirrors = cell.mirrors;
  run.measurements = cell.lasers * cell.mirrors;
  run.tof_noise = cell.tof_noise;
  try {
    const std::uint64_t scenario = scenario_key(cell);
    auto stream = [&](Stream s) {
      return make_rng(spec.master_seed,
                      {scenario, seed, static_cast<std::uint64_t>(s)});
    };
    Rng subset_rng = stream(Stream::Subset);
    const auto lasers =
        random_subset(full.scene.lasers.size(), cell.lasers, subset_rng);
    const auto mirrors =
        random_subset(full.scene.mirrors.size(), cell.mirrors, subset_rng);
    if (lasers.size() != cell.lasers || mirrors.size() != cell.mirrors) {
      throw std::invalid_argument("cell asks for more lasers or mirrors "
                                  "than the setup provides");
    }
    const SyntheticSetup setup = select_subset(full, lasers, mirrors);

    Rng level_rng = stream(Stream::InitLevel);
    std::uniform_real_distribution<double> level(cell.init_noise_min,
                                                 cell.init_noise_max);
    run.init_noise = cell.init_noise_min == cell.init_noise_max
                         ? cell.init_noise_min
                         : level(level_rng);

    Rng perturb_rng = stream(Stream::Perturb);
    const SceneEstimate init =
        spec.corner_init ? perturb_frustum_corners(setup.scene, setup.pattern,
                                                   run.init_noise, perturb_rng)
                         : perturb_setup(setup.scene, run.init_noise,
                                         perturb_rng);
    Rng tof_rng = stream(Stream::Tof);
    const MeasurementSet meas =
        simulate_tofs(setup.scene, fully_connected(counts_of(setup.scene)),
                      cell.tof_noise, tof_rng);
    run.paths = meas.active_count();

    const Parameterization param =
        cell.kind == ParameterizationKind::General  ? Parameterization::general()
        : cell.kind == ParameterizationKind::PlanarWall ? Parameterization::planar()
                                                    : Parameterization::grid(setup.pattern);
    run.dof = param.size(counts_of(setup.scene));
    const CalibrationResult result =
        calibrate(init, param, meas, spec.calibration);
    run.rms = setup_rms(result.scene, setup.scene, true);
    run.init_rms = setup_rms(init, setup.scene, true);
    run.status = to_string(result.status);
    run.iterations = result.iterations;
    run.objective = result.objective;
    run.success = run.rms < spec.success_threshold;
  } catch (const std::exception& e) {
    run.failed = true;
    run.success = false;
    run.error = e.what();
    run.status = "error";
    run.rms = std::nan("");
  }
  return run;
}

inline CellSummary summarize(const std::vector<SweepRun>& runs,
                             std::size_t cell) {
  CellSummary s;
  s.cell = cell;
  std::vector<double> v;
  std::size_t successes = 0;
  for (const auto& r : runs) {
    if (r.cell != cell) continue;
    ++s.count;
    if (r.failed) {
      ++s.failures;
      continue;
    }
    successes += r.success ? 1 : 0;
    v.push_back(r.rms);
  }
  if (s.count > 0) {
    s.success_rate = static_cast<double>(successes) / static_cast<double>(s.count);
  }
  if (v.empty()) {
    s.mean = s.stddev = s.median = s.min = s.max = std::nan("");
    return s;
  }
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - s.mean) * (x - s.mean);
  s.stddev = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
  s.median = median_of(v);
  s.min = *std::min_element(v.begin(), v.end());
  s.max = *std::max_element(v.begin(), v.end());
  return s;
}

inline SweepResult run_sweep(const SweepSpec& spec) {
  if (spec.cells.empty() || spec.seeds == 0) {
    throw std::invalid_argument("sweep needs at least one cell and one seed");
  }
  const SyntheticSetup full = build_standard_setup(spec.setup, spec.master_seed);
  const std::size_t jobs = spec.cells.size() * spec.seeds;

  SweepResult out;
  out.spec = spec;
  out.runs.resize(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs; j = next++) {
      out.runs[j] = run_single(spec, full, j / spec.seeds, j % spec.seeds);
    }
  };
  const std::size_t threads = std::min(sweep_threads(spec.threads), jobs);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (std::size_t c = 0; c < spec.cells.size(); ++c) {
    out.summaries.push_back(summarize(out.runs, c));
  }
  return out;
}

/// Cartesian product of the given axes.
inline std::vector<SweepCell> expand_cells(
    const std::vector<ParameterizationKind>& kinds,
    const std::vector<std::pair<std::size_t, std::size_t>>& laser_mirror,
    const std::vector<std::pair<double, double>>& init_noise,
    const std::vector<double>& tof_noise) {
  std::vector<SweepCell> cells;
  for (auto kind : kinds)
    for (auto [l, m] : laser_mirror)
      for (auto [lo, hi] : init_noise)
        for (double t : tof_noise) cells.push_back({kind, l, m, lo, hi, t});
  return cells;
}

/// All (lasers, mirrors) splits of each total with the given laser counts.
inline std::vector<std::pair<std::size_t, std::size_t>> factorizations(
    const std::vector<std::size_t>& totals,
    const std::vector<std::size_t>& laser_counts, std::size_t max_lasers,
    std::size_t max_mirrors) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t total : totals) {
    for (std::size_t l : laser_counts) {
      if (l == 0 || l > max_lasers || total % l != 0) continue;
      const std::size_t m = total / l;
      if (m >= 1 && m <= max_mirrors) out.emplace_back(l, m);
    }
  }
  return out;
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {
      "teaser", "fig4", "fig5", "fig6", "fig7", "fig8", "realtwin"};
  return names;
}

/// Experiment regimes with this project's default grids.
inline SweepSpec preset(const std::string& name) {
  using K = ParameterizationKind;
  SweepSpec s;
  s.name = name;
  s.seeds = 100;
  const std::vector<double> fig7_tof = {0.005, 0.01, 0.02, 0.05, 0.1};
  if (name == "teaser") {
    s.cells = expand_cells({K::PlanarWall}, {{8, 4}}, {{0.5, 0.5}}, {0.02});
  } else if (name == "fig4") {
    s.cells = expand_cells(
        {K::PlanarWall},
        factorizations({8, 16, 32, 64, 128, 256}, {1, 2, 4, 8}, 8, 40),
        {{0.0, 0.5}}, {0.02});
  } else if (name == "fig5") {
    s.cells = expand_cells({K::PlanarWall}, {{4, 8}, {8, 8}, {8, 32}},
                           {{0.05, 0.05}, {0.1, 0.1}, {0.25, 0.25}, {0.5, 0.5}},
                           {0.02});
  } else if (name == "fig6") {
    s.cells = expand_cells({K::PlanarWall}, {{8, 8}},
                           {{0.1, 0.1}, {0.25, 0.25}, {0.5, 0.5}, {1, 1},
                            {2, 2}, {4, 4}, {8, 8}},
                           {0.02});
  } else if (name == "fig7") {
    s.cells = expand_cells({K::General, K::PlanarWall, K::RegularGrid},
                           {{6, 5}}, {{0.0, 0.5}}, fig7_tof);
  } else if (name == "fig8") {
    s.scene = SceneKind::Curved;
    s.cells = expand_cells({K::General}, {{6, 6}}, {{0.5, 0.5}}, {0.1});
  } else if (name == "realtwin") {
    s.scene = SceneKind::RealTwin;
    s.corner_init = true;
    // One 250 ps bin of path length (7.495 cm) as ToF standard deviation.
    s.cells = expand_cells({K::RegularGrid}, {{7, 7}}, {{0.4, 0.4}}, {0.07495});
    s.success_threshold = 0.06;
  } else {
    throw std::invalid_argument("unknown preset '" + name + "'");
  }
  s.setup = setup_for(s.scene);
  return s;
}

}  // namespace nlos_calib
