// nlos-calib: simulate, calibrate, evaluate, sweep, ingest.
//
// Exit codes: 0 success, 1 calibration did not converge, 2 input error.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nlos_calib/nlos_calib.hpp"

namespace fs = std::filesystem;
using namespace nlos_calib;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNotConverged = 1;
constexpr int kExitInput = 2;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json load(const std::string& path) {
  if (!fs::exists(path)) throw InputError("no such file: " + path);
  return read_json_file(path);
}

Parameterization make_parameterization(ParameterizationKind kind,
                                       const json& scene_doc) {
  switch (kind) {
    case ParameterizationKind::General: return Parameterization::general();
    case ParameterizationKind::PlanarWall: return Parameterization::planar();
    case ParameterizationKind::RegularGrid:
      if (!scene_doc.contains("sensor_pattern")) {
        throw InputError("grid parameterization needs a sensor_pattern in the scene");
      }
      return Parameterization::grid(sensor_pattern_from_json(scene_doc["sensor_pattern"]));
  }
  throw InputError("unknown parameterization");
}

void write_manifest(const fs::path& out, RunManifest m) {
  m.outputs.push_back((out / "manifest.json").string());
  write_json_file(out / "manifest.json", to_json(m));
}

// simulate

struct SimulateArgs {
  std::string scene = "standard";
  std::uint64_t seed = 0;
  double init_noise = 0.5;
  double tof_noise = 0.02;
  bool corner_init = false;
  bool mirror_extents = false;
  std::string out = "out";
};

int cmd_simulate(const SimulateArgs& a) {
  StandardSetupConfig cfg;
  std::string config_path;
  if (a.scene == "standard" || a.scene == "curved" || a.scene == "realtwin") {
    cfg = setup_for(parse_scene_kind(a.scene));
  } else {
    config_path = a.scene;
    cfg = setup_config_from_json(load(a.scene));
  }
  cfg.check();
  if (!(a.init_noise >= 0.0) || !(a.tof_noise >= 0.0)) {
    throw InputError("noise levels must be >= 0");
  }
  const SyntheticSetup setup = build_standard_setup(cfg, a.seed);
  Rng perturb = make_rng(a.seed, {static_cast<std::uint64_t>(Stream::Perturb)});
  const SceneEstimate init =
      a.corner_init
          ? perturb_frustum_corners(setup.scene, setup.pattern, a.init_noise, perturb)
          : perturb_setup(setup.scene, a.init_noise, perturb);
  Rng tof = make_rng(a.seed, {static_cast<std::uint64_t>(Stream::Tof)});
  const MeasurementSet meas = simulate_tofs(
      setup.scene, fully_connected(counts_of(setup.scene)), a.tof_noise, tof,
      a.mirror_extents ? std::span<const MirrorExtent>(setup.extents)
                       : std::span<const MirrorExtent>());

  const fs::path out(a.out);
  write_json_file(out / "truth.json", to_json(setup.scene, setup.extents, &setup.pattern));
  write_json_file(out / "init.json", to_json(init, {}, &setup.pattern));
  write_json_file(out / "measurements.json", to_json(meas));

  RunManifest m;
  m.command = "simulate";
  m.config = config_path;
  m.master_seed = a.seed;
  m.outputs = {(out / "truth.json").string(), (out / "init.json").string(),
               (out / "measurements.json").string()};
  m.options = {{"setup", to_json(cfg)},
               {"init_noise", a.init_noise},
               {"tof_noise", a.tof_noise},
               {"corner_init", a.corner_init},
               {"mirror_extents", a.mirror_extents}};
  write_manifest(out, m);
  std::cout << "paths " << meas.paths.size() << " active " << meas.active_count()
            << " -> " << out.string() << "\n";
  return kExitOk;
}

// calibrate

struct CalibrateArgs {
  std::string init;
  std::string measurements;
  std::string parameterization = "planar";
  std::size_t max_iterations = 5000;
  std::string out = "out";
};

int cmd_calibrate(const CalibrateArgs& a) {
  const json init_doc = load(a.init);
  const SceneEstimate init = scene_from_json(init_doc);
  const MeasurementSet meas = measurements_from_json(load(a.measurements));
  validate(meas, counts_of(init));
  ParameterizationKind kind;
  try {
    kind = parse_kind(a.parameterization);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  const Parameterization param = make_parameterization(kind, init_doc);
  CalibrationConfig cfg;
  cfg.max_iterations = a.max_iterations;
  const CalibrationResult r = calibrate(init, param, meas, cfg);

  const fs::path out(a.out);
  json doc = to_json(r);
  if (init_doc.contains("sensor_pattern")) {
    doc["scene"]["sensor_pattern"] = init_doc["sensor_pattern"];
  }
  write_json_file(out / "result.json", doc);
  RunManifest m;
  m.command = "calibrate";
  m.inputs = {a.init, a.measurements};
  m.outputs = {(out / "result.json").string()};
  m.options = {{"parameterization", to_string(kind)},
               {"max_iterations", a.max_iterations}};
  write_manifest(out, m);

  std::cout << "parameterization " << to_string(kind) << " dof "
            << r.parameters.size() << "\n"
            << "status " << to_string(r.status) << " iterations " << r.iterations
            << " objective " << std::setprecision(6) << r.objective << "\n";
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  return r.converged() ? kExitOk : kExitNotConverged;
}

// evaluate

struct EvaluateArgs {
  std::string result;
  std::string reference;
  std::string rms = "mean";
  std::string out;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const json result_doc = load(a.result);
  const json& scene_doc = result_doc.contains("scene") ? result_doc["scene"] : result_doc;
  const SceneEstimate est = scene_from_json(scene_doc);
  const SceneEstimate ref = scene_from_json(load(a.reference));
  if (a.rms != "mean" && a.rms != "sum") throw InputError("--rms must be mean or sum");
  const RmsConvention conv = a.rms == "sum" ? RmsConvention::RawSum : RmsConvention::Mean;
  const SetupComparison cmp = compare_setups(est, ref, true, conv);

  json report = {{"schema_version", kSchemaVersion},
                 {"rms", cmp.rms},
                 {"rms_convention", a.rms},
                 {"point_errors", cmp.point_errors}};
  std::cout << std::setprecision(8) << "aligned rms " << cmp.rms << " ("
            << a.rms << ", " << cmp.point_errors.size() << " points)\n";
  if (!cmp.point_errors.empty()) {
    double worst = 0.0;
    for (double e : cmp.point_errors) worst = std::max(worst, e);
    std::cout << "max point error " << worst << "\n";
  }
  if (result_doc.contains("residuals")) {
    std::vector<double> res;
    for (const auto& e : result_doc["residuals"]) res.push_back(e.at("residual").get<double>());
    double sum = 0.0, sq = 0.0, worst = 0.0;
    for (double v : res) {
      sum += v;
      sq += v * v;
      worst = std::max(worst, std::abs(v));
    }
    const double n = res.empty() ? 1.0 : static_cast<double>(res.size());
    report["residuals"] = {{"count", res.size()},
                           {"mean", sum / n},
                           {"rms", std::sqrt(sq / n)},
                           {"max_abs", worst}};
    std::cout << "residuals " << res.size() << " mean " << sum / n << " rms "
              << std::sqrt(sq / n) << " max " << worst << "\n";
  }
  if (!a.out.empty()) {
    const fs::path out(a.out);
    write_json_file(out / "evaluation.json", report);
    RunManifest m;
    m.command = "evaluate";
    m.inputs = {a.result, a.reference};
    m.outputs = {(out / "evaluation.json").string()};
    m.options = {{"rms_convention", a.rms}};
    write_manifest(out, m);
  }
  return kExitOk;
}

// sweep

struct SweepArgs {
  std::string preset;
  std::string spec;
  std::optional<std::size_t> seeds;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 0;
  std::string out = "out";
};

int cmd_sweep(const SweepArgs& a) {
  SweepSpec spec;
  if (!a.spec.empty()) {
    spec = sweep_spec_from_json(load(a.spec));
  } else if (!a.preset.empty()) {
    try {
      spec = preset(a.preset);
    } catch (const std::invalid_argument& e) {
      throw InputError(e.what());
    }
  } else {
    throw InputError("sweep needs --preset or --spec");
  }
  if (a.seeds) spec.seeds = *a.seeds;
  if (a.seed) spec.master_seed = *a.seed;
  spec.threads = a.threads;
  if (spec.cells.empty()) throw InputError("sweep spec has no cells");

  const SweepResult r = run_sweep(spec);
  const fs::path out(a.out);
  write_json_file(out / "sweep.json", to_json(r));
  write_text_file(out / "sweep.csv", to_csv(r));
  RunManifest m;
  m.command = "sweep";
  m.config = a.spec;
  m.master_seed = spec.master_seed;
  m.outputs = {(out / "sweep.json").string(), (out / "sweep.csv").string()};
  m.options = to_json(spec);
  write_manifest(out, m);

  std::cout << std::left << std::setw(6) << "cell" << std::setw(9) << "param"
            << std::setw(5) << "L" << std::setw(5) << "M" << std::setw(14) << "init"
            << std::setw(9) << "tof" << std::setw(12) << "median" << std::setw(12)
            << "mean" << "success\n";
  for (const auto& s : r.summaries) {
    const auto& c = spec.cells[s.cell];
    std::ostringstream init;
    init << c.init_noise_min;
    if (c.init_noise_max != c.init_noise_min) init << "-" << c.init_noise_max;
    std::cout << std::setw(6) << s.cell << std::setw(9) << to_string(c.kind)
              << std::setw(5) << c.lasers << std::setw(5) << c.mirrors
              << std::setw(14) << init.str() << std::setw(9) << c.tof_noise
              << std::setw(12) << s.median << std::setw(12) << s.mean
              << s.success_rate << "\n";
  }
  return kExitOk;
}

// ingest

struct IngestArgs {
  std::string manifest;
  std::string init;
  std::string out = "out";
};

int cmd_ingest(const IngestArgs& a) {
  if (!fs::exists(a.manifest)) throw InputError("no such file: " + a.manifest);
  std::optional<SceneEstimate> reference;
  if (!a.init.empty()) reference = scene_from_json(load(a.init));
  const IngestResult r = ingest_manifest(a.manifest, reference ? &*reference : nullptr);

  const fs::path out(a.out);
  write_json_file(out / "measurements.json", to_json(r.measurements));
  json fits = json::array();
  for (std::size_t i = 0; i < r.fits.size(); ++i) {
    const auto& f = r.fits[i];
    fits.push_back({{"path", i},
                    {"tof_seconds", f.tof_seconds},
                    {"center_bins", f.center},
                    {"amplitude", f.amplitude},
                    {"sigma_bins", f.sigma},
                    {"floor", f.floor},
                    {"quality", f.quality},
                    {"status", to_string(r.screening.reasons[i])}});
  }
  write_json_file(out / "fits.json",
                  {{"schema_version", kSchemaVersion},
                   {"dropped_dead", r.dropped_dead},
                   {"warning", r.screening.message},
                   {"fits", fits}});
  RunManifest m;
  m.command = "ingest";
  m.config = a.manifest;
  if (!a.init.empty()) m.inputs = {a.init};
  m.outputs = {(out / "measurements.json").string(), (out / "fits.json").string()};
  write_manifest(out, m);

  std::cout << "paths " << r.measurements.paths.size() << " active "
            << r.measurements.active_count() << " dropped_dead " << r.dropped_dead
            << "\n";
  if (r.screening.warning) std::cerr << "warning: " << r.screening.message << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Three-bounce NLoS setup calibration with mirror targets"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Synthetic scene, initialization and ToFs");
  s->add_option("--scene", sim.scene, "standard | curved | realtwin | setup JSON");
  s->add_option("--seed", sim.seed, "Master seed");
  s->add_option("--init-noise", sim.init_noise, "Initialization noise level");
  s->add_option("--tof-noise", sim.tof_noise, "ToF noise standard deviation");
  s->add_flag("--corner-init", sim.corner_init, "Perturb frustum corners only");
  s->add_flag("--mirror-extents", sim.mirror_extents,
              "Deactivate paths missing the finite mirror patch");
  s->add_option("--out", sim.out, "Output directory");

  CalibrateArgs cal;
  auto* c = app.add_subcommand("calibrate", "Optimize a scene against ToFs");
  c->add_option("--init", cal.init, "Initial scene JSON")->required();
  c->add_option("--measurements", cal.measurements, "Measurement JSON")->required();
  c->add_option("--parameterization", cal.parameterization, "general | planar | grid");
  c->add_option("--max-iterations", cal.max_iterations, "BFGS iteration cap");
  c->add_option("--out", cal.out, "Output directory");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Aligned RMS against a reference scene");
  e->add_option("--scene", ev.result, "Result or scene JSON")->required();
  e->add_option("--reference", ev.reference, "Reference scene JSON")->required();
  e->add_option("--rms", ev.rms, "mean | sum");
  e->add_option("--out", ev.out, "Output directory (optional)");

  SweepArgs sw;
  auto* w = app.add_subcommand("sweep", "Seeded experiment sweep");
  w->add_option("--preset", sw.preset, "teaser | fig4 | fig5 | fig6 | fig7 | fig8 | realtwin");
  w->add_option("--spec", sw.spec, "Sweep spec JSON");
  w->add_option("--seeds", sw.seeds, "Seeds per cell");
  w->add_option("--seed", sw.seed, "Master seed");
  w->add_option("--threads", sw.threads, "Worker threads (default NLOS_CALIB_THREADS)");
  w->add_option("--out", sw.out, "Output directory");

  IngestArgs in;
  auto* g = app.add_subcommand("ingest", "Histograms to a measurement set");
  g->add_option("--manifest", in.manifest, "Histogram manifest JSON")->required();
  g->add_option("--init", in.init, "Reference scene for plausibility and outliers");
  g->add_option("--out", in.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return kExitInput;
  }

  try {
    if (*s) return cmd_simulate(sim);
    if (*c) return cmd_calibrate(cal);
    if (*e) return cmd_evaluate(ev);
    if (*w) return cmd_sweep(sw);
    if (*g) return cmd_ingest(in);
  } catch (const std::exception& ex) {
    // Everything reaching here is bad input: unreadable files, schema or
    // count mismatches, invalid configurations.
    std::cerr << "error: " << ex.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
