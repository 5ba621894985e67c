#pragma once

// JSON (de)serialization of scenes, measurement sets, sensor patterns,
// calibration results and sweeps. Every document carries schema_version.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "nlos_calib/calibrate.hpp"
#include "nlos_calib/geometry.hpp"
#include "nlos_calib/measurement.hpp"
#include "nlos_calib/param.hpp"
#include "nlos_calib/sweep.hpp"

namespace nlos_calib {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kVersion = "0.1.0";

/// Malformed or incompatible input document.
class SchemaError : public CalibrationError {
 public:
  using CalibrationError::CalibrationError;
};

namespace detail {

inline json vec_json(const Eigen::Vector3d& v) {
  return json::array({v.x(), v.y(), v.z()});
}

inline Eigen::Vector3d vec_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw SchemaError("expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline void check_version(const json& j, const char* what) {
  if (!j.is_object()) throw SchemaError(std::string(what) + ": expected object");
  if (j.contains("schema_version") &&
      j["schema_version"].get<int>() != kSchemaVersion) {
    throw SchemaError(std::string(what) + ": unsupported schema_version " +
                      j["schema_version"].dump());
  }
}

}  // namespace detail

// Sensor pattern: {width, height, pitch_uv, dead_rows[], dead_cols[],
// dead_pixels[[row, col]...], remap?[[u, v]...]}

inline json to_json(const SensorPattern& p) {
  json dead_pixels = json::array();
  json dead_rows = json::array();
  json dead_cols = json::array();
  for (int r = 0; r < p.height(); ++r) {
    bool all = true;
    for (int c = 0; c < p.width() && all; ++c) all = p.is_dead(r, c);
    if (all) dead_rows.push_back(r);
  }
  for (int c = 0; c < p.width(); ++c) {
    bool all = true;
    for (int r = 0; r < p.height() && all; ++r) all = p.is_dead(r, c);
    if (all) dead_cols.push_back(c);
  }
  for (int r = 0; r < p.height(); ++r)
    for (int c = 0; c < p.width(); ++c)
      if (p.is_dead(r, c)) dead_pixels.push_back({r, c});
  json remap = json::array();
  for (const auto& s : p.coordinates()) remap.push_back({s.x(), s.y()});
  return {{"width", p.width()},         {"height", p.height()},
          {"pitch_uv", {p.pitch_u(), p.pitch_v()}},
          {"dead_rows", dead_rows},     {"dead_cols", dead_cols},
          {"dead_pixels", dead_pixels}, {"remap", remap}};
}

inline SensorPattern sensor_pattern_from_json(const json& j) {
  try {
    const int w = j.at("width").get<int>();
    const int h = j.at("height").get<int>();
    double pu = 1.0, pv = 1.0;
    if (j.contains("pitch_uv")) {
      const json& p = j["pitch_uv"];
      if (p.is_array()) {
        pu = p.at(0).get<double>();
        pv = p.at(1).get<double>();
      } else {
        pu = pv = p.get<double>();
      }
    }
    auto ints = [&](const char* key) {
      return j.contains(key) ? j[key].get<std::vector<int>>()
                             : std::vector<int>{};
    };
    std::vector<std::pair<int, int>> dead;
    if (j.contains("dead_pixels")) {
      for (const auto& e : j["dead_pixels"])
        dead.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    }
    std::vector<Eigen::Vector2d> remap;
    if (j.contains("remap")) {
      for (const auto& e : j["remap"])
        remap.emplace_back(e.at(0).get<double>(), e.at(1).get<double>());
    }
    return SensorPattern(w, h, pu, pv, ints("dead_rows"), ints("dead_cols"),
                         dead, std::move(remap));
  } catch (const json::exception& e) {
    throw SchemaError(std::string("sensor pattern: ") + e.what());
  }
}

// Scene: {schema_version, devices{camera, laser}, lasers[], pixels[],
// mirrors[[nx, ny, nz, d]...], mirror_extents?[], sensor_pattern?}

inline json to_json(const SceneEstimate& s,
                    const std::vector<MirrorExtent>& extents = {},
                    const SensorPattern* pattern = nullptr) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["devices"] = {{"camera", detail::vec_json(s.devices.camera)},
                  {"laser", detail::vec_json(s.devices.laser)}};
  j["lasers"] = json::array();
  for (const auto& p : s.lasers) j["lasers"].push_back(detail::vec_json(p));
  j["pixels"] = json::array();
  for (const auto& p : s.pixels) j["pixels"].push_back(detail::vec_json(p));
  j["mirrors"] = json::array();
  for (const auto& m : s.mirrors) {
    j["mirrors"].push_back(
        {m.normal.x(), m.normal.y(), m.normal.z(), m.offset});
  }
  if (!extents.empty()) {
    j["mirror_extents"] = json::array();
    for (const auto& e : extents) {
      j["mirror_extents"].push_back({{"center", detail::vec_json(e.center)},
                                     {"half_u", detail::vec_json(e.half_u)},
                                     {"half_v", detail::vec_json(e.half_v)}});
    }
  }
  if (pattern != nullptr) j["sensor_pattern"] = to_json(*pattern);
  return j;
}

inline SceneEstimate scene_from_json(const json& j) {
  detail::check_version(j, "scene");
  try {
    SceneEstimate s;
    if (j.contains("devices")) {
      s.devices.camera = detail::vec_from(j["devices"].at("camera"));
      s.devices.laser = detail::vec_from(j["devices"].at("laser"));
    }
    for (const auto& p : j.at("lasers")) s.lasers.push_back(detail::vec_from(p));
    for (const auto& p : j.at("pixels")) s.pixels.push_back(detail::vec_from(p));
    for (const auto& m : j.at("mirrors")) {
      if (!m.is_array() || m.size() != 4) {
        throw SchemaError("scene: mirror must be [nx, ny, nz, d]");
      }
      const RawPlane raw(m[0].get<double>(), m[1].get<double>(),
                         m[2].get<double>(), m[3].get<double>());
      // Stored planes are already unit; keep them bit-exact so files
      // round-trip. Anything else is normalized.
      if (raw.allFinite() && std::abs(raw.head<3>().norm() - 1.0) < 1e-12) {
        s.mirrors.push_back({raw.head<3>(), raw[3]});
      } else {
        s.mirrors.push_back(normalize_plane(raw));
      }
    }
    for (const auto& p : s.lasers)
      if (!is_finite(p)) throw SchemaError("scene: non-finite laser position");
    for (const auto& p : s.pixels)
      if (!is_finite(p)) throw SchemaError("scene: non-finite pixel position");
    return s;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("scene: ") + e.what());
  }
}

inline std::vector<MirrorExtent> extents_from_json(const json& j) {
  std::vector<MirrorExtent> out;
  if (!j.contains("mirror_extents")) return out;
  for (const auto& e : j["mirror_extents"]) {
    out.push_back({detail::vec_from(e.at("center")),
                   detail::vec_from(e.at("half_u")),
                   detail::vec_from(e.at("half_v"))});
  }
  return out;
}

// Measurement set: {schema_version, paths: [{laser, mirror, pixel, tof,
// active}...]}. A bare array of paths is accepted on input.

inline json to_json(const MeasurementSet& m) {
  json arr = json::array();
  for (const auto& p : m.paths) {
    arr.push_back({{"laser", p.laser},
                   {"mirror", p.mirror},
                   {"pixel", p.pixel},
                   {"tof", p.tof},
                   {"active", p.active}});
  }
  return {{"schema_version", kSchemaVersion}, {"paths", arr}};
}

inline MeasurementSet measurements_from_json(const json& j) {
  if (j.is_object()) detail::check_version(j, "measurements");
  const json& arr = j.is_object() && j.contains("paths") ? j["paths"] : j;
  if (!arr.is_array()) throw SchemaError("measurements: expected an array");
  MeasurementSet m;
  try {
    for (const auto& e : arr) {
      PathMeasurement p;
      p.laser = e.at("laser").get<std::size_t>();
      p.mirror = e.at("mirror").get<std::size_t>();
      p.pixel = e.at("pixel").get<std::size_t>();
      p.tof = e.at("tof").get<double>();
      p.active = e.value("active", true);
      m.paths.push_back(p);
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("measurements: ") + e.what());
  }
  return m;
}

// Calibration result: {schema_version, parameterization, scene, diagnostics,
// residuals[{path, residual}]}

inline json to_json(const CalibrationResult& r) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["parameterization"] = to_string(r.kind);
  j["scene"] = to_json(r.scene);
  j["parameters"] = std::vector<double>(r.parameters.data(),
                                        r.parameters.data() + r.parameters.size());
  json gauge_rot = json::array();
  for (int i = 0; i < 3; ++i)
    gauge_rot.push_back({r.gauge.rotation(i, 0), r.gauge.rotation(i, 1),
                         r.gauge.rotation(i, 2)});
  j["diagnostics"] = {{"status", to_string(r.status)},
                      {"converged", r.converged()},
                      {"objective", r.objective},
                      {"initial_objective", r.initial_objective},
                      {"gradient_norm", r.gradient_norm},
                      {"iterations", r.iterations},
                      {"evaluations", r.evaluations},
                      {"hessian_resets", r.hessian_resets},
                      {"degenerate_paths", r.degenerate_paths},
                      {"dof", r.parameters.size()},
                      {"active_paths", r.residuals.size()},
                      {"warnings", r.warnings},
                      {"gauge_rotation", gauge_rot},
                      {"gauge_translation", detail::vec_json(r.gauge.translation)}};
  json res = json::array();
  for (std::size_t i = 0; i < r.residuals.size(); ++i) {
    res.push_back({{"path", r.residual_paths[i]}, {"residual", r.residuals[i]}});
  }
  j["residuals"] = res;
  return j;
}

// Sweeps

inline json to_json(const SweepCell& c) {
  return {{"parameterization", to_string(c.kind)},
          {"lasers", c.lasers},
          {"mirrors", c.mirrors},
          {"init_noise", {c.init_noise_min, c.init_noise_max}},
          {"tof_noise", c.tof_noise}};
}

inline json to_json(const SweepSpec& s) {
  json cells = json::array();
  for (const auto& c : s.cells) cells.push_back(to_json(c));
  return {{"schema_version", kSchemaVersion},
          {"name", s.name},
          {"scene", to_string(s.scene)},
          {"seeds", s.seeds},
          {"master_seed", s.master_seed},
          {"success_threshold", s.success_threshold},
          {"corner_init", s.corner_init},
          {"cells", cells}};
}

/// Accepts either an explicit "cells" list or "axes" to expand:
/// {parameterizations[], laser_mirror[[L, M]...], init_noise[[lo, hi]|x...],
///  tof_noise[]}. A "preset" key starts from that preset.
inline SweepSpec sweep_spec_from_json(const json& j) {
  detail::check_version(j, "sweep spec");
  try {
    SweepSpec s = j.contains("preset") ? preset(j["preset"].get<std::string>())
                                       : SweepSpec{};
    if (j.contains("name")) s.name = j["name"].get<std::string>();
    if (j.contains("scene")) {
      s.scene = parse_scene_kind(j["scene"].get<std::string>());
      s.setup = setup_for(s.scene);
    }
    s.seeds = j.value("seeds", s.seeds);
    s.master_seed = j.value("master_seed", s.master_seed);
    s.success_threshold = j.value("success_threshold", s.success_threshold);
    s.corner_init = j.value("corner_init", s.corner_init);
    auto noise_range = [](const json& e) -> std::pair<double, double> {
      if (e.is_array()) return {e.at(0).get<double>(), e.at(1).get<double>()};
      return {e.get<double>(), e.get<double>()};
    };
    if (j.contains("cells")) {
      s.cells.clear();
      for (const auto& e : j["cells"]) {
        SweepCell c;
        c.kind = parse_kind(e.value("parameterization", std::string("planar")));
        c.lasers = e.at("lasers").get<std::size_t>();
        c.mirrors = e.at("mirrors").get<std::size_t>();
        std::tie(c.init_noise_min, c.init_noise_max) =
            noise_range(e.at("init_noise"));
        c.tof_noise = e.at("tof_noise").get<double>();
        s.cells.push_back(c);
      }
    } else if (j.contains("axes")) {
      const json& a = j["axes"];
      std::vector<ParameterizationKind> kinds;
      for (const auto& k : a.at("parameterizations"))
        kinds.push_back(parse_kind(k.get<std::string>()));
      std::vector<std::pair<std::size_t, std::size_t>> lm;
      for (const auto& e : a.at("laser_mirror"))
        lm.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
      std::vector<std::pair<double, double>> init;
      for (const auto& e : a.at("init_noise")) init.push_back(noise_range(e));
      s.cells = expand_cells(kinds, lm, init,
                             a.at("tof_noise").get<std::vector<double>>());
    }
    return s;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("sweep spec: ") + e.what());
  }
}

inline json to_json(const SweepResult& r) {
  json runs = json::array();
  for (const auto& x : r.runs) {
    runs.push_back({{"cell", x.cell},
                    {"seed", x.seed},
                    {"parameterization", to_string(x.kind)},
                    {"lasers", x.lasers},
                    {"mirrors", x.mirrors},
                    {"measurements", x.measurements},
                    {"paths", x.paths},
                    {"dof", x.dof},
                    {"init_noise", x.init_noise},
                    {"tof_noise", x.tof_noise},
                    {"rms", x.failed ? json(nullptr) : json(x.rms)},
                    {"init_rms", x.failed ? json(nullptr) : json(x.init_rms)},
                    {"success", x.success},
                    {"status", x.status},
                    {"iterations", x.iterations},
                    {"objective", x.objective},
                    {"error", x.error}});
  }
  json summaries = json::array();
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  for (const auto& s : r.summaries) {
    json cell = to_json(r.spec.cells[s.cell]);
    cell["cell"] = s.cell;
    cell["count"] = s.count;
    cell["failures"] = s.failures;
    cell["mean"] = num(s.mean);
    cell["stddev"] = num(s.stddev);
    cell["median"] = num(s.median);
    cell["min"] = num(s.min);
    cell["max"] = num(s.max);
    cell["success_rate"] = s.success_rate;
    summaries.push_back(cell);
  }
  return {{"schema_version", kSchemaVersion},
          {"spec", to_json(r.spec)},
          {"summaries", summaries},
          {"runs", runs}};
}

/// One row per run.
inline std::string to_csv(const SweepResult& r) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "preset,cell,seed,parameterization,lasers,mirrors,measurements,paths,"
        "dof,init_noise,tof_noise,rms,init_rms,success,status,iterations,"
        "objective\n";
  for (const auto& x : r.runs) {
    os << r.spec.name << ',' << x.cell << ',' << x.seed << ','
       << to_string(x.kind) << ',' << x.lasers << ',' << x.mirrors << ','
       << x.measurements << ',' << x.paths << ',' << x.dof << ','
       << x.init_noise << ',' << x.tof_noise << ',' << x.rms << ','
       << x.init_rms << ',' << (x.success ? 1 : 0) << ',' << x.status << ','
       << x.iterations << ',' << x.objective << '\n';
  }
  return os.str();
}

// Synthetic setup: any subset of the StandardSetupConfig fields, plus
// "scene" naming the base configuration (standard, curved, realtwin).

inline json to_json(const StandardSetupConfig& c) {
  return {{"grid", c.grid},
          {"lasers", c.lasers},
          {"mirrors", c.mirrors},
          {"frustum", c.frustum},
          {"wall_distance", c.wall_distance},
          {"mirror_depth_min", c.mirror_depth_min},
          {"mirror_depth_max", c.mirror_depth_max},
          {"mirror_lateral", c.mirror_lateral},
          {"laser_margin", c.laser_margin},
          {"mirror_half_extent", c.mirror_half_extent},
          {"mirror_aim", c.mirror_aim},
          {"wall", c.wall == WallShape::Cylindrical ? "cylindrical" : "planar"},
          {"cylinder_radius", c.cylinder_radius},
          {"dead_rows", c.dead_rows},
          {"dead_cols", c.dead_cols}};
}

inline StandardSetupConfig setup_config_from_json(const json& j) {
  detail::check_version(j, "setup config");
  try {
    StandardSetupConfig c =
        setup_for(parse_scene_kind(j.value("scene", std::string("standard"))));
    c.grid = j.value("grid", c.grid);
    c.lasers = j.value("lasers", c.lasers);
    c.mirrors = j.value("mirrors", c.mirrors);
    c.frustum = j.value("frustum", c.frustum);
    c.wall_distance = j.value("wall_distance", c.wall_distance);
    c.mirror_depth_min = j.value("mirror_depth_min", c.mirror_depth_min);
    c.mirror_depth_max = j.value("mirror_depth_max", c.mirror_depth_max);
    c.mirror_lateral = j.value("mirror_lateral", c.mirror_lateral);
    c.laser_margin = j.value("laser_margin", c.laser_margin);
    c.mirror_half_extent = j.value("mirror_half_extent", c.mirror_half_extent);
    c.mirror_aim = j.value("mirror_aim", c.mirror_aim);
    if (j.contains("wall")) {
      const auto w = j["wall"].get<std::string>();
      if (w == "planar") {
        c.wall = WallShape::Planar;
      } else if (w == "cylindrical") {
        c.wall = WallShape::Cylindrical;
      } else {
        throw SchemaError("setup config: unknown wall '" + w + "'");
      }
    }
    c.cylinder_radius = j.value("cylinder_radius", c.cylinder_radius);
    c.dead_rows = j.value("dead_rows", c.dead_rows);
    c.dead_cols = j.value("dead_cols", c.dead_cols);
    c.check();
    return c;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("setup config: ") + e.what());
  }
}

/// Written next to every command output.
struct RunManifest {
  std::string command;
  std::string config;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::uint64_t master_seed = 0;
  json options = json::object();
};

inline json to_json(const RunManifest& m) {
  return {{"schema_version", kSchemaVersion},
          {"command", m.command},
          {"config", m.config},
          {"inputs", m.inputs},
          {"outputs", m.outputs},
          {"master_seed", m.master_seed},
          {"options", m.options},
          {"versions", {{"nlos_calib", kVersion}, {"schema", kSchemaVersion}}}};
}

// Files

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

inline void write_json_file(const std::filesystem::path& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace nlos_calib
