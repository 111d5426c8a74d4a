#pragma once

// End-to-end run: dispersion -> baseline synth -> dictionary -> damaged synth
// -> per-sensor decomposition and onsets -> localisation. Every stage writes
// its artifacts under the run directory, and the analysis stages read the
// signals and dictionary back from disk so that a rerun from cached artifacts
// gives identical results.

#include <filesystem>
#include <future>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "guidedwave/blr.hpp"
#include "guidedwave/config.hpp"
#include "guidedwave/dispersion.hpp"
#include "guidedwave/error.hpp"
#include "guidedwave/field2d.hpp"
#include "guidedwave/io.hpp"
#include "guidedwave/onset.hpp"
#include "guidedwave/triangulate.hpp"
#include "guidedwave/wavesynth.hpp"

namespace gw::pipeline {

namespace fs = std::filesystem;

// Ordered key = value lines. Numbers use the shortest round-trip form, so
// equal runs produce equal bytes.
class Summary {
 public:
  void set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : lines_)
      if (k == key) {
        v = value;
        return;
      }
    lines_.emplace_back(key, value);
  }
  void set(const std::string& key, double value) { set(key, io::format_double(value)); }
  void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }
  void set(const std::string& key, std::size_t value) { set(key, std::to_string(value)); }

  std::optional<std::string> get(const std::string& key) const {
    for (const auto& [k, v] : lines_)
      if (k == key) return v;
    return std::nullopt;
  }
  double number(const std::string& key) const {
    const auto v = get(key);
    if (!v) throw Error(ErrorKind::io, "summary has no " + key);
    return io::parse_double(*v, "summary " + key);
  }
  std::string text() const {
    std::string out;
    for (const auto& [k, v] : lines_) out += k + " = " + v + "\n";
    return out;
  }
  static Summary parse(std::string_view text) {
    Summary s;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
      const auto eq = line.find(" = ");
      if (eq == std::string::npos) throw Error(ErrorKind::io, "summary line without ' = ': " + line);
      s.lines_.emplace_back(line.substr(0, eq), line.substr(eq + 3));
    }
    return s;
  }

 private:
  std::vector<std::pair<std::string, std::string>> lines_;
};

// Run directory plus the list of artifacts written so far (relative paths).
class RunDir {
 public:
  explicit RunDir(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

  const fs::path& root() const { return root_; }
  fs::path path(const std::string& rel) const { return root_ / rel; }
  void wrote(const std::string& rel) { done_.push_back(rel); }
  const std::vector<std::string>& artifacts() const { return done_; }

 private:
  fs::path root_;
  std::vector<std::string> done_;
};

// Runs f; an Error is rethrown with the stage name and the completed artifacts.
template <typename F>
auto stage(const char* name, const RunDir* dir, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    std::string msg = std::string("stage ") + name + " failed: " + e.what();
    if (dir) {
      msg += " [completed artifacts:";
      for (const auto& a : dir->artifacts()) msg += " " + (dir->root() / a).string();
      if (dir->artifacts().empty()) msg += " none";
      msg += "]";
    }
    throw Error(e.kind(), msg);
  }
}

// Directory for a run: explicit, else $GWTOOL_RUN_ROOT/<name>, else runs/<name>.
inline fs::path run_directory(const config::RunConfig& cfg, const std::optional<fs::path>& explicit_dir = {}) {
  if (explicit_dir) return *explicit_dir;
  const char* root = std::getenv("GWTOOL_RUN_ROOT");
  return fs::path(root && *root ? root : "runs") / cfg.name;
}

// ---------------------------------------------------------------------------
// Stages.

inline std::vector<dispersion::DispersionCurve> trace_curves(const config::RunConfig& cfg) {
  std::vector<dispersion::DispersionCurve> out;
  for (const auto& m : cfg.modes) out.push_back(dispersion::trace_mode(cfg.material, m.id, cfg.ftp_min, cfg.ftp_max, cfg.ftp_step));
  return out;
}

inline std::string curves_csv(const std::vector<dispersion::DispersionCurve>& curves) {
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;
  for (const auto& c : curves) {
    const auto l = c.mode.label();
    std::vector<double> ftp, f, cp, k, cg;
    for (const auto& s : c.samples) {
      ftp.push_back(s.ftp);
      f.push_back(s.frequency());
      cp.push_back(s.phase_velocity);
      k.push_back(s.wavenumber);
      cg.push_back(s.group_velocity);
    }
    for (auto&& [n, v] : {std::pair{"ftp_MHzmm", ftp}, std::pair{"frequency_Hz", f}, std::pair{"phase_velocity_mps", cp},
                          std::pair{"wavenumber_radpm", k}, std::pair{"group_velocity_mps", cg}}) {
      names.push_back(l + "_" + n);
      cols.push_back(v);
    }
  }
  // Pad to equal length; modes with a cut-off have fewer samples.
  std::size_t rows = 0;
  for (const auto& c : cols) rows = std::max(rows, c.size());
  for (auto& c : cols) c.resize(rows, std::numeric_limits<double>::quiet_NaN());
  return io::encode_columns_csv(names, cols);
}

inline wavesynth::Scene make_scene(const config::RunConfig& cfg, const std::vector<dispersion::DispersionCurve>& curves,
                                   bool damaged) {
  wavesynth::Scene scene;
  scene.actuator = cfg.actuator;
  for (std::size_t g = 0; g < cfg.modes.size(); ++g) scene.modes.push_back({curves[g], cfg.modes[g].amplitude});
  if (damaged)
    for (const auto& r : cfg.reflectors) scene.reflectors.push_back({r.position, r.coefficients});
  scene.centre_frequency = cfg.centre_frequency;
  scene.cycles = cfg.cycles;
  scene.snr_db = cfg.snr_db;
  scene.seed = cfg.seed;
  return scene;
}

inline wavesynth::TimeGrid time_grid(const config::RunConfig& cfg) { return {cfg.sample_rate, cfg.samples}; }

inline double burst_duration(const config::RunConfig& cfg) { return cfg.cycles / cfg.centre_frequency; }

// Undamaged field along the baseline line, noise free.
inline WaveField synth_baseline(const config::RunConfig& cfg, const std::vector<dispersion::DispersionCurve>& curves) {
  auto scene = make_scene(cfg, curves, false);
  scene.snr_db.reset();
  return wavesynth::synth_field(scene, {cfg.actuator, cfg.baseline_direction, cfg.baseline_x0, cfg.baseline_dx, cfg.baseline_count},
                                time_grid(cfg));
}

inline std::vector<field2d::ModeSeed> mode_seeds(const config::RunConfig& cfg,
                                                 const std::vector<dispersion::DispersionCurve>& curves) {
  std::vector<field2d::ModeSeed> seeds;
  for (const auto& c : curves) seeds.push_back({c.mode.label(), cfg.centre_frequency, c.wavenumber_at(cfg.centre_frequency)});
  return seeds;
}

// Index of the mode with the lowest group velocity at the centre frequency.
inline std::size_t slowest_mode(const config::RunConfig& cfg, const std::vector<dispersion::DispersionCurve>& curves) {
  std::size_t slow = 0;
  for (std::size_t g = 1; g < curves.size(); ++g)
    if (curves[g].group_velocity_at(cfg.centre_frequency) < curves[slow].group_velocity_at(cfg.centre_frequency)) slow = g;
  return slow;
}

// Localisation speed: configured override, else A0 group velocity at the
// actuation frequency, else the slowest configured mode.
inline double localisation_speed(const config::RunConfig& cfg, const std::vector<dispersion::DispersionCurve>& curves) {
  if (cfg.speed) return *cfg.speed;
  for (const auto& c : curves)
    if (c.mode == dispersion::ModeId{dispersion::Family::antisymmetric, 0}) return c.group_velocity_at(cfg.centre_frequency);
  return curves[slowest_mode(cfg, curves)].group_velocity_at(cfg.centre_frequency);
}

struct SensorInput {
  std::string label;
  Vec2 position;
  double distance = 0.0;  // mm from the actuator
  Eigen::VectorXd signal;
  double dt = 0.0;
  double t0 = 0.0;
};

struct SensorAnalysis {
  SensorInput input;
  blr::DecompositionResult decomposition;
  std::vector<double> residual;
  std::vector<double> incident_signal;  // measured minus every nominal mode but the slowest
  onset::OnsetReport onsets;
};

// Weight times the range-normalised dictionary column of mode g.
inline Eigen::VectorXd mode_component(const field2d::NominalWaveDictionary& dict, const blr::DecompositionResult& r,
                                      std::size_t g) {
  const Eigen::VectorXd phi = dict.signals[g].col(static_cast<Eigen::Index>(r.column));
  return r.weights[static_cast<Eigen::Index>(g)] * phi / blr::range_of(phi);
}

enum class Until { decompose, onset, localise };

inline SensorAnalysis analyse_sensor(const config::RunConfig& cfg, const SensorInput& in,
                                     const field2d::NominalWaveDictionary& dict, std::size_t slow, double slow_speed,
                                     Until until) {
  SensorAnalysis a;
  a.input = in;
  a.decomposition = stage("decompose", nullptr, [&] {
    return blr::decompose_signal(in.signal, in.distance, dict, {cfg.prior_g, cfg.prior_a0, cfg.prior_b0});
  });
  const std::span<const double> y(in.signal.data(), static_cast<std::size_t>(in.signal.size()));
  a.residual = onset::residual(y, {a.decomposition.predicted.data(), y.size()});
  Eigen::VectorXd incident = in.signal;
  for (std::size_t g = 0; g < dict.modes.size(); ++g)
    if (g != slow) incident -= mode_component(dict, a.decomposition, g);
  a.incident_signal.assign(incident.data(), incident.data() + incident.size());
  if (until == Until::decompose) return a;
  a.onsets = stage("onset", nullptr, [&] {
    return onset::detect_onsets(a.incident_signal, a.residual, in.dt, in.t0, in.t0 + in.distance * 1e-3 / slow_speed,
                                burst_duration(cfg), {cfg.min_contrast, cfg.min_relative_amplitude});
  });
  return a;
}

inline std::string sensor_csv(const SensorAnalysis& a) {
  const auto n = static_cast<std::size_t>(a.input.signal.size());
  std::vector<double> t(n), y(n), p(n), v(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = a.input.t0 + static_cast<double>(i) * a.input.dt;
    y[i] = a.input.signal[static_cast<Eigen::Index>(i)];
    p[i] = a.decomposition.predicted[static_cast<Eigen::Index>(i)];
    v[i] = a.decomposition.variance[static_cast<Eigen::Index>(i)];
  }
  return io::encode_columns_csv({"time_s", "measured", "predicted", "variance", "residual", "incident"},
                                {t, y, p, v, a.residual, a.incident_signal});
}

inline std::string aic_csv(const onset::Pick& p, double dt, double t0) {
  std::vector<double> t, aic;
  for (std::size_t i = 0; i < p.aic.size(); ++i) {
    t.push_back(t0 + static_cast<double>(p.window.begin + i) * dt);
    aic.push_back(p.aic[i]);
  }
  return io::encode_columns_csv({"time_s", "aic"}, {t, aic});
}

// Per-sensor stages run concurrently; results keep the input order.
inline std::vector<SensorAnalysis> analyse_sensors(const config::RunConfig& cfg, const std::vector<SensorInput>& inputs,
                                                   const field2d::NominalWaveDictionary& dict, std::size_t slow,
                                                   double slow_speed, Until until) {
  std::vector<std::future<SensorAnalysis>> jobs;
  for (const auto& in : inputs)
    jobs.push_back(std::async(std::launch::async, [&, in] { return analyse_sensor(cfg, in, dict, slow, slow_speed, until); }));
  std::vector<SensorAnalysis> out;
  std::optional<Error> first;
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    try {
      out.push_back(jobs[k].get());
    } catch (const Error& e) {
      if (!first) first = Error(e.kind(), "sensor " + inputs[k].label + ": " + e.what());
    }
  }
  if (first) throw *first;
  return out;
}

// Loads sensor signals listed in a manifest.
inline std::vector<SensorInput> load_sensors(const fs::path& manifest_path, const io::SensorManifest& manifest) {
  std::vector<SensorInput> out;
  for (const auto& s : manifest.sensors) {
    const auto f = io::read_field(io::signal_path(manifest_path, s));
    if (f.columns() != 1) throw Error(ErrorKind::io, "signal for sensor " + s.label + " must have one column");
    out.push_back({s.label, s.position, s.distance, f.data.col(0), f.dt, f.t0});
  }
  return out;
}

// Decomposition, onsets and localisation (up to `until`) from the manifest and
// dictionary in the run directory; adds per-sensor and localisation entries
// to the summary.
inline void analyse(const config::RunConfig& cfg, RunDir& dir, Summary& summary, Until until) {
  const auto manifest_path = dir.path("sensors.ini");
  const auto curves = stage("dispersion", &dir, [&] { return trace_curves(cfg); });
  const auto manifest = stage("load", &dir, [&] { return io::read_manifest(manifest_path); });
  const auto dict = stage("load", &dir, [&] { return io::read_dictionary(dir.path("dictionary.gwd")); });
  const auto inputs = stage("load", &dir, [&] { return load_sensors(manifest_path, manifest); });
  const auto slow = slowest_mode(cfg, curves);
  const double slow_speed = curves[slow].group_velocity_at(cfg.centre_frequency);
  const double speed = localisation_speed(cfg, curves);
  summary.set("localisation.speed_mps", speed);

  const auto results =
      stage("decompose", &dir, [&] { return analyse_sensors(cfg, inputs, dict, slow, slow_speed, until); });
  std::map<std::string, const SensorAnalysis*> by_label;
  std::size_t usable = 0;
  for (const auto& a : results) {
    by_label[a.input.label] = &a;
    const std::string key = "sensor." + a.input.label;
    const std::string rel = "sensors/" + a.input.label;
    stage("decompose", &dir, [&] { io::write_file(dir.path(rel + ".csv"), sensor_csv(a)); return 0; });
    dir.wrote(rel + ".csv");
    summary.set(key + ".distance_mm", a.input.distance);
    summary.set(key + ".dictionary_distance_mm", a.decomposition.distance_used);
    for (std::size_t g = 0; g < a.decomposition.modes.size(); ++g)
      summary.set(key + ".weight_" + a.decomposition.modes[g], a.decomposition.weights[static_cast<Eigen::Index>(g)]);
    summary.set(key + ".sigma2", a.decomposition.noise_variance);
    summary.set(key + ".pll", a.decomposition.pll);
    if (until == Until::decompose) continue;
    stage("onset", &dir, [&] {
      io::write_file(dir.path(rel + "_aic.csv"), aic_csv(a.onsets.reflection, a.input.dt, a.input.t0));
      return 0;
    });
    dir.wrote(rel + "_aic.csv");
    summary.set(key + ".t_incident_s", a.onsets.incident_time());
    summary.set(key + ".t_reflection_s", a.onsets.reflection_time());
    summary.set(key + ".reflection_contrast", a.onsets.reflection.contrast);
    summary.set(key + ".reflection_relative_amplitude", a.onsets.relative_amplitude);
    summary.set(key + ".reflection_low_confidence", a.onsets.reflection.low_confidence);
    usable += !a.onsets.reflection.low_confidence;
  }
  if (until != Until::localise) return;
  if (usable == 0) {
    summary.set("localisation.status", std::string("aborted"));
    throw Error(ErrorKind::localisation,
                "stage localise aborted: every reflection onset is low confidence (no damage detected)");
  }

  const auto truth = cfg.true_source();
  if (cfg.method == config::Method::one_d) {
    for (const auto& a : results) {
      const std::string key = "sensor." + a.input.label;
      if (a.onsets.reflection.low_confidence) continue;
      const double d = stage("localise", &dir, [&] {
        return triangulate::localise_1d(a.onsets.reflection_time(), a.onsets.incident_time(), speed);
      });
      summary.set(key + ".reflector_distance_mm", d);
      if (truth) {
        const double expect = distance(a.input.position, *truth);
        summary.set(key + ".true_distance_mm", expect);
        summary.set(key + ".error_1d_mm", std::abs(d - expect));
      }
    }
  } else {
    triangulate::LocaliseOptions opt;
    opt.actuator = cfg.actuator;
    if (cfg.bounds) opt.bounds = triangulate::Bounds{{(*cfg.bounds)[0], (*cfg.bounds)[1]}, {(*cfg.bounds)[2], (*cfg.bounds)[3]}};
    for (const auto& g : cfg.groups) {
      const std::string key = "group." + g.name;
      std::string names;
      std::vector<triangulate::SensorRecord> records;
      std::string skipped;
      for (const auto& l : g.sensors) {
        names += (names.empty() ? "" : ",") + l;
        const auto it = by_label.find(l);
        if (it == by_label.end()) throw Error(ErrorKind::localisation, key + " names sensor " + l + " with no signal");
        const auto& a = *it->second;
        if (a.onsets.reflection.low_confidence) skipped += (skipped.empty() ? "" : ",") + l;
        records.push_back({l, a.input.position, a.input.distance, a.onsets.incident_time(), a.onsets.reflection_time(),
                           a.decomposition.noise_variance});
      }
      summary.set(key + ".sensors", names);
      if (!skipped.empty()) {
        summary.set(key + ".status", "skipped: low-confidence onset at " + skipped);
        continue;
      }
      const auto est = stage("localise", &dir, [&] { return triangulate::localise_2d(records, speed, opt); });
      summary.set(key + ".status", std::string(est.converged ? "converged" : "not converged"));
      summary.set(key + ".x_mm", est.estimate.x);
      summary.set(key + ".y_mm", est.estimate.y);
      summary.set(key + ".cost_us2", est.cost);
      summary.set(key + ".iterations", static_cast<std::size_t>(est.iterations));
      summary.set(key + ".ambiguous", est.ambiguous);
      summary.set(key + ".ill_conditioned", est.ill_conditioned);
      if (truth) summary.set(key + ".error_mm", distance(est.estimate, *truth));
    }
  }
  summary.set("localisation.status", std::string("done"));
}

// Individual stages. Each reads what it needs from the run directory, so any
// of them can be rerun on its own from cached upstream artifacts.

inline std::vector<dispersion::DispersionCurve> dispersion_stage(const config::RunConfig& cfg, RunDir& dir,
                                                                 Summary& summary) {
  const auto curves = stage("dispersion", &dir, [&] { return trace_curves(cfg); });
  stage("dispersion", &dir, [&] { io::write_file(dir.path("dispersion.csv"), curves_csv(curves)); return 0; });
  dir.wrote("dispersion.csv");
  for (const auto& c : curves)
    summary.set("dispersion." + c.mode.label() + ".group_velocity_mps", c.group_velocity_at(cfg.centre_frequency));
  return curves;
}

// Noise-free baseline field, damaged sensor signals and the sensor manifest.
inline void synth_stage(const config::RunConfig& cfg, RunDir& dir, Summary& summary) {
  const auto curves = dispersion_stage(cfg, dir, summary);
  const auto baseline = stage("synth", &dir, [&] { return synth_baseline(cfg, curves); });
  stage("synth", &dir, [&] { io::write_field(dir.path("baseline.gwf"), baseline); return 0; });
  dir.wrote("baseline.gwf");

  std::vector<Vec2> points;
  for (const auto& s : cfg.sensors) points.push_back(s.position);
  const auto signals = stage("synth", &dir, [&] {
    return wavesynth::synth_signals(make_scene(cfg, curves, true), points, time_grid(cfg));
  });
  io::SensorManifest manifest;
  manifest.material = cfg.material;
  manifest.centre_frequency = cfg.centre_frequency;
  manifest.cycles = cfg.cycles;
  manifest.sample_rate = cfg.sample_rate;
  manifest.actuator = cfg.actuator;
  stage("synth", &dir, [&] {
    for (std::size_t k = 0; k < cfg.sensors.size(); ++k) {
      const auto& s = cfg.sensors[k];
      const double d = distance(cfg.actuator, s.position);
      const std::string rel = "signals/" + s.label + ".gwf";
      io::write_field(dir.path(rel),
                      io::signal_field(signals.col(static_cast<Eigen::Index>(k)), 1.0 / cfg.sample_rate, 0.0, d));
      dir.wrote(rel);
      manifest.sensors.push_back({s.label, s.position, rel, d});
    }
    io::write_manifest(dir.path("sensors.ini"), manifest);
    return 0;
  });
  dir.wrote("sensors.ini");
}

inline void dictionary_stage(const config::RunConfig& cfg, RunDir& dir, Summary& summary) {
  const auto curves = stage("dispersion", &dir, [&] { return trace_curves(cfg); });
  const auto baseline = stage("load", &dir, [&] { return io::read_field(dir.path("baseline.gwf")); });
  const auto seeds = mode_seeds(cfg, curves);
  const auto dict = stage("dictionary", &dir, [&] { return field2d::build_dictionary(baseline, seeds, cfg.dictionary); });
  stage("dictionary", &dir, [&] { io::write_dictionary(dir.path("dictionary.gwd"), dict); return 0; });
  dir.wrote("dictionary.gwd");
  summary.set("dictionary.columns", dict.distances.size());
  summary.set("dictionary.first_mm", dict.distances.front());
  summary.set("dictionary.last_mm", dict.distances.back());
}

inline void write_summary(RunDir& dir, const Summary& summary, const std::string& name = "summary.txt") {
  io::write_file(dir.path(name), summary.text());
  dir.wrote(name);
}

inline Summary run_header(const config::RunConfig& cfg) {
  Summary summary;
  summary.set("run.name", cfg.name);
  summary.set("run.sensors", cfg.sensors.size());
  summary.set("run.reflectors", cfg.reflectors.size());
  return summary;
}

// The whole chain. The summary is written even when a later stage fails.
inline Summary run_pipeline(const config::RunConfig& cfg, const fs::path& run_dir) {
  RunDir dir(run_dir);
  Summary summary = run_header(cfg);
  try {
    synth_stage(cfg, dir, summary);
    dictionary_stage(cfg, dir, summary);
    analyse(cfg, dir, summary, Until::localise);
  } catch (const Error&) {
    write_summary(dir, summary);
    throw;
  }
  write_summary(dir, summary);
  return summary;
}

}  // namespace gw::pipeline
