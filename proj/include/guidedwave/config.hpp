#pragma once

// Run configuration: INI sections parsed into typed settings. Every section
// that a run needs must be present; numeric ranges are checked here or by the
// owning module when the stage starts.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "guidedwave/dispersion.hpp"
#include "guidedwave/error.hpp"
#include "guidedwave/field2d.hpp"
#include "guidedwave/geometry.hpp"
#include "guidedwave/io.hpp"

namespace gw::config {

struct ModeSetting {
  dispersion::ModeId id;
  double amplitude = 1.0;
};

struct ReflectorSetting {
  std::string name;
  Vec2 position;
  std::vector<double> coefficients;  // one per mode
};

struct SensorSetting {
  std::string label;
  Vec2 position;
};

struct GroupSetting {
  std::string name;
  std::vector<std::string> sensors;
};

enum class Method { one_d, two_d };

struct RunConfig {
  std::string name = "run";
  dispersion::MaterialSpec material = dispersion::MaterialSpec::aluminium();
  double ftp_min = 0.2;
  double ftp_max = 2.4;
  double ftp_step = 0.01;
  double centre_frequency = 1.0e6;  // Hz
  double cycles = 5.0;
  double sample_rate = 20.0e6;  // Hz
  std::size_t samples = 2400;
  Vec2 actuator;
  std::vector<ModeSetting> modes;
  std::optional<double> snr_db = 40.0;
  std::uint64_t seed = 0;
  Vec2 baseline_direction{-1.0, 0.0};
  double baseline_x0 = 0.0;  // mm
  double baseline_dx = 0.25;
  std::size_t baseline_count = 401;
  field2d::DictionaryParams dictionary;
  std::optional<double> prior_g;
  double prior_a0 = 0.0;
  double prior_b0 = 0.0;
  double min_contrast = 0.1;
  double min_relative_amplitude = 0.05;
  std::vector<ReflectorSetting> reflectors;
  std::vector<SensorSetting> sensors;
  Method method = Method::two_d;
  std::optional<double> speed;  // m/s override for localisation
  std::optional<std::array<double, 4>> bounds;  // xmin, ymin, xmax, ymax (mm)
  std::optional<Vec2> truth;
  std::vector<GroupSetting> groups;

  const SensorSetting& sensor(const std::string& label) const {
    for (const auto& s : sensors)
      if (s.label == label) return s;
    throw Error(ErrorKind::config, "unknown sensor " + label);
  }
  // Configured truth, else the first reflector.
  std::optional<Vec2> true_source() const {
    if (truth) return truth;
    if (!reflectors.empty()) return reflectors.front().position;
    return std::nullopt;
  }
};

namespace detail {

namespace pt = boost::property_tree;

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

class Section {
 public:
  Section(const pt::ptree& tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  std::optional<std::string> text(const std::string& key) const {
    const auto v = tree_.get_optional<std::string>(pt::ptree::path_type(key, '/'));
    if (!v) return std::nullopt;
    auto t = trim(*v);
    if (t.empty()) return std::nullopt;
    return t;
  }
  double number(const std::string& key) const {
    const auto t = text(key);
    if (!t) throw Error(ErrorKind::config, "[" + name_ + "] is missing " + key);
    return parse(key, *t);
  }
  double number(const std::string& key, double fallback) const {
    const auto t = text(key);
    return t ? parse(key, *t) : fallback;
  }
  std::optional<double> optional_number(const std::string& key) const {
    const auto t = text(key);
    if (!t || *t == "none") return std::nullopt;
    return parse(key, *t);
  }
  std::size_t count(const std::string& key, std::size_t fallback) const {
    const double v = number(key, static_cast<double>(fallback));
    if (!(v >= 0.0) || v != std::floor(v) || v > 1e9)
      throw Error(ErrorKind::config, "[" + name_ + "] " + key + " must be a non-negative integer");
    return static_cast<std::size_t>(v);
  }
  std::vector<double> numbers(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split_list(text(key).value_or(""))) out.push_back(parse(key, item));
    return out;
  }
  std::vector<std::string> list(const std::string& key) const { return split_list(text(key).value_or("")); }

  // Rejects keys outside `known`, so typos do not silently fall back to defaults.
  void only(std::initializer_list<const char*> known) const {
    for (const auto& [key, value] : tree_) {
      if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
        throw Error(ErrorKind::config, "[" + name_ + "] has unknown key " + key);
    }
  }

 private:
  double parse(const std::string& key, const std::string& t) const {
    try {
      return io::parse_double(t, "[" + name_ + "] " + key);
    } catch (const Error& e) {
      throw Error(ErrorKind::config, e.what());
    }
  }
  const pt::ptree& tree_;
  std::string name_;
};

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    std::ostringstream os;
    os << "config line " << e.line() << ": " << e.message();
    throw Error(ErrorKind::config, os.str());
  }
  static const pt::ptree empty;
  auto section = [&](const std::string& name, bool required) {
    const auto it = tree.find(name);
    if (it == tree.not_found()) {
      if (required) throw Error(ErrorKind::config, "config is missing section [" + name + "]");
      return detail::Section(empty, name);
    }
    return detail::Section(it->second, name);
  };

  static const std::set<std::string> fixed{"run",      "material", "dispersion", "actuation", "modes",
                                           "noise",    "baseline", "dictionary", "prior",     "onset",
                                           "localisation"};
  for (const auto& [name, body] : tree)
    if (!fixed.count(name) && name.rfind("reflector.", 0) != 0 && name.rfind("sensor.", 0) != 0 &&
        name.rfind("group.", 0) != 0)
      throw Error(ErrorKind::config, "unknown config section [" + name + "]");

  RunConfig c;
  {
    const auto s = section("run", false);
    s.only({"name"});
    c.name = s.text("name").value_or("run");
    if (c.name.find_first_of("/\\") != std::string::npos || c.name == "." || c.name == "..")
      throw Error(ErrorKind::config, "[run] name must be a plain directory name");
  }
  {
    const auto s = section("material", true);
    s.only({"density", "longitudinal_speed", "transverse_speed", "thickness"});
    c.material = {s.number("density"), s.number("longitudinal_speed"), s.number("transverse_speed"),
                  s.number("thickness")};
  }
  {
    const auto s = section("dispersion", false);
    s.only({"ftp_min", "ftp_max", "ftp_step"});
    c.ftp_min = s.number("ftp_min", c.ftp_min);
    c.ftp_max = s.number("ftp_max", c.ftp_max);
    c.ftp_step = s.number("ftp_step", c.ftp_step);
    if (!(c.ftp_min > 0.0 && c.ftp_max > c.ftp_min && c.ftp_step > 0.0))
      throw Error(ErrorKind::config, "[dispersion] needs 0 < ftp_min < ftp_max and ftp_step > 0");
  }
  {
    const auto s = section("actuation", true);
    s.only({"centre_frequency", "cycles", "sample_rate", "samples", "x", "y"});
    c.centre_frequency = s.number("centre_frequency");
    c.cycles = s.number("cycles");
    c.sample_rate = s.number("sample_rate");
    c.samples = s.count("samples", c.samples);
    c.actuator = {s.number("x", 0.0), s.number("y", 0.0)};
  }
  {
    const auto s = section("modes", true);
    s.only({"labels", "amplitudes"});
    const auto labels = s.list("labels");
    auto amps = s.numbers("amplitudes");
    if (labels.empty()) throw Error(ErrorKind::config, "[modes] labels is empty");
    if (amps.empty()) amps.assign(labels.size(), 1.0);
    if (amps.size() != labels.size()) throw Error(ErrorKind::config, "[modes] needs one amplitude per label");
    for (std::size_t g = 0; g < labels.size(); ++g) c.modes.push_back({dispersion::ModeId::parse(labels[g]), amps[g]});
  }
  {
    const auto s = section("noise", false);
    s.only({"snr_db", "seed"});
    c.snr_db = s.text("snr_db") ? s.optional_number("snr_db") : c.snr_db;
    c.seed = s.count("seed", 0);
  }
  {
    const auto s = section("baseline", true);
    s.only({"direction_x", "direction_y", "x0", "dx", "count"});
    c.baseline_direction = {s.number("direction_x", -1.0), s.number("direction_y", 0.0)};
    c.baseline_x0 = s.number("x0", 0.0);
    c.baseline_dx = s.number("dx");
    c.baseline_count = s.count("count", 0);
    if (!(norm(c.baseline_direction) > 0.0)) throw Error(ErrorKind::config, "[baseline] direction is zero");
    if (!(c.baseline_dx > 0.0) || c.baseline_count < 8)
      throw Error(ErrorKind::config, "[baseline] needs dx > 0 and at least 8 points");
  }
  {
    const auto s = section("dictionary", false);
    s.only({"d_omega", "d_k", "a", "b", "window"});
    auto& d = c.dictionary;
    d.d_omega = static_cast<int>(s.count("d_omega", static_cast<std::size_t>(d.d_omega)));
    d.d_k = static_cast<int>(s.count("d_k", static_cast<std::size_t>(d.d_k)));
    d.a = static_cast<int>(s.count("a", static_cast<std::size_t>(d.a)));
    d.b = static_cast<int>(s.count("b", static_cast<std::size_t>(d.b)));
    d.window = static_cast<int>(s.count("window", static_cast<std::size_t>(d.window)));
    if (d.window < 1) throw Error(ErrorKind::config, "[dictionary] window must be at least 1");
  }
  {
    const auto s = section("prior", false);
    s.only({"g", "a0", "b0"});
    c.prior_g = s.optional_number("g");
    c.prior_a0 = s.number("a0", 0.0);
    c.prior_b0 = s.number("b0", 0.0);
    if (c.prior_g && !(*c.prior_g > 0.0)) throw Error(ErrorKind::config, "[prior] g must be positive");
  }
  {
    const auto s = section("onset", false);
    s.only({"min_contrast", "min_relative_amplitude"});
    c.min_contrast = s.number("min_contrast", c.min_contrast);
    c.min_relative_amplitude = s.number("min_relative_amplitude", c.min_relative_amplitude);
    if (!(c.min_contrast >= 0.0) || !(c.min_relative_amplitude >= 0.0))
      throw Error(ErrorKind::config, "[onset] thresholds must be non-negative");
  }
  {
    const auto s = section("localisation", false);
    s.only({"method", "speed", "bounds", "truth_x", "truth_y"});
    const auto m = s.text("method").value_or("2d");
    if (m == "1d") {
      c.method = Method::one_d;
    } else if (m == "2d") {
      c.method = Method::two_d;
    } else {
      throw Error(ErrorKind::config, "[localisation] method must be 1d or 2d");
    }
    c.speed = s.optional_number("speed");
    if (c.speed && !(*c.speed > 0.0)) throw Error(ErrorKind::config, "[localisation] speed must be positive");
    const auto b = s.numbers("bounds");
    if (!b.empty()) {
      if (b.size() != 4 || !(b[0] < b[2] && b[1] < b[3]))
        throw Error(ErrorKind::config, "[localisation] bounds must be xmin, ymin, xmax, ymax");
      c.bounds = std::array<double, 4>{b[0], b[1], b[2], b[3]};
    }
    const auto tx = s.optional_number("truth_x");
    const auto ty = s.optional_number("truth_y");
    if (tx.has_value() != ty.has_value()) throw Error(ErrorKind::config, "[localisation] needs both truth_x and truth_y");
    if (tx) c.truth = Vec2{*tx, *ty};
  }

  std::set<std::string> labels;
  for (const auto& [name, body] : tree) {
    if (name.rfind("reflector.", 0) == 0) {
      const detail::Section s(body, name);
      s.only({"x", "y", "coefficients"});
      ReflectorSetting r{name.substr(10), {s.number("x"), s.number("y")}, s.numbers("coefficients")};
      if (r.coefficients.size() != c.modes.size())
        throw Error(ErrorKind::config, "[" + name + "] needs one coefficient per mode");
      c.reflectors.push_back(std::move(r));
    } else if (name.rfind("sensor.", 0) == 0) {
      const detail::Section s(body, name);
      s.only({"x", "y"});
      SensorSetting sensor{name.substr(7), {s.number("x"), s.number("y")}};
      if (sensor.label.empty() || !labels.insert(sensor.label).second)
        throw Error(ErrorKind::config, "sensor label '" + sensor.label + "' is empty or repeated");
      c.sensors.push_back(std::move(sensor));
    }
  }
  for (const auto& [name, body] : tree) {
    if (name.rfind("group.", 0) != 0) continue;
    const detail::Section s(body, name);
    s.only({"sensors"});
    GroupSetting g{name.substr(6), s.list("sensors")};
    for (const auto& l : g.sensors)
      if (!labels.count(l)) throw Error(ErrorKind::config, "[" + name + "] names unknown sensor " + l);
    if (c.method == Method::two_d && g.sensors.size() < 3)
      throw Error(ErrorKind::config, "[" + name + "] needs at least 3 sensors");
    c.groups.push_back(std::move(g));
  }
  if (c.sensors.empty()) throw Error(ErrorKind::config, "config has no [sensor.*] sections");
  if (c.method == Method::two_d && c.groups.empty()) {
    if (c.sensors.size() < 3) throw Error(ErrorKind::config, "2-D localisation needs at least 3 sensors");
    GroupSetting all{"all", {}};
    for (const auto& s : c.sensors) all.sensors.push_back(s.label);
    c.groups.push_back(std::move(all));
  }
  try {
    c.material.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::config, e.what());
  }
  if (!(c.sample_rate > 2.0 * c.centre_frequency) || !(c.cycles >= 1.0) || c.samples < 16)
    throw Error(ErrorKind::config, "[actuation] needs sample_rate > 2 centre_frequency, cycles >= 1, samples >= 16");
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  try {
    return parse_config(io::read_file(path));
  } catch (const Error& e) {
    throw Error(ErrorKind::config, path.string() + ": " + e.what());
  }
}

}  // namespace gw::config
