#pragma once

// File formats: GWF1 wavefields, GWD1 dictionaries, INI sensor manifests and
// CSV exports. Binary formats are little-endian with no padding.
//
// GWF1: "GWF1" | u64 rows M | u64 cols N | f64 dt, dx, t0, x0 | M*N f64,
//       column by column (time fastest).
// GWD1: "GWD1" | u64 mode count G | G x (u64 label length | label bytes |
//       GWF1 block without magic) | u64 N | N f64 distances | N f64 PTP.

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "guidedwave/dispersion.hpp"
#include "guidedwave/error.hpp"
#include "guidedwave/field2d.hpp"
#include "guidedwave/geometry.hpp"
#include "guidedwave/wavefield.hpp"

namespace gw::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

inline constexpr std::string_view kFieldMagic = "GWF1";
inline constexpr std::string_view kDictionaryMagic = "GWD1";
inline constexpr std::size_t kFieldHeaderBytes = 2 * 8 + 4 * 8;

// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s, const std::string& what) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw Error(ErrorKind::io, what + ": '" + std::string(s) + "' is not a number");
  return v;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

namespace detail {

class Writer {
 public:
  void bytes(std::string_view s) { out_.append(s); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void f64(double v) { raw(&v, 8); }
  void f64s(const double* p, std::size_t n) { raw(p, 8 * n); }
  std::string take() { return std::move(out_); }

 private:
  void raw(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  void need(std::size_t n, const std::string& what) const {
    if (remaining() < n) {
      std::ostringstream os;
      os << "truncated " << what << " at offset " << pos_ << " (need " << n << " bytes, " << remaining()
         << " left)";
      throw Error(ErrorKind::io, os.str());
    }
  }
  std::string_view bytes(std::size_t n, const std::string& what) {
    need(n, what);
    const auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint64_t u64(const std::string& what) {
    std::uint64_t v = 0;
    std::memcpy(&v, bytes(8, what).data(), 8);
    return v;
  }
  double f64(const std::string& what) {
    double v = 0.0;
    std::memcpy(&v, bytes(8, what).data(), 8);
    return v;
  }
  void f64s(double* p, std::size_t n, const std::string& what) {
    if (n > remaining() / 8) need(8 * n, what);
    std::memcpy(p, bytes(8 * n, what).data(), 8 * n);
  }
  void magic(std::string_view expected) {
    const auto at = pos_;
    const auto got = bytes(expected.size(), "magic");
    if (got != expected) {
      std::ostringstream os;
      os << "bad magic at offset " << at << ": expected " << expected;
      throw Error(ErrorKind::io, os.str());
    }
  }
  void end() const {
    if (remaining() != 0) {
      std::ostringstream os;
      os << "unexpected " << remaining() << " trailing bytes at offset " << pos_;
      throw Error(ErrorKind::io, os.str());
    }
  }
  [[noreturn]] void fail(std::size_t at, const std::string& msg) const {
    std::ostringstream os;
    os << msg << " at offset " << at;
    throw Error(ErrorKind::io, os.str());
  }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

struct BlockHeader {
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  double dt = 0.0;
  double dx = 0.0;
  double t0 = 0.0;
  double x0 = 0.0;
};

inline void put_header(Writer& w, const BlockHeader& h) {
  w.u64(h.rows);
  w.u64(h.cols);
  w.f64(h.dt);
  w.f64(h.dx);
  w.f64(h.t0);
  w.f64(h.x0);
}

// dx may be zero only for a single-column block.
inline BlockHeader get_header(Reader& r) {
  BlockHeader h;
  const auto at = r.offset();
  h.rows = r.u64("header");
  h.cols = r.u64("header");
  const auto at_dt = r.offset();
  h.dt = r.f64("header");
  h.dx = r.f64("header");
  h.t0 = r.f64("header");
  h.x0 = r.f64("header");
  if (h.rows == 0 || h.cols == 0) r.fail(at, "empty block dimensions");
  if (h.rows > (std::uint64_t{1} << 40) / h.cols) r.fail(at, "block dimensions overflow");
  if (!std::isfinite(h.dt) || !(h.dt > 0.0)) r.fail(at_dt, "dt must be finite and positive");
  if (!std::isfinite(h.dx) || h.dx < 0.0 || (h.dx == 0.0 && h.cols > 1))
    r.fail(at_dt + 8, "dx must be finite and positive");
  if (!std::isfinite(h.t0)) r.fail(at_dt + 16, "t0 must be finite");
  if (!std::isfinite(h.x0)) r.fail(at_dt + 24, "x0 must be finite");
  return h;
}

inline Eigen::MatrixXd get_payload(Reader& r, const BlockHeader& h) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(h.rows), static_cast<Eigen::Index>(h.cols));
  r.f64s(m.data(), m.size(), "payload");
  return m;
}

}  // namespace detail

// The field's ptp vector is not part of GWF1.
inline std::string encode_field(const WaveField& f) {
  if (f.data.size() == 0) throw Error(ErrorKind::io, "cannot encode an empty wavefield");
  detail::Writer w;
  w.bytes(kFieldMagic);
  detail::put_header(w, {static_cast<std::uint64_t>(f.data.rows()), static_cast<std::uint64_t>(f.data.cols()), f.dt,
                         f.dx, f.t0, f.x0});
  w.f64s(f.data.data(), static_cast<std::size_t>(f.data.size()));
  return w.take();
}

inline WaveField decode_field(std::string_view bytes) {
  detail::Reader r(bytes);
  r.magic(kFieldMagic);
  const auto h = detail::get_header(r);
  WaveField f;
  f.data = detail::get_payload(r, h);
  f.dt = h.dt;
  f.dx = h.dx;
  f.t0 = h.t0;
  f.x0 = h.x0;
  r.end();
  return f;
}

inline void write_field(const std::filesystem::path& path, const WaveField& f) { write_file(path, encode_field(f)); }

inline WaveField read_field(const std::filesystem::path& path) {
  try {
    return decode_field(read_file(path));
  } catch (const Error& e) {
    throw Error(ErrorKind::io, path.string() + ": " + e.what());
  }
}

// A single sensor signal as a one-column field at the given distance.
inline WaveField signal_field(const Eigen::VectorXd& y, double dt, double t0, double distance_mm) {
  WaveField f;
  f.data = y;
  f.dt = dt;
  f.dx = 0.0;
  f.t0 = t0;
  f.x0 = distance_mm;
  return f;
}

inline std::string encode_dictionary(const field2d::NominalWaveDictionary& d) {
  d.validate();
  const auto n = d.distances.size();
  const double dx = n > 1 ? d.distances[1] - d.distances[0] : 0.0;
  detail::Writer w;
  w.bytes(kDictionaryMagic);
  w.u64(d.modes.size());
  for (std::size_t g = 0; g < d.modes.size(); ++g) {
    w.u64(d.modes[g].size());
    w.bytes(d.modes[g]);
    detail::put_header(w, {static_cast<std::uint64_t>(d.samples()), n, d.dt, dx, d.t0, d.distances.front()});
    w.f64s(d.signals[g].data(), static_cast<std::size_t>(d.signals[g].size()));
  }
  w.u64(n);
  w.f64s(d.distances.data(), n);
  w.f64s(d.ptp.data(), n);
  return w.take();
}

inline field2d::NominalWaveDictionary decode_dictionary(std::string_view bytes) {
  detail::Reader r(bytes);
  r.magic(kDictionaryMagic);
  const auto at_count = r.offset();
  const auto count = r.u64("mode count");
  if (count == 0 || count > 64) r.fail(at_count, "mode count must be in [1, 64]");
  field2d::NominalWaveDictionary d;
  detail::BlockHeader first;
  for (std::uint64_t g = 0; g < count; ++g) {
    const auto at_label = r.offset();
    const auto len = r.u64("label length");
    if (len == 0 || len > 256) r.fail(at_label, "label length must be in [1, 256]");
    d.modes.emplace_back(r.bytes(len, "label"));
    const auto at_header = r.offset();
    const auto h = detail::get_header(r);
    if (g == 0) {
      first = h;
    } else if (h.rows != first.rows || h.cols != first.cols || h.dt != first.dt || h.dx != first.dx ||
               h.t0 != first.t0 || h.x0 != first.x0) {
      r.fail(at_header, "mode block " + d.modes.back() + " header differs from the first block");
    }
    d.signals.push_back(detail::get_payload(r, h));
  }
  const auto at_n = r.offset();
  const auto n = r.u64("distance count");
  if (n != first.cols) r.fail(at_n, "distance axis length differs from the block column count");
  d.distances.resize(n);
  r.f64s(d.distances.data(), n, "distance axis");
  d.ptp.resize(n);
  r.f64s(d.ptp.data(), n, "PTP vector");
  r.end();
  d.dt = first.dt;
  d.t0 = first.t0;
  if (d.distances.front() != first.x0 || (n > 1 && d.distances[1] - d.distances[0] != first.dx))
    r.fail(at_n, "distance axis disagrees with the block header");
  try {
    d.validate();
  } catch (const Error& e) {
    r.fail(at_n, e.what());
  }
  return d;
}

inline void write_dictionary(const std::filesystem::path& path, const field2d::NominalWaveDictionary& d) {
  write_file(path, encode_dictionary(d));
}

inline field2d::NominalWaveDictionary read_dictionary(const std::filesystem::path& path) {
  try {
    return decode_dictionary(read_file(path));
  } catch (const Error& e) {
    throw Error(ErrorKind::io, path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Sensor manifest (INI).

struct ManifestSensor {
  std::string label;
  Vec2 position;       // mm
  std::string signal;  // path, relative to the manifest directory unless absolute
  double distance = 0.0;  // mm from the actuator
};

struct SensorManifest {
  dispersion::MaterialSpec material = dispersion::MaterialSpec::aluminium();
  double centre_frequency = 1.0e6;  // Hz
  double cycles = 5.0;
  double sample_rate = 20.0e6;  // Hz
  Vec2 actuator;
  std::vector<ManifestSensor> sensors;
};

namespace detail {

// Byte offset of the start of 1-based `line` in `text`.
inline std::size_t line_offset(std::string_view text, unsigned long line) {
  std::size_t pos = 0;
  for (unsigned long l = 1; l < line && pos < text.size(); ++l) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) return text.size();
    pos = nl + 1;
  }
  return pos;
}

inline double need_number(const boost::property_tree::ptree& t, const std::string& key) {
  const auto v = t.get_optional<std::string>(key);
  if (!v) throw Error(ErrorKind::io, "manifest is missing " + key);
  return parse_double(*v, "manifest " + key);
}

}  // namespace detail

inline std::string encode_manifest(const SensorManifest& m) {
  std::set<std::string> seen;
  for (const auto& s : m.sensors) {
    if (s.label.empty() || s.label.find_first_of(" .=[]\n") != std::string::npos)
      throw Error(ErrorKind::io, "sensor label '" + s.label + "' is not a valid INI key");
    if (!seen.insert(s.label).second) throw Error(ErrorKind::io, "duplicate sensor label " + s.label);
  }
  std::ostringstream os;
  os << "[material]\n"
     << "density = " << format_double(m.material.density) << "\n"
     << "longitudinal_speed = " << format_double(m.material.longitudinal_speed) << "\n"
     << "transverse_speed = " << format_double(m.material.transverse_speed) << "\n"
     << "thickness = " << format_double(m.material.thickness) << "\n"
     << "[actuation]\n"
     << "centre_frequency = " << format_double(m.centre_frequency) << "\n"
     << "cycles = " << format_double(m.cycles) << "\n"
     << "sample_rate = " << format_double(m.sample_rate) << "\n"
     << "x = " << format_double(m.actuator.x) << "\n"
     << "y = " << format_double(m.actuator.y) << "\n";
  for (const auto& s : m.sensors)
    os << "[sensor." << s.label << "]\n"
       << "x = " << format_double(s.position.x) << "\n"
       << "y = " << format_double(s.position.y) << "\n"
       << "distance = " << format_double(s.distance) << "\n"
       << "signal = " << s.signal << "\n";
  return os.str();
}

inline SensorManifest decode_manifest(std::string_view text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    std::ostringstream os;
    os << "manifest parse error at offset " << detail::line_offset(text, e.line()) << " (line " << e.line()
       << "): " << e.message();
    throw Error(ErrorKind::io, os.str());
  }
  SensorManifest m;
  m.material.density = detail::need_number(tree, "material.density");
  m.material.longitudinal_speed = detail::need_number(tree, "material.longitudinal_speed");
  m.material.transverse_speed = detail::need_number(tree, "material.transverse_speed");
  m.material.thickness = detail::need_number(tree, "material.thickness");
  m.centre_frequency = detail::need_number(tree, "actuation.centre_frequency");
  m.cycles = detail::need_number(tree, "actuation.cycles");
  m.sample_rate = detail::need_number(tree, "actuation.sample_rate");
  m.actuator = {detail::need_number(tree, "actuation.x"), detail::need_number(tree, "actuation.y")};
  std::set<std::string> seen;
  for (const auto& [section, body] : tree) {
    if (section.rfind("sensor.", 0) != 0) continue;
    ManifestSensor s;
    s.label = section.substr(7);
    if (s.label.empty()) throw Error(ErrorKind::io, "manifest sensor section has no label");
    if (!seen.insert(s.label).second) throw Error(ErrorKind::io, "duplicate sensor label " + s.label);
    s.position = {detail::need_number(body, "x"), detail::need_number(body, "y")};
    s.distance = detail::need_number(body, "distance");
    s.signal = body.get<std::string>("signal", "");
    if (s.signal.empty()) throw Error(ErrorKind::io, "sensor " + s.label + " has no signal path");
    if (!is_finite(s.position) || !std::isfinite(s.distance) || s.distance < 0.0)
      throw Error(ErrorKind::io, "sensor " + s.label + " has a non-finite position or negative distance");
    m.sensors.push_back(std::move(s));
  }
  m.material.validate();
  return m;
}

inline void write_manifest(const std::filesystem::path& path, const SensorManifest& m) {
  write_file(path, encode_manifest(m));
}

// Signal paths are resolved against the manifest's directory and must exist.
inline SensorManifest read_manifest(const std::filesystem::path& path) {
  SensorManifest m;
  try {
    m = decode_manifest(read_file(path));
  } catch (const Error& e) {
    throw Error(ErrorKind::io, path.string() + ": " + e.what());
  }
  for (auto& s : m.sensors) {
    const std::filesystem::path p = std::filesystem::path(s.signal).is_absolute()
                                        ? std::filesystem::path(s.signal)
                                        : path.parent_path() / s.signal;
    if (!std::filesystem::exists(p))
      throw Error(ErrorKind::io, path.string() + ": signal file for sensor " + s.label + " not found: " + p.string());
  }
  return m;
}

inline std::filesystem::path signal_path(const std::filesystem::path& manifest, const ManifestSensor& s) {
  const std::filesystem::path p(s.signal);
  return p.is_absolute() ? p : manifest.parent_path() / p;
}

// ---------------------------------------------------------------------------
// CSV.

// Named columns of equal length, one value per row.
inline std::string encode_columns_csv(const std::vector<std::string>& names,
                                      const std::vector<std::vector<double>>& columns) {
  if (names.size() != columns.size()) throw Error(ErrorKind::io, "CSV needs one name per column");
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (const auto& c : columns)
    if (c.size() != rows) throw Error(ErrorKind::io, "CSV columns differ in length");
  std::string out;
  for (std::size_t k = 0; k < names.size(); ++k) out += (k ? "," : "") + names[k];
  out += '\n';
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t k = 0; k < columns.size(); ++k) {
      if (k) out += ',';
      out += std::isfinite(columns[k][i]) ? format_double(columns[k][i]) : std::string("nan");
    }
    out += '\n';
  }
  return out;
}

// "# dt=..,dx=..,t0=..,x0=.." then "time_s,<distance mm>..." then one row per
// time sample.
inline std::string encode_field_csv(const WaveField& f) {
  std::string out = "# dt=" + format_double(f.dt) + ",dx=" + format_double(f.dx) + ",t0=" + format_double(f.t0) +
                    ",x0=" + format_double(f.x0) + "\n";
  out += "time_s";
  for (Eigen::Index j = 0; j < f.columns(); ++j) out += "," + format_double(f.distance(j));
  out += '\n';
  for (Eigen::Index i = 0; i < f.samples(); ++i) {
    out += format_double(f.time(i));
    for (Eigen::Index j = 0; j < f.columns(); ++j) out += "," + format_double(f.data(i, j));
    out += '\n';
  }
  return out;
}

inline WaveField decode_field_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  for (std::size_t pos = 0; pos < text.size();) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  auto split = [](std::string_view line) {
    std::vector<std::string_view> cells;
    for (std::size_t pos = 0;;) {
      const auto comma = line.find(',', pos);
      cells.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    return cells;
  };
  if (lines.size() < 3 || lines[0].rfind("# ", 0) != 0) throw Error(ErrorKind::io, "CSV field needs a # metadata line");
  WaveField f;
  std::map<std::string, double*> meta{{"dt", &f.dt}, {"dx", &f.dx}, {"t0", &f.t0}, {"x0", &f.x0}};
  for (auto cell : split(lines[0].substr(2))) {
    const auto eq = cell.find('=');
    const auto it = meta.find(std::string(cell.substr(0, eq)));
    if (eq == std::string_view::npos || it == meta.end())
      throw Error(ErrorKind::io, "CSV metadata entry '" + std::string(cell) + "' is not recognised");
    *it->second = parse_double(cell.substr(eq + 1), "CSV metadata");
  }
  const auto cols = split(lines[1]).size() - 1;
  const auto rows = lines.size() - 2;
  f.data.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    const auto cells = split(lines[i + 2]);
    if (cells.size() != cols + 1)
      throw Error(ErrorKind::io, "CSV row " + std::to_string(i + 3) + " has " + std::to_string(cells.size()) +
                                     " cells, expected " + std::to_string(cols + 1));
    for (std::size_t j = 0; j < cols; ++j)
      f.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = parse_double(cells[j + 1], "CSV value");
  }
  return f;
}

}  // namespace gw::io
