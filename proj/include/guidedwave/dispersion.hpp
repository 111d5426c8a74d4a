#pragma once

// Rayleigh-Lamb dispersion curves for an isotropic plate.
//
// Units: frequency-thickness product (ftp) in MHz*mm, velocities in m/s,
// wavenumber in rad/m, angular frequency in rad/s, thickness in m.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "guidedwave/error.hpp"

namespace gw::dispersion {

struct MaterialSpec {
  double density = 0.0;             // kg/m^3
  double longitudinal_speed = 0.0;  // c_L, m/s
  double transverse_speed = 0.0;    // c_T, m/s
  double thickness = 0.0;           // full plate thickness 2h, m

  void validate() const {
    if (!(density > 0.0) || !std::isfinite(density))
      throw Error(ErrorKind::dispersion, "material density must be positive");
    if (!(transverse_speed > 0.0) || !std::isfinite(longitudinal_speed) || !std::isfinite(transverse_speed))
      throw Error(ErrorKind::dispersion, "transverse speed must be positive");
    if (!(longitudinal_speed > transverse_speed))
      throw Error(ErrorKind::dispersion, "longitudinal speed must exceed transverse speed");
    if (!(thickness > 0.0) || !std::isfinite(thickness))
      throw Error(ErrorKind::dispersion, "plate thickness must be positive");
  }

  // 1 mm aluminium plate: rho = 2710 kg/m^3, c_L = 6420 m/s, c_T = 3040 m/s.
  static MaterialSpec aluminium() { return {2710.0, 6420.0, 3040.0, 1.0e-3}; }
};

inline double frequency_from_ftp(const MaterialSpec& m, double ftp) { return ftp * 1.0e3 / m.thickness; }
inline double ftp_from_frequency(const MaterialSpec& m, double f) { return f * m.thickness * 1.0e-3; }

enum class Family { symmetric, antisymmetric };

struct ModeId {
  Family family = Family::antisymmetric;
  int order = 0;

  std::string label() const {
    return (family == Family::symmetric ? "S" : "A") + std::to_string(order);
  }

  static ModeId parse(std::string_view text) {
    if (text.size() < 2 || (text[0] != 'A' && text[0] != 'S' && text[0] != 'a' && text[0] != 's'))
      throw Error(ErrorKind::config, "bad mode label '" + std::string(text) + "' (expected A<n> or S<n>)");
    int order = 0;
    for (char ch : text.substr(1)) {
      if (ch < '0' || ch > '9')
        throw Error(ErrorKind::config, "bad mode label '" + std::string(text) + "'");
      order = order * 10 + (ch - '0');
    }
    return {(text[0] == 'S' || text[0] == 's') ? Family::symmetric : Family::antisymmetric, order};
  }

  friend bool operator==(const ModeId&, const ModeId&) = default;
};

struct DispersionSample {
  double ftp = 0.0;
  double phase_velocity = 0.0;
  double wavenumber = 0.0;
  double group_velocity = 0.0;
  double angular_frequency = 0.0;

  double frequency() const { return angular_frequency / (2.0 * std::numbers::pi); }
};

struct DispersionCurve {
  ModeId mode;
  std::vector<DispersionSample> samples;

  double frequency_min() const { return samples.front().frequency(); }
  double frequency_max() const { return samples.back().frequency(); }
  bool covers(double f) const {
    return !samples.empty() && f >= frequency_min() && f <= frequency_max();
  }

  // Linear interpolation in frequency of any sample member.
  template <typename Member>
  double interpolate(double f, Member member) const {
    if (!covers(f)) {
      std::ostringstream os;
      os << mode.label() << " curve does not cover " << f << " Hz";
      throw Error(ErrorKind::dispersion, os.str());
    }
    auto it = std::lower_bound(samples.begin(), samples.end(), f,
                               [](const DispersionSample& s, double v) { return s.frequency() < v; });
    if (it == samples.begin()) return (*it).*member;
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    const double u = (f - lo.frequency()) / (hi.frequency() - lo.frequency());
    return lo.*member + u * (hi.*member - lo.*member);
  }

  double wavenumber_at(double f) const { return interpolate(f, &DispersionSample::wavenumber); }
  double group_velocity_at(double f) const { return interpolate(f, &DispersionSample::group_velocity); }
  double phase_velocity_at(double f) const { return interpolate(f, &DispersionSample::phase_velocity); }
};

// Thrown when continuation loses the mode; carries the last ftp with a valid root.
class LostTrack : public Error {
 public:
  LostTrack(const std::string& label, double last_ftp, double failed_ftp)
      : Error(ErrorKind::dispersion, make_message(label, last_ftp, failed_ftp)), last_ftp_(last_ftp) {}
  double last_valid_ftp() const noexcept { return last_ftp_; }

 private:
  static std::string make_message(const std::string& label, double last, double failed) {
    std::ostringstream os;
    os << "lost track of " << label << " at ftp " << failed << " MHz*mm (last valid ftp " << last << ")";
    return os.str();
  }
  double last_ftp_;
};

class BelowCutoff : public Error {
 public:
  BelowCutoff(const std::string& label, double ftp)
      : Error(ErrorKind::dispersion, label + " is below cut-off at ftp " + std::to_string(ftp) + " MHz*mm") {}
};

namespace detail {

// (kh)^2, (ph)^2, (qh)^2 for trial phase velocity c. Only the product
// omega*h = pi*ftp*1e3 m/s enters, so the thickness drops out.
struct ScaledWavenumbers {
  double k2;
  double p2;
  double q2;
};

inline ScaledWavenumbers scaled_wavenumbers(const MaterialSpec& m, double ftp, double c) {
  const double xi = std::numbers::pi * ftp * 1.0e3;
  const double k = xi / c;
  const double inv_c2 = 1.0 / (c * c);
  return {k * k,
          xi * xi * (1.0 / (m.longitudinal_speed * m.longitudinal_speed) - inv_c2),
          xi * xi * (1.0 / (m.transverse_speed * m.transverse_speed) - inv_c2)};
}

// cos(x), sin(x)/x and x*sin(x) for x^2 of either sign. An imaginary argument
// x = iy turns these into cosh, sinh/y and -y*sinh; all three are divided by
// cosh(y), which keeps them bounded and leaves the sign untouched.
struct TrigPart {
  double cos_x;
  double sin_over_x;
  double x_sin;
};

inline TrigPart trig_part(double x2) {
  if (x2 >= 0.0) {
    const double x = std::sqrt(x2);
    const double s = std::sin(x);
    return {std::cos(x), x > 1e-6 ? s / x : 1.0 - x2 / 6.0, x * s};
  }
  const double y = std::sqrt(-x2);
  const double t = std::tanh(y);
  return {1.0, y > 1e-6 ? t / y : 1.0 + x2 / 3.0, -y * t};
}

// Rayleigh-Lamb equation with the tangent denominators cleared. Same real
// roots as the tangent form, but continuous in c.
inline double regular_residual(const MaterialSpec& m, double ftp, double c, Family family) {
  const auto w = scaled_wavenumbers(m, ftp, c);
  const auto p = trig_part(w.p2);
  const auto q = trig_part(w.q2);
  const double d = (w.q2 - w.k2) * (w.q2 - w.k2);
  if (family == Family::symmetric) return d * p.cos_x * q.sin_over_x + 4.0 * w.k2 * p.x_sin * q.cos_x;
  return d * p.sin_over_x * q.cos_x + 4.0 * w.k2 * q.x_sin * p.cos_x;
}

inline constexpr double kRootTolerance = 1e-12;  // relative, on c

template <typename F>
double bisect(F&& f, double lo, double hi, double f_lo) {
  for (int it = 0; it < 200 && (hi - lo) > kRootTolerance * 0.5 * (lo + hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = f(mid);
    if (f_mid == 0.0) return mid;
    if ((f_mid < 0.0) == (f_lo < 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// All sign changes of the regular residual on a grid over [c_lo, c_hi],
// refined by bisection. Grid is geometric when `geometric` is set.
inline std::vector<double> bracket_roots(const MaterialSpec& m, double ftp, Family family, double c_lo,
                                         double c_hi, int points, bool geometric) {
  std::vector<double> roots;
  auto f = [&](double c) { return regular_residual(m, ftp, c, family); };
  auto grid = [&](int i) {
    const double u = static_cast<double>(i) / (points - 1);
    return geometric ? c_lo * std::pow(c_hi / c_lo, u) : c_lo + u * (c_hi - c_lo);
  };
  double c_prev = grid(0);
  double f_prev = f(c_prev);
  if (f_prev == 0.0) roots.push_back(c_prev);
  for (int i = 1; i < points; ++i) {
    const double c = grid(i);
    const double fc = f(c);
    if (fc == 0.0) {
      roots.push_back(c);
    } else if (f_prev != 0.0 && (fc < 0.0) != (f_prev < 0.0)) {
      roots.push_back(bisect(f, c_prev, c, f_prev));
    }
    c_prev = c;
    f_prev = fc;
  }
  return roots;
}

// Phase-velocity roots at one ftp, ascending. Within a family the n-th root is mode n.
inline std::vector<double> roots_at(const MaterialSpec& m, double ftp, Family family) {
  const double xi = std::numbers::pi * ftp * 1.0e3;
  const double c_lo = 0.1 * std::sqrt(xi * m.transverse_speed);
  const double c_hi = 50.0 * m.longitudinal_speed;
  return bracket_roots(m, ftp, family, std::min(c_lo, 0.5 * m.transverse_speed), c_hi, 20000, true);
}

}  // namespace detail

// Signed residual LHS - RHS of the tangent-form characteristic equation,
//   symmetric:      tan(qh)/tan(ph) + 4k^2 pq / (q^2 - k^2)^2
//   antisymmetric:  tan(ph)/tan(qh) + 4k^2 pq / (q^2 - k^2)^2
// with p^2 = (w/c_L)^2 - k^2, q^2 = (w/c_T)^2 - k^2, k = w/c. Imaginary p or q
// is continued through tan(ix) = i tanh(x) and the common factor of i removed.
// Returns nullopt at a tangent pole or a vanishing denominator.
inline std::optional<double> characteristic_residual(const MaterialSpec& m, double ftp, double c,
                                                     Family family) {
  if (!(c > 0.0) || !(ftp > 0.0))
    throw Error(ErrorKind::dispersion, "characteristic_residual requires c > 0 and ftp > 0");
  constexpr double kPole = 1e-12;
  const auto w = detail::scaled_wavenumbers(m, ftp, c);
  const double d = (w.q2 - w.k2) * (w.q2 - w.k2);
  if (d < kPole) return std::nullopt;

  const bool p_real = w.p2 >= 0.0;
  const bool q_real = w.q2 >= 0.0;
  const double p = std::sqrt(std::abs(w.p2));
  const double q = std::sqrt(std::abs(w.q2));
  // Magnitudes of tan (real argument) or tanh (imaginary argument).
  auto tangent = [](double x, bool real) -> std::optional<double> {
    if (!real) return std::tanh(x);
    if (std::abs(std::cos(x)) < kPole) return std::nullopt;
    return std::tan(x);
  };
  const auto tp = tangent(p, p_real);
  const auto tq = tangent(q, q_real);
  if (!tp || !tq) return std::nullopt;

  // c_L > c_T, so q is imaginary only when p is too.
  const double coupling = 4.0 * w.k2 * p * q / d;
  if (family == Family::symmetric) {
    if (std::abs(*tp) < kPole) return std::nullopt;
    return p_real ? *tq / *tp + coupling : *tq / *tp - coupling;
  }
  if (std::abs(*tq) < kPole) return std::nullopt;
  return (p_real || q_real) ? *tp / *tq + coupling : *tp / *tq - coupling;
}

// dw/dk per sample: second-order three-point differences on the (possibly
// non-uniform) wavenumber grid, one-sided at both ends.
inline std::vector<double> group_velocity(std::span<const DispersionSample> samples) {
  const std::size_t n = samples.size();
  if (n < 3) throw Error(ErrorKind::dispersion, "group velocity needs at least 3 samples");
  for (std::size_t i = 1; i < n; ++i) {
    if (!(samples[i].wavenumber > samples[i - 1].wavenumber)) {
      std::ostringstream os;
      os << "wavenumber not increasing at sample " << i << " (ftp " << samples[i].ftp << ")";
      throw Error(ErrorKind::dispersion, os.str());
    }
  }
  auto k = [&](std::size_t i) { return samples[i].wavenumber; };
  auto w = [&](std::size_t i) { return samples[i].angular_frequency; };
  // Derivative at x0 of the parabola through (x0,y0), (x1,y1), (x2,y2).
  auto parabola_slope = [](double x0, double y0, double x1, double y1, double x2, double y2) {
    const double h1 = x1 - x0;
    const double h2 = x2 - x0;
    return (y1 - y0) * h2 / (h1 * (h2 - h1)) - (y2 - y0) * h1 / (h2 * (h2 - h1));
  };
  std::vector<double> cg(n);
  cg[0] = parabola_slope(k(0), w(0), k(1), w(1), k(2), w(2));
  for (std::size_t i = 1; i + 1 < n; ++i) cg[i] = parabola_slope(k(i), w(i), k(i - 1), w(i - 1), k(i + 1), w(i + 1));
  cg[n - 1] = parabola_slope(k(n - 1), w(n - 1), k(n - 2), w(n - 2), k(n - 3), w(n - 3));
  return cg;
}

// One phase-velocity root per grid point, continued from the previous point.
inline std::vector<double> trace_roots(const MaterialSpec& m, const ModeId& mode, std::span<const double> ftp_grid) {
  m.validate();
  if (mode.order < 0) throw Error(ErrorKind::dispersion, "mode order must be non-negative");
  if (ftp_grid.empty()) throw Error(ErrorKind::dispersion, "empty ftp grid");
  for (std::size_t i = 0; i < ftp_grid.size(); ++i) {
    if (!(ftp_grid[i] > 0.0)) throw Error(ErrorKind::dispersion, "ftp grid values must be positive");
    if (i > 0 && ftp_grid[i] < ftp_grid[i - 1]) throw Error(ErrorKind::dispersion, "ftp grid must be ascending");
  }

  std::vector<double> c(ftp_grid.size());
  const auto first = detail::roots_at(m, ftp_grid[0], mode.family);
  if (first.size() <= static_cast<std::size_t>(mode.order)) throw BelowCutoff(mode.label(), ftp_grid[0]);
  c[0] = first[mode.order];

  std::size_t last_distinct = 0;  // index of the previous distinct grid point
  for (std::size_t i = 1; i < ftp_grid.size(); ++i) {
    if (ftp_grid[i] == ftp_grid[i - 1]) {
      c[i] = c[i - 1];
      continue;
    }
    const std::size_t j = i - 1;
    double predicted = c[j];
    if (j > 0 && ftp_grid[last_distinct] < ftp_grid[j]) {
      const double slope = (c[j] - c[last_distinct]) / (ftp_grid[j] - ftp_grid[last_distinct]);
      predicted = std::max(0.5 * c[j], c[j] + slope * (ftp_grid[i] - ftp_grid[j]));
    }
    last_distinct = j;

    std::optional<double> found;
    double half_width = 0.1;
    for (int attempt = 0; attempt < 5 && !found; ++attempt, half_width *= 2.0) {
      const double lo = predicted * std::max(1e-3, 1.0 - half_width);
      const double hi = predicted * (1.0 + half_width);
      const auto roots = detail::bracket_roots(m, ftp_grid[i], mode.family, lo, hi, 64, false);
      for (double r : roots)
        if (!found || std::abs(r - predicted) < std::abs(*found - predicted)) found = r;
    }
    if (!found) throw LostTrack(mode.label(), ftp_grid[j], ftp_grid[i]);
    c[i] = *found;
  }
  return c;
}

// Trace a mode over an ascending ftp grid and fill k, w and group velocity.
// Repeated grid values collapse into a single sample.
inline DispersionCurve trace_mode(const MaterialSpec& m, const ModeId& mode, std::span<const double> ftp_grid) {
  const auto c = trace_roots(m, mode, ftp_grid);
  DispersionCurve curve{mode, {}};
  for (std::size_t i = 0; i < ftp_grid.size(); ++i) {
    if (i > 0 && ftp_grid[i] == ftp_grid[i - 1]) continue;
    const double omega = 2.0 * std::numbers::pi * frequency_from_ftp(m, ftp_grid[i]);
    curve.samples.push_back({ftp_grid[i], c[i], omega / c[i], 0.0, omega});
  }
  const auto cg = group_velocity(curve.samples);
  for (std::size_t i = 0; i < cg.size(); ++i) curve.samples[i].group_velocity = cg[i];
  return curve;
}

inline std::vector<double> linear_grid(double first, double last, double step) {
  if (!(step > 0.0) || !(last >= first)) throw Error(ErrorKind::dispersion, "bad ftp range");
  std::vector<double> grid;
  const auto n = static_cast<std::size_t>(std::floor((last - first) / step + 1e-9)) + 1;
  grid.reserve(n);
  for (std::size_t i = 0; i < n; ++i) grid.push_back(first + step * static_cast<double>(i));
  return grid;
}

inline DispersionCurve trace_mode(const MaterialSpec& m, const ModeId& mode, double ftp_first, double ftp_last,
                                  double ftp_step) {
  const auto grid = linear_grid(ftp_first, ftp_last, ftp_step);
  return trace_mode(m, mode, grid);
}

// Group velocity at a single ftp from a local three-point trace.
inline double group_velocity_at(const MaterialSpec& m, const ModeId& mode, double ftp) {
  const double h = 1e-3 * ftp;
  const double grid[] = {ftp - h, ftp, ftp + h};
  return trace_mode(m, mode, grid).samples[1].group_velocity;
}

}  // namespace gw::dispersion
