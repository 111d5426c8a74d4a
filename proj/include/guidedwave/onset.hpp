#pragma once

// Residual signals and AIC onset picking.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <vector>

#include "guidedwave/error.hpp"

namespace gw::onset {

inline std::vector<double> residual(std::span<const double> y, std::span<const double> predicted) {
  if (y.size() != predicted.size()) {
    std::ostringstream os;
    os << "residual inputs differ in length (" << y.size() << " vs " << predicted.size() << ")";
    throw Error(ErrorKind::onset, os.str());
  }
  std::vector<double> r(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) r[i] = y[i] - predicted[i];
  return r;
}

inline constexpr double kMinVariance = 1e-300;

// AIC(t) = t log10 V[x_1..x_t] + (T - t - 1) log10 V[x_t..x_T] for 1-based
// t in [2, T-2], stored at 0-based index t-1. Population variances. Entries
// are NaN where undefined or where either variance is below kMinVariance.
inline std::vector<double> aic_curve(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 4) throw Error(ErrorKind::onset, "AIC needs a segment of at least 4 samples");
  // Welford passes: prefix[i] = V[x_0..x_i], suffix[i] = V[x_i..x_{n-1}].
  std::vector<double> prefix(n);
  std::vector<double> suffix(n);
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - mean;
    mean += d / static_cast<double>(i + 1);
    m2 += d * (x[i] - mean);
    prefix[i] = m2 / static_cast<double>(i + 1);
  }
  mean = 0.0;
  m2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = n - 1 - k;
    const double d = x[i] - mean;
    mean += d / static_cast<double>(k + 1);
    m2 += d * (x[i] - mean);
    suffix[i] = m2 / static_cast<double>(k + 1);
  }
  std::vector<double> aic(n, std::numeric_limits<double>::quiet_NaN());
  const double total = static_cast<double>(n);
  for (std::size_t t = 2; t + 2 <= n; ++t) {
    const std::size_t i = t - 1;
    if (prefix[i] < kMinVariance || suffix[i] < kMinVariance) continue;
    const double tt = static_cast<double>(t);
    aic[i] = tt * std::log10(prefix[i]) + (total - tt - 1.0) * std::log10(suffix[i]);
  }
  return aic;
}

// Index of the smallest finite entry (first on ties).
inline std::optional<std::size_t> argmin(std::span<const double> aic) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < aic.size(); ++i)
    if (std::isfinite(aic[i]) && (!best || aic[i] < aic[*best])) best = i;
  return best;
}

// Spread of the finite AIC values per valid sample, in log10-variance units.
// A real variance change of ratio R gives roughly log10(R)/2; stationary
// noise gives O(1/sqrt(T)).
inline double contrast(std::span<const double> aic) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  std::size_t valid = 0;
  for (double v : aic)
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      ++valid;
    }
  return valid == 0 ? 0.0 : (hi - lo) / static_cast<double>(valid);
}

struct Window {
  std::size_t begin = 0;  // inclusive
  std::size_t end = 0;    // exclusive
  std::size_t size() const { return end - begin; }
};

struct Pick {
  std::size_t index = 0;  // into the full signal
  double time = 0.0;      // s
  std::vector<double> aic;  // over the window
  Window window;
  double contrast = 0.0;
  bool low_confidence = false;
};

struct OnsetOptions {
  double min_contrast = 0.1;
  // Reflection picks whose window peak |r| is below this fraction of the
  // incident peak |y| are low confidence. Catches nominal-model misfit that
  // leaks past the incident window, which AIC alone rates as a clean onset.
  double min_relative_amplitude = 0.0;
};

inline Pick pick_in(std::span<const double> x, Window w, double dt, double t0, const OnsetOptions& opt) {
  if (w.end > x.size() || w.size() < 4) {
    std::ostringstream os;
    os << "AIC search window [" << w.begin << ", " << w.end << ") is shorter than 4 samples";
    throw Error(ErrorKind::onset, os.str());
  }
  Pick p;
  p.window = w;
  p.aic = aic_curve(x.subspan(w.begin, w.size()));
  p.contrast = contrast(p.aic);
  const auto best = argmin(p.aic);
  p.low_confidence = !best || p.contrast < opt.min_contrast;
  p.index = w.begin + best.value_or(0);
  p.time = t0 + static_cast<double>(p.index) * dt;
  return p;
}

// Shortens w to end just after the largest |x| inside it. An isolated packet
// otherwise gives a second, deeper AIC minimum at its tail whenever the quiet
// stretch after it is longer than the one before.
inline Window up_to_peak(std::span<const double> x, Window w) {
  if (w.end > x.size() || w.size() < 4) return w;
  std::size_t peak = w.begin;
  for (std::size_t i = w.begin; i < w.end; ++i)
    if (std::abs(x[i]) > std::abs(x[peak])) peak = i;
  return {w.begin, std::max(w.begin + 4, peak + 1)};
}

// Argmin inside up_to_peak(w); contrast and the confidence flag come from the
// whole of w, where short peak-bounded windows cannot inflate them.
inline Pick pick_before_peak(std::span<const double> x, Window w, double dt, double t0, const OnsetOptions& opt) {
  Pick p = pick_in(x, up_to_peak(x, w), dt, t0, opt);
  const auto full = aic_curve(x.subspan(w.begin, w.size()));
  p.contrast = contrast(full);
  p.low_confidence = !argmin(p.aic) || p.contrast < opt.min_contrast;
  return p;
}

inline double peak_abs(std::span<const double> x, Window w) {
  double m = 0.0;
  for (std::size_t i = w.begin; i < std::min(w.end, x.size()); ++i) m = std::max(m, std::abs(x[i]));
  return m;
}

struct OnsetReport {
  Pick incident;
  Pick reflection;
  double relative_amplitude = 0.0;  // reflection window peak over incident window peak

  double incident_time() const { return incident.time; }
  double reflection_time() const { return reflection.time; }
};

// Incident onset: AIC over the measured signal, restricted to hint +- one
// burst duration when a hint (expected onset of the slowest nominal wave) is
// given. Reflection onset: AIC over the residual from incident onset plus
// one burst duration onwards. Both windows stop at their largest sample.
inline OnsetReport detect_onsets(std::span<const double> y, std::span<const double> r, double dt, double t0,
                                 std::optional<double> hint, double burst_duration, const OnsetOptions& opt = {}) {
  if (y.size() != r.size()) throw Error(ErrorKind::onset, "measured and residual signals differ in length");
  if (!(dt > 0.0)) throw Error(ErrorKind::onset, "sample interval must be positive");
  if (!(burst_duration >= 0.0)) throw Error(ErrorKind::onset, "burst duration must be non-negative");
  const std::size_t n = y.size();
  const double duration = static_cast<double>(n) * dt;
  auto to_index = [&](double t) {
    const double i = std::round((t - t0) / dt);
    return static_cast<std::size_t>(std::clamp(i, 0.0, static_cast<double>(n)));
  };

  Window incident{0, n};
  if (hint) {
    if (!(*hint >= t0 && *hint <= t0 + duration)) {
      std::ostringstream os;
      os << "onset hint " << *hint << " s lies outside the record";
      throw Error(ErrorKind::onset, os.str());
    }
    incident = {to_index(*hint - burst_duration), to_index(*hint + burst_duration)};
  }
  OnsetReport report;
  report.incident = pick_before_peak(y, incident, dt, t0, opt);
  const Window after{to_index(report.incident.time + burst_duration), n};
  report.reflection = pick_before_peak(r, after, dt, t0, opt);
  const double inc_peak = peak_abs(y, incident);
  report.relative_amplitude = inc_peak > 0.0 ? peak_abs(r, after) / inc_peak : 0.0;
  if (report.relative_amplitude < opt.min_relative_amplitude) report.reflection.low_confidence = true;
  return report;
}

}  // namespace gw::onset
