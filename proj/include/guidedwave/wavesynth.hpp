#pragma once

// Synthetic dispersive wavefields: a Hann-windowed tone burst propagated by a
// frequency-domain phase shift along each mode's dispersion curve.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "guidedwave/dispersion.hpp"
#include "guidedwave/error.hpp"
#include "guidedwave/fft.hpp"
#include "guidedwave/geometry.hpp"
#include "guidedwave/wavefield.hpp"

namespace gw::wavesynth {

struct ToneBurst {
  double centre_frequency = 0.0;  // Hz
  double cycles = 0.0;
  double sample_rate = 0.0;  // Hz
  std::vector<double> samples;

  double duration() const { return cycles / centre_frequency; }
  double dt() const { return 1.0 / sample_rate; }
  // Occupied band: centre +- 3/T.
  double band_low() const { return centre_frequency - 3.0 / duration(); }
  double band_high() const { return centre_frequency + 3.0 / duration(); }
};

// Closed form 0.5(1 - cos(2 pi t/T)) sin(2 pi f0 t) on [0, T], zero elsewhere.
// The envelope peaks at exactly 1 at t = T/2.
inline double toneburst_value(double t, double f0, double cycles) {
  const double period = cycles / f0;
  if (t <= 0.0 || t >= period) return 0.0;
  return 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * t / period)) * std::sin(2.0 * std::numbers::pi * f0 * t);
}

// `length` = 0 keeps just the burst; a larger value zero-pads the tail.
// `delay` shifts the burst start to t = delay.
inline ToneBurst make_toneburst(double f0, double cycles, double fs, std::size_t length = 0, double delay = 0.0) {
  if (!(f0 > 0.0) || !std::isfinite(f0)) throw Error(ErrorKind::synthesis, "tone burst frequency must be positive");
  if (!(fs > 2.0 * f0) || !std::isfinite(fs))
    throw Error(ErrorKind::synthesis, "sample rate must exceed twice the burst frequency (Nyquist)");
  if (!(cycles >= 1.0) || !std::isfinite(cycles)) throw Error(ErrorKind::synthesis, "tone burst needs at least one cycle");
  if (!(delay >= 0.0) || !std::isfinite(delay)) throw Error(ErrorKind::synthesis, "actuation delay must be non-negative");
  ToneBurst burst{f0, cycles, fs, {}};
  const auto n_burst = static_cast<std::size_t>(std::floor((delay + burst.duration()) * fs)) + 1;
  burst.samples.assign(std::max(length, n_burst), 0.0);
  for (std::size_t i = 0; i < n_burst; ++i)
    burst.samples[i] = toneburst_value(static_cast<double>(i) / fs - delay, f0, cycles);
  return burst;
}

// Sum of s^2 dt.
inline double energy(std::span<const double> x, double dt) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e * dt;
}

// Caches the padded spectrum of one burst; each call applies a propagation phase.
class Propagator {
 public:
  explicit Propagator(const ToneBurst& burst)
      : burst_(burst), padded_(fft::next_pow2(2 * burst.samples.size())) {
    std::vector<fft::cplx> x(padded_, 0.0);
    std::copy(burst.samples.begin(), burst.samples.end(), x.begin());
    spectrum_ = fft::forward(x);
  }

  const ToneBurst& burst() const { return burst_; }
  std::size_t padded_length() const { return padded_; }

  // k(f) in rad/m for every FFT bin, odd in f. Outside the curve the nearest
  // end's phase velocity is used; the occupied band must be covered.
  std::vector<double> wavenumbers(const dispersion::DispersionCurve& curve) const {
    if (curve.samples.empty()) throw Error(ErrorKind::synthesis, "empty dispersion curve");
    const double lo = burst_.band_low();
    const double hi = burst_.band_high();
    if (!(curve.frequency_min() <= lo && curve.frequency_max() >= hi)) {
      std::ostringstream os;
      os << curve.mode.label() << " curve covers [" << curve.frequency_min() << ", " << curve.frequency_max()
         << "] Hz but the burst occupies [" << lo << ", " << hi << "] Hz; missing";
      if (curve.frequency_min() > lo) os << " [" << lo << ", " << curve.frequency_min() << ")";
      if (curve.frequency_max() < hi) os << " (" << curve.frequency_max() << ", " << hi << "]";
      throw Error(ErrorKind::synthesis, os.str());
    }
    const double c_first = curve.samples.front().phase_velocity;
    const double c_last = curve.samples.back().phase_velocity;
    std::vector<double> k(padded_);
    for (std::size_t i = 0; i < padded_; ++i) {
      const double f = fft::bin_frequency(i, padded_, burst_.dt());
      const double af = std::abs(f);
      double kk;
      if (af < curve.frequency_min())
        kk = 2.0 * std::numbers::pi * af / c_first;
      else if (af > curve.frequency_max())
        kk = 2.0 * std::numbers::pi * af / c_last;
      else
        kk = curve.wavenumber_at(af);
      k[i] = f < 0.0 ? -kk : kk;
    }
    return k;
  }

  // Burst after travelling `distance_mm`, scaled by `amplitude`, added into `out`.
  void accumulate(std::span<const double> k, double distance_mm, double amplitude, std::span<double> out) const {
    if (!(distance_mm >= 0.0)) throw Error(ErrorKind::synthesis, "propagation distance must be non-negative");
    if (k.size() != padded_) throw Error(ErrorKind::synthesis, "wavenumber table does not match propagator");
    std::vector<fft::cplx> shifted(padded_);
    const double x = distance_mm * 1.0e-3;
    for (std::size_t i = 0; i < padded_; ++i) shifted[i] = spectrum_[i] * std::polar(1.0, -k[i] * x);
    const auto y = fft::inverse(shifted);
    const std::size_t n = std::min(out.size(), padded_);
    for (std::size_t i = 0; i < n; ++i) out[i] += amplitude * y[i].real();
  }

  std::vector<double> propagate(const dispersion::DispersionCurve& curve, double distance_mm) const {
    std::vector<double> out(burst_.samples.size(), 0.0);
    accumulate(wavenumbers(curve), distance_mm, 1.0, out);
    return out;
  }

 private:
  ToneBurst burst_;
  std::size_t padded_;
  std::vector<fft::cplx> spectrum_;
};

inline std::vector<double> propagate(const ToneBurst& burst, double distance_mm,
                                     const dispersion::DispersionCurve& curve) {
  return Propagator(burst).propagate(curve, distance_mm);
}

struct ModeSource {
  dispersion::DispersionCurve curve;
  double amplitude = 1.0;
};

struct Reflector {
  Vec2 position;
  std::vector<double> coefficients;  // one per scene mode, in [0, 1]
};

struct Scene {
  Vec2 actuator;
  std::vector<ModeSource> modes;
  std::vector<Reflector> reflectors;
  double centre_frequency = 1.0e6;  // Hz
  double cycles = 5.0;
  double actuation_delay = 0.0;  // s
  std::optional<double> snr_db = 40.0;  // nullopt disables noise
  std::uint64_t seed = 0;

  void validate() const {
    if (modes.empty()) throw Error(ErrorKind::synthesis, "scene has no modes");
    if (!is_finite(actuator)) throw Error(ErrorKind::synthesis, "actuator position must be finite");
    for (const auto& m : modes)
      if (!std::isfinite(m.amplitude)) throw Error(ErrorKind::synthesis, "mode amplitude must be finite");
    for (std::size_t r = 0; r < reflectors.size(); ++r) {
      const auto& ref = reflectors[r];
      if (!is_finite(ref.position))
        throw Error(ErrorKind::synthesis, "reflector " + std::to_string(r) + " position must be finite");
      if (ref.coefficients.size() != modes.size())
        throw Error(ErrorKind::synthesis, "reflector " + std::to_string(r) + " needs one coefficient per mode");
      for (double c : ref.coefficients)
        if (!(c >= 0.0 && c <= 1.0))
          throw Error(ErrorKind::synthesis, "reflector " + std::to_string(r) + " coefficient outside [0, 1]");
    }
    if (snr_db && !std::isfinite(*snr_db)) throw Error(ErrorKind::synthesis, "SNR must be finite");
  }
};

struct TimeGrid {
  double sample_rate = 0.0;  // Hz
  std::size_t samples = 0;
};

// Points along a ray: origin + (x0 + j dx) * direction, distances in mm.
struct LinePath {
  Vec2 origin;
  Vec2 direction{1.0, 0.0};
  double x0 = 0.0;
  double dx = 0.0;
  std::size_t count = 0;

  Vec2 point(std::size_t j) const {
    const double s = (x0 + static_cast<double>(j) * dx) / norm(direction);
    return origin + s * direction;
  }
};

// Slowest group velocity of any mode inside the burst band, m/s.
inline double slowest_group_velocity(const Scene& scene, const ToneBurst& burst) {
  double slowest = std::numeric_limits<double>::infinity();
  for (const auto& m : scene.modes) {
    for (const auto& s : m.curve.samples)
      if (s.frequency() >= burst.band_low() && s.frequency() <= burst.band_high())
        slowest = std::min(slowest, s.group_velocity);
    for (double f : {burst.band_low(), burst.band_high()})
      if (m.curve.covers(f)) slowest = std::min(slowest, m.curve.group_velocity_at(f));
  }
  return slowest;
}

// The record must hold the slowest arrival over the longest path with 20% margin.
inline void check_time_span(const Scene& scene, std::span<const Vec2> points, const TimeGrid& grid,
                            const ToneBurst& burst) {
  double longest = 0.0;
  for (const auto& p : points) {
    longest = std::max(longest, distance(scene.actuator, p));
    for (const auto& r : scene.reflectors)
      longest = std::max(longest, distance(scene.actuator, r.position) + distance(r.position, p));
  }
  const double c_slow = slowest_group_velocity(scene, burst);
  const double needed = 1.2 * (longest * 1.0e-3 / c_slow + burst.duration() + scene.actuation_delay);
  const double span = static_cast<double>(grid.samples) / grid.sample_rate;
  if (span < needed) {
    std::ostringstream os;
    os << "time record " << span * 1e6 << " us is shorter than the " << needed * 1e6
       << " us needed for a " << longest << " mm path at " << c_slow << " m/s";
    throw Error(ErrorKind::synthesis, os.str());
  }
}

// Time x point matrix of synthetic displacement at arbitrary points.
inline Eigen::MatrixXd synth_signals(const Scene& scene, std::span<const Vec2> points, const TimeGrid& grid) {
  scene.validate();
  if (grid.samples < 2) throw Error(ErrorKind::synthesis, "time grid needs at least two samples");
  const auto burst =
      make_toneburst(scene.centre_frequency, scene.cycles, grid.sample_rate, grid.samples, scene.actuation_delay);
  if (burst.samples.size() != grid.samples)
    throw Error(ErrorKind::synthesis, "time grid is shorter than the actuation burst");
  check_time_span(scene, points, grid, burst);

  const Propagator prop(burst);
  std::vector<std::vector<double>> k;
  for (const auto& m : scene.modes) k.push_back(prop.wavenumbers(m.curve));

  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid.samples),
                                              static_cast<Eigen::Index>(points.size()));
  for (std::size_t j = 0; j < points.size(); ++j) {
    std::span<double> column(out.col(static_cast<Eigen::Index>(j)).data(), grid.samples);
    for (std::size_t g = 0; g < scene.modes.size(); ++g) {
      const double amp = scene.modes[g].amplitude;
      prop.accumulate(k[g], distance(scene.actuator, points[j]), amp, column);
      for (const auto& r : scene.reflectors) {
        if (r.coefficients[g] == 0.0) continue;
        const double path = distance(scene.actuator, r.position) + distance(r.position, points[j]);
        prop.accumulate(k[g], path, amp * r.coefficients[g], column);
      }
    }
    if (scene.snr_db) {
      const double rms = std::sqrt(out.col(static_cast<Eigen::Index>(j)).squaredNorm() / static_cast<double>(grid.samples));
      if (rms > 0.0) {
        const double sigma = rms * std::pow(10.0, -*scene.snr_db / 20.0);
        std::seed_seq seq{static_cast<std::uint32_t>(scene.seed), static_cast<std::uint32_t>(scene.seed >> 32),
                          static_cast<std::uint32_t>(j)};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> noise(0.0, sigma);
        for (double& v : column) v += noise(rng);
      }
    }
  }
  return out;
}

inline WaveField synth_field(const Scene& scene, const LinePath& path, const TimeGrid& grid) {
  if (path.count == 0 || !(path.dx > 0.0)) throw Error(ErrorKind::synthesis, "path needs points and dx > 0");
  if (!(norm(path.direction) > 0.0)) throw Error(ErrorKind::synthesis, "path direction must be non-zero");
  std::vector<Vec2> points(path.count);
  for (std::size_t j = 0; j < path.count; ++j) points[j] = path.point(j);
  for (std::size_t j = 1; j < points.size(); ++j)
    if (distance(scene.actuator, points[j]) < distance(scene.actuator, points[j - 1]))
      throw Error(ErrorKind::synthesis, "path points must be ordered by distance from the actuator");
  WaveField field;
  field.data = synth_signals(scene, points, grid);
  field.dt = 1.0 / grid.sample_rate;
  field.dx = path.dx;
  field.x0 = path.x0;
  return field;
}

}  // namespace gw::wavesynth
