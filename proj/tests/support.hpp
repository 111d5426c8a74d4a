#pragma once

// Shared oracles for the test suites.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "guidedwave/dispersion.hpp"

namespace gw::test {

// Aluminium A0/S0 curves over 0.2-2.4 MHz*mm, traced once per process.
inline const dispersion::DispersionCurve& curve_a0() {
  static const auto c = dispersion::trace_mode(dispersion::MaterialSpec::aluminium(),
                                               {dispersion::Family::antisymmetric, 0}, 0.2, 2.4, 0.01);
  return c;
}

inline const dispersion::DispersionCurve& curve_s0() {
  static const auto c = dispersion::trace_mode(dispersion::MaterialSpec::aluminium(),
                                               {dispersion::Family::symmetric, 0}, 0.2, 2.4, 0.01);
  return c;
}

// Dispersion-free curve with phase speed c (m/s) over [f_lo, f_hi] Hz.
inline dispersion::DispersionCurve constant_speed_curve(double c, double f_lo, double f_hi, int points = 64) {
  dispersion::DispersionCurve curve{{dispersion::Family::symmetric, 0}, {}};
  for (int i = 0; i < points; ++i) {
    const double f = f_lo + (f_hi - f_lo) * i / (points - 1);
    const double w = 2.0 * M_PI * f;
    curve.samples.push_back({f * 1e-3, c, w / c, c, w});
  }
  return curve;
}

// Magnitude of the analytic signal (FFT-based Hilbert transform).
inline std::vector<double> envelope(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> in(x.begin(), x.end());
  std::vector<std::complex<double>> spec;
  std::vector<std::complex<double>> out;
  Eigen::FFT<double> fft;
  fft.fwd(spec, in);
  for (std::size_t i = 1; i < n; ++i) {
    if (2 * i < n)
      spec[i] *= 2.0;
    else if (2 * i > n)
      spec[i] = 0.0;
  }
  fft.inv(out, spec);
  std::vector<double> env(n);
  for (std::size_t i = 0; i < n; ++i) env[i] = std::abs(out[i]);
  return env;
}

inline std::size_t argmax(const std::vector<double>& x) {
  return static_cast<std::size_t>(std::max_element(x.begin(), x.end()) - x.begin());
}

}  // namespace gw::test
