#pragma once

// Frequency-wavenumber mode separation and the nominal wave dictionary.
//
// Spectral layout: row m is frequency m*df (rows above M/2 are negative),
// column n is wavenumber n*dk in cycles/mm (columns above N/2 are negative).
// With the e^{-i2pi(ft + kx)} kernel a wave travelling towards +x,
// cos(2pi(f t - k x)), lands at (f, -k) and its conjugate at (-f, k).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "guidedwave/error.hpp"
#include "guidedwave/fft.hpp"
#include "guidedwave/wavefield.hpp"

namespace gw::field2d {

using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct SpectralField {
  Eigen::MatrixXcd data;
  double df = 0.0;  // Hz
  double dk = 0.0;  // cycles/mm
  // Geometry of the source field, restored by itdfft.
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  double dt = 0.0;
  double dx = 0.0;
  double t0 = 0.0;
  double x0 = 0.0;
};

struct Bin {
  Eigen::Index row = 0;
  Eigen::Index col = 0;
  friend bool operator==(const Bin&, const Bin&) = default;
};

inline Bin mirror(Bin b, Eigen::Index m, Eigen::Index n) { return {(m - b.row) % m, (n - b.col) % n}; }

// Bin of a forward-travelling component at frequency f (Hz) and wavenumber
// k (rad/m). Both must be non-negative and inside the Nyquist limits.
inline Bin forward_bin(const SpectralField& s, double f, double k) {
  const Eigen::Index m = s.data.rows();
  const Eigen::Index n = s.data.cols();
  const double kc = k / (2.0 * std::numbers::pi * 1.0e3);
  const auto row = static_cast<Eigen::Index>(std::lround(f / s.df));
  const auto off = static_cast<Eigen::Index>(std::lround(kc / s.dk));
  if (!(f >= 0.0) || !(k >= 0.0) || row > m / 2 || off > n / 2) {
    std::ostringstream os;
    os << "point (" << f << " Hz, " << k << " rad/m) lies outside the spectral image";
    throw Error(ErrorKind::dictionary, os.str());
  }
  return {row, (n - off) % n};
}

// Unnormalised 2-D DFT of the field zero-padded to powers of two.
inline SpectralField tdfft(const WaveField& field) {
  field.validate(ErrorKind::dictionary);
  const auto m = static_cast<Eigen::Index>(fft::next_pow2(static_cast<std::size_t>(field.samples())));
  const auto n = static_cast<Eigen::Index>(fft::next_pow2(static_cast<std::size_t>(field.columns())));
  SpectralField s;
  s.data = Eigen::MatrixXcd::Zero(m, n);
  s.data.topLeftCorner(field.samples(), field.columns()) = field.data.cast<fft::cplx>();
  fft::transform_2d(s.data, false);
  s.df = 1.0 / (static_cast<double>(m) * field.dt);
  s.dk = 1.0 / (static_cast<double>(n) * field.dx);
  s.rows = field.samples();
  s.cols = field.columns();
  s.dt = field.dt;
  s.dx = field.dx;
  s.t0 = field.t0;
  s.x0 = field.x0;
  return s;
}

// Inverse with 1/(MN), cropped to the source geometry. The imaginary part
// must be negligible, which holds whenever the mask was mirror symmetric.
inline WaveField itdfft(const SpectralField& spec) {
  Eigen::MatrixXcd a = spec.data;
  fft::transform_2d(a, true);
  const double re = a.real().cwiseAbs().maxCoeff();
  const double im = a.imag().cwiseAbs().maxCoeff();
  if (im > 1e-8 * re && im > 1e-300) {
    std::ostringstream os;
    os << "inverse transform has imaginary residue " << im << " against real peak " << re
       << " (mask not mirror symmetric?)";
    throw Error(ErrorKind::dictionary, os.str());
  }
  WaveField out;
  out.data = a.real().topLeftCorner(spec.rows, spec.cols);
  out.dt = spec.dt;
  out.dx = spec.dx;
  out.t0 = spec.t0;
  out.x0 = spec.x0;
  return out;
}

// P = 20 log10(1 + |U|).
inline Eigen::MatrixXd power_transform(const SpectralField& spec) {
  return spec.data.cwiseAbs().unaryExpr([](double v) { return 20.0 * std::log10(1.0 + v); });
}

// Pixel minus its periodic L x L neighbourhood mean, clipped at zero, min-max
// normalised over the image, thresholded at > 0.5. A constant image has no ridges.
inline Mask pick_ridges(const Eigen::MatrixXd& p, int window) {
  if (window < 3 || window % 2 == 0) throw Error(ErrorKind::dictionary, "ridge window must be odd and >= 3");
  const Eigen::Index m = p.rows();
  const Eigen::Index n = p.cols();
  const int r = window / 2;
  // Separable periodic box sums.
  Eigen::MatrixXd rows_sum(m, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < m; ++i) {
      double acc = 0.0;
      for (int d = -r; d <= r; ++d) acc += p(((i + d) % m + m) % m, j);
      rows_sum(i, j) = acc;
    }
  Eigen::MatrixXd q(m, n);
  const double area = static_cast<double>(window) * window;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < m; ++i) {
      double acc = 0.0;
      for (int d = -r; d <= r; ++d) acc += rows_sum(i, ((j + d) % n + n) % n);
      q(i, j) = p(i, j) - acc / area;
    }
  // Pixels below their local mean are never ridge candidates.
  q = q.cwiseMax(0.0);
  const double lo = q.minCoeff();
  const double hi = q.maxCoeff();
  Mask ridges = Mask::Constant(m, n, false);
  if (!(hi - lo > 1e-12 * std::max(1.0, p.cwiseAbs().maxCoeff()))) return ridges;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < m; ++i) ridges(i, j) = (q(i, j) - lo) / (hi - lo) > 0.5;
  return ridges;
}

struct ModeMask {
  Mask data;
  std::string label;
  int a = 0;
  int b = 0;
  Bin seed;

  Eigen::Index count() const { return data.count(); }
};

inline bool is_mirror_symmetric(const Mask& d) {
  const Eigen::Index m = d.rows();
  const Eigen::Index n = d.cols();
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < m; ++i)
      if (d(i, j) != d((m - i) % m, (n - j) % n)) return false;
  return true;
}

inline void add_mirror(Mask& d) {
  const Eigen::Index m = d.rows();
  const Eigen::Index n = d.cols();
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < m; ++i)
      if (d(i, j)) d((m - i) % m, (n - j) % n) = true;
}

// Chain growth over the non-negative frequency half from the ridge point
// nearest the seed; mirrored indices are added at the end.
inline ModeMask select_curve(const Mask& ridges, Bin seed, int d_omega, int d_k, std::string label = {}) {
  const Eigen::Index m = ridges.rows();
  const Eigen::Index n = ridges.cols();
  if (d_omega < 0 || d_k < 0) throw Error(ErrorKind::dictionary, "selection distances must be non-negative");
  if (seed.row < 0 || seed.row >= m || seed.col < 0 || seed.col >= n)
    throw Error(ErrorKind::dictionary, "seed outside the spectral image");
  const Eigen::Index half = m / 2;

  std::optional<Bin> start;
  double best = 0.0;
  for (Eigen::Index j = std::max<Eigen::Index>(0, seed.col - d_k); j <= std::min(n - 1, seed.col + d_k); ++j)
    for (Eigen::Index i = std::max<Eigen::Index>(0, seed.row - d_omega); i <= std::min(half, seed.row + d_omega); ++i) {
      if (!ridges(i, j)) continue;
      const double di = static_cast<double>(i - seed.row);
      const double dj = static_cast<double>(j - seed.col);
      const double dist = di * di + dj * dj;
      // Column-major scan visits lower wavenumber indices first, so strict < keeps them on ties.
      if (!start || dist < best) {
        start = Bin{i, j};
        best = dist;
      }
    }
  if (!start) {
    std::ostringstream os;
    os << "mode " << (label.empty() ? "?" : label) << " not found: no ridge point within (" << d_omega << ", "
       << d_k << ") bins of seed (" << seed.row << ", " << seed.col << ")";
    throw Error(ErrorKind::dictionary, os.str());
  }

  ModeMask out{Mask::Constant(m, n, false), std::move(label), 0, 0, seed};
  std::deque<Bin> queue{*start};
  out.data(start->row, start->col) = true;
  while (!queue.empty()) {
    const Bin b = queue.front();
    queue.pop_front();
    for (Eigen::Index j = std::max<Eigen::Index>(0, b.col - d_k); j <= std::min(n - 1, b.col + d_k); ++j)
      for (Eigen::Index i = std::max<Eigen::Index>(0, b.row - d_omega); i <= std::min(half, b.row + d_omega); ++i)
        if (ridges(i, j) && !out.data(i, j)) {
          out.data(i, j) = true;
          queue.push_back({i, j});
        }
  }
  add_mirror(out.data);
  return out;
}

// Box dilation by +-a rows (frequency) and +-b columns (wavenumber), clipped
// at the edges. Clipping at row/column 0 breaks mirror symmetry, so the
// mirror image is merged back in.
inline ModeMask buffer_mask(const ModeMask& mask, int a, int b) {
  if (a < 0 || b < 0) throw Error(ErrorKind::dictionary, "buffer sizes must be non-negative");
  const Eigen::Index m = mask.data.rows();
  const Eigen::Index n = mask.data.cols();
  Mask rows_done = Mask::Constant(m, n, false);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < m; ++i)
      if (mask.data(i, j))
        for (Eigen::Index k = std::max<Eigen::Index>(0, i - a); k <= std::min(m - 1, i + a); ++k) rows_done(k, j) = true;
  ModeMask out = mask;
  out.data = Mask::Constant(m, n, false);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < m; ++i)
      if (rows_done(i, j))
        for (Eigen::Index k = std::max<Eigen::Index>(0, j - b); k <= std::min(n - 1, j + b); ++k) out.data(i, k) = true;
  if (is_mirror_symmetric(mask.data)) add_mirror(out.data);
  out.a = mask.a + a;
  out.b = mask.b + b;
  return out;
}

// U+ = D o U.
inline SpectralField flatten(const Mask& d, const SpectralField& spec) {
  if (d.rows() != spec.data.rows() || d.cols() != spec.data.cols()) {
    std::ostringstream os;
    os << "mask is " << d.rows() << "x" << d.cols() << " but the spectrum is " << spec.data.rows() << "x"
       << spec.data.cols() << "; they must be the same size";
    throw Error(ErrorKind::dictionary, os.str());
  }
  SpectralField out = spec;
  for (Eigen::Index j = 0; j < d.cols(); ++j)
    for (Eigen::Index i = 0; i < d.rows(); ++i)
      if (!d(i, j)) out.data(i, j) = 0.0;
  return out;
}

struct ModeSeed {
  std::string label;
  double frequency = 0.0;   // Hz
  double wavenumber = 0.0;  // rad/m
};

struct DictionaryParams {
  int d_omega = 3;
  int d_k = 3;
  int a = 11;
  int b = 3;
  int window = 5;
};

struct NominalWaveDictionary {
  std::vector<std::string> modes;
  std::vector<Eigen::MatrixXd> signals;  // per mode, time x distance
  std::vector<double> distances;         // mm, strictly increasing
  std::vector<double> ptp;               // per distance
  double dt = 0.0;
  double t0 = 0.0;

  Eigen::Index samples() const { return signals.empty() ? 0 : signals.front().rows(); }

  void validate() const {
    if (modes.empty() || modes.size() != signals.size())
      throw Error(ErrorKind::dictionary, "dictionary needs one signal block per mode");
    for (std::size_t i = 1; i < distances.size(); ++i)
      if (!(distances[i] > distances[i - 1]))
        throw Error(ErrorKind::dictionary, "dictionary distance axis must be strictly increasing");
    for (const auto& s : signals)
      if (s.rows() != samples() || s.cols() != static_cast<Eigen::Index>(distances.size()))
        throw Error(ErrorKind::dictionary, "dictionary mode blocks must share one shape");
    if (ptp.size() != distances.size()) throw Error(ErrorKind::dictionary, "PTP length must match distance axis");
    if (!(dt > 0.0)) throw Error(ErrorKind::dictionary, "dictionary dt must be positive");
  }

  // Column whose distance is nearest to x (lower index on ties).
  std::size_t nearest_column(double x) const {
    std::size_t best = 0;
    for (std::size_t j = 1; j < distances.size(); ++j)
      if (std::abs(distances[j] - x) < std::abs(distances[best] - x)) best = j;
    return best;
  }
};

// Intermediate products of the separation, kept for diagnostics.
struct Separation {
  WaveField normalised;
  SpectralField spectrum;
  Eigen::MatrixXd power;
  Mask ridges;
  std::vector<ModeMask> masks;
  std::vector<WaveField> modes;
};

// Each column divided by its peak |u|; the column's peak-to-peak range is kept.
inline WaveField normalise_columns(const WaveField& field) {
  WaveField out = field;
  out.ptp.assign(static_cast<std::size_t>(field.columns()), 0.0);
  for (Eigen::Index j = 0; j < field.columns(); ++j) {
    const auto col = field.data.col(j);
    out.ptp[static_cast<std::size_t>(j)] = col.maxCoeff() - col.minCoeff();
    const double peak = col.cwiseAbs().maxCoeff();
    if (peak > 0.0) out.data.col(j) /= peak;
  }
  return out;
}

inline Separation separate_modes(const WaveField& baseline, std::span<const ModeSeed> seeds,
                                 const DictionaryParams& params) {
  if (seeds.empty()) throw Error(ErrorKind::dictionary, "at least one mode seed is required");
  Separation s;
  s.normalised = normalise_columns(baseline);
  s.spectrum = tdfft(s.normalised);
  s.power = power_transform(s.spectrum);
  s.ridges = pick_ridges(s.power, params.window);
  for (const auto& seed : seeds) {
    const Bin bin = forward_bin(s.spectrum, seed.frequency, seed.wavenumber);
    auto mask = buffer_mask(select_curve(s.ridges, bin, params.d_omega, params.d_k, seed.label), params.a, params.b);
    s.modes.push_back(itdfft(flatten(mask.data, s.spectrum)));
    s.masks.push_back(std::move(mask));
  }
  return s;
}

inline NominalWaveDictionary pack_dictionary(const Separation& s, std::span<const ModeSeed> seeds) {
  NominalWaveDictionary dict;
  for (std::size_t g = 0; g < seeds.size(); ++g) {
    dict.modes.push_back(seeds[g].label);
    dict.signals.push_back(s.modes[g].data);
  }
  for (Eigen::Index j = 0; j < s.normalised.columns(); ++j) dict.distances.push_back(s.normalised.distance(j));
  dict.ptp = s.normalised.ptp;
  dict.dt = s.normalised.dt;
  dict.t0 = s.normalised.t0;
  dict.validate();
  return dict;
}

inline NominalWaveDictionary build_dictionary(const WaveField& baseline, std::span<const ModeSeed> seeds,
                                              const DictionaryParams& params = {}) {
  return pack_dictionary(separate_modes(baseline, seeds, params), seeds);
}

}  // namespace gw::field2d
