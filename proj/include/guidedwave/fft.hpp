#pragma once

// Thin wrappers over Eigen's FFT module. Forward transforms are unnormalised;
// inverse transforms carry the 1/n factor.

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Core>
#include <unsupported/Eigen/FFT>

namespace gw::fft {

using cplx = std::complex<double>;

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

inline std::vector<cplx> forward(const std::vector<cplx>& x) {
  Eigen::FFT<double> engine;
  std::vector<cplx> out;
  engine.fwd(out, x);
  return out;
}

inline std::vector<cplx> inverse(const std::vector<cplx>& x) {
  Eigen::FFT<double> engine;
  std::vector<cplx> out;
  engine.inv(out, x);
  return out;
}

// Signed frequency of bin i for an n-point transform, in units of 1/(n*step).
inline double bin_frequency(std::size_t i, std::size_t n, double step) {
  const double scale = 1.0 / (static_cast<double>(n) * step);
  return (i <= n / 2 ? static_cast<double>(i) : static_cast<double>(i) - static_cast<double>(n)) * scale;
}

// 2-D transform along columns then rows. inverse applies 1/(rows*cols).
inline void transform_2d(Eigen::MatrixXcd& a, bool inverse) {
  Eigen::FFT<double> engine;
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  std::vector<cplx> in(static_cast<std::size_t>(m));
  std::vector<cplx> out;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) in[i] = a(i, j);
    inverse ? engine.inv(out, in) : engine.fwd(out, in);
    for (Eigen::Index i = 0; i < m; ++i) a(i, j) = out[i];
  }
  in.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) in[j] = a(i, j);
    inverse ? engine.inv(out, in) : engine.fwd(out, in);
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = out[j];
  }
}

}  // namespace gw::fft
