#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "guidedwave/error.hpp"

namespace gw {

// Surface displacement u(t, x): rows are time samples, columns are distances.
// Storage is column-major, so time runs fastest in memory.
struct WaveField {
  Eigen::MatrixXd data;
  double dt = 0.0;  // s
  double dx = 0.0;  // mm
  double t0 = 0.0;  // s
  double x0 = 0.0;  // mm
  std::vector<double> ptp;  // per-column peak-to-peak range, empty when not recorded

  Eigen::Index samples() const { return data.rows(); }
  Eigen::Index columns() const { return data.cols(); }
  double time(Eigen::Index i) const { return t0 + static_cast<double>(i) * dt; }
  double distance(Eigen::Index j) const { return x0 + static_cast<double>(j) * dx; }

  void validate(ErrorKind kind = ErrorKind::synthesis) const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(kind, "wavefield dt must be positive");
    if (!(dx > 0.0) || !std::isfinite(dx)) throw Error(kind, "wavefield dx must be positive");
    if (!std::isfinite(t0) || !std::isfinite(x0)) throw Error(kind, "wavefield origin must be finite");
    if (data.size() == 0) throw Error(kind, "wavefield is empty");
    if (!data.allFinite()) throw Error(kind, "wavefield has non-finite entries");
    if (!ptp.empty() && ptp.size() != static_cast<std::size_t>(data.cols()))
      throw Error(kind, "wavefield ptp length " + std::to_string(ptp.size()) + " does not match " +
                            std::to_string(data.cols()) + " columns");
  }
};

}  // namespace gw
