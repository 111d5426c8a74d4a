#pragma once

// Reflection-source localisation: the collinear single-sensor distance and
// dTOA triangulation by Nelder-Mead.
//
// Positions are in mm, times in s and speeds in m/s at the interface. The
// optimiser works in mm and us so that its tolerances (1e-6 mm, 1e-14 us^2)
// are meaningful; in SI a dTOA cost is ~1e-12 s^2 and the spread test would
// stop on the first iteration.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "guidedwave/error.hpp"
#include "guidedwave/geometry.hpp"

namespace gw::triangulate {

struct SensorRecord {
  std::string label;
  Vec2 position;                       // mm
  double distance = 0.0;               // mm from the actuator
  std::optional<double> t_incident;    // s
  std::optional<double> t_reflection;  // s
  double noise_variance = std::numeric_limits<double>::quiet_NaN();
};

// d = c (t_ref - t_inc) / 2, in mm. Only meaningful when the sensor lies
// between the actuator and the reflector on one line.
inline double localise_1d(double t_reflection, double t_incident, double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw Error(ErrorKind::localisation, "wave speed must be positive");
  if (!std::isfinite(t_reflection) || !std::isfinite(t_incident))
    throw Error(ErrorKind::localisation, "onset times must be finite");
  if (t_reflection < t_incident) {
    std::ostringstream os;
    os << "reflection onset " << t_reflection << " s precedes incident onset " << t_incident << " s";
    throw Error(ErrorKind::localisation, os.str());
  }
  return 0.5 * c * (t_reflection - t_incident) * 1e3;
}

struct PairDelay {
  std::size_t i = 0;  // i < j
  std::size_t j = 0;
  double dt = 0.0;  // t_i - t_j, s
};

inline std::vector<PairDelay> dtoa(const std::vector<SensorRecord>& records) {
  if (records.size() < 2) throw Error(ErrorKind::localisation, "dTOA needs at least two sensors");
  for (const auto& r : records)
    if (!r.t_reflection || !std::isfinite(*r.t_reflection))
      throw Error(ErrorKind::localisation, "sensor " + r.label + " has no reflection onset");
  std::vector<PairDelay> out;
  for (std::size_t i = 0; i < records.size(); ++i)
    for (std::size_t j = i + 1; j < records.size(); ++j)
      out.push_back({i, j, *records[i].t_reflection - *records[j].t_reflection});
  return out;
}

// J = sum over pairs of (t_ij - (|E - S_i| - |E - S_j|)/c)^2, in us^2.
inline double cost(Vec2 e, const std::vector<SensorRecord>& records, const std::vector<PairDelay>& pairs, double c) {
  const double c_mm_us = c * 1e-3;
  double j = 0.0;
  for (const auto& p : pairs) {
    const double model = (distance(e, records[p.i].position) - distance(e, records[p.j].position)) / c_mm_us;
    const double d = p.dt * 1e6 - model;
    j += d * d;
  }
  return j;
}

struct NelderMeadOptions {
  double diameter_tolerance = 1e-6;  // mm
  double cost_tolerance = 1e-14;
  int max_iterations = 10000;
};

struct NelderMeadResult {
  Vec2 point;
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Standard simplex search with reflection, expansion, contraction and shrink
// coefficients 1, 2, 1/2, 1/2. The best vertex never gets worse. Stops when
// both the diameter and the cost spread are below tolerance: the spread test
// alone stops a few 1e-6 mm short along the flat direction of a dTOA cost.
inline NelderMeadResult minimise_nelder_mead(const std::function<double(Vec2)>& f, std::array<Vec2, 3> simplex,
                                             const NelderMeadOptions& opt = {}) {
  for (const auto& v : simplex)
    if (!is_finite(v)) throw Error(ErrorKind::localisation, "initial simplex has a non-finite vertex");
  const Vec2 e1 = simplex[1] - simplex[0];
  const Vec2 e2 = simplex[2] - simplex[0];
  const double area = std::abs(e1.x * e2.y - e1.y * e2.x);
  const double scale = std::max({norm(e1), norm(e2), norm(simplex[2] - simplex[1])});
  if (!(area > 1e-12 * scale * scale)) throw Error(ErrorKind::localisation, "initial simplex is degenerate");

  std::array<double, 3> fv{};
  for (int k = 0; k < 3; ++k) fv[k] = f(simplex[k]);
  auto order = [&] {
    std::array<int, 3> idx{0, 1, 2};
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return fv[a] < fv[b]; });
    const std::array<Vec2, 3> s{simplex[idx[0]], simplex[idx[1]], simplex[idx[2]]};
    const std::array<double, 3> v{fv[idx[0]], fv[idx[1]], fv[idx[2]]};
    simplex = s;
    fv = v;
  };
  auto diameter = [&] {
    return std::max({distance(simplex[0], simplex[1]), distance(simplex[0], simplex[2]),
                     distance(simplex[1], simplex[2])});
  };

  NelderMeadResult out;
  order();
  for (out.iterations = 0; out.iterations < opt.max_iterations; ++out.iterations) {
    if (diameter() < opt.diameter_tolerance && fv[2] - fv[0] < opt.cost_tolerance) {
      out.converged = true;
      break;
    }
    const Vec2 centroid = 0.5 * (simplex[0] + simplex[1]);
    const Vec2 xr = centroid + (centroid - simplex[2]);
    const double fr = f(xr);
    if (fr < fv[0]) {
      const Vec2 xe = centroid + 2.0 * (centroid - simplex[2]);
      const double fe = f(xe);
      if (fe < fr) {
        simplex[2] = xe;
        fv[2] = fe;
      } else {
        simplex[2] = xr;
        fv[2] = fr;
      }
    } else if (fr < fv[1]) {
      simplex[2] = xr;
      fv[2] = fr;
    } else {
      bool accepted = false;
      if (fr < fv[2]) {
        const Vec2 xc = centroid + 0.5 * (xr - centroid);
        const double fc = f(xc);
        if (fc <= fr) {
          simplex[2] = xc;
          fv[2] = fc;
          accepted = true;
        }
      } else {
        const Vec2 xc = centroid + 0.5 * (simplex[2] - centroid);
        const double fc = f(xc);
        if (fc < fv[2]) {
          simplex[2] = xc;
          fv[2] = fc;
          accepted = true;
        }
      }
      if (!accepted)
        for (int k = 1; k < 3; ++k) {
          simplex[k] = simplex[0] + 0.5 * (simplex[k] - simplex[0]);
          fv[k] = f(simplex[k]);
        }
    }
    order();
  }
  out.point = simplex[0];
  out.cost = fv[0];
  return out;
}

struct Bounds {
  Vec2 lo;
  Vec2 hi;

  bool contains(Vec2 p) const { return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y; }
  Vec2 clamp(Vec2 p) const { return {std::clamp(p.x, lo.x, hi.x), std::clamp(p.y, lo.y, hi.y)}; }
};

struct LocaliseOptions {
  std::optional<Bounds> bounds;  // cost is +inf outside
  NelderMeadOptions nelder_mead;
  double ill_conditioning_ratio = 1e4;
  // Final costs within this of the best (us^2) count as tied.
  double tie_tolerance = 1e-10;
  // Known actuator position. Three sensors give two dTOAs and so generally two
  // exact solutions; among tied candidates the one whose implied emission time
  // best matches the actuator-to-source travel time is kept.
  std::optional<Vec2> actuator;
};

struct StartResult {
  Vec2 start;
  NelderMeadResult result;
};

struct LocationEstimate {
  Vec2 estimate;
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<PairDelay> pairs;
  double speed = 0.0;  // m/s
  std::vector<StartResult> starts;
  std::size_t best_start = 0;
  bool ambiguous = false;  // another tied start ended more than 1e-3 mm away
  double curvature_ratio = 0.0;  // max/min Hessian eigenvalue of J at the estimate
  bool ill_conditioned = false;
};

// Centroid of the sensors, then centroid +- a quarter of the bounding box
// extent in each axis.
inline std::vector<Vec2> start_points(const std::vector<SensorRecord>& records) {
  Vec2 lo = records.front().position;
  Vec2 hi = lo;
  Vec2 c{0.0, 0.0};
  for (const auto& r : records) {
    lo = {std::min(lo.x, r.position.x), std::min(lo.y, r.position.y)};
    hi = {std::max(hi.x, r.position.x), std::max(hi.y, r.position.y)};
    c = c + r.position;
  }
  c = (1.0 / static_cast<double>(records.size())) * c;
  const double qx = 0.25 * (hi.x - lo.x);
  const double qy = 0.25 * (hi.y - lo.y);
  return {c, c + Vec2{-qx, -qy}, c + Vec2{qx, -qy}, c + Vec2{-qx, qy}, c + Vec2{qx, qy}};
}

// Central-difference Hessian of f at p; returns max/min eigenvalue magnitude,
// infinite when the smaller one is not positive.
inline double curvature_ratio(const std::function<double(Vec2)>& f, Vec2 p, double h) {
  const double f0 = f(p);
  const double fxx = (f(p + Vec2{h, 0}) - 2.0 * f0 + f(p - Vec2{h, 0})) / (h * h);
  const double fyy = (f(p + Vec2{0, h}) - 2.0 * f0 + f(p - Vec2{0, h})) / (h * h);
  const double fxy = (f(p + Vec2{h, h}) - f(p + Vec2{h, -h}) - f(p + Vec2{-h, h}) + f(p + Vec2{-h, -h})) / (4.0 * h * h);
  Eigen::Matrix2d hess;
  hess << fxx, fxy, fxy, fyy;
  const Eigen::Vector2d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(hess).eigenvalues();
  if (!(ev[0] > 0.0)) return std::numeric_limits<double>::infinity();
  return ev[1] / ev[0];
}

// One Nelder-Mead run per start, each from a right-angled simplex whose legs
// equal the spread of the starts (at least 1 mm).
inline std::vector<StartResult> multi_start(const std::function<double(Vec2)>& f, const std::vector<Vec2>& starts,
                                            const LocaliseOptions& opt = {}) {
  double extent = 0.0;
  for (const auto& s : starts) extent = std::max(extent, distance(s, starts.front()));
  const double step = std::max(extent, 1.0);
  std::vector<StartResult> out;
  for (auto s : starts) {
    if (opt.bounds) s = opt.bounds->clamp(s);
    // Step towards the interior when a start sits on the upper bound.
    const double sx = opt.bounds && s.x + step > opt.bounds->hi.x ? -step : step;
    const double sy = opt.bounds && s.y + step > opt.bounds->hi.y ? -step : step;
    out.push_back({s, minimise_nelder_mead(f, {s, s + Vec2{sx, 0.0}, s + Vec2{0.0, sy}}, opt.nelder_mead)});
  }
  return out;
}

// Lowest final cost wins; ties go to the earlier start.
inline std::size_t best_start(const std::vector<StartResult>& starts, double tie_tolerance = 0.0) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < starts.size(); ++k)
    if (starts[k].result.cost < starts[best].result.cost) best = k;
  for (std::size_t k = 0; k < best; ++k)
    if (starts[k].result.cost <= starts[best].result.cost + tie_tolerance) return k;
  return best;
}

// |mean_i(t_i - |E - S_i|/c) - |E - A|/c| in us: how far the emission time
// implied by E is from the incident wave reaching E.
inline double emission_mismatch(Vec2 e, Vec2 actuator, const std::vector<SensorRecord>& records, double c) {
  const double c_mm_us = c * 1e-3;
  double mean = 0.0;
  for (const auto& r : records) mean += r.t_reflection.value_or(0.0) * 1e6 - distance(e, r.position) / c_mm_us;
  mean /= static_cast<double>(records.size());
  return std::abs(mean - distance(e, actuator) / c_mm_us);
}

inline LocationEstimate localise_2d(const std::vector<SensorRecord>& records, double c,
                                    const LocaliseOptions& opt = {}) {
  if (records.size() < 3) {
    std::ostringstream os;
    os << "2-D localisation needs at least 3 sensors, got " << records.size();
    throw Error(ErrorKind::localisation, os.str());
  }
  if (!(c > 0.0) || !std::isfinite(c)) throw Error(ErrorKind::localisation, "wave speed must be positive");
  for (const auto& r : records)
    if (!is_finite(r.position)) throw Error(ErrorKind::localisation, "sensor " + r.label + " position is not finite");

  LocationEstimate out;
  out.speed = c;
  out.pairs = dtoa(records);
  const std::function<double(Vec2)> f = [&](Vec2 e) {
    if (opt.bounds && !opt.bounds->contains(e)) return std::numeric_limits<double>::infinity();
    return cost(e, records, out.pairs, c);
  };

  out.starts = multi_start(f, start_points(records), opt);
  out.best_start = best_start(out.starts, opt.tie_tolerance);
  const double floor = out.starts[out.best_start].result.cost;
  for (std::size_t k = 0; k < out.starts.size(); ++k) {
    const auto& r = out.starts[k].result;
    if (!(r.cost <= floor + opt.tie_tolerance)) continue;
    if (distance(r.point, out.starts[out.best_start].result.point) > 1e-3) out.ambiguous = true;
  }
  if (opt.actuator && out.ambiguous) {
    double best_mismatch = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < out.starts.size(); ++k) {
      const auto& r = out.starts[k].result;
      if (!(r.cost <= floor + opt.tie_tolerance)) continue;
      const double m = emission_mismatch(r.point, *opt.actuator, records, c);
      if (m < best_mismatch) {
        best_mismatch = m;
        out.best_start = k;
      }
    }
  }

  const auto& best = out.starts[out.best_start].result;
  out.estimate = best.point;
  out.cost = best.cost;
  out.iterations = best.iterations;
  out.converged = best.converged && std::isfinite(best.cost);
  const auto unbounded = [&](Vec2 e) { return cost(e, records, out.pairs, c); };
  out.curvature_ratio = curvature_ratio(unbounded, out.estimate, 1e-2);
  out.ill_conditioned = !(out.curvature_ratio <= opt.ill_conditioning_ratio);
  return out;
}

struct JitterOptions {
  int trials = 200;
  double sigma = 50e-9;  // s, added independently to every reflection onset
  std::uint64_t seed = 0;
};

struct Scatter {
  std::vector<Vec2> points;
  Vec2 mean;
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
  double major = 0.0;  // 1-sigma semi-axes, mm
  double minor = 0.0;
  double angle = 0.0;  // major axis from +x, rad
};

// Monte-Carlo propagation of onset uncertainty to the location estimate.
inline Scatter jitter_scatter(const std::vector<SensorRecord>& records, double c, const JitterOptions& jitter,
                              const LocaliseOptions& opt = {}) {
  if (jitter.trials < 2) throw Error(ErrorKind::localisation, "jitter needs at least two trials");
  if (!(jitter.sigma >= 0.0)) throw Error(ErrorKind::localisation, "jitter sigma must be non-negative");
  std::mt19937_64 rng(jitter.seed);
  std::normal_distribution<double> noise(0.0, jitter.sigma);
  Scatter out;
  auto trial = records;
  for (int t = 0; t < jitter.trials; ++t) {
    for (std::size_t k = 0; k < records.size(); ++k)
      trial[k].t_reflection = records[k].t_reflection.value_or(std::numeric_limits<double>::quiet_NaN()) + noise(rng);
    out.points.push_back(localise_2d(trial, c, opt).estimate);
  }
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : out.points) mean += Eigen::Vector2d(p.x, p.y);
  mean /= static_cast<double>(out.points.size());
  for (const auto& p : out.points) {
    const Eigen::Vector2d d = Eigen::Vector2d(p.x, p.y) - mean;
    out.covariance += d * d.transpose();
  }
  out.covariance /= static_cast<double>(out.points.size() - 1);
  out.mean = {mean.x(), mean.y()};
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(out.covariance);
  out.major = std::sqrt(std::max(es.eigenvalues()[1], 0.0));
  out.minor = std::sqrt(std::max(es.eigenvalues()[0], 0.0));
  out.angle = std::atan2(es.eigenvectors()(1, 1), es.eigenvectors()(0, 1));
  return out;
}

}  // namespace gw::triangulate
