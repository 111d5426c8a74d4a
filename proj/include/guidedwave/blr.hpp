#pragma once

// Conjugate Bayesian linear regression with a normal-inverse-gamma prior,
// and the single-sensor decomposition against a nominal wave dictionary.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "guidedwave/error.hpp"
#include "guidedwave/field2d.hpp"

namespace gw::blr {

// The prior is stored through its precision Lambda0 = V0^{-1}; a zero
// precision is the flat limit.
struct NIGPrior {
  Eigen::VectorXd w0;
  Eigen::MatrixXd precision;
  double a0 = 0.0;
  double b0 = 0.0;

  // Zellner g-prior: V0 = g (X^T X)^{-1}, so Lambda0 = X^T X / g.
  static NIGPrior zellner(const Eigen::MatrixXd& x, double g, double a0 = 0.0, double b0 = 0.0) {
    if (!(g > 0.0) || !std::isfinite(g)) throw Error(ErrorKind::regression, "g-prior scale must be positive");
    return {Eigen::VectorXd::Zero(x.cols()), (x.transpose() * x) / g, a0, b0};
  }

  static NIGPrior from_covariance(const Eigen::VectorXd& w0, const Eigen::MatrixXd& v0, double a0, double b0) {
    if (v0.rows() != v0.cols() || v0.rows() != w0.size())
      throw Error(ErrorKind::regression, "prior covariance shape does not match w0");
    Eigen::LLT<Eigen::MatrixXd> llt(v0);
    if (llt.info() != Eigen::Success) throw Error(ErrorKind::regression, "prior covariance is not positive definite");
    return {w0, llt.solve(Eigen::MatrixXd::Identity(v0.rows(), v0.cols())), a0, b0};
  }

  static NIGPrior flat(Eigen::Index p, double a0 = 0.0, double b0 = 0.0) {
    return {Eigen::VectorXd::Zero(p), Eigen::MatrixXd::Zero(p, p), a0, b0};
  }
};

struct NIGPosterior {
  Eigen::VectorXd w;
  Eigen::MatrixXd v;  // covariance shape V_N
  double a = 0.0;
  double b = 0.0;

  double noise_variance() const { return b / a; }
};

inline NIGPosterior fit_posterior(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const NIGPrior& prior) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (n < 1) throw Error(ErrorKind::regression, "regression needs at least one observation");
  if (y.size() != n) throw Error(ErrorKind::regression, "design matrix and target lengths differ");
  if (!x.allFinite() || !y.allFinite()) throw Error(ErrorKind::regression, "non-finite regression data");
  if (prior.w0.size() != p || prior.precision.rows() != p || prior.precision.cols() != p)
    throw Error(ErrorKind::regression, "prior dimension does not match the design matrix");
  if (!(prior.a0 >= 0.0) || !(prior.b0 >= 0.0)) throw Error(ErrorKind::regression, "a0 and b0 must be non-negative");
  if (prior.a0 == 0.0 && prior.b0 == 0.0 && n <= p)
    throw Error(ErrorKind::regression, "the less-informative prior needs more observations than weights");

  const Eigen::MatrixXd lambda_n = prior.precision + x.transpose() * x;
  Eigen::LLT<Eigen::MatrixXd> llt(lambda_n);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-13)) {
    std::ostringstream os;
    os << "posterior precision V0^-1 + X^T X is numerically singular (reciprocal condition "
       << (llt.info() == Eigen::Success ? llt.rcond() : 0.0) << ")";
    throw Error(ErrorKind::regression, os.str());
  }
  NIGPosterior post;
  post.w = llt.solve(prior.precision * prior.w0 + x.transpose() * y);
  post.v = llt.solve(Eigen::MatrixXd::Identity(p, p));
  post.a = prior.a0 + 0.5 * static_cast<double>(n);
  // Equal to b0 + (w0' L0 w0 + y'y - wN' LN wN)/2 without the cancellation.
  const Eigen::VectorXd r = y - x * post.w;
  const Eigen::VectorXd dw = post.w - prior.w0;
  post.b = prior.b0 + 0.5 * (r.squaredNorm() + dw.dot(prior.precision * dw));
  return post;
}

struct Prediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};

// Mean X~ w_N and the diagonal of (b_N/a_N)(I + X~ V_N X~^T).
inline Prediction predict(const NIGPosterior& post, const Eigen::MatrixXd& xt) {
  if (xt.cols() != post.w.size()) {
    std::ostringstream os;
    os << "prediction inputs have " << xt.cols() << " columns, posterior has " << post.w.size() << " weights";
    throw Error(ErrorKind::regression, os.str());
  }
  if (!(post.a > 0.0)) throw Error(ErrorKind::regression, "posterior shape a_N must be positive");
  const double scale = post.b / post.a;
  Prediction out;
  out.mean = xt * post.w;
  out.variance = scale * (1.0 + ((xt * post.v).array() * xt.array()).rowwise().sum()).matrix();
  return out;
}

// Sum of independent Gaussian log-densities (natural log).
inline double pll(const Eigen::VectorXd& y, const Eigen::VectorXd& mean, const Eigen::VectorXd& variance) {
  if (y.size() != mean.size() || y.size() != variance.size())
    throw Error(ErrorKind::regression, "PLL inputs differ in length");
  double total = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!(variance[i] > 0.0)) {
      std::ostringstream os;
      os << "predictive variance at sample " << i << " is " << variance[i] << " (must be > 0)";
      throw Error(ErrorKind::regression, os.str());
    }
    const double d = y[i] - mean[i];
    total += -0.5 * std::log(2.0 * std::numbers::pi * variance[i]) - d * d / (2.0 * variance[i]);
  }
  return total;
}

struct PriorConfig {
  std::optional<double> g;  // defaults to n, the unit-information prior
  double a0 = 0.0;
  double b0 = 0.0;
};

struct DecompositionResult {
  std::vector<std::string> modes;
  Eigen::VectorXd weights;             // signal units
  Eigen::VectorXd normalised_weights;  // weights on y / range(y)
  Eigen::VectorXd predicted;           // signal units
  Eigen::VectorXd variance;            // signal units squared
  double noise_variance = 0.0;         // b_N / a_N on the normalised signal
  double pll = 0.0;                    // on the normalised signal
  double range = 0.0;
  double distance_used = 0.0;
  std::size_t column = 0;
  NIGPosterior posterior;
};

inline double range_of(const Eigen::VectorXd& v) { return v.maxCoeff() - v.minCoeff(); }

inline DecompositionResult decompose_signal(const Eigen::VectorXd& y, double x_hat,
                                            const field2d::NominalWaveDictionary& dict, const PriorConfig& config = {}) {
  dict.validate();
  if (y.size() != dict.samples()) {
    std::ostringstream os;
    os << "signal has " << y.size() << " samples, dictionary time axis has " << dict.samples();
    throw Error(ErrorKind::regression, os.str());
  }
  const double step = dict.distances.size() > 1 ? dict.distances[1] - dict.distances[0] : 0.0;
  if (!(x_hat >= dict.distances.front() - step && x_hat <= dict.distances.back() + step)) {
    std::ostringstream os;
    os << "distance " << x_hat << " mm is outside the dictionary span [" << dict.distances.front() << ", "
       << dict.distances.back() << "] mm";
    throw Error(ErrorKind::regression, os.str());
  }
  if (!y.allFinite()) throw Error(ErrorKind::regression, "measured signal has non-finite samples");
  const double range = range_of(y);
  if (!(range > 0.0)) throw Error(ErrorKind::regression, "measured signal is constant (zero range)");

  DecompositionResult out;
  out.modes = dict.modes;
  out.range = range;
  out.column = dict.nearest_column(x_hat);
  out.distance_used = dict.distances[out.column];

  const Eigen::VectorXd y_star = y / range;
  Eigen::MatrixXd x(y.size(), static_cast<Eigen::Index>(dict.modes.size()));
  for (std::size_t g = 0; g < dict.modes.size(); ++g) {
    const Eigen::VectorXd phi = dict.signals[g].col(static_cast<Eigen::Index>(out.column));
    const double r = range_of(phi);
    if (!(r > 0.0))
      throw Error(ErrorKind::regression,
                  "dictionary mode " + dict.modes[g] + " is empty at " + std::to_string(out.distance_used) + " mm");
    x.col(static_cast<Eigen::Index>(g)) = phi / r;
  }

  const double g = config.g.value_or(static_cast<double>(y.size()));
  out.posterior = fit_posterior(x, y_star, NIGPrior::zellner(x, g, config.a0, config.b0));
  const auto pred = predict(out.posterior, x);
  out.normalised_weights = out.posterior.w;
  out.weights = out.posterior.w * range;
  out.predicted = pred.mean * range;
  out.variance = pred.variance * (range * range);
  out.noise_variance = out.posterior.noise_variance();
  out.pll = pll(y_star, pred.mean, pred.variance);
  return out;
}

}  // namespace gw::blr
