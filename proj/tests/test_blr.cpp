#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "guidedwave/blr.hpp"
#include "guidedwave/wavesynth.hpp"

namespace {

using namespace gw::blr;

Eigen::MatrixXd random_matrix(Eigen::Index n, Eigen::Index p, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < n; ++i) x(i, j) = g(rng);
  return x;
}

// Textbook NIG update with explicit inverses and the printed b_N expression.
struct TextbookPosterior {
  Eigen::VectorXd w;
  Eigen::MatrixXd v;
  double a;
  double b;
};

TextbookPosterior textbook(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w0,
                           const Eigen::MatrixXd& v0, double a0, double b0) {
  const Eigen::MatrixXd v0_inv = v0.inverse();
  const Eigen::MatrixXd vn = (v0_inv + x.transpose() * x).inverse();
  const Eigen::VectorXd wn = vn * (v0_inv * w0 + x.transpose() * y);
  const double an = a0 + x.rows() / 2.0;
  const double bn = b0 + 0.5 * (w0.dot(v0_inv * w0) + y.dot(y) - wn.dot(vn.inverse() * wn));
  return {wn, vn, an, bn};
}

TEST(FitPosterior, LargeGRecoversLeastSquares) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = random_matrix(30, 3, rng);
    const Eigen::VectorXd y = random_matrix(30, 1, rng);
    const auto post = fit_posterior(x, y, NIGPrior::zellner(x, 1e12));
    const Eigen::VectorXd ols = (x.transpose() * x).ldlt().solve(x.transpose() * y);
    EXPECT_LT((post.w - ols).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(FitPosterior, SmallGShrinksToPriorMean) {
  std::mt19937_64 rng(2);
  const auto x = random_matrix(30, 2, rng);
  const Eigen::VectorXd y = random_matrix(30, 1, rng);
  EXPECT_LT(fit_posterior(x, y, NIGPrior::zellner(x, 1e-12)).w.cwiseAbs().maxCoeff(), 1e-10);
}

TEST(FitPosterior, PerfectFitLeavesNoResidualScale) {
  std::mt19937_64 rng(3);
  const auto x = random_matrix(25, 3, rng);
  const Eigen::VectorXd y = x * Eigen::Vector3d(1.0, -2.0, 0.5);
  const auto post = fit_posterior(x, y, NIGPrior::flat(3));
  EXPECT_LT(post.b, 1e-20 * y.squaredNorm());
  EXPECT_LT(fit_posterior(x, y, NIGPrior::zellner(x, 1e12)).b, 1e-10 * y.squaredNorm());
}

TEST(FitPosterior, MatchesTextbookImplementation) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_matrix(20, 2, rng);
    const Eigen::VectorXd y = x * Eigen::Vector2d(0.7, -1.3) + 0.3 * random_matrix(20, 1, rng);
    const Eigen::MatrixXd l = random_matrix(2, 2, rng);
    const Eigen::MatrixXd v0 = l * l.transpose() + Eigen::MatrixXd::Identity(2, 2);
    const Eigen::VectorXd w0 = random_matrix(2, 1, rng);
    const auto post = fit_posterior(x, y, NIGPrior::from_covariance(w0, v0, 2.0, 1.0));
    const auto ref = textbook(x, y, w0, v0, 2.0, 1.0);
    EXPECT_LT((post.w - ref.w).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((post.v - ref.v).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_EQ(post.a, ref.a);
    EXPECT_NEAR(post.b / ref.b, 1.0, 1e-10);
  }
}

TEST(FitPosterior, RejectsSingularAndUnderdeterminedProblems) {
  Eigen::MatrixXd x(10, 2);
  x.col(0).setLinSpaced(10, 0.0, 1.0);
  x.col(1) = 2.0 * x.col(0);
  const Eigen::VectorXd y = Eigen::VectorXd::Ones(10);
  try {
    fit_posterior(x, y, NIGPrior::flat(2));
    FAIL();
  } catch (const gw::Error& e) {
    EXPECT_EQ(e.kind(), gw::ErrorKind::regression);
    EXPECT_NE(std::string(e.what()).find("singular"), std::string::npos);
  }
  std::mt19937_64 rng(5);
  EXPECT_THROW(fit_posterior(random_matrix(2, 3, rng), Eigen::VectorXd::Ones(2), NIGPrior::flat(3)), gw::Error);
  EXPECT_NO_THROW(fit_posterior(random_matrix(2, 3, rng), Eigen::VectorXd::Ones(2),
                                NIGPrior::from_covariance(Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3), 1.0, 1.0)));
}

TEST(Predict, NoiseFloorDuplicatesAndBound) {
  std::mt19937_64 rng(6);
  const auto x = random_matrix(40, 2, rng);
  const Eigen::VectorXd y = x * Eigen::Vector2d(1.0, 1.0) + random_matrix(40, 1, rng);
  const auto post = fit_posterior(x, y, NIGPrior::zellner(x, 40.0));
  const auto zero = predict(post, Eigen::MatrixXd::Zero(5, 2));
  EXPECT_EQ(zero.mean.cwiseAbs().maxCoeff(), 0.0);
  for (double v : zero.variance) EXPECT_DOUBLE_EQ(v, post.b / post.a);

  Eigen::MatrixXd dup(2, 2);
  dup.row(0) = x.row(3);
  dup.row(1) = x.row(3);
  const auto d = predict(post, dup);
  EXPECT_EQ(d.mean[0], d.mean[1]);
  EXPECT_EQ(d.variance[0], d.variance[1]);

  const auto train = predict(post, x);
  for (double v : train.variance) EXPECT_GE(v, post.b / post.a);
  EXPECT_THROW(predict(post, Eigen::MatrixXd::Zero(3, 3)), gw::Error);
}

TEST(Predict, MatchesClosedFormDiagonal) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_matrix(30, 3, rng);
    const Eigen::VectorXd y = random_matrix(30, 1, rng);
    const auto post = fit_posterior(x, y, NIGPrior::zellner(x, 30.0));
    const auto xt = random_matrix(7, 3, rng);
    const Eigen::MatrixXd full =
        (post.b / post.a) * (Eigen::MatrixXd::Identity(7, 7) + xt * post.v * xt.transpose());
    const auto pred = predict(post, xt);
    EXPECT_LT((pred.variance - full.diagonal()).cwiseAbs().maxCoeff(), 1e-10 * full.diagonal().maxCoeff());
    EXPECT_LT((pred.mean - xt * post.w).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Pll, UnitHeightGaussianAndVarianceScaling) {
  const Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(8, -1.0, 1.0);
  const Eigen::VectorXd v = Eigen::VectorXd::Constant(8, 1.0 / (2.0 * std::numbers::pi));
  EXPECT_NEAR(pll(y, y, v), 0.0, 1e-14);
  EXPECT_NEAR(pll(y, y, v) - pll(y, y, 2.0 * v), 4.0 * std::log(2.0), 1e-12);
  EXPECT_THROW(pll(y, y, Eigen::VectorXd::Zero(8)), gw::Error);
}

TEST(Pll, MatchesDensityProduct) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  Eigen::VectorXd y(50), m(50), v(50);
  double ref = 0.0;
  for (int i = 0; i < 50; ++i) {
    y[i] = u(rng);
    m[i] = u(rng);
    v[i] = u(rng);
    ref += std::log(std::exp(-(y[i] - m[i]) * (y[i] - m[i]) / (2 * v[i])) / std::sqrt(2 * M_PI * v[i]));
  }
  EXPECT_NEAR(pll(y, m, v), ref, 1e-10);
}

// Two-mode toy dictionary: bursts whose arrival moves with distance.
gw::field2d::NominalWaveDictionary toy_dictionary() {
  gw::field2d::NominalWaveDictionary d;
  d.modes = {"A0", "S0"};
  d.dt = 1.0 / 20e6;
  const Eigen::Index m = 800;
  for (int j = 0; j <= 10; ++j) {
    d.distances.push_back(10.0 * j);
    d.ptp.push_back(1.0);
  }
  for (int g = 0; g < 2; ++g) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(m, 11);
    for (int j = 0; j <= 10; ++j)
      for (Eigen::Index i = 0; i < m; ++i) {
        const double t = static_cast<double>(i) * d.dt - (g == 0 ? 3.3e-6 : 1.9e-6) * j;
        s(i, j) = gw::wavesynth::toneburst_value(t, 1.0e6, 5.0) * (g == 0 ? 1.0 : 0.4);
      }
    d.signals.push_back(s);
  }
  return d;
}

Eigen::VectorXd design_column(const gw::field2d::NominalWaveDictionary& d, int g, int j) {
  const Eigen::VectorXd phi = d.signals[g].col(j);
  return phi / range_of(phi);
}

TEST(Decompose, ExactLinearModelRecoversWeights) {
  const auto d = toy_dictionary();
  const Eigen::VectorXd y = 2.0 * design_column(d, 0, 5) + 0.5 * design_column(d, 1, 5);
  const auto r = decompose_signal(y, 51.0, d);
  EXPECT_EQ(r.column, 5u);
  EXPECT_EQ(r.distance_used, 50.0);
  EXPECT_NEAR(r.weights[0] / r.weights[1], 4.0, 1e-6);
  // With y in the span only the g-prior shrinkage remains: b_N = y*'y* / (2(1 + g)).
  const double n = static_cast<double>(y.size());
  EXPECT_NEAR(r.noise_variance / (y.squaredNorm() / (r.range * r.range) / ((1.0 + n) * n)), 1.0, 1e-9);
  EXPECT_LT((r.predicted - y).cwiseAbs().maxCoeff(), 1e-3 * r.range);
  EXPECT_GE(r.variance.minCoeff(), 0.0);
}

TEST(Decompose, NoiseVarianceIsCalibrated) {
  const auto d = toy_dictionary();
  const Eigen::VectorXd clean = 2.0 * design_column(d, 0, 4) + 0.5 * design_column(d, 1, 4);
  std::mt19937_64 rng(9);
  const double sigma = 0.05;
  std::normal_distribution<double> noise(0.0, sigma);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd y = clean;
    for (auto& v : y) v += noise(rng);
    const auto r = decompose_signal(y, 40.0, d);
    const double v_true = sigma * sigma / (r.range * r.range);
    EXPECT_GE(r.noise_variance, 0.8 * v_true);
    EXPECT_LE(r.noise_variance, 1.25 * v_true);
  }
}

TEST(Decompose, ScaleEquivariance) {
  const auto d = toy_dictionary();
  std::mt19937_64 rng(10);
  Eigen::VectorXd y = 1.5 * design_column(d, 0, 7) + 0.2 * design_column(d, 1, 7) + 0.01 * random_matrix(800, 1, rng);
  const auto a = decompose_signal(y, 70.0, d);
  const auto b = decompose_signal(3.0 * y, 70.0, d);
  EXPECT_LT((b.weights - 3.0 * a.weights).cwiseAbs().maxCoeff(), 1e-12 * a.weights.cwiseAbs().maxCoeff());
  EXPECT_LT((b.normalised_weights - a.normalised_weights).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Decompose, VarianceInvariantToModeOrder) {
  auto d = toy_dictionary();
  std::mt19937_64 rng(11);
  const Eigen::VectorXd y = design_column(d, 0, 3) + design_column(d, 1, 3) + 0.02 * random_matrix(800, 1, rng);
  const auto a = decompose_signal(y, 30.0, d);
  std::swap(d.modes[0], d.modes[1]);
  std::swap(d.signals[0], d.signals[1]);
  const auto b = decompose_signal(y, 30.0, d);
  EXPECT_LT((a.variance - b.variance).cwiseAbs().maxCoeff(), 1e-12 * a.variance.maxCoeff());
  EXPECT_NEAR(a.weights[0], b.weights[1], 1e-12);
}

TEST(Decompose, NoiseLowersPll) {
  const auto d = toy_dictionary();
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g;
  int lower = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd y = design_column(d, 0, 6) + 0.3 * design_column(d, 1, 6);
    for (auto& v : y) v += 0.01 * g(rng);
    Eigen::VectorXd noisier = y;
    for (auto& v : noisier) v += 0.05 * g(rng);
    if (decompose_signal(noisier, 60.0, d).pll < decompose_signal(y, 60.0, d).pll) ++lower;
  }
  EXPECT_GE(lower, 95);
}

TEST(Decompose, RejectsBadInputs) {
  const auto d = toy_dictionary();
  const Eigen::VectorXd y = design_column(d, 0, 2);
  EXPECT_THROW(decompose_signal(y, 125.0, d), gw::Error);
  EXPECT_NO_THROW(decompose_signal(y, 105.0, d));
  EXPECT_THROW(decompose_signal(Eigen::VectorXd::Constant(800, 2.0), 20.0, d), gw::Error);
  EXPECT_THROW(decompose_signal(Eigen::VectorXd::Ones(10), 20.0, d), gw::Error);
}

TEST(Decompose, NearestColumnTiesGoLow) {
  const auto d = toy_dictionary();
  EXPECT_EQ(d.nearest_column(15.0), 1u);
  EXPECT_EQ(d.nearest_column(-3.0), 0u);
}

}  // namespace
