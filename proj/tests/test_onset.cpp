#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "guidedwave/onset.hpp"
#include "guidedwave/wavesynth.hpp"
#include "support.hpp"

namespace {

using namespace gw::onset;

std::vector<double> two_regimes(std::size_t n, std::size_t change, double sd1, double sd2, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = (i < change ? sd1 : sd2) * g(rng);
  return x;
}

TEST(Residual, Identities) {
  const std::vector<double> y{1.0, -2.0, 3.5};
  const std::vector<double> a{0.5, 0.5, 0.5};
  const std::vector<double> b{-1.0, 2.0, 0.25};
  EXPECT_EQ(residual(y, y), (std::vector<double>{0.0, 0.0, 0.0}));
  EXPECT_EQ(residual(y, std::vector<double>(3, 0.0)), y);
  std::vector<double> ab(3);
  for (int i = 0; i < 3; ++i) ab[i] = a[i] + b[i];
  const auto lhs = residual(y, ab);
  const auto rhs = residual(residual(y, a), b);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(lhs[i], rhs[i], 1e-15);
  EXPECT_THROW(residual(y, a.begin() == a.end() ? a : std::vector<double>(2)), gw::Error);
}

TEST(Aic, MatchesDirectFormula) {
  std::mt19937_64 rng(1);
  const auto x = two_regimes(40, 20, 1.0, 3.0, rng);
  const auto aic = aic_curve(x);
  auto var = [](const std::vector<double>& v, std::size_t a, std::size_t b) {
    double m = 0.0;
    for (std::size_t i = a; i < b; ++i) m += v[i];
    m /= static_cast<double>(b - a);
    double s = 0.0;
    for (std::size_t i = a; i < b; ++i) s += (v[i] - m) * (v[i] - m);
    return s / static_cast<double>(b - a);
  };
  const double n = 40.0;
  EXPECT_TRUE(std::isnan(aic[0]));
  EXPECT_TRUE(std::isnan(aic[38]));
  EXPECT_TRUE(std::isnan(aic[39]));
  for (std::size_t t = 2; t <= 38; ++t) {
    const double ref = t * std::log10(var(x, 0, t)) + (n - t - 1) * std::log10(var(x, t - 1, 40));
    EXPECT_NEAR(aic[t - 1], ref, 1e-10) << "t = " << t;
  }
  EXPECT_THROW(aic_curve(std::vector<double>(3, 1.0)), gw::Error);
}

// Single trials miss by 3 or more about 1% of the time (a loud sample can
// sit just inside the quiet part), so the bound is on the hit rate.
TEST(Aic, FindsVarianceChangePoint) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> where(100, 900);
  int hits = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t c = where(rng);
    const auto x = two_regimes(1000, c, 1.0, 10.0, rng);
    const auto best = argmin(aic_curve(x));
    ASSERT_TRUE(best.has_value());
    const long miss = std::abs(static_cast<long>(*best) - static_cast<long>(c));
    EXPECT_LE(miss, 6) << "trial " << trial;
    hits += miss <= 2;
  }
  EXPECT_GE(hits, 95);
}

TEST(Aic, ArgminInvariantUnderScaling) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = two_regimes(500, 240, 1.0, 4.0, rng);
    const auto base = argmin(aic_curve(x));
    for (double s : {1e-6, 3.7, 2.5e4}) {
      auto y = x;
      for (auto& v : y) v *= s;
      EXPECT_EQ(argmin(aic_curve(y)), base);
    }
  }
}

TEST(Aic, ToneBurstOnsetAfterSilence) {
  // The burst runs to the end of the record; a silent tail would add its own dip.
  std::vector<double> x(1100, 0.0);
  const std::size_t onset = 300;
  for (std::size_t i = 0; i < 800; ++i) x[onset + i] = gw::wavesynth::toneburst_value(i / 20.0e6, 1.0e6, 40.0);
  const auto best = argmin(aic_curve(x));
  ASSERT_TRUE(best.has_value());
  EXPECT_LE(std::abs(static_cast<long>(*best) - static_cast<long>(onset)), 2);
}

TEST(Aic, StationaryNoiseIsLowConfidence) {
  std::mt19937_64 rng(4);
  const auto x = two_regimes(1000, 0, 1.0, 1.0, rng);
  const auto p = pick_in(x, {0, 1000}, 1.0, 0.0, {});
  EXPECT_TRUE(p.low_confidence);
  const auto y = two_regimes(1000, 500, 1.0, 10.0, rng);
  EXPECT_FALSE(pick_in(y, {0, 1000}, 1.0, 0.0, {}).low_confidence);
}

TEST(Aic, ShiftedWindowShiftsPick) {
  std::mt19937_64 rng(5);
  const auto x = two_regimes(400, 170, 1.0, 5.0, rng);
  std::vector<double> padded(37, 0.3);
  padded.insert(padded.end(), x.begin(), x.end());
  const auto a = pick_in(x, {0, 400}, 1.0, 0.0, {});
  const auto b = pick_in(padded, {37, 437}, 1.0, 0.0, {});
  EXPECT_EQ(b.index, a.index + 37);
  EXPECT_THROW(pick_in(x, {10, 13}, 1.0, 0.0, {}), gw::Error);
}

// One sensor at 55 mm on the line to a reflector at 75 mm.
struct ReflectionScene {
  static constexpr double fs = 20.0e6;
  std::vector<double> measured;
  std::vector<double> nominal;
  double cg;

  ReflectionScene(double coefficient, std::optional<double> snr) {
    gw::wavesynth::Scene scene;
    scene.modes = {{gw::test::curve_a0(), 1.0}, {gw::test::curve_s0(), 0.15}};
    scene.snr_db.reset();
    const gw::Vec2 sensor{55.0, 0.0};
    const gw::wavesynth::TimeGrid grid{fs, 2400};
    const Eigen::MatrixXd clean = gw::wavesynth::synth_signals(scene, std::span(&sensor, 1), grid);
    scene.reflectors.push_back({{75.0, 0.0}, {coefficient, 0.0}});
    scene.snr_db = snr;
    const Eigen::MatrixXd damaged = gw::wavesynth::synth_signals(scene, std::span(&sensor, 1), grid);
    measured.assign(damaged.data(), damaged.data() + damaged.rows());
    nominal.assign(clean.data(), clean.data() + clean.rows());
    cg = gw::test::curve_a0().group_velocity_at(1.0e6);
  }
};

TEST(DetectOnsets, ReflectionOnsetMatchesPathLength) {
  const ReflectionScene s(0.3, 40.0);
  const auto r = residual(s.measured, s.nominal);
  const double hint = 55.0e-3 / s.cg;
  const auto report = detect_onsets(s.measured, r, 1.0 / s.fs, 0.0, hint, 5.0e-6);
  EXPECT_NEAR(report.incident_time(), 55.0e-3 / s.cg, 1.0e-6);
  EXPECT_NEAR(report.reflection_time(), 95.0e-3 / s.cg, 0.5e-6);
  EXPECT_FALSE(report.reflection.low_confidence);
  EXPECT_FALSE(report.incident.low_confidence);
  EXPECT_GT(report.reflection_time(), report.incident_time());
  // Deterministic for fixed input.
  const auto again = detect_onsets(s.measured, r, 1.0 / s.fs, 0.0, hint, 5.0e-6);
  EXPECT_EQ(again.reflection.index, report.reflection.index);
}

// A scaled copy of the incident packet leaking past the incident window looks
// like a clean onset to AIC; only its amplitude gives it away.
TEST(DetectOnsets, RelativeAmplitudeGate) {
  const ReflectionScene s(0.3, 40.0);
  const auto r = residual(s.measured, s.nominal);
  const double hint = 55.0e-3 / s.cg;
  OnsetOptions gated;
  gated.min_relative_amplitude = 0.05;
  const auto report = detect_onsets(s.measured, r, 1.0 / s.fs, 0.0, hint, 5.0e-6, gated);
  EXPECT_FALSE(report.reflection.low_confidence);
  // Peak ratio oracle: reflected over incident amplitude is the coefficient.
  EXPECT_NEAR(report.relative_amplitude, 0.3, 0.02);

  std::vector<double> weak(r);
  for (double& v : weak) v *= 0.1;
  const auto quiet = detect_onsets(s.measured, weak, 1.0 / s.fs, 0.0, hint, 5.0e-6, gated);
  EXPECT_NEAR(quiet.relative_amplitude, 0.1 * report.relative_amplitude, 1e-12);
  EXPECT_TRUE(quiet.reflection.low_confidence);
  // Same pick: AIC is scale-invariant, only the gate changed.
  EXPECT_EQ(quiet.reflection.index, report.reflection.index);
  EXPECT_FALSE(detect_onsets(s.measured, weak, 1.0 / s.fs, 0.0, hint, 5.0e-6).reflection.low_confidence);
}

TEST(DetectOnsets, SilentResidualIsLowConfidence) {
  const ReflectionScene s(0.0, std::nullopt);
  const auto r = residual(s.measured, s.nominal);
  const auto report = detect_onsets(s.measured, r, 1.0 / s.fs, 0.0, 55.0e-3 / s.cg, 5.0e-6);
  EXPECT_TRUE(report.reflection.low_confidence);
}

TEST(DetectOnsets, GlobalMinimumIsTheOnsetNotTheTail) {
  const ReflectionScene s(0.3, 40.0);
  const auto r = residual(s.measured, s.nominal);
  const auto report = detect_onsets(s.measured, r, 1.0 / s.fs, 0.0, 55.0e-3 / s.cg, 5.0e-6);
  // Over the whole post-incident residual the tail of the packet wins.
  const auto full = pick_in(r, {report.reflection.window.begin, r.size()}, 1.0 / s.fs, 0.0, {});
  EXPECT_GT(full.time, 95.0e-3 / s.cg + 5.0e-6);
  EXPECT_LT(report.reflection.index, full.index);
  const auto& aic = report.reflection.aic;
  EXPECT_EQ(report.reflection.index - report.reflection.window.begin, *argmin(aic));
}

TEST(DetectOnsets, NoiseOnlyResidualIsLowConfidence) {
  gw::wavesynth::Scene scene;
  scene.modes = {{gw::test::curve_a0(), 1.0}};
  const gw::Vec2 sensor{55.0, 0.0};
  const double cg = gw::test::curve_a0().group_velocity_at(1.0e6);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    scene.seed = seed;
    scene.snr_db.reset();
    const Eigen::MatrixXd clean = gw::wavesynth::synth_signals(scene, std::span(&sensor, 1), {20.0e6, 2400});
    scene.snr_db = 40.0;
    const Eigen::MatrixXd noisy = gw::wavesynth::synth_signals(scene, std::span(&sensor, 1), {20.0e6, 2400});
    const std::vector<double> y(noisy.data(), noisy.data() + noisy.rows());
    const auto r = residual(y, std::vector<double>(clean.data(), clean.data() + clean.rows()));
    const auto report = detect_onsets(y, r, 1.0 / 20.0e6, 0.0, 55.0e-3 / cg, 5.0e-6);
    EXPECT_TRUE(report.reflection.low_confidence) << "seed " << seed << " contrast " << report.reflection.contrast;
    EXPECT_FALSE(report.incident.low_confidence);
  }
}

TEST(DetectOnsets, RejectsBadWindows) {
  const std::vector<double> y(100, 1.0);
  EXPECT_THROW(detect_onsets(y, y, 1.0, 0.0, 500.0, 5.0), gw::Error);
  EXPECT_THROW(detect_onsets(y, std::vector<double>(99), 1.0, 0.0, std::nullopt, 5.0), gw::Error);
  // Incident at the end of the record leaves no room for a reflection window.
  std::vector<double> z(100, 0.0);
  for (std::size_t i = 0; i < 100; ++i) z[i] = i < 90 ? 0.01 * std::sin(0.3 * i) : std::sin(0.3 * i);
  EXPECT_THROW(detect_onsets(z, z, 1.0, 0.0, 95.0, 4.0), gw::Error);
}

}  // namespace
