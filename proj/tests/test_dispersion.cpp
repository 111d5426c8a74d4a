#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "guidedwave/dispersion.hpp"

namespace {

using namespace gw::dispersion;
using cd = std::complex<double>;

const MaterialSpec kAl = MaterialSpec::aluminium();

// Rayleigh-Lamb determinant written directly in (k, w) with complex p, q.
// Region-wise the value is either purely real or purely imaginary.
double lamb_det(double k, double w, Family family) {
  const double h = kAl.thickness / 2.0;
  const cd p = std::sqrt(cd(w * w / (kAl.longitudinal_speed * kAl.longitudinal_speed) - k * k, 0.0));
  const cd q = std::sqrt(cd(w * w / (kAl.transverse_speed * kAl.transverse_speed) - k * k, 0.0));
  const cd d = (k * k - q * q) * (k * k - q * q);
  cd v;
  if (family == Family::symmetric)
    v = d * std::cos(p * h) * std::sin(q * h) + 4.0 * k * k * p * q * std::sin(p * h) * std::cos(q * h);
  else
    v = d * std::sin(p * h) * std::cos(q * h) + 4.0 * k * k * p * q * std::cos(p * h) * std::sin(q * h);
  return v.real() + v.imag();
}

// First root in c of lamb_det at fixed w, by scan and bisection.
double oracle_first_root(double w, Family family, double c_lo, double c_hi) {
  auto f = [&](double c) { return lamb_det(w / c, w, family); };
  const int n = 200000;
  double a = c_lo;
  double fa = f(a);
  for (int i = 1; i <= n; ++i) {
    double b = c_lo + (c_hi - c_lo) * i / n;
    const double fb = f(b);
    if ((fa < 0) != (fb < 0)) {
      for (int it = 0; it < 200; ++it) {
        const double m = 0.5 * (a + b);
        const double fm = f(m);
        if ((fm < 0) == (fa < 0)) {
          a = m;
          fa = fm;
        } else {
          b = m;
        }
      }
      return 0.5 * (a + b);
    }
    a = b;
    fa = fb;
  }
  return std::nan("");
}

double rayleigh_speed() {
  const double cl = kAl.longitudinal_speed;
  const double ct = kAl.transverse_speed;
  auto f = [&](double c) {
    const double r = c * c / (ct * ct);
    return (2.0 - r) * (2.0 - r) - 4.0 * std::sqrt(1.0 - c * c / (cl * cl)) * std::sqrt(1.0 - r);
  };
  double a = 0.5 * ct;
  double b = 0.99999 * ct;
  for (int i = 0; i < 200; ++i) {
    const double m = 0.5 * (a + b);
    ((f(m) < 0) == (f(a) < 0) ? a : b) = m;
  }
  return 0.5 * (a + b);
}

double plate_speed() {
  const double r = kAl.transverse_speed / kAl.longitudinal_speed;
  return 2.0 * kAl.transverse_speed * std::sqrt(1.0 - r * r);
}

TEST(Dispersion, FundamentalModesApproachRayleighSpeed) {
  const double cr = rayleigh_speed();
  const double grid[] = {20.0};
  const double a0 = trace_roots(kAl, {Family::antisymmetric, 0}, grid)[0];
  const double s0 = trace_roots(kAl, {Family::symmetric, 0}, grid)[0];
  EXPECT_NEAR(a0 / cr, 1.0, 1e-4);
  EXPECT_NEAR(s0 / cr, 1.0, 1e-4);
}

TEST(Dispersion, S0LowFrequencyLimitIsPlateSpeed) {
  const double grid[] = {0.01};
  const double s0 = trace_roots(kAl, {Family::symmetric, 0}, grid)[0];
  EXPECT_NEAR(s0 / plate_speed(), 1.0, 1e-3);
}

TEST(Dispersion, A0GroupVelocityAtOneMegahertzMillimetre) {
  const double cg = group_velocity_at(kAl, {Family::antisymmetric, 0}, 1.0);
  EXPECT_NEAR(cg, 3071.0, 0.01 * 3071.0);

  // Implicit differentiation of the determinant: c_g = -(dF/dk)/(dF/dw).
  const double w = 2.0 * std::numbers::pi * frequency_from_ftp(kAl, 1.0);
  const double c = oracle_first_root(w, Family::antisymmetric, 100.0, kAl.transverse_speed);
  const double k = w / c;
  const double hk = 1e-6 * k;
  const double hw = 1e-6 * w;
  const double fk = (lamb_det(k + hk, w, Family::antisymmetric) - lamb_det(k - hk, w, Family::antisymmetric)) / (2 * hk);
  const double fw = (lamb_det(k, w + hw, Family::antisymmetric) - lamb_det(k, w - hw, Family::antisymmetric)) / (2 * hw);
  EXPECT_NEAR(cg / (-fk / fw), 1.0, 1e-4);
}

TEST(Dispersion, TracedRootsMatchComplexOracle) {
  const auto grid = linear_grid(0.1, 2.0, 0.1);
  const auto a0 = trace_roots(kAl, {Family::antisymmetric, 0}, grid);
  const auto s0 = trace_roots(kAl, {Family::symmetric, 0}, grid);
  for (std::size_t i = 0; i < grid.size(); i += 4) {
    const double w = 2.0 * std::numbers::pi * frequency_from_ftp(kAl, grid[i]);
    EXPECT_NEAR(a0[i] / oracle_first_root(w, Family::antisymmetric, 50.0, kAl.transverse_speed), 1.0, 1e-8);
    EXPECT_NEAR(s0[i] / oracle_first_root(w, Family::symmetric, 2000.0, kAl.longitudinal_speed), 1.0, 1e-8);
  }
}

TEST(Dispersion, ResidualVanishesAtTracedRoots) {
  const auto grid = linear_grid(0.05, 2.0, 0.05);
  for (Family fam : {Family::antisymmetric, Family::symmetric}) {
    const auto c = trace_roots(kAl, {fam, 0}, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto r = characteristic_residual(kAl, grid[i], c[i], fam);
      ASSERT_TRUE(r.has_value());
      // Residual slope is bounded, so a relative root error of 1e-12 keeps it small.
      const auto r_off = characteristic_residual(kAl, grid[i], c[i] * 1.001, fam);
      ASSERT_TRUE(r_off.has_value());
      EXPECT_LT(std::abs(*r), 1e-6 * std::max(1.0, std::abs(*r_off)));
    }
  }
}

TEST(Dispersion, ResidualIsUndefinedWhereDenominatorVanishes) {
  const double c = std::sqrt(2.0) * kAl.transverse_speed;
  EXPECT_FALSE(characteristic_residual(kAl, 1.0, c, Family::symmetric).has_value());
  EXPECT_THROW(characteristic_residual(kAl, 1.0, -1.0, Family::symmetric), gw::Error);
}

TEST(Dispersion, S0IsFasterThanA0) {
  const auto grid = linear_grid(0.05, 2.0, 0.05);
  const auto a0 = trace_mode(kAl, {Family::antisymmetric, 0}, grid);
  const auto s0 = trace_mode(kAl, {Family::symmetric, 0}, grid);
  ASSERT_EQ(a0.samples.size(), s0.samples.size());
  for (std::size_t i = 0; i < a0.samples.size(); ++i) {
    EXPECT_GT(s0.samples[i].phase_velocity, a0.samples[i].phase_velocity);
    if (i > 0) {
      EXPECT_GT(a0.samples[i].wavenumber, a0.samples[i - 1].wavenumber);
    }
  }
}

TEST(Dispersion, RepeatedGridValuesGiveIdenticalRoots) {
  const double grid[] = {0.5, 0.6, 0.6, 0.6, 0.7};
  const auto c = trace_roots(kAl, {Family::antisymmetric, 0}, grid);
  EXPECT_EQ(c[1], c[2]);
  EXPECT_EQ(c[2], c[3]);
  const auto curve = trace_mode(kAl, {Family::antisymmetric, 0}, grid);
  EXPECT_EQ(curve.samples.size(), 3u);
}

TEST(Dispersion, GroupVelocityExactForQuadraticDispersion) {
  // w = a k^2 on an uneven grid; three-point stencils are exact for parabolas.
  const double a = 0.37;
  std::vector<DispersionSample> s;
  for (double k : {1.0, 1.3, 2.0, 2.2, 3.5, 3.6, 5.0}) s.push_back({0.0, 0.0, k, 0.0, a * k * k});
  const auto cg = group_velocity(s);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(cg[i], 2.0 * a * s[i].wavenumber, 1e-12);
}

TEST(Dispersion, GroupVelocityEqualsPhaseVelocityWithoutDispersion) {
  std::vector<DispersionSample> s;
  for (double k : {10.0, 11.0, 13.0, 17.0}) s.push_back({0.0, 5000.0, k, 0.0, 5000.0 * k});
  for (double v : group_velocity(s)) EXPECT_NEAR(v, 5000.0, 1e-9);
}

TEST(Dispersion, GroupVelocityRejectsNonIncreasingWavenumber) {
  std::vector<DispersionSample> s{{0, 0, 1.0, 0, 1.0}, {0, 0, 2.0, 0, 2.0}, {0, 0, 1.5, 0, 3.0}};
  EXPECT_THROW(group_velocity(s), gw::Error);
  EXPECT_THROW(group_velocity(std::span(s).first(2)), gw::Error);
}

TEST(Dispersion, HigherModeBelowCutoffIsReported) {
  const double grid[] = {1.0};
  EXPECT_THROW(trace_roots(kAl, {Family::antisymmetric, 1}, grid), BelowCutoff);
}

TEST(Dispersion, HigherModeTracesAboveCutoff) {
  // A1 cuts on where q h = pi/2, i.e. ftp = c_T / 2 in MHz*mm.
  const auto grid = linear_grid(1.6, 3.0, 0.02);
  const auto c = trace_roots(kAl, {Family::antisymmetric, 1}, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_GT(c[i], kAl.transverse_speed);
    if (i > 0) {
      EXPECT_LT(c[i], c[i - 1]);
    }
  }
}

TEST(Dispersion, InvalidInputsAreRejected) {
  MaterialSpec bad = kAl;
  bad.transverse_speed = bad.longitudinal_speed + 1.0;
  const double grid[] = {1.0};
  EXPECT_THROW(trace_roots(bad, {Family::antisymmetric, 0}, grid), gw::Error);
  const double unsorted[] = {1.0, 0.5};
  EXPECT_THROW(trace_roots(kAl, {Family::antisymmetric, 0}, unsorted), gw::Error);
}

TEST(Dispersion, ModeLabelsRoundTrip) {
  EXPECT_EQ(ModeId::parse("A0").label(), "A0");
  EXPECT_EQ(ModeId::parse("S12"), (ModeId{Family::symmetric, 12}));
  EXPECT_THROW(ModeId::parse("B1"), gw::Error);
}

TEST(Dispersion, CurveInterpolatesWavenumberInFrequency) {
  const auto curve = trace_mode(kAl, {Family::antisymmetric, 0}, 0.1, 1.0, 0.1);
  const auto& a = curve.samples[2];
  const auto& b = curve.samples[3];
  const double f = 0.25 * a.frequency() + 0.75 * b.frequency();
  EXPECT_NEAR(curve.wavenumber_at(f), 0.25 * a.wavenumber + 0.75 * b.wavenumber, 1e-9);
  EXPECT_THROW(curve.wavenumber_at(2.0 * curve.frequency_max()), gw::Error);
}

}  // namespace
