#include <gtest/gtest.h>

#include <random>

#include "vwave/dtn.hpp"

using namespace vwave;

namespace {

double max_abs(const Vec& v) { return v.cwiseAbs().maxCoeff(); }

// Random smooth trigonometric polynomial with geometrically decaying coefficients.
Vec random_smooth(const PeriodicGrid& g, std::mt19937& rng, double amp, bool even, bool mean_zero) {
  std::normal_distribution<double> nd;
  Vec v = Vec::Zero(g.n());
  for (int k = mean_zero ? 1 : 0; k <= 6; ++k) {
    const double a = amp * nd(rng) * std::pow(0.5, k);
    const double b = even ? 0.0 : amp * nd(rng) * std::pow(0.5, k);
    for (int j = 0; j < g.n(); ++j) v[j] += a * std::cos(k * g.x(j) / g.L()) + b * std::sin(k * g.x(j) / g.L());
  }
  return v;
}

double c1_norm(const PeriodicGrid& g, const Vec& eta) {
  return std::max(max_abs(eta), max_abs(derivative(g, eta, 1)));
}

}  // namespace

TEST(Dtn, FlatSurfaceIsMultiplier) {
  for (double L : {0.5, 1.0, 2.0}) {
    const PeriodicGrid g(L, 64);
    const DtnOperator op(g, Vec::Zero(64));
    for (int n : {1, 2, 5, 17}) {
      const Vec psi = sample(g, [&](double x) { return std::cos(n * x / L); }).values;
      EXPECT_LT(max_abs(op.apply(psi) - (n / L) * psi), 1e-12);
    }
    std::mt19937 rng(1);
    const Vec psi = random_smooth(g, rng, 1.0, false, true);
    const Vec ref = apply_multiplier(g, psi, [&](int m) { return cplx(std::abs(m) / L, 0.0); });
    EXPECT_LT(max_abs(op.apply(psi) - ref), 1e-12);
    DtnConfig flat;
    flat.method = DtnMethod::FlatMultiplier;
    EXPECT_LT(max_abs(DtnOperator(g, Vec::Zero(64), flat).apply(psi) - ref), 1e-13);
  }
  EXPECT_LT(max_abs(DtnOperator(PeriodicGrid(1.0, 16), Vec::Zero(16)).apply(Vec::Zero(16))), 1e-300);
}

TEST(Dtn, FlatExtensionIsSeparatedMode) {
  const double L = 1.3;
  const PeriodicGrid g(L, 32);
  const PeriodicField eta(g);
  const PeriodicField psi = sample(g, [&](double x) { return std::cos(x / L); });
  const HarmonicExtension ext = harmonic_extend(eta, psi);
  for (Point p : {Point{0.3, 0.2}, Point{-1.0, -2.0}}) {
    EXPECT_NEAR(ext.value(p), std::cos(p.x1 / L) * std::exp((p.x2 - 1) / L), 1e-13);
  }
  const Grad2 gr = eval_interior_gradient(ext, {0.0, 0.0});
  EXPECT_NEAR(gr[1], std::exp(-1.0 / L) / L, 1e-13);
  EXPECT_NEAR(gr[0], 0.0, 1e-14);
  const CVec c = ext.mode_coefficients();
  EXPECT_NEAR(c[1].real(), 0.5, 1e-13);
  EXPECT_NEAR(std::abs(c[0]), 0.0, 1e-13);

  const HarmonicExtension zero = harmonic_extend(eta, PeriodicField(g));
  const Grad2 z = eval_interior_gradient(zero, {0.4, -0.3});
  EXPECT_EQ(z[0], 0.0);
  EXPECT_EQ(z[1], 0.0);
  EXPECT_THROW(eval_interior_gradient(ext, {0.0, 1.2}), std::domain_error);
}

TEST(Dtn, CurvedTraceResidual) {
  const double L = 1.0;
  const PeriodicGrid g(L, 64);
  const PeriodicField eta = sample(g, [&](double x) { return 0.05 * std::cos(x / L); });
  const PeriodicField psi = sample(g, [&](double x) { return std::cos(x / L); });
  const HarmonicExtension ext = harmonic_extend(eta, psi);
  EXPECT_LT(ext.trace_residual(), 1e-8);
  // check the trace at off-grid surface points via the mode sum
  for (double x : {0.123, -2.5, 1.7}) {
    EXPECT_NEAR(ext.value({x, ext.surface_height(x)}), std::cos(x / L), 1e-9);
  }
}

TEST(Dtn, EvenInteriorGradientVanishesOnAxis) {
  const PeriodicGrid g(1.0, 64);
  std::mt19937 rng(4);
  const PeriodicField eta(g, random_smooth(g, rng, 0.05, true, true));
  const PeriodicField psi(g, random_smooth(g, rng, 1.0, true, true));
  const HarmonicExtension ext = harmonic_extend(eta, psi);
  for (double x2 : {-2.0, -1.0, 0.0, 0.5, 0.8}) EXPECT_NEAR(eval_interior_gradient(ext, {0.0, x2})[0], 0.0, 1e-12);
}

TEST(Dtn, SelfAdjointAndMeanZero) {
  std::mt19937 rng(7);
  for (double L : {0.7, 1.0}) {
    const PeriodicGrid g(L, 128);
    for (int trial = 0; trial < 5; ++trial) {
      Vec eta = random_smooth(g, rng, 0.08, false, true);
      eta *= 0.3 / std::max(0.3, c1_norm(g, eta));
      const Vec psi = random_smooth(g, rng, 1.0, false, true);
      const Vec phi = random_smooth(g, rng, 1.0, false, true);
      const DtnOperator op(g, eta);
      const Vec gpsi = op.apply(psi), gphi = op.apply(phi);
      const double h = g.spacing();
      EXPECT_NEAR(gpsi.dot(phi) * h, psi.dot(gphi) * h, 1e-8);
      EXPECT_LT(std::abs(gpsi.sum() * h), 1e-10);
    }
  }
}

TEST(Dtn, EvenPathMatchesGeneral) {
  const PeriodicGrid g(1.0, 64);
  std::mt19937 rng(8);
  const Vec eta = random_smooth(g, rng, 0.05, true, true);
  const Vec psi = random_smooth(g, rng, 1.0, true, false);
  DtnConfig even;
  even.symmetry = DtnSymmetry::Even;
  const DtnOperator a(g, eta), b(g, eta, even);
  EXPECT_LT(max_abs(a.apply(psi) - b.apply(psi)), 1e-11);
  const Grad2 ga = a.extend(psi).gradient({0, 0}), gb = b.extend(psi).gradient({0, 0});
  EXPECT_NEAR(ga[1], gb[1], 1e-12);
  EXPECT_THROW(DtnOperator(g, random_smooth(g, rng, 0.05, false, true), even), std::invalid_argument);
}

TEST(Dtn, OversampledRegularizedPathAgrees) {
  const PeriodicGrid g(1.0, 64);
  std::mt19937 rng(9);
  const Vec eta = random_smooth(g, rng, 0.05, false, true);
  const Vec psi = random_smooth(g, rng, 1.0, false, true);
  DtnConfig os;
  os.oversampling = 1.5;
  os.regularization = 1e-20;
  const DtnOperator a(g, eta), b(g, eta, os);
  // both are spectrally accurate; they differ only in how the top modes are fitted
  EXPECT_LT(max_abs(a.apply(psi) - b.apply(psi)), 1e-7);
  EXPECT_LT(b.extend(psi).trace_residual(), 1e-9);
}

TEST(Dtn, Guards) {
  const PeriodicGrid g(1.0, 256);
  const Vec big = sample(g, [](double x) { return 0.6 * std::cos(x); }).values;
  try {
    DtnOperator op(g, big);
    FAIL() << "expected an ill-conditioning error";
  } catch (const IllConditionedError& e) {
    EXPECT_GT(e.condition, 1e12);
  }
  const Vec low = sample(g, [](double x) { return -0.97 + 0.0 * x; }).values;
  EXPECT_THROW(DtnOperator(g, low), std::domain_error);
  DtnConfig flat;
  flat.method = DtnMethod::FlatMultiplier;
  EXPECT_THROW(DtnOperator(g, 0.01 * big, flat), std::invalid_argument);
}

TEST(DtnShape, ZeroDirectionAndLinearity) {
  const PeriodicGrid g(1.0, 64);
  std::mt19937 rng(10);
  const Vec eta = random_smooth(g, rng, 0.05, false, true);
  const Vec zeta = random_smooth(g, rng, 1.0, false, true);
  const Vec psi = random_smooth(g, rng, 1.0, false, true);
  for (auto backend : {ShapeDerivativeBackend::Analytic, ShapeDerivativeBackend::Collocation}) {
    DtnConfig cfg;
    cfg.shape_backend = backend;
    const DtnOperator op(g, eta, cfg);
    EXPECT_LT(max_abs(dtn_shape_derivative(op, Vec::Zero(64), psi)), 1e-14);
    const Vec d1 = dtn_shape_derivative(op, zeta, psi);
    const Vec d2 = dtn_shape_derivative(op, 2.0 * zeta, psi);
    EXPECT_LT(max_abs(d2 - 2.0 * d1), 1e-12 * max_abs(d1));
    const Grad2 z = harmonic_extension_shape_derivative(op, Vec::Zero(64), psi, {0.0, 0.0});
    EXPECT_EQ(z[0], 0.0);
    EXPECT_EQ(z[1], 0.0);
  }
}

TEST(DtnShape, CollocationLinearizationIsExactForTheDiscreteOperator) {
  // large amplitude: the continuum formula and the discrete operator part ways here
  const PeriodicGrid g(1.0, 64);
  std::mt19937 rng(21);
  for (bool even : {true, false}) {
    const Vec eta = random_smooth(g, rng, 0.12, even, true);
    const Vec zeta = random_smooth(g, rng, 1.0, even, true);
    const Vec psi = random_smooth(g, rng, 1.0, even, true);
    DtnConfig cfg;
    cfg.shape_backend = ShapeDerivativeBackend::Collocation;
    if (even) cfg.symmetry = DtnSymmetry::Even;
    const DtnOperator op(g, eta, cfg);
    const Vec lin = dtn_shape_derivative(op, zeta, psi);
    const Grad2 glin = harmonic_extension_shape_derivative(op, zeta, psi, {0.3, 0.1});
    auto err = [&](double h) {
      const DtnOperator plus(g, eta + h * zeta, cfg), minus(g, eta - h * zeta, cfg);
      const Vec d = (plus.apply(psi) - minus.apply(psi)) / (2 * h);
      const double gd = (plus.extend(psi).gradient({0.3, 0.1})[1] - minus.extend(psi).gradient({0.3, 0.1})[1]) / (2 * h);
      return std::pair<double, double>{max_abs(d - lin) / max_abs(lin), std::abs(gd - glin[1])};
    };
    EXPECT_LT(err(1e-5).first, 1e-8);
    EXPECT_LT(err(1e-5).second, 1e-8);
    EXPECT_NEAR(err(1e-3).first / err(5e-4).first, 4.0, 0.4);
  }
}

TEST(DtnShape, FlatSingleModesMatchFiniteDifference) {
  const double L = 1.0;
  const PeriodicGrid g(L, 64);
  const PeriodicField eta(g);
  const PeriodicField zeta = sample(g, [&](double x) { return std::cos(2 * x / L); });
  const PeriodicField psi = sample(g, [&](double x) { return std::cos(3 * x / L); });
  const double h = 1e-5;
  const Vec fd = (dtn_apply(PeriodicField(g, h * zeta.values), psi).values -
                  dtn_apply(PeriodicField(g, -h * zeta.values), psi).values) /
                 (2 * h);
  DtnConfig an;
  an.shape_backend = ShapeDerivativeBackend::Analytic;
  EXPECT_LT(max_abs(dtn_shape_derivative(eta, zeta, psi, an).values - fd), 1e-6);
  EXPECT_LT(max_abs(dtn_shape_derivative(eta, zeta, psi).values - fd), 1e-6);
}

TEST(DtnShape, SecondOrderAgreementWithFiniteDifferences) {
  const PeriodicGrid g(1.0, 64);
  std::mt19937 rng(12);
  const Vec eta = random_smooth(g, rng, 0.05, true, true);
  const Vec zeta = random_smooth(g, rng, 1.0, true, true);
  const Vec psi = random_smooth(g, rng, 1.0, true, true);
  DtnConfig an;
  an.shape_backend = ShapeDerivativeBackend::Analytic;
  const DtnOperator op(g, eta, an);
  const Vec exact = dtn_shape_derivative(op, zeta, psi);
  const Point p{0.0, 0.0};
  const Grad2 gexact = harmonic_extension_shape_derivative(op, zeta, psi, p);
  auto fd = [&](double h) {
    const DtnOperator plus(g, eta + h * zeta), minus(g, eta - h * zeta);
    const Vec d = (plus.apply(psi) - minus.apply(psi)) / (2 * h);
    const double gp = plus.extend(psi).gradient(p)[1], gm = minus.extend(psi).gradient(p)[1];
    return std::pair<double, double>{max_abs(d - exact), std::abs((gp - gm) / (2 * h) - gexact[1])};
  };
  const auto [e1, f1] = fd(1e-2);
  const auto [e2, f2] = fd(5e-3);
  EXPECT_NEAR(e1 / e2, 4.0, 0.4);
  EXPECT_NEAR(f1 / f2, 4.0, 0.4);
  EXPECT_LT(fd(1e-5).first, 1e-6);
  EXPECT_LT(fd(1e-5).second, 1e-6);
  EXPECT_NEAR(gexact[0], 0.0, 1e-12);
  EXPECT_NEAR(harmonic_extension_shape_derivative(op, zeta, psi, {0.0, -0.5})[0], 0.0, 1e-12);
}

TEST(DtnShape, FiniteDifferenceBackendAgrees) {
  const PeriodicGrid g(1.0, 64);
  std::mt19937 rng(13);
  const Vec eta = random_smooth(g, rng, 0.05, false, true);
  const Vec zeta = random_smooth(g, rng, 1.0, false, true);
  const Vec psi = random_smooth(g, rng, 1.0, false, true);
  DtnConfig fdcfg;
  fdcfg.shape_backend = ShapeDerivativeBackend::FiniteDifference;
  fdcfg.fd_step = 1e-5;
  DtnConfig an;
  an.shape_backend = ShapeDerivativeBackend::Analytic;
  const Vec a = dtn_shape_derivative(DtnOperator(g, eta, an), zeta, psi);
  const Vec b = dtn_shape_derivative(DtnOperator(g, eta, fdcfg), zeta, psi);
  EXPECT_LT(max_abs(a - b), 1e-6);
}
