#include <gtest/gtest.h>

#include <random>

#include "vwave/spectral.hpp"

using namespace vwave;

namespace {

double max_abs(const Vec& v) { return v.cwiseAbs().maxCoeff(); }

PeriodicField smooth_field(const PeriodicGrid& g, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  Vec a(6), b(6);
  for (int k = 0; k < 6; ++k) {
    a[k] = nd(rng) / (1 + k * k);
    b[k] = nd(rng) / (1 + k * k);
  }
  return sample(g, [&](double x) {
    double s = 0.0;
    for (int k = 0; k < 6; ++k) s += a[k] * std::cos(k * x / g.L()) + b[k] * std::sin((k + 1) * x / g.L());
    return s;
  });
}

}  // namespace

TEST(PeriodicGrid, NodesAndValidation) {
  const PeriodicGrid g(1.5, 16);
  for (int j = 0; j < 16; ++j) EXPECT_DOUBLE_EQ(g.x(j), -pi * 1.5 + 2.0 * pi * 1.5 * j / 16.0);
  EXPECT_THROW(PeriodicGrid(1.0, 7), std::invalid_argument);
  EXPECT_THROW(PeriodicGrid(1.0, 6), std::invalid_argument);
  EXPECT_THROW(PeriodicGrid(-1.0, 16), std::invalid_argument);
}

TEST(LineGrid, SymmetricUniformNodes) {
  const LineGrid g(200.0, 64);
  for (int j = 1; j < 64; ++j) {
    EXPECT_NEAR(g.x(j) + g.x(g.mirror(j)), 0.0, 1e-12);
    EXPECT_NEAR(g.x(j) - g.x(j - 1), g.spacing(), 1e-12);
  }
  EXPECT_DOUBLE_EQ(g.x(0), -200.0);
}

TEST(Transform, RoundTripAndParseval) {
  const PeriodicGrid g(0.7, 64);
  const PeriodicField f = smooth_field(g, 3);
  const CVec c = fourier_coefficients(f);
  EXPECT_LT(max_abs(from_fourier_coefficients(c) - f.values), 1e-12 * max_abs(f.values));
  EXPECT_NEAR(mean_square(f.values), coefficient_square_sum(c), 1e-12 * mean_square(f.values));
}

TEST(Transform, SingleModeCoefficient) {
  const PeriodicGrid g(2.0, 32);
  const PeriodicField f = sample(g, [&](double x) { return std::cos(3 * x / 2.0); });
  const CVec c = fourier_coefficients(f);
  EXPECT_NEAR(c[3].real(), 0.5, 1e-14);
  EXPECT_NEAR(c[32 - 3].real(), 0.5, 1e-14);
}

TEST(Derivative, Examples) {
  const double L = 1.3;
  const PeriodicGrid g(L, 32);
  const PeriodicField f = sample(g, [&](double x) { return std::cos(x / L); });
  const PeriodicField df = derivative(f, 1);
  for (int j = 0; j < 32; ++j) EXPECT_NEAR(df[j], -std::sin(g.x(j) / L) / L, 1e-13);

  const PeriodicField k = sample(g, [](double) { return 4.2; });
  EXPECT_LT(max_abs(derivative(k, 1).values), 1e-13);

  EXPECT_THROW(derivative(f, 0), std::invalid_argument);
}

TEST(Derivative, SecondOrderAgainstFiniteDifferences) {
  const double L = 0.9;
  const PeriodicGrid g(L, 32);
  const PeriodicField f = sample(g, [&](double x) { return std::cos(3 * x / L); });
  const PeriodicField d2 = derivative(f, 2);
  // oracle: fourth-order centered differences of the analytic function on a fine step
  const double h = 1e-3;
  for (int j = 0; j < 32; ++j) {
    const double x = g.x(j);
    auto u = [&](double s) { return std::cos(3 * s / L); };
    const double fd = (-u(x + 2 * h) + 16 * u(x + h) - 30 * u(x) + 16 * u(x - h) - u(x - 2 * h)) / (12 * h * h);
    EXPECT_NEAR(d2[j], fd, 1e-7);
    EXPECT_NEAR(d2[j], -9.0 / (L * L) * u(x), 1e-11);
  }
}

TEST(Derivative, ComposesAndCommutes) {
  const PeriodicGrid g(1.0, 64);
  const PeriodicField f = smooth_field(g, 5);
  const Vec twice = derivative(derivative(f, 1), 1).values;
  const Vec once = derivative(f, 2).values;
  EXPECT_LT(max_abs(twice - once), 1e-10 * max_abs(once));

  const Vec a = derivative(project_mean_zero(f), 1).values;
  const Vec b = project_mean_zero(derivative(f, 1)).values;
  EXPECT_LT(max_abs(a - b), 1e-12);

  const Vec c = derivative(project_parity(f, Parity::Even), 1).values;
  const Vec d = project_parity(derivative(f, 1), Parity::Odd).values;
  EXPECT_LT(max_abs(c - d), 1e-12);
}

TEST(Multiplier, Examples) {
  const double L = 1.7;
  const PeriodicGrid g(L, 32);
  const PeriodicField f = smooth_field(g, 7);
  EXPECT_LT(max_abs(fourier_multiplier(f, [](int) { return 1.0; }).values - f.values), 1e-13);

  const PeriodicField c2 = sample(g, [&](double x) { return std::cos(2 * x / L); });
  const PeriodicField out = fourier_multiplier(c2, [&](int m) { return std::abs(m) / L; });
  EXPECT_LT(max_abs(out.values - (2.0 / L) * c2.values), 1e-13);

  const double gg = 1.0, al = 0.8;
  auto sym = [&](int m) { return 1.0 / (gg + al * al * m * m / (L * L)); };
  auto inv = [&](int m) { return gg + al * al * m * m / (L * L); };
  const PeriodicField rt = fourier_multiplier(fourier_multiplier(f, sym), inv);
  EXPECT_LT(max_abs(rt.values - f.values), 1e-12 * max_abs(f.values));
}

TEST(Projections, MeanZero) {
  const double L = 1.0;
  const PeriodicGrid g(L, 16);
  EXPECT_LT(max_abs(project_mean_zero(sample(g, [](double) { return 5.0; })).values), 1e-15);
  const PeriodicField c = sample(g, [&](double x) { return std::cos(x / L); });
  EXPECT_LT(max_abs(project_mean_zero(c).values - c.values), 1e-15);
  const PeriodicField s = sample(g, [&](double x) { return 3.0 + std::cos(x / L); });
  EXPECT_LT(max_abs(project_mean_zero(s).values - c.values), 1e-14);
  const PeriodicField once = project_mean_zero(smooth_field(g, 1));
  EXPECT_LT(max_abs(project_mean_zero(once).values - once.values), 1e-15);
}

TEST(Projections, Parity) {
  const double L = 0.6;
  const PeriodicGrid g(L, 16);
  const PeriodicField s = sample(g, [&](double x) { return std::sin(x / L); });
  const PeriodicField c = sample(g, [&](double x) { return std::cos(x / L); });
  const PeriodicField cs(g, c.values + s.values);
  EXPECT_LT(max_abs(project_parity(s, Parity::Even).values), 1e-15);
  EXPECT_LT(max_abs(project_parity(c, Parity::Even).values - c.values), 1e-15);
  EXPECT_LT(max_abs(project_parity(cs, Parity::Odd).values - s.values), 1e-15);
  const PeriodicField e = project_parity(smooth_field(g, 2), Parity::Even);
  EXPECT_LT(max_abs(project_parity(e, Parity::Even).values - e.values), 1e-15);

  const LineGrid lg(10.0, 32);
  const LineField lf = sample(lg, [](double x) { return std::exp(-x * x) * (1 + x); });
  EXPECT_LT(parity_defect(project_parity(lf, Parity::Even).values, Parity::Even), 1e-15);
}

TEST(Resample, UpAndDownIsExactOnBandLimited) {
  const PeriodicGrid g(1.0, 32);
  const PeriodicField f = smooth_field(g, 9);
  const Vec up = resample(f.values, 48);
  const PeriodicGrid g48(1.0, 48);
  for (int j = 0; j < 48; ++j) EXPECT_NEAR(up[j], interpolate(g, f.values, g48.x(j)), 1e-12);
  EXPECT_LT(max_abs(resample(up, 32) - f.values), 1e-12);
}

TEST(DealiasedProduct, MatchesExactProductOfLowModes) {
  const double L = 1.0;
  const PeriodicGrid g(L, 32);
  const PeriodicField a = sample(g, [&](double x) { return std::cos(5 * x); });
  const PeriodicField b = sample(g, [&](double x) { return std::sin(7 * x); });
  const Vec p = dealiased_product(a.values, b.values);
  for (int j = 0; j < 32; ++j) EXPECT_NEAR(p[j], std::cos(5 * g.x(j)) * std::sin(7 * g.x(j)), 1e-13);
  // modes 10 and 12 alias onto 22 and 20 without padding; with padding the 12-mode stays out
  const PeriodicField c = sample(g, [&](double x) { return std::cos(10 * x); });
  const Vec q = dealiased_product(c.values, c.values);
  for (int j = 0; j < 32; ++j) EXPECT_NEAR(q[j], 0.5, 1e-13);
}

TEST(CosSin, Roundtrip) {
  const PeriodicGrid g(1.0, 32);
  Vec a(5);
  a << 0.3, -0.1, 0.5, 0.0, 0.02;
  const Vec v = from_cos_coefficients(g, a, 0);
  EXPECT_LT(max_abs(cos_coefficients(v, 0, 4) - a), 1e-14);
  Vec b(3);
  b << 0.4, -0.2, 0.1;
  const Vec w = from_sin_coefficients(g, b, 1);
  EXPECT_LT(max_abs(sin_coefficients(w, 1, 3) - b), 1e-14);
  for (int j = 0; j < 32; ++j) {
    const double x = g.x(j);
    EXPECT_NEAR(w[j], 0.4 * std::sin(x) - 0.2 * std::sin(2 * x) + 0.1 * std::sin(3 * x), 1e-14);
  }
}
