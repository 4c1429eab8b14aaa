#include <gtest/gtest.h>

#include <boost/math/special_functions/trigamma.hpp>
#include <random>

#include "vwave/vortex_green.hpp"

using namespace vwave;

namespace {

// Symmetric truncated lattice sum of the log pair; returns (raw S_K, Richardson 2 S_2K - S_K).
std::pair<double, double> lattice_sum(double L, Point x, long K) {
  auto partial = [&](long k0, long k1) {
    double s = 0.0;
    for (long k = k1; k >= k0; --k) {
      for (int sgn : {1, -1}) {
        if (k == 0 && sgn == -1) continue;
        const double a = x.x1 - sgn * 2.0 * pi * L * k;
        s += 0.5 * std::log((a * a + x.x2 * x.x2) / (a * a + (x.x2 - 2.0) * (x.x2 - 2.0)));
      }
    }
    return s / (2.0 * pi);
  };
  const double sk = partial(0, K);
  const double s2k = sk + partial(K + 1, 2 * K);
  return {sk, 2.0 * s2k - sk};
}

}  // namespace

TEST(VortexGreen, LocalizedValues) {
  const VortexGreen g = VortexGreen::localized();
  EXPECT_NEAR(g.eval({1.0, 0.0}), -std::log(5.0) / (4.0 * pi), 1e-15);
  EXPECT_NEAR(g.eval({0.0, 1.0}), 0.0, 1e-15);
  const Grad2 gr = g.grad({1.0, 0.0});
  EXPECT_NEAR(gr[0], 0.8 / (2.0 * pi), 1e-15);
  EXPECT_NEAR(gr[1], 0.4 / (2.0 * pi), 1e-15);
  for (double x2 : {-3.0, -0.5, 0.5, 1.0, 1.7, 3.0}) EXPECT_EQ(g.grad({0.0, x2})[0], 0.0);
  EXPECT_THROW(g.eval({0.0, 0.0}), std::domain_error);
  EXPECT_THROW(g.grad({0.0, 2.0}), std::domain_error);
}

TEST(VortexGreen, PeriodicClosedFormMatchesLatticeSum) {
  const VortexGreen g = VortexGreen::periodic(1.0);
  const Point x{0.7, 0.3};
  const auto [raw, extrap] = lattice_sum(1.0, x, 100000);
  EXPECT_NEAR(g.eval(x), extrap, 1e-10);
  // raw truncation at 1e5 carries an O(1/K) tail of about 1e-7
  EXPECT_NEAR(g.eval(x), raw, 5e-7);
}

TEST(VortexGreen, PeriodicIsPeriodicAndEven) {
  for (double L : {0.5, 1.0, 2.0}) {
    const VortexGreen g = VortexGreen::periodic(L);
    for (double x1 : {0.3, 1.1, -2.0}) {
      for (double x2 : {-1.5, 0.4, 1.2}) {
        EXPECT_NEAR(g.eval({x1 + 2.0 * pi * L, x2}), g.eval({x1, x2}), 1e-12);
        EXPECT_NEAR(g.eval({-x1, x2}), g.eval({x1, x2}), 1e-14);
        const Grad2 a = g.grad({x1, x2});
        const Grad2 b = g.grad({-x1, x2});
        EXPECT_NEAR(a[0], -b[0], 1e-14);
        EXPECT_NEAR(a[1], b[1], 1e-14);
      }
    }
    EXPECT_THROW(g.eval({2.0 * pi * L, 2.0}), std::domain_error);
  }
}

TEST(VortexGreen, HessianMatchesFiniteDifferences) {
  const double h = 1e-6;
  for (const VortexGreen& g : {VortexGreen::localized(), VortexGreen::periodic(0.8)}) {
    for (Point x : {Point{0.4, 0.9}, Point{-1.3, -0.7}, Point{0.2, 1.3}}) {
      const Hess2 H = g.hess(x);
      const Grad2 p1 = g.grad({x.x1 + h, x.x2}), m1 = g.grad({x.x1 - h, x.x2});
      const Grad2 p2 = g.grad({x.x1, x.x2 + h}), m2 = g.grad({x.x1, x.x2 - h});
      EXPECT_NEAR(H[0], (p1[0] - m1[0]) / (2 * h), 1e-6);
      EXPECT_NEAR(H[1], (p2[0] - m2[0]) / (2 * h), 1e-6);
      EXPECT_NEAR(H[2], (p1[1] - m1[1]) / (2 * h), 1e-6);
      EXPECT_NEAR(H[3], (p2[1] - m2[1]) / (2 * h), 1e-6);
      const Grad2 gr = g.grad(x);
      const double e = 1e-6;
      EXPECT_NEAR(gr[0], (g.eval({x.x1 + e, x.x2}) - g.eval({x.x1 - e, x.x2})) / (2 * e), 1e-7);
      EXPECT_NEAR(gr[1], (g.eval({x.x1, x.x2 + e}) - g.eval({x.x1, x.x2 - e})) / (2 * e), 1e-7);
    }
  }
}

TEST(VortexGreen, HarmonicAwayFromSingularities) {
  const double h = 1e-3;
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u1(-3.0, 3.0), u2(-3.0, 5.0);
  for (const VortexGreen& g : {VortexGreen::localized(), VortexGreen::periodic(1.0), VortexGreen::periodic(0.5)}) {
    int tested = 0;
    while (tested < 20) {
      const Point x{u1(rng), u2(rng)};
      if (std::hypot(x.x1, x.x2) < 1.0 || std::hypot(x.x1, x.x2 - 2.0) < 1.0) continue;
      if (g.variant() == VortexGreen::Variant::Periodic) {
        const double P = 2 * pi * g.L();
        const double r = x.x1 - P * std::round(x.x1 / P);
        if (std::hypot(r, x.x2) < 1.0 || std::hypot(r, x.x2 - 2.0) < 1.0) continue;
      }
      const double lap = (g.eval({x.x1 + h, x.x2}) + g.eval({x.x1 - h, x.x2}) + g.eval({x.x1, x.x2 + h}) +
                          g.eval({x.x1, x.x2 - h}) - 4 * g.eval(x)) /
                         (h * h);
      EXPECT_LT(std::abs(lap), 1e-6);
      ++tested;
    }
  }
}

TEST(VortexGreen, Circulation) {
  const int M = 512;
  const double r = 0.5;
  for (const VortexGreen& g : {VortexGreen::localized(), VortexGreen::periodic(1.0), VortexGreen::periodic(0.3)}) {
    double circ = 0.0;
    for (int j = 0; j < M; ++j) {
      const double t = 2 * pi * j / M;
      const Grad2 gr = g.grad({r * std::cos(t), r * std::sin(t)});
      circ += (gr[0] * std::cos(t) + gr[1] * std::sin(t)) * r * (2 * pi / M);
    }
    EXPECT_NEAR(circ, 1.0, 1e-8);
  }
}

TEST(VortexGreen, GradientDecay) {
  const VortexGreen loc = VortexGreen::localized();
  for (double d : {10.0, 100.0, 1000.0}) {
    const Grad2 gr = loc.grad({0.3 * d, -d});
    EXPECT_LT(std::hypot(gr[0], gr[1]) * d * d, 1.0);
  }
  const VortexGreen per = VortexGreen::periodic(1.0);
  for (double d : {5.0, 10.0, 20.0}) {
    const Grad2 gr = per.grad({0.4, -d});
    EXPECT_LT(std::hypot(gr[0], gr[1]), 10.0 * std::exp(-d));
  }
}

TEST(VortexGreen, SurfaceTracesFlat) {
  const VortexGreen g = VortexGreen::localized();
  const LineGrid lg(20.0, 64);
  const LineField eta(lg);
  const SurfaceTraces t = surface_traces(g, eta);
  EXPECT_NEAR(t.normal[32], 1.0 / pi, 1e-15);
  EXPECT_LT(parity_defect(t.normal, Parity::Even), 1e-15);
  EXPECT_LT(parity_defect(t.tangential, Parity::Odd), 1e-15);
}

TEST(VortexGreen, SelfSpeedConstant) {
  EXPECT_NEAR(VortexGreen::localized().self_speed_constant(), -0.07957747154594767, 1e-15);
  const long K = 1000000;
  for (double L : {0.5, 1.0, 2.0}) {
    const double a = pi * pi * L * L;
    double s = 0.0;
    for (long k = K; k >= 1; --k) s += 2.0 / (k * k * a + 1.0);
    s += 1.0;
    const double tail = 2.0 / a * boost::math::trigamma(static_cast<double>(K + 1));
    const double oracle = -(s + tail) / (4.0 * pi);
    const double closed = VortexGreen::periodic(L).self_speed_constant();
    EXPECT_NEAR(closed, oracle, 1e-10);
    // the bare truncation misses a tail of 2 / (pi^2 L^2 K) / (4 pi)
    EXPECT_NEAR(closed, -s / (4.0 * pi), 2.0 / (a * K) / (4 * pi) * 1.01);
    EXPECT_NEAR(closed, -1.0 / (4 * pi * L * std::tanh(1.0 / L)), 1e-15);
  }
  EXPECT_NEAR(VortexGreen::periodic(1e3).self_speed_constant(), -1.0 / (4.0 * pi), 1e-3);
}
