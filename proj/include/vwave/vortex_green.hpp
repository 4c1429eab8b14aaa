#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "vwave/spectral.hpp"

namespace vwave {

struct Point {
  double x1;
  double x2;
};

using Grad2 = std::array<double, 2>;
using Hess2 = std::array<double, 4>;  // row-major {11, 12, 21, 22}

class VortexGreen {
 public:
  enum class Variant { Localized, Periodic };

  static VortexGreen localized() { return VortexGreen(Variant::Localized, 0.0); }
  static VortexGreen periodic(double L) {
    if (!(L > 0.0)) throw std::invalid_argument("VortexGreen: L must be positive");
    return VortexGreen(Variant::Periodic, L);
  }

  Variant variant() const { return variant_; }
  double L() const { return L_; }
  Point image_offset() const { return {0.0, 2.0}; }

  double eval(Point x) const {
    check_regular(x);
    const cplx z(x.x1, x.x2);
    return (logabs(z) - logabs(z - cplx(0.0, 2.0))) / (2.0 * pi);
  }

  Grad2 grad(Point x) const {
    check_regular(x);
    const cplx z(x.x1, x.x2);
    const cplx d = (d1(z) - d1(z - cplx(0.0, 2.0))) / (2.0 * pi);
    return {d.real(), -d.imag()};
  }

  Hess2 hess(Point x) const {
    check_regular(x);
    const cplx z(x.x1, x.x2);
    const cplx d = (d2(z) - d2(z - cplx(0.0, 2.0))) / (2.0 * pi);
    return {d.real(), -d.imag(), -d.imag(), -d.real()};
  }

  // Coefficient of epsilon in the wave speed at the trivial state.
  double self_speed_constant() const {
    if (variant_ == Variant::Localized) return -1.0 / (4.0 * pi);
    return -1.0 / (4.0 * pi * L_ * std::tanh(1.0 / L_));
  }

 private:
  VortexGreen(Variant v, double L) : variant_(v), L_(L) {}

  void check_regular(Point x) const {
    const double tol = 1e-14;
    double x1 = x.x1;
    if (variant_ == Variant::Periodic) {
      const double P = 2.0 * pi * L_;
      x1 -= P * std::round(x1 / P);
    }
    if (std::abs(x1) < tol && (std::abs(x.x2) < tol || std::abs(x.x2 - 2.0) < tol)) {
      throw std::domain_error("VortexGreen: evaluation at a singular point");
    }
  }

  // Holomorphic kernel f(z) with Re f giving the single-vortex potential:
  // localized log z, periodic log sin(z / 2L).
  double logabs(cplx z) const {
    if (variant_ == Variant::Localized) return std::log(std::abs(z));
    const cplx w = z / (2.0 * L_);
    const double v = w.imag();
    const cplx q = v >= 0.0 ? std::exp(cplx(0.0, 2.0) * w) : std::exp(cplx(0.0, -2.0) * w);
    return std::abs(v) + std::log(std::abs(1.0 - q)) - std::log(2.0);
  }

  cplx d1(cplx z) const {
    if (variant_ == Variant::Localized) return 1.0 / z;
    const cplx w = z / (2.0 * L_);
    cplx cot;
    if (w.imag() >= 0.0) {
      const cplx q = std::exp(cplx(0.0, 2.0) * w);
      cot = cplx(0.0, 1.0) * (q + 1.0) / (q - 1.0);
    } else {
      const cplx q = std::exp(cplx(0.0, -2.0) * w);
      cot = cplx(0.0, 1.0) * (1.0 + q) / (1.0 - q);
    }
    return cot / (2.0 * L_);
  }

  cplx d2(cplx z) const {
    if (variant_ == Variant::Localized) return -1.0 / (z * z);
    const cplx w = z / (2.0 * L_);
    const cplx q = w.imag() >= 0.0 ? std::exp(cplx(0.0, 2.0) * w) : std::exp(cplx(0.0, -2.0) * w);
    const cplx csc2 = -4.0 * q / ((q - 1.0) * (q - 1.0));
    return -csc2 / (4.0 * L_ * L_);
  }

  Variant variant_;
  double L_;
};

struct SurfaceTraces {
  Vec normal;      // (-eta', 1) . grad G
  Vec tangential;  // d/dx1 G
  Vec d2;          // d/dx2 G
};

// grad G sampled at (x_j, 1 + eta_j); eta_prime supplies the slope.
inline SurfaceTraces surface_traces(const VortexGreen& g, const Vec& x, const Vec& eta, const Vec& eta_prime) {
  const int n = static_cast<int>(x.size());
  SurfaceTraces t{Vec(n), Vec(n), Vec(n)};
  for (int j = 0; j < n; ++j) {
    const Grad2 gr = g.grad({x[j], 1.0 + eta[j]});
    t.tangential[j] = gr[0];
    t.d2[j] = gr[1];
    t.normal[j] = -eta_prime[j] * gr[0] + gr[1];
  }
  return t;
}

template <class Grid>
SurfaceTraces surface_traces(const VortexGreen& g, const Field<Grid>& eta) {
  return surface_traces(g, eta.grid.nodes(), eta.values, derivative(eta).values);
}

}  // namespace vwave
