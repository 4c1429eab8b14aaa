// Solves a small vortex patch for both strength functions and prints how far
// the boundary strays from the two-mode curve.
#include <fmt/format.h>

#include "vwave/vortex_patch.hpp"

int main() {
  using namespace vwave;
  const double eps = 0.01, delta = 0.05, tau = 0.1;
  for (const StrengthFn& g : {StrengthFn::quadratic(), StrengthFn::exponential()}) {
    const PatchState s = solve_patch(eps, delta, tau, g);
    const auto pts = s.boundary_curve(128);
    double dev = 0.0;
    for (int j = 0; j < 128; ++j) {
      const double t = 2 * pi * j / 128, tt = delta * tau;
      dev = std::max(dev, std::hypot(pts[j].x1 - delta * (std::cos(t) + tt * std::sin(2 * t)),
                                     pts[j].x2 - delta * (std::sin(t) - tt * std::cos(2 * t))));
    }
    fmt::print("{:<12} c/eps = {:.9f}  residual {:.1e}  max boundary deviation {:.3e}\n", g.name, s.c_tilde,
               s.residual, dev);
    fmt::print("{:<12} beta_2..beta_5 = {:.3e} {:.3e} {:.3e} {:.3e}\n", "", s.beta.get(2), s.beta.get(3), s.beta.get(4),
               s.beta.get(5));
  }
  fmt::print("point vortex limit: {:.9f}\n", -1.0 / (4 * pi));
}
