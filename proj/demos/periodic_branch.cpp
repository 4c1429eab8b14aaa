// Traces the periodic point-vortex branch from rest and prints where the free
// surface sits above the vortex as the strength grows.
#include <fmt/format.h>

#include "vwave/point_vortex.hpp"

int main() {
  using namespace vwave;
  PhysicalParams p;  // g = alpha = L = 1
  const PointVortexModel m(p, SolverConfig{});
  ContinuationConfig cc;
  cc.ds = 0.25;
  cc.n_steps = 40;
  const Branch b = start_branch(m, m.trivial_state(), cc);
  fmt::print("{:>4} {:>10} {:>12} {:>10} {:>6}\n", "i", "eps", "c", "1+eta(0)", "its");
  for (std::size_t i = 0; i < b.points.size(); i += 4) {
    const auto& s = b.points[i].state;
    fmt::print("{:>4} {:>10.5f} {:>12.6f} {:>10.6f} {:>6}\n", i, s.epsilon, s.c, 1.0 + s.eta[m.origin_index()],
               b.points[i].newton_iterations);
  }
  fmt::print("c/eps near rest: {:.8f}, closed form {:.8f}\n", b.points[1].state.c / b.points[1].state.epsilon,
             m.self_speed());
  if (!b.termination.empty()) fmt::print("stopped: {}\n", b.termination);
}
