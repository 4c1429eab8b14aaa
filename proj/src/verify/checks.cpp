#include "checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>

#include <boost/math/special_functions/trigamma.hpp>
#include <fmt/format.h>

#include "vwave/dtn.hpp"
#include "vwave/point_vortex.hpp"
#include "vwave/vortex_green.hpp"
#include "vwave/vortex_patch.hpp"

namespace vwave::verify {

namespace {

double max_abs(const Vec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// Collects measured values and the overall verdict.
struct Report {
  std::vector<std::string> lines;
  bool ok = true;

  template <class... Args>
  void expect(bool cond, fmt::format_string<Args...> f, Args&&... args) {
    lines.push_back(fmt::format("{} {}", cond ? "ok  " : "FAIL", fmt::format(f, std::forward<Args>(args)...)));
    ok = ok && cond;
  }
  template <class... Args>
  void note(fmt::format_string<Args...> f, Args&&... args) {
    lines.push_back("     " + fmt::format(f, std::forward<Args>(args)...));
  }
};

std::vector<StrengthFn> strengths() { return {StrengthFn::quadratic(), StrengthFn::exponential()}; }

bool stable(const std::vector<double>& K, double band) {
  for (std::size_t i = 1; i < K.size(); ++i) {
    if (!(std::abs(K[i] / K[i - 1] - 1.0) <= band)) return false;
  }
  return true;
}

// K_{i+1} <= K_i (1 + slack); a bound constant that does not grow under halving.
bool non_increasing(const std::vector<double>& K, double slack = 0.05) {
  for (std::size_t i = 1; i < K.size(); ++i) {
    if (!(K[i] <= K[i - 1] * (1.0 + slack))) return false;
  }
  return true;
}

std::string join(const std::vector<double>& v, const char* f = "{:.4g}") {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt::format(fmt::runtime(f), v[i]);
  return s;
}

// ---------------------------------------------------------------------------

void radial_identity(Report& r) {
  for (const auto& g : strengths()) {
    const RadialProfile p = solve_radial_profile(g);
    const double err = std::abs(p.dF_boundary - 1.0 / (2.0 * pi));
    r.expect(err < 1e-8, "{}: dF*(1) = {:.15f}, 1/2pi = {:.15f}, |error| = {:.2e}", g.name, p.dF_boundary,
             1.0 / (2.0 * pi), err);
  }
}

void kernel_identity(Report& r) {
  for (const auto& g : strengths()) {
    const RadialProfile p = solve_radial_profile(g);
    const double k1 = solve_resolvent(p, g, 1).kappa;
    r.expect(std::abs(k1) < 1e-6, "{}: kappa_1 = {:.3e}", g.name, k1);
  }
}

void coefficient_bounds(Report& r) {
  for (const auto& g : strengths()) {
    const Vec k = linearized_H_spectrum(solve_radial_profile(g), g, 20);
    bool inside = true;
    int worst = 2;
    double margin = std::numeric_limits<double>::infinity();
    for (int n = 2; n <= 20; ++n) {
      const double lo = (n - 1.0) / (2.0 * n);
      inside = inside && k[n - 1] > lo - 1e-6 && k[n - 1] <= 1.0 + 1e-6;
      if (k[n - 1] - lo < margin) margin = k[n - 1] - lo, worst = n;
    }
    r.note("{}: kappa_1..20 = {}", g.name, join(std::vector<double>(k.data(), k.data() + k.size()), "{:.6f}"));
    r.expect(inside, "{}: (n-1)/(2n) < kappa_n <= 1 for n = 2..20; tightest n = {} (margin {:.4f})", g.name, worst,
             margin);
  }
}

Vec dH_coefficients(const DiskSolver& S, int n_max, int n, double l, int M) {
  ShapeCoeffs b(n_max);
  b.set(n, l);
  const ConformalMap map(b);
  return shape_projection(boundary_derivative(eval_H(S, map, S.solve(map), M).values), n_max - 1);
}

void variation_formula(Report& r) {
  const int M = 64;
  for (const auto& g : strengths()) {
    const DiskSolver S(g);
    const Vec kappa = linearized_H_spectrum(S.profile(), g, 6);
    for (int n = 1; n <= 6; ++n) {
      std::vector<double> C;
      for (double lam : {1e-2, 1e-3, 1e-4}) {
        ShapeCoeffs b(8);
        b.set(n + 1, lam);
        const ConformalMap map(b);
        const BoundaryTrace H = eval_H(S, map, S.solve(map), M);
        double err = 0.0;
        for (int j = 0; j < M; ++j) {
          const double formula = kappa[n - 1] / (2 * pi) * std::cos(n * pi / 2 + n * H.theta[j]);
          err = std::max(err, std::abs(H.values[j] / lam - formula));
        }
        C.push_back(err / lam);
      }
      r.expect(stable(C, 0.1), "{} n={}: error/lambda^2 over lambda = 1e-2,1e-3,1e-4: {}", g.name, n, join(C));
    }
    // finite-difference linearization of d/dtheta H on modes 2..10
    const int nm = 10;
    Mat J(nm - 1, nm - 1);
    for (int n = 2; n <= nm; ++n) {
      auto central = [&](double l) {
        return ((dH_coefficients(S, nm, n, l, M) - dH_coefficients(S, nm, n, -l, M)) / (2 * l)).eval();
      };
      J.col(n - 2) = (4.0 * central(5e-4) - central(1e-3)) / 3.0;
    }
    Eigen::JacobiSVD<Mat> svd(J, Eigen::ComputeFullV);
    const Vec sv = svd.singularValues();
    int small = 0;
    for (int i = 0; i < sv.size(); ++i) small += sv[i] < 1e-8 * sv[0];
    const double align = std::abs(svd.matrixV()(0, sv.size() - 1));
    r.expect(small == 1 && align > 0.999, "{}: kernel dimension {} (sigma_min/sigma_max = {:.2e}), |cos| with sin(2 theta) = {:.9f}",
             g.name, small, sv[sv.size() - 1] / sv[0], align);
  }
}

PointVortexModel make_model(Setting s, double L_or_w, int n) {
  PhysicalParams p;
  p.setting = s;
  if (s == Setting::Periodic) p.L = L_or_w;
  else p.half_width = L_or_w;
  SolverConfig cfg;
  cfg.n = n;
  return PointVortexModel(p, cfg);
}

void localized_asymptotics(Report& r) {
  const PointVortexModel m = make_model(Setting::Localized, 100.0, 1024);
  std::vector<double> K, K2;
  for (double eps : {0.02, 0.01, 0.005}) {
    const NewtonResult nr = newton_solve(m, m.asymptotic_predictor(eps));
    // eps^2/(4 pi^2) (g - alpha^2 d^2)^{-1} ((x^2-1)/(1+x^2)^2), spectrally on the same line
    const Vec leading = m.asymptotic_predictor(eps).eta;
    const double dc = std::abs(nr.state.c + eps / (4 * pi));
    const double de = max_abs(nr.state.eta - leading);
    K.push_back(dc / (eps * eps * eps));
    K2.push_back(de / (eps * eps * eps));
    r.note("eps = {}: |c + eps/4pi| = {:.3e}, |eta - leading|_inf = {:.3e}, residual {:.1e}", eps, dc, de,
           nr.history.back());
  }
  r.expect(stable(K, 0.1), "K = |c + eps/4pi|/eps^3: {}", join(K));
  r.expect(non_increasing(K2) && K2.front() < 1.0, "K' = |eta - leading|/eps^3: {} (decreasing: eta defect is O(eps^4))",
           join(K2));
}

void periodic_speed(Report& r) {
  for (double L : {0.5, 1.0, 2.0}) {
    const PointVortexModel m = make_model(Setting::Periodic, L, 64);
    ContinuationConfig cc;
    cc.ds = 1e-3;
    cc.n_steps = 1;
    const Branch b = start_branch(m, m.trivial_state(), cc);
    const PointVortexState& s = b.points.back().state;
    const double closed = -1.0 / (std::tanh(1.0 / L) * 4 * pi * L);
    const double rel = std::abs(s.c / s.epsilon / closed - 1.0);
    r.expect(b.points.size() == 2 && rel < 1e-4, "L = {}: c/eps = {:.12f} at eps = {:.6g}, closed form {:.12f}, rel {:.2e}",
             L, s.c / s.epsilon, s.epsilon, closed, rel);

    // truncated sum over |k| <= 1e6 plus its trigamma tail
    const long K = 1000000;
    const double a = pi * pi * L * L;
    double sum = 0.0;
    for (long k = K; k >= 1; --k) sum += 2.0 / (k * k * a + 1.0);
    sum += 1.0;
    const double tail = 2.0 / a * boost::math::trigamma(static_cast<double>(K + 1));
    const double oracle = -(sum + tail) / (4 * pi);
    const double green = VortexGreen::periodic(L).self_speed_constant();
    r.expect(std::abs(green - oracle) < 1e-10 && std::abs(closed - oracle) < 1e-10,
             "L = {}: closed form vs sum(|k|<=1e6)+tail: {:.2e} (raw truncation {:.2e})", L,
             std::abs(closed - oracle), std::abs(closed + sum / (4 * pi)));
  }
}

Residual combine(const Residual& a, const Residual& b, double sa, double sb) {
  return {sa * a.F1 + sb * b.F1, sa * a.F2 + sb * b.F2, sa * a.F3 + sb * b.F3};
}
double rmax(const Residual& r) { return std::max({max_abs(r.F1), max_abs(r.F2), std::abs(r.F3)}); }

Vec random_reduced(const PointVortexModel& m, std::mt19937& rng, double amp) {
  std::normal_distribution<double> nd;
  Vec u(m.reduced_size());
  const int ne = m.modes() - m.eta_first() + 1;
  for (int i = 0; i < u.size(); ++i) {
    const int k = i < ne ? i + m.eta_first() : (i < ne + m.modes() ? i - ne + 1 : 0);
    u[i] = amp * nd(rng) * std::exp(-0.6 * k);
  }
  return u;
}

void jacobian(Report& r) {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> ue(0.1, 1.5);
  const PointVortexModel per = make_model(Setting::Periodic, 1.0, 64);
  const PointVortexModel loc = make_model(Setting::Localized, 40.0, 256);
  for (int trial = 0; trial < 10; ++trial) {
    const PointVortexModel& m = trial % 2 ? loc : per;
    const double eps = ue(rng), de = ue(rng);
    const Vec u = random_reduced(m, rng, 0.02), du = random_reduced(m, rng, 1.0);
    const Residual jac = m.jacobian_apply(m.from_reduced(eps, u), m.direction_from_reduced(de, du));
    auto fd = [&](double h) {
      const Residual rp = m.residual(m.from_reduced(eps + h * de, u + h * du));
      const Residual rm = m.residual(m.from_reduced(eps - h * de, u - h * du));
      return rmax(combine(combine(rp, rm, 0.5 / h, -0.5 / h), jac, 1.0, -1.0)) / rmax(jac);
    };
    const double e0 = fd(1e-6), e1 = fd(1e-2), e2 = fd(5e-3);
    r.expect(e0 < 1e-5 && std::abs(e1 / e2 - 4.0) < 0.5, "{} eps = {:.3f}: rel error {:.2e} at h = 1e-6; halving h: ratio {:.3f}",
             m.periodic() ? "periodic " : "localized", eps, e0, e1 / e2);
  }
}

Vec random_smooth(const PeriodicGrid& g, std::mt19937& rng, double amp) {
  std::normal_distribution<double> nd;
  Vec v = Vec::Zero(g.n());
  for (int k = 1; k <= 6; ++k) {
    const double a = amp * nd(rng) * std::pow(0.5, k), b = amp * nd(rng) * std::pow(0.5, k);
    for (int j = 0; j < g.n(); ++j) v[j] += a * std::cos(k * g.x(j) / g.L()) + b * std::sin(k * g.x(j) / g.L());
  }
  return v;
}

void operator_properties(Report& r) {
  double flat = 0.0;
  std::mt19937 rng(11);
  for (double L : {0.5, 1.0, 2.0}) {
    const PeriodicGrid g(L, 64);
    const DtnOperator op(g, Vec::Zero(64));
    const Vec psi = random_smooth(g, rng, 1.0);
    const Vec ref = apply_multiplier(g, psi, [&](int n) { return cplx(std::abs(n) / L, 0.0); });
    flat = std::max(flat, max_abs(op.apply(psi) - ref));
  }
  r.expect(flat < 1e-12, "flat surface vs |n|/L multiplier: {:.2e}", flat);
  const PeriodicGrid g(1.0, 128);
  double sa = 0.0, mz = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    Vec eta = random_smooth(g, rng, 0.08);
    const double c1 = std::max(max_abs(eta), max_abs(derivative(g, eta, 1)));
    eta *= std::min(1.0, 0.3 / c1);
    const Vec psi = random_smooth(g, rng, 1.0), phi = random_smooth(g, rng, 1.0);
    const DtnOperator op(g, eta);
    const Vec gpsi = op.apply(psi), gphi = op.apply(phi);
    const double h = g.spacing();
    sa = std::max(sa, std::abs(gpsi.dot(phi) - psi.dot(gphi)) * h);
    mz = std::max(mz, std::abs(gpsi.sum() * h));
  }
  r.expect(sa < 1e-8, "self-adjointness over 5 surfaces with |eta|_C1 <= 0.3: {:.2e}", sa);
  r.expect(mz < 1e-10, "mean of G(eta) psi: {:.2e}", mz);
}

// Richardson-extrapolated symmetric lattice sum of the periodic log pair.
double lattice_sum(double L, Point x, long K) {
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
  return 2.0 * (sk + partial(K + 1, 2 * K)) - sk;
}

void green(Report& r) {
  const double L = 1.0;
  const VortexGreen g = VortexGreen::periodic(L);
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> ux(-pi * L, pi * L), uy(-1.5, 1.5);
  double err = 0.0;
  for (int i = 0; i < 20;) {
    const Point x{ux(rng), uy(rng)};
    if (std::hypot(x.x1, x.x2) < 0.1 || std::hypot(x.x1, x.x2 - 2.0) < 0.1) continue;
    err = std::max(err, std::abs(g.eval(x) - lattice_sum(L, x, 100000)));
    ++i;
  }
  r.expect(err < 1e-8, "closed form vs lattice sum at 20 random points: {:.2e}", err);
  const int M = 512;
  for (const auto& [name, gg] : {std::pair{"localized", VortexGreen::localized()}, std::pair{"periodic ", g}}) {
    double circ = 0.0;
    for (int j = 0; j < M; ++j) {
      const double t = 2 * pi * j / M, rad = 0.5;
      const Grad2 gr = gg.grad({rad * std::cos(t), rad * std::sin(t)});
      circ += (gr[0] * std::cos(t) + gr[1] * std::sin(t)) * rad * (2 * pi / M);
    }
    r.expect(std::abs(circ - 1.0) < 1e-8, "{} circulation: {:.15f}", name, circ);
  }
}

void patch(Report& r) {
  const PatchSolver solver(StrengthFn::quadratic());
  const double eps = 0.01, tau = 0.1;
  const PatchState s = solver.solve(eps, 0.05, tau);
  const PatchResidual res = solver.residual(s);
  r.expect(res.norm() < 1e-8, "(0.01, 0.05, 0.1): full residual {:.2e}, c/eps = {:.9f}, outer {} / inner {}",
           res.norm(), s.c_tilde, s.outer_iterations, s.inner_iterations);

  std::vector<double> dev, phys;
  for (double delta : {0.05, 0.025}) {
    const PatchState t = delta == 0.05 ? s : solver.solve(eps, delta, tau);
    const auto pts = t.boundary_curve(256);
    double d = 0.0;
    for (int j = 0; j < 256; ++j) {
      const double th = 2 * pi * j / 256, tt = delta * tau;
      d = std::max(d, std::hypot(pts[j].x1 / delta - (std::cos(th) + tt * std::sin(2 * th)),
                                 pts[j].x2 / delta - (std::sin(th) - tt * std::cos(2 * th))));
    }
    dev.push_back(d);
    phys.push_back(delta * d);
  }
  const double ratio = dev[0] / dev[1];
  r.expect(ratio >= 3.2 && ratio <= 4.8, "normalized boundary deviation at delta = 0.05, 0.025: {} (ratio {:.3f})",
           join(dev, "{:.3e}"), ratio);
  r.note("physical deviation: {} (ratio {:.3f})", join(phys, "{:.3e}"), phys[0] / phys[1]);

  std::vector<double> b;
  for (double delta : {0.08, 0.04, 0.02}) b.push_back(std::abs(solver.solve(eps, delta, tau).speed_bracket()));
  r.expect(b[1] < b[0] && b[2] < b[1], "|c/eps + 1/4pi| at delta = 0.08, 0.04, 0.02: {}", join(b, "{:.3e}"));
}

void continuation(Report& r) {
  const PointVortexModel m = make_model(Setting::Periodic, 1.0, 64);
  ContinuationConfig cc;
  cc.n_steps = 50;
  const Branch b = start_branch(m, m.trivial_state(), cc);
  double worst = 0.0;
  bool increasing = true;
  for (std::size_t i = 1; i < b.points.size(); ++i) {
    worst = std::max(worst, b.points[i].residual_norm);
    increasing = increasing && b.points[i].arclength > b.points[i - 1].arclength;
  }
  r.expect(b.points.size() == 51 && b.termination.empty(), "{} accepted steps, eps reached {:.4f}",
           b.points.size() - 1, b.points.back().state.epsilon);
  r.expect(worst < 1e-9, "max residual over accepted points: {:.2e}", worst);
  r.expect(increasing, "arclength strictly increasing");

  // lowered thresholds: the flagged point crosses its threshold, earlier points do not
  struct Case {
    const char* name;
    std::function<void(AlternativeThresholds&)> set;
    std::function<bool(const BranchPoint&, const AlternativeThresholds&)> crossed;
    std::function<bool(const AlternativeFlags&)> flag;
  };
  const std::vector<Case> cases = {
      {"unbounded", [](AlternativeThresholds& t) { t.blowup = 0.5; },
       [](const BranchPoint& p, const AlternativeThresholds& t) { return state_norm(p.state) > t.blowup; },
       [](const AlternativeFlags& f) { return f.unbounded; }},
      {"separation", [](AlternativeThresholds& t) { t.separation_floor = 0.995; },
       [&](const BranchPoint& p, const AlternativeThresholds& t) {
         return 1.0 + p.state.eta[m.origin_index()] < t.separation_floor;
       },
       [](const AlternativeFlags& f) { return f.separation; }},
      {"irrotational", [](AlternativeThresholds& t) { t.epsilon_floor = 0.1, t.nontrivial_floor = 1e-6; },
       [](const BranchPoint& p, const AlternativeThresholds& t) {
         const double amp = std::max(p.state.eta.cwiseAbs().maxCoeff(), p.state.psi.cwiseAbs().maxCoeff());
         return std::abs(p.state.epsilon) < t.epsilon_floor && amp > t.nontrivial_floor;
       },
       [](const AlternativeFlags& f) { return f.irrotational; }},
  };
  for (const Case& c : cases) {
    ContinuationConfig lc = cc;
    c.set(lc.thresholds);
    const Branch lb = start_branch(m, m.trivial_state(), lc);
    bool ok = !lb.termination.empty() && c.flag(lb.points.back().flags) && c.crossed(lb.points.back(), lc.thresholds);
    for (std::size_t i = 0; i + 1 < lb.points.size(); ++i) ok = ok && !c.crossed(lb.points[i], lc.thresholds);
    r.expect(ok, "{}: stopped after {} steps ({})", c.name, lb.points.size() - 1, lb.termination);
  }
}

struct Criterion {
  const char* title;
  double limit;
  void (*run)(Report&);
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> c = {
      {"radial identity dF*(1) = 1/2pi", 1.0, radial_identity},
      {"kernel identity kappa_1 = 0", 1.0, kernel_identity},
      {"coefficient inequality on kappa_n", 5.0, coefficient_bounds},
      {"variation formula and sin(2 theta) kernel", 60.0, variation_formula},
      {"localized point-vortex asymptotics", 120.0, localized_asymptotics},
      {"periodic speed constant", 120.0, periodic_speed},
      {"Jacobian against central differences", 60.0, jacobian},
      {"DtN operator properties", 30.0, operator_properties},
      {"periodic Green function and circulation", 10.0, green},
      {"vortex patch solve", 300.0, patch},
      {"continuation robustness", 600.0, continuation},
  };
  return c;
}

}  // namespace

int criterion_count() { return static_cast<int>(criteria().size()); }

CheckResult run_criterion(int id) {
  if (id < 1 || id > criterion_count()) throw std::out_of_range(fmt::format("no criterion {}", id));
  const Criterion& c = criteria()[id - 1];
  CheckResult out;
  out.id = id;
  out.title = c.title;
  out.time_limit = c.limit;
  Report r;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    c.run(r);
  } catch (const std::exception& e) {
    r.expect(false, "exception: {}", e.what());
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.expect(out.seconds < c.limit, "runtime {:.2f} s (limit {:.0f} s)", out.seconds, c.limit);
  out.pass = r.ok;
  out.details = std::move(r.lines);
  return out;
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"radial",  "dtn",   "green",        "jacobian",
                                                 "asymptotics", "patch", "continuation", "all"};
  return names;
}

bool is_suite(const std::string& name) {
  const auto& n = suite_names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

std::vector<int> suite_criteria(const std::string& name) {
  static const std::map<std::string, std::vector<int>> m = {
      {"radial", {1, 2, 3}}, {"dtn", {8}},     {"green", {9}},         {"jacobian", {7}},
      {"asymptotics", {5, 6}}, {"patch", {4, 10}}, {"continuation", {11}},
      {"all", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}},
  };
  const auto it = m.find(name);
  if (it == m.end()) throw std::invalid_argument("unknown suite '" + name + "'");
  return it->second;
}

}  // namespace vwave::verify
