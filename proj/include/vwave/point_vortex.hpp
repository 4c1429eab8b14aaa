#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "vwave/dtn.hpp"
#include "vwave/krylov.hpp"
#include "vwave/spectral.hpp"
#include "vwave/vortex_green.hpp"

namespace vwave {

enum class Setting { Localized, Periodic };

inline std::string to_string(Setting s) { return s == Setting::Localized ? "localized" : "periodic"; }

struct PhysicalParams {
  double g = 1.0;
  double alpha = 1.0;  // alpha^2 multiplies the curvature
  Setting setting = Setting::Periodic;
  double L = 1.0;             // periodic: period 2 pi L
  double half_width = 200.0;  // localized: truncated line [-w, w)

  void validate() const {
    if (!(g > 0.0)) throw std::invalid_argument("PhysicalParams: g must be positive");
    if (!(alpha > 0.0)) throw std::invalid_argument("PhysicalParams: alpha must be positive");
    if (setting == Setting::Periodic && !(L > 0.0)) throw std::invalid_argument("PhysicalParams: L must be positive");
    if (setting == Setting::Localized && !(half_width > 0.0)) {
      throw std::invalid_argument("PhysicalParams: half_width must be positive");
    }
  }

  VortexGreen green() const {
    return setting == Setting::Localized ? VortexGreen::localized() : VortexGreen::periodic(L);
  }
};

// Gradient and Hessian of the unit-strength vortex stream function (image included).
// The default is the point vortex Green function; the patch solver swaps in a quadrature.
struct FarField {
  std::function<std::pair<Grad2, Hess2>(Point)> eval;
  explicit operator bool() const { return static_cast<bool>(eval); }
};

struct SolverConfig {
  int n = 64;     // collocation nodes
  int modes = 0;  // retained cosine modes K; 0 selects n/3
  DtnConfig dtn{};
  double newton_tol = 1e-10;
  int max_iterations = 25;
  double separation = 0.05;
  double gmres_tol = 1e-13;
};

struct PointVortexState {
  double epsilon = 0.0;
  Vec eta;
  Vec psi;
  double c = 0.0;
};

struct Residual {
  Vec F1;
  Vec F2;
  double F3 = 0.0;
};

// Direction (zeta, phi, d) in (eta, psi, c) plus an optional epsilon component e.
struct Direction {
  Vec zeta;
  Vec phi;
  double d = 0.0;
  double e = 0.0;
};

class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(const std::string& what, double last) : std::runtime_error(what), last_residual(last) {}
  double last_residual;
};

class PointVortexModel;

// Everything that depends on the state only: DtN factorization, traces, Hessians.
class PointVortexEvaluation {
 public:
  PointVortexEvaluation(const PointVortexModel& model, const PointVortexState& s);

  const Residual& residual() const { return res_; }
  Residual apply(const Direction& dir) const;
  double bernoulli_constant() const { return b_; }
  double dtn_condition() const { return op_.condition_estimate(); }
  const Vec& vertical_trace() const { return A_; }  // G psi + eps (-eta', 1).grad G
  const Vec& tangential_trace() const { return Q_; }

 private:
  const PointVortexModel& m_;
  PointVortexState s_;
  DtnOperator op_;
  Vec ep_;               // eta'
  Vec w_;                // 1 + eta'^2
  Vec gpsi_;             // G(eta) psi
  Vec G1_, G2_;          // grad G on the surface
  Vec H12_, H22_;        // second derivatives of G on the surface
  Vec A_, Q_;
  Residual res_;
  double b_ = 0.0;
};

class PointVortexModel {
 public:
  PointVortexModel(PhysicalParams p, SolverConfig cfg, FarField far = {})
      : p_(p), cfg_(std::move(cfg)), grid_(make_grid(p, cfg_.n)), green_(p.green()), far_(std::move(far)) {
    p_.validate();
    K_ = cfg_.modes > 0 ? cfg_.modes : cfg_.n / 3;
    if (K_ >= cfg_.n / 2) throw std::invalid_argument("SolverConfig: modes must be below n/2");
    cfg_.dtn.symmetry = DtnSymmetry::Even;
    cfg_.dtn.separation = cfg_.separation;
    // jacobian_apply must be linear and consistent with the discrete residual
    cfg_.dtn.shape_backend = ShapeDerivativeBackend::Collocation;
    nodes_ = grid_.nodes();
  }

  const PhysicalParams& params() const { return p_; }
  const SolverConfig& config() const { return cfg_; }
  const PeriodicGrid& grid() const { return grid_; }
  const VortexGreen& green() const { return green_; }
  std::pair<Grad2, Hess2> far_field(Point x) const {
    if (far_) return far_.eval(x);
    return {green_.grad(x), green_.hess(x)};
  }
  const Vec& nodes() const { return nodes_; }
  bool periodic() const { return p_.setting == Setting::Periodic; }
  int modes() const { return K_; }
  int origin_index() const { return cfg_.n / 2; }

  // Speed shift per unit epsilon from the regularized self-interaction.
  double self_speed() const { return green_.self_speed_constant(); }

  PointVortexState trivial_state() const { return {0.0, Vec::Zero(cfg_.n), Vec::Zero(cfg_.n), 0.0}; }

  Residual residual(const PointVortexState& s) const { return PointVortexEvaluation(*this, s).residual(); }
  Residual jacobian_apply(const PointVortexState& s, const Direction& d) const {
    return PointVortexEvaluation(*this, s).apply(d);
  }
  double bernoulli_constant(const PointVortexState& s) const {
    return PointVortexEvaluation(*this, s).bernoulli_constant();
  }

  // ---- reduced even coordinates ----
  int eta_first() const { return periodic() ? 1 : 0; }
  int reduced_size() const { return (K_ - eta_first() + 1) + K_ + 1; }

  Vec to_reduced(const PointVortexState& s) const {
    Vec u(reduced_size());
    const int ne = K_ - eta_first() + 1;
    u.head(ne) = cos_coefficients(s.eta, eta_first(), K_);
    u.segment(ne, K_) = cos_coefficients(s.psi, 1, K_);
    u[ne + K_] = s.c;
    return u;
  }

  PointVortexState from_reduced(double eps, const Vec& u) const {
    const int ne = K_ - eta_first() + 1;
    PointVortexState s;
    s.epsilon = eps;
    s.eta = from_cos_coefficients(grid_, u.head(ne), eta_first());
    s.psi = from_cos_coefficients(grid_, u.segment(ne, K_), 1);
    s.c = u[ne + K_];
    return s;
  }

  Direction direction_from_reduced(double e, const Vec& du) const {
    const PointVortexState t = from_reduced(e, du);
    return {t.eta, t.psi, t.c, e};
  }

  // Projects a residual onto the retained test functions.
  Vec reduce(const Residual& r) const {
    Vec v(reduced_size());
    const int ne = K_ - eta_first() + 1;
    v.head(ne) = cos_coefficients(r.F1, eta_first(), K_);
    v.segment(ne, K_) = periodic() ? cos_coefficients(r.F2, 1, K_) : sin_coefficients(r.F2, 1, K_);
    v[ne + K_] = r.F3;
    return v;
  }

  // Max norm of the projected residual fields.
  double residual_norm(const Vec& reduced) const {
    const int ne = K_ - eta_first() + 1;
    const Vec f1 = from_cos_coefficients(grid_, reduced.head(ne), eta_first());
    const Vec f2 = periodic() ? from_cos_coefficients(grid_, reduced.segment(ne, K_), 1)
                              : from_sin_coefficients(grid_, reduced.segment(ne, K_), 1);
    return std::max({f1.cwiseAbs().maxCoeff(), f2.cwiseAbs().maxCoeff(), std::abs(reduced[ne + K_])});
  }
  double residual_norm(const Residual& r) const { return residual_norm(reduce(r)); }

  // Canonical form: band-limit through the reduced coordinates.
  PointVortexState canonical(const PointVortexState& s) const { return from_reduced(s.epsilon, to_reduced(s)); }

  // Flat-state linearization at speed c, block-diagonal per mode; used as a preconditioner.
  Vec flat_inverse(const Vec& r, double c) const {
    const int ne = K_ - eta_first() + 1;
    const double L = grid_.L();
    Vec u = Vec::Zero(reduced_size());
    if (!periodic()) u[0] = r[0] / p_.g;
    double c_shift = 0.0;
    for (int k = 1; k <= K_; ++k) {
      const double kl = k / L;
      const double a11 = p_.g + p_.alpha * p_.alpha * kl * kl, a12 = c * kl;
      // localized F2 keeps the first-order form (sine coefficients); periodic applies -d/dx (cosine)
      const double s = periodic() ? kl : -1.0;
      const double a21 = s * c * kl, a22 = s * kl;
      const double det = a11 * a22 - a12 * a21;
      const double r1 = r[k - eta_first()], r2 = r[ne + k - 1];
      const double eta_k = (a22 * r1 - a12 * r2) / det;
      const double psi_k = (a11 * r2 - a21 * r1) / det;
      u[k - eta_first()] = eta_k;
      u[ne + k - 1] = psi_k;
      c_shift += kl * std::exp(-kl) * psi_k;
    }
    u[ne + K_] = r[ne + K_] - c_shift;
    return u;
  }

  PointVortexState asymptotic_predictor(double eps) const {
    PointVortexState s = trivial_state();
    s.epsilon = eps;
    if (eps == 0.0) return s;
    const double L = grid_.L();
    const double g = p_.g, a2 = p_.alpha * p_.alpha;
    auto helmholtz_inv = [&](const Vec& f) {
      return apply_multiplier(grid_, f, [&](int m) { return cplx(1.0 / (g + a2 * (m / L) * (m / L)), 0.0); });
    };
    if (!periodic()) {
      Vec rhs(cfg_.n);
      for (int j = 0; j < cfg_.n; ++j) {
        const double x = nodes_[j];
        rhs[j] = (x * x - 1.0) / ((1.0 + x * x) * (1.0 + x * x));
      }
      s.eta = eps * eps / (4.0 * pi * pi) * helmholtz_inv(rhs);
    } else {
      const double c0 = self_speed();
      Vec rhs(cfg_.n);
      for (int j = 0; j < cfg_.n; ++j) {
        const double a = green_.grad({nodes_[j], 1.0})[1];
        rhs[j] = c0 * a + 0.5 * a * a;
      }
      rhs.array() -= rhs.mean();
      s.eta = -eps * eps * helmholtz_inv(rhs);
      s.eta.array() -= s.eta.mean();
    }
    s.c = eps * self_speed();
    return canonical(s);
  }

  // Dense Jacobian in reduced coordinates; column 0 is the epsilon direction.
  Mat dense_jacobian(const PointVortexEvaluation& ev) const {
    const int N = reduced_size();
    Mat J(N, N + 1);
    J.col(0) = reduce(ev.apply(direction_from_reduced(1.0, Vec::Zero(N))));
    for (int i = 0; i < N; ++i) {
      J.col(i + 1) = reduce(ev.apply(direction_from_reduced(0.0, Vec::Unit(N, i))));
    }
    return J;
  }

 private:
  static PeriodicGrid make_grid(const PhysicalParams& p, int n) {
    return p.setting == Setting::Periodic ? PeriodicGrid(p.L, n) : LineGrid(p.half_width, n).periodic();
  }

  PhysicalParams p_;
  SolverConfig cfg_;
  PeriodicGrid grid_;
  VortexGreen green_;
  FarField far_;
  Vec nodes_;
  int K_ = 0;
};

inline PointVortexEvaluation::PointVortexEvaluation(const PointVortexModel& model, const PointVortexState& s)
    : m_(model), s_(s), op_(model.grid(), s.eta, model.config().dtn) {
  const PeriodicGrid& grid = model.grid();
  const int n = grid.n();
  if (s.psi.size() != n) throw std::invalid_argument("point_vortex: psi size does not match grid");
  const double eps = s.epsilon, c = s.c;
  const PhysicalParams& p = model.params();
  const Vec& x = model.nodes();

  ep_ = op_.eta_prime();
  w_ = (1.0 + ep_.array().square()).matrix();
  const HarmonicExtension ext = op_.extend(s.psi);
  gpsi_ = op_.normal_derivative(ext);

  G1_.resize(n), G2_.resize(n), H12_.resize(n), H22_.resize(n);
  for (int j = 0; j < n; ++j) {
    const Point pt{x[j], 1.0 + s.eta[j]};
    const auto [gr, h] = model.far_field(pt);
    G1_[j] = gr[0], G2_[j] = gr[1];
    H12_[j] = h[1], H22_[j] = h[3];
  }

  const Vec dpsi = derivative(grid, s.psi, 1);
  A_ = gpsi_ + eps * (G2_ - ep_.cwiseProduct(G1_));
  Q_ = dpsi - ep_.cwiseProduct(gpsi_) + eps * w_.cwiseProduct(G1_);
  const Vec T = (c * A_.array() + 0.5 * A_.array().square() - 0.5 * Q_.array().square() / w_.array()).matrix();
  const Vec kappa = -derivative(grid, ep_.cwiseQuotient(w_.cwiseSqrt()), 1);
  const Vec F2raw = c * ep_ + dpsi + eps * (G1_ + ep_.cwiseProduct(G2_));

  const double a2 = p.alpha * p.alpha;
  if (model.periodic()) {
    b_ = p.g + T.mean();
    res_.F1 = (T.array() - T.mean()).matrix() + p.g * s.eta + a2 * kappa;
    res_.F2 = -derivative(grid, F2raw, 1);
  } else {
    b_ = p.g;
    res_.F1 = T + p.g * s.eta + a2 * kappa;
    res_.F2 = F2raw;
  }
  res_.F3 = c + ext.gradient_unchecked({0.0, 0.0})[1] - eps * model.self_speed();
}

inline Residual PointVortexEvaluation::apply(const Direction& dir) const {
  const PeriodicGrid& grid = m_.grid();
  const PhysicalParams& p = m_.params();
  const double eps = s_.epsilon, c = s_.c;
  const Vec& z = dir.zeta;
  const Vec zp = derivative(grid, z, 1);
  const Vec dpsi = derivative(grid, s_.psi, 1);
  const Vec dphi = derivative(grid, dir.phi, 1);

  const HarmonicExtension phi_ext = op_.extend(dir.phi);
  const Vec gphi = op_.normal_derivative(phi_ext);
  const Vec dG = dtn_shape_derivative(op_, z, s_.psi) + gphi;

  const Vec dA = dG + dir.e * (G2_ - ep_.cwiseProduct(G1_)) +
                 eps * (-zp.cwiseProduct(G1_) + z.cwiseProduct(H22_ - ep_.cwiseProduct(H12_)));
  const Vec dQ = dphi - zp.cwiseProduct(gpsi_) - ep_.cwiseProduct(dG) + dir.e * w_.cwiseProduct(G1_) +
                 eps * (2.0 * ep_.cwiseProduct(zp).cwiseProduct(G1_) + w_.cwiseProduct(z).cwiseProduct(H12_));
  const Vec dT = (dir.d * A_.array() + c * dA.array() + A_.array() * dA.array() -
                  Q_.array() * dQ.array() / w_.array() +
                  Q_.array().square() * ep_.array() * zp.array() / w_.array().square())
                     .matrix();
  const Vec dkappa = -derivative(grid, zp.cwiseQuotient(w_.cwiseProduct(w_.cwiseSqrt())), 1);
  const Vec dF2raw = dir.d * ep_ + c * zp + dphi + dir.e * (G1_ + ep_.cwiseProduct(G2_)) +
                     eps * (z.cwiseProduct(H12_ + ep_.cwiseProduct(H22_)) + zp.cwiseProduct(G2_));

  Residual r;
  const double a2 = p.alpha * p.alpha;
  if (m_.periodic()) {
    r.F1 = (dT.array() - dT.mean()).matrix() + p.g * z + a2 * dkappa;
    r.F2 = -derivative(grid, dF2raw, 1);
  } else {
    r.F1 = dT + p.g * z + a2 * dkappa;
    r.F2 = dF2raw;
  }
  const Grad2 hz = harmonic_extension_shape_derivative(op_, z, s_.psi, {0.0, 0.0});
  r.F3 = dir.d + phi_ext.gradient_unchecked({0.0, 0.0})[1] + hz[1] - dir.e * m_.self_speed();
  return r;
}

// ---------------------------------------------------------------------------
// Newton solves

struct FixEpsilon {};

struct ArclengthConstraint {
  Vec prev;     // (epsilon, reduced state) of the previous point
  Vec tangent;  // unit tangent in the same coordinates
  double ds = 0.0;
};

struct NewtonResult {
  PointVortexState state;
  std::vector<double> history;  // residual norms, one per evaluation
  int iterations = 0;
  double condition_estimate = 0.0;
};

namespace detail {

inline Vec pack(double eps, const Vec& u) {
  Vec X(u.size() + 1);
  X[0] = eps;
  X.tail(u.size()) = u;
  return X;
}

}  // namespace detail

// Dense Newton (periodic) or preconditioned Newton-GMRES (localized) at fixed epsilon.
inline NewtonResult newton_solve(const PointVortexModel& m, const PointVortexState& init, FixEpsilon = {}) {
  const SolverConfig& cfg = m.config();
  NewtonResult out;
  Vec u = m.to_reduced(init);
  const double eps = init.epsilon;
  const int N = m.reduced_size();
  for (int it = 0;; ++it) {
    const PointVortexState s = m.from_reduced(eps, u);
    const PointVortexEvaluation ev(m, s);
    const Vec r = m.reduce(ev.residual());
    const double rn = m.residual_norm(r);
    if (!std::isfinite(rn)) throw NonConvergenceError("newton: residual is not finite", rn);
    out.history.push_back(rn);
    if (rn < cfg.newton_tol) {
      out.state = s;
      out.iterations = it;
      return out;
    }
    if (it >= cfg.max_iterations) {
      throw NonConvergenceError(fmt::format("newton: no convergence in {} iterations (residual {:.3e})", it, rn), rn);
    }
    Vec du;
    if (m.periodic()) {
      const Mat J = m.dense_jacobian(ev).rightCols(N);
      Eigen::PartialPivLU<Mat> lu(J);
      out.condition_estimate = 1.0 / lu.rcond();
      du = lu.solve(-r);
    } else {
      const double c = s.c;
      const KrylovResult kr = gmres_solve(
          [&](const Vec& v) { return m.reduce(ev.apply(m.direction_from_reduced(0.0, v))); },
          [&](const Vec& v) { return m.flat_inverse(v, c); }, -r, cfg.gmres_tol, 200, 80);
      du = kr.x;
    }
    u += du;
  }
}

// Bordered Newton on (residual, arclength) in the unknowns (epsilon, reduced state).
inline NewtonResult newton_solve(const PointVortexModel& m, const PointVortexState& init,
                                 const ArclengthConstraint& con) {
  const SolverConfig& cfg = m.config();
  NewtonResult out;
  const int N = m.reduced_size();
  Vec X = detail::pack(init.epsilon, m.to_reduced(init));
  for (int it = 0;; ++it) {
    const PointVortexState s = m.from_reduced(X[0], X.tail(N));
    const PointVortexEvaluation ev(m, s);
    const Vec r = m.reduce(ev.residual());
    const double arc = con.tangent.dot(X - con.prev) - con.ds;
    const double rn = std::max(m.residual_norm(r), std::abs(arc));
    if (!std::isfinite(rn)) throw NonConvergenceError("newton: residual is not finite", rn);
    out.history.push_back(rn);
    if (rn < cfg.newton_tol) {
      out.state = s;
      out.iterations = it;
      return out;
    }
    if (it >= cfg.max_iterations) {
      throw NonConvergenceError(fmt::format("newton: no convergence in {} iterations (residual {:.3e})", it, rn), rn);
    }
    if (!m.periodic()) throw std::logic_error("arclength newton requires the periodic setting");
    Mat B(N + 1, N + 1);
    B.topRows(N) = m.dense_jacobian(ev);
    B.row(N) = con.tangent.transpose();
    Vec rhs(N + 1);
    rhs.head(N) = -r;
    rhs[N] = -arc;
    Eigen::PartialPivLU<Mat> lu(B);
    out.condition_estimate = 1.0 / lu.rcond();
    X += lu.solve(rhs);
  }
}

// Unit tangent of the solution curve at s: kernel of [J_eps J_u], oriented along `orient`.
inline Vec branch_tangent(const PointVortexModel& m, const PointVortexState& s, const Vec& orient) {
  const int N = m.reduced_size();
  const PointVortexEvaluation ev(m, s);
  Mat B(N + 1, N + 1);
  B.topRows(N) = m.dense_jacobian(ev);
  B.row(N) = orient.transpose();
  Vec rhs = Vec::Zero(N + 1);
  rhs[N] = 1.0;
  Vec t = Eigen::PartialPivLU<Mat>(B).solve(rhs);
  t.normalize();
  if (t.dot(orient) < 0.0) t = -t;
  return t;
}

}  // namespace vwave

namespace vwave {

// ---------------------------------------------------------------------------
// Continuation

struct AlternativeThresholds {
  double blowup = 1e2;
  double epsilon_floor = 1e-6;
  double nontrivial_floor = 1e-4;
  double separation_floor = 0.05;
};

struct ContinuationConfig {
  double ds = 0.05;
  int n_steps = 50;
  int max_halvings = 8;
  int direction = +1;  // sign of d(epsilon) at the first step
  AlternativeThresholds thresholds{};
};

struct AlternativeFlags {
  bool unbounded = false;     // (i) the state norm exceeds the blow-up threshold
  bool irrotational = false;  // (ii) epsilon ~ 0 on a nontrivial state
  bool separation = false;    // (iii) the surface approaches the vortex

  bool any() const { return unbounded || irrotational || separation; }
  std::vector<std::string> names() const {
    std::vector<std::string> v;
    if (unbounded) v.emplace_back("unbounded");
    if (irrotational) v.emplace_back("irrotational");
    if (separation) v.emplace_back("separation");
    return v;
  }
};

struct BranchPoint {
  PointVortexState state;
  double arclength = 0.0;
  double residual_norm = 0.0;
  double jacobian_condition = 0.0;
  AlternativeFlags flags{};
  double ds = 0.0;  // step length to use for the next step
  int newton_iterations = 0;
};

struct Branch {
  std::vector<BranchPoint> points;
  std::string termination;  // empty when all requested steps were taken
};

inline double state_norm(const PointVortexState& s) {
  return std::max({std::abs(s.epsilon), s.eta.cwiseAbs().maxCoeff(), s.psi.cwiseAbs().maxCoeff(), std::abs(s.c)});
}

inline AlternativeFlags detect_alternatives(const PointVortexModel& m, const PointVortexState& s,
                                            const AlternativeThresholds& th) {
  AlternativeFlags f;
  f.unbounded = state_norm(s) > th.blowup;
  const double amp = std::max(s.eta.cwiseAbs().maxCoeff(), s.psi.cwiseAbs().maxCoeff());
  f.irrotational = std::abs(s.epsilon) < th.epsilon_floor && amp > th.nontrivial_floor;
  f.separation = 1.0 + s.eta[m.origin_index()] < th.separation_floor;
  return f;
}

inline BranchPoint make_branch_point(const PointVortexModel& m, const PointVortexState& s, double arclength,
                                     double ds_next, int iterations, double cond, const AlternativeThresholds& th) {
  BranchPoint bp;
  bp.state = s;
  bp.arclength = arclength;
  bp.residual_norm = m.residual_norm(m.residual(s));
  bp.jacobian_condition = cond;
  bp.flags = detect_alternatives(m, s, th);
  bp.ds = ds_next;
  bp.newton_iterations = iterations;
  return bp;
}

namespace detail {

inline Vec branch_coordinates(const PointVortexModel& m, const PointVortexState& s) {
  return pack(s.epsilon, m.to_reduced(s));
}

inline double bordered_condition(const PointVortexModel& m, const PointVortexState& s, const Vec& t) {
  const int N = m.reduced_size();
  const PointVortexEvaluation ev(m, s);
  Mat B(N + 1, N + 1);
  B.topRows(N) = m.dense_jacobian(ev);
  B.row(N) = t.transpose();
  return 1.0 / Eigen::PartialPivLU<Mat>(B).rcond();
}

}  // namespace detail

// Pseudo-arclength continuation (periodic) or natural-parameter stepping in epsilon (localized).
// Extends `branch` in place by up to cfg.n_steps accepted points; a seed branch must hold one converged point.
inline void continue_branch(const PointVortexModel& m, Branch& branch, const ContinuationConfig& cfg) {
  if (branch.points.empty()) throw std::invalid_argument("continue_branch: empty seed");
  if (!(cfg.ds > 0.0)) throw std::invalid_argument("continue_branch: ds must be positive");
  branch.termination.clear();
  if (branch.points.back().flags.any()) {
    branch.termination = "seed already flags an alternative";
    return;
  }
  const double dir = cfg.direction >= 0 ? 1.0 : -1.0;
  for (int step = 0; step < cfg.n_steps; ++step) {
    const BranchPoint& last = branch.points.back();
    const Vec X0 = detail::branch_coordinates(m, last.state);
    Vec orient = Vec::Zero(X0.size());
    if (branch.points.size() >= 2) {
      orient = X0 - detail::branch_coordinates(m, branch.points[branch.points.size() - 2].state);
      orient.normalize();
    } else {
      orient[0] = dir;
    }
    double ds = last.ds > 0.0 ? std::min(last.ds, cfg.ds) : cfg.ds;
    std::optional<NewtonResult> accepted;
    Vec tangent;
    std::string failure;
    for (int halving = 0; halving <= cfg.max_halvings; ++halving, ds *= 0.5) {
      try {
        if (m.periodic()) {
          tangent = branch_tangent(m, last.state, orient);
          ArclengthConstraint con{X0, tangent, ds};
          const Vec Xp = X0 + ds * tangent;
          const PointVortexState guess = m.from_reduced(Xp[0], Xp.tail(m.reduced_size()));
          accepted = newton_solve(m, guess, con);
        } else {
          const double eps = last.state.epsilon + ds * (branch.points.size() >= 2 ? (orient[0] >= 0 ? 1.0 : -1.0) : dir);
          PointVortexState guess = last.state;
          guess.epsilon = eps;
          accepted = newton_solve(m, guess);
        }
        break;
      } catch (const std::exception& e) {
        failure = e.what();
        accepted.reset();
      }
    }
    if (!accepted) {
      branch.termination = "step-size underflow after repeated halving: " + failure;
      return;
    }
    const PointVortexState s = accepted->state;
    const int its = accepted->iterations;
    const double ds_next = its <= 3 ? std::min(2.0 * ds, cfg.ds) : ds;
    double arc = ds;
    double cond = accepted->condition_estimate;
    if (!m.periodic()) arc = (detail::branch_coordinates(m, s) - X0).norm();
    if (m.periodic()) cond = detail::bordered_condition(m, s, tangent);
    branch.points.push_back(
        make_branch_point(m, s, last.arclength + arc, ds_next, its, cond, cfg.thresholds));
    if (branch.points.back().flags.any()) {
      const auto names = branch.points.back().flags.names();
      branch.termination = "alternative flagged: " + fmt::format("{}", fmt::join(names, ","));
      return;
    }
  }
}

inline Branch start_branch(const PointVortexModel& m, const PointVortexState& seed, const ContinuationConfig& cfg) {
  Branch b;
  const PointVortexState s = m.canonical(seed);
  b.points.push_back(make_branch_point(m, s, 0.0, cfg.ds, 0, 0.0, cfg.thresholds));
  continue_branch(m, b, cfg);
  return b;
}

}  // namespace vwave
