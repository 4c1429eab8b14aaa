#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <fmt/format.h>

#include "vwave/dtn.hpp"
#include "vwave/krylov.hpp"
#include "vwave/point_vortex.hpp"
#include "vwave/spectral.hpp"
#include "vwave/vortex_green.hpp"

namespace vwave {

// ---------------------------------------------------------------------------
// Vorticity strength function

struct StrengthFn {
  std::string name;
  std::function<double(double)> gamma;
  std::function<double(double)> dgamma;
  int smoothness = 0;  // 0 = smooth

  double operator()(double t) const { return gamma(t); }

  // gamma0(t) = -t + t^2
  static StrengthFn quadratic() {
    return {"quadratic", [](double t) { return -t + t * t; }, [](double t) { return -1.0 + 2.0 * t; }, 0};
  }
  // gamma1(t) = -t e^{-t}
  static StrengthFn exponential() {
    return {"exponential", [](double t) { return -t * std::exp(-t); },
            [](double t) { return (t - 1.0) * std::exp(-t); }, 0};
  }

  static StrengthFn by_name(const std::string& n) {
    if (n == "quadratic") return quadratic();
    if (n == "exponential") return exponential();
    throw std::invalid_argument(fmt::format("unknown strength function '{}'", n));
  }

  void validate() const {
    if (!gamma || !dgamma) throw std::invalid_argument("StrengthFn: gamma and gamma' are required");
    if (std::abs(gamma(0.0)) > 1e-14) throw std::invalid_argument("StrengthFn: gamma(0) must vanish");
    if (!(dgamma(0.0) < 0.0)) throw std::invalid_argument("StrengthFn: gamma'(0) must be negative");
  }

  // Positivity on [t_min, 0), sampled.
  bool positive_on(double t_min, int samples = 400) const {
    for (int k = 1; k <= samples; ++k) {
      const double t = t_min * k / samples;
      if (!(gamma(t) > 0.0)) return false;
    }
    return true;
  }
};

namespace detail {

// Chebyshev points x_j = cos(pi j / N) and the differentiation matrix.
struct Chebyshev {
  Vec x;
  Mat D;
};

inline Chebyshev chebyshev(int N) {
  Chebyshev c;
  c.x.resize(N + 1);
  for (int j = 0; j <= N; ++j) c.x[j] = std::cos(pi * j / N);
  c.D = Mat::Zero(N + 1, N + 1);
  auto cw = [N](int j) { return (j == 0 || j == N) ? 2.0 : 1.0; };
  for (int i = 0; i <= N; ++i) {
    for (int j = 0; j <= N; ++j) {
      if (i == j) continue;
      const double sgn = ((i + j) % 2) ? -1.0 : 1.0;
      c.D(i, j) = cw(i) / cw(j) * sgn / (c.x[i] - c.x[j]);
    }
  }
  for (int i = 0; i <= N; ++i) c.D(i, i) = -c.D.row(i).sum();
  return c;
}

// Gauss-Legendre nodes and weights on [0, 1] (Golub-Welsch).
inline std::pair<Vec, Vec> gauss_legendre01(int n) {
  Mat T = Mat::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    T(k, k - 1) = T(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(T);
  Vec x = (es.eigenvalues().array() + 1.0) * 0.5;
  Vec w = es.eigenvectors().row(0).transpose().array().square().matrix();  // weights on [-1,1] / 2
  return {x, w};
}

// Barycentric interpolation matrix from Chebyshev points x (second kind) to targets t.
inline Mat chebyshev_interpolation(const Vec& x, const Vec& t) {
  const int N = static_cast<int>(x.size()) - 1;
  Vec w(N + 1);
  for (int j = 0; j <= N; ++j) w[j] = ((j % 2) ? -1.0 : 1.0) * ((j == 0 || j == N) ? 0.5 : 1.0);
  Mat P = Mat::Zero(t.size(), N + 1);
  for (int i = 0; i < t.size(); ++i) {
    double den = 0.0;
    int hit = -1;
    for (int j = 0; j <= N; ++j) {
      const double d = t[i] - x[j];
      if (d == 0.0) {
        hit = j;
        break;
      }
      P(i, j) = w[j] / d;
      den += P(i, j);
    }
    if (hit >= 0) {
      P.row(i).setZero();
      P(i, hit) = 1.0;
    } else {
      P.row(i) /= den;
    }
  }
  return P;
}

// Radial operators on the positive half of an odd-degree Chebyshev grid. Functions are
// extended to [-1, 1] with parity s (= (-1)^n for Fourier mode n); the value at r = 1 is zero.
struct RadialGrid {
  int N = 0;   // Chebyshev degree (odd)
  int nr = 0;  // positive interior nodes (N - 1) / 2
  Chebyshev ch;
  Mat D2;
  Vec r;

  explicit RadialGrid(int positive_nodes) : N(2 * positive_nodes + 1), nr(positive_nodes), ch(chebyshev(N)) {
    if (positive_nodes < 2) throw std::invalid_argument("radial grid: need at least 2 nodes");
    D2 = ch.D * ch.D;
    r = ch.x.segment(1, nr);
  }

  // Folded matrix: rows and columns over positive interior nodes.
  Mat fold(const Mat& M, int parity) const {
    Mat F(nr, nr);
    for (int i = 0; i < nr; ++i) {
      for (int j = 0; j < nr; ++j) F(i, j) = M(i + 1, j + 1) + parity * M(i + 1, N - 1 - j);
    }
    return F;
  }

  // d/dr at r = 1 of a folded vector.
  double boundary_slope(const Vec& v, int parity) const {
    double s = 0.0;
    for (int j = 0; j < nr; ++j) s += (ch.D(0, j + 1) + parity * ch.D(0, N - 1 - j)) * v[j];
    return s;
  }

  // Radial operator d2 + (1/r) d - n^2 / r^2 for mode n.
  Mat bessel_operator(int n) const {
    const int parity = (n % 2) ? -1 : 1;
    Mat A = fold(D2, parity);
    const Mat B = fold(ch.D, parity);
    for (int i = 0; i < nr; ++i) {
      A.row(i) += B.row(i) / r[i];
      A(i, i) -= double(n) * n / (r[i] * r[i]);
    }
    return A;
  }

  // Interpolation to targets in (0, 1]: returns (positive-node, mirrored-node) weight blocks.
  std::pair<Mat, Mat> interpolation(const Vec& t) const {
    const Mat P = chebyshev_interpolation(ch.x, t);
    Mat pos(t.size(), nr), neg(t.size(), nr);
    for (int j = 0; j < nr; ++j) {
      pos.col(j) = P.col(j + 1);
      neg.col(j) = P.col(N - 1 - j);
    }
    return {pos, neg};
  }
};

// Integrates u'' + u'/r = g(u), u'(0) = 0 from r = 0 to 1 with RK4; returns u(1).
inline double shoot_radial(const std::function<double(double)>& g, double u0, int steps = 2000) {
  const double r0 = 1e-6;
  double u = u0 + g(u0) * r0 * r0 / 4.0, v = g(u0) * r0 / 2.0;
  const double h = (1.0 - r0) / steps;
  double r = r0;
  auto f = [&](double rr, double uu, double vv) { return std::pair<double, double>{vv, g(uu) - vv / rr}; };
  for (int k = 0; k < steps; ++k) {
    const auto [a1, b1] = f(r, u, v);
    const auto [a2, b2] = f(r + h / 2, u + h / 2 * a1, v + h / 2 * b1);
    const auto [a3, b3] = f(r + h / 2, u + h / 2 * a2, v + h / 2 * b2);
    const auto [a4, b4] = f(r + h, u + h * a3, v + h * b3);
    u += h / 6 * (a1 + 2 * a2 + 2 * a3 + a4);
    v += h / 6 * (b1 + 2 * b2 + 2 * b3 + b4);
    r += h;
    if (!std::isfinite(u) || std::abs(u) > 1e6) return std::numeric_limits<double>::quiet_NaN();
  }
  return u;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Radial profile and resolvents

struct RadialConfig {
  int nodes = 64;  // positive Chebyshev nodes; degree 2 * nodes + 1
  double tol = 1e-12;
  int max_iterations = 50;
  int check_modes = 8;  // nondegeneracy checked for modes 0..check_modes
  double degeneracy_floor = 1e-6;
  double search_min = -60.0;  // shooting bracket for the centre value of u = F/a
};

class DegenerateStrengthError : public std::runtime_error {
 public:
  DegenerateStrengthError(const std::string& what, int m) : std::runtime_error(what), mode(m) {}
  int mode;
};

// F = a u with u'' + u'/r = gamma(u), u(1) = 0, u < 0; a = 1 / (2 pi u'(1)).
struct RadialProfile {
  std::shared_ptr<const detail::RadialGrid> grid;
  Vec r;   // positive interior nodes, descending from near 1 to near 0
  Vec u;   // F / a
  Vec F;   // F*
  Vec dF;  // dF*/dr
  double a = 0.0;
  double dF_boundary = 0.0;  // dF*/dr at r = 1
  double gamma_range = 0.0;  // most negative argument of gamma visited
  double min_singular_value = 0.0;
  int iterations = 0;

  double value(double rr) const {
    const auto [pos, neg] = grid->interpolation(Vec::Constant(1, rr));
    return (pos * F + neg * F)(0);
  }
  double center() const { return value(0.0); }
};

inline RadialProfile solve_radial_profile(const StrengthFn& g, const RadialConfig& cfg = {}) {
  g.validate();
  auto grid = std::make_shared<const detail::RadialGrid>(cfg.nodes);
  const detail::RadialGrid& G = *grid;
  const Mat L0 = G.bessel_operator(0);

  // bracket the centre value: first sign change of u(1) scanning away from 0
  double lo = 0.0, hi = 0.0;
  {
    const int scan = 240;
    double prev_u0 = -1e-3;
    double prev = detail::shoot_radial(g.gamma, prev_u0);
    bool found = false;
    for (int k = 1; k <= scan && !found; ++k) {
      const double u0 = -1e-3 + (cfg.search_min + 1e-3) * k / scan;
      const double v = detail::shoot_radial(g.gamma, u0);
      if (std::isfinite(prev) && std::isfinite(v) && prev < 0.0 && v >= 0.0) {
        lo = prev_u0, hi = u0, found = true;
      }
      if (!std::isfinite(v)) break;
      prev = v, prev_u0 = u0;
    }
    if (!found) throw std::runtime_error(fmt::format("radial profile: no negative solution for gamma '{}'", g.name));
    for (int k = 0; k < 60; ++k) {
      const double mid = 0.5 * (lo + hi);
      (detail::shoot_radial(g.gamma, mid) < 0.0 ? lo : hi) = mid;
    }
  }
  const double u0 = 0.5 * (lo + hi);

  RadialProfile p;
  p.grid = grid;
  p.r = G.r;
  Vec u = (u0 * (1.0 - G.r.array().square())).matrix();
  double last = std::numeric_limits<double>::infinity();
  for (int it = 0;; ++it) {
    Vec R = L0 * u;
    Mat J = L0;
    for (int i = 0; i < G.nr; ++i) {
      R[i] -= g.gamma(u[i]);
      J(i, i) -= g.dgamma(u[i]);
    }
    const double rn = R.cwiseAbs().maxCoeff();
    if (!std::isfinite(rn)) throw std::runtime_error("radial profile: residual not finite");
    const double scale = cfg.tol * (1.0 + u.cwiseAbs().maxCoeff());
    if (rn < scale || (rn < 1e3 * scale && rn > 0.5 * last)) {
      p.iterations = it;
      break;
    }
    last = rn;
    if (it >= cfg.max_iterations) {
      throw std::runtime_error(fmt::format("radial profile: Newton did not converge (residual {:.3e})", rn));
    }
    u -= J.partialPivLu().solve(R);
  }
  if (!(u.maxCoeff() < 0.0)) throw std::runtime_error("radial profile: solution is not negative");

  // a from the mass normalization int_B Delta F = 1; the boundary slope is then an independent check
  p.u = u;
  {
    const auto [t, w] = detail::gauss_legendre01(G.nr + 16);
    const auto [pos, neg] = G.interpolation(t);
    const Vec ut = (pos + neg) * u;
    double mass = 0.0;
    for (int q = 0; q < t.size(); ++q) mass += w[q] * t[q] * g.gamma(ut[q]);
    p.a = 1.0 / (2.0 * pi * mass);
  }
  if (!(p.a > 0.0)) throw std::runtime_error("radial profile: a must be positive");
  p.F = p.a * u;
  p.dF = G.fold(G.ch.D, 1) * p.F;
  p.dF_boundary = G.boundary_slope(p.F, 1);
  p.gamma_range = u.minCoeff();
  if (!g.positive_on(p.gamma_range)) {
    throw std::runtime_error(fmt::format("radial profile: gamma is not positive on [{:.4g}, 0)", p.gamma_range));
  }

  // nondegeneracy of Laplacian - gamma'(u), mode by mode
  p.min_singular_value = std::numeric_limits<double>::infinity();
  for (int n = 0; n <= cfg.check_modes; ++n) {
    Mat A = G.bessel_operator(n);
    for (int i = 0; i < G.nr; ++i) A(i, i) -= g.dgamma(u[i]);
    const Vec sv = Eigen::JacobiSVD<Mat>(A).singularValues();
    const double smin = sv[sv.size() - 1];
    p.min_singular_value = std::min(p.min_singular_value, smin);
    if (!(smin > cfg.degeneracy_floor)) {
      throw DegenerateStrengthError(
          fmt::format("radial profile: Laplacian - gamma'(F*/a*) is degenerate in mode {} (sigma_min {:.3e})", n, smin),
          n);
    }
  }
  return p;
}

// q_n = a* (d2 + d/r - n^2/r^2 - gamma'(F*/a*))^{-1} [gamma(F*/a*) r^n], q_n(1) = 0.
struct RadialResolvent {
  int n = 1;
  Vec q;
  double slope = 0.0;  // q_n'(1)
  double kappa = 0.0;  // 1 - 2 pi (n+1)/n q_n'(1)
};

inline RadialResolvent solve_resolvent(const RadialProfile& p, const StrengthFn& g, int n) {
  if (n < 1) throw std::invalid_argument("solve_resolvent: n must be >= 1");
  const detail::RadialGrid& G = *p.grid;
  Mat A = G.bessel_operator(n);
  Vec rhs(G.nr);
  for (int i = 0; i < G.nr; ++i) {
    A(i, i) -= g.dgamma(p.u[i]);
    rhs[i] = p.a * g.gamma(p.u[i]) * std::pow(G.r[i], n);
  }
  Eigen::PartialPivLU<Mat> lu(A);
  if (!(lu.rcond() > 1e-14)) throw DegenerateStrengthError(fmt::format("solve_resolvent: mode {} is degenerate", n), n);
  RadialResolvent res;
  res.n = n;
  res.q = lu.solve(rhs);
  const int parity = (n % 2) ? -1 : 1;
  res.slope = G.boundary_slope(res.q, parity);
  res.kappa = 1.0 - 2.0 * pi * (n + 1.0) / n * res.slope;
  return res;
}

// kappa_1..kappa_{n_max}; the diagonal of d/dtheta D H(0) is -(n / 2 pi) kappa_n.
inline Vec linearized_H_spectrum(const RadialProfile& p, const StrengthFn& g, int n_max) {
  Vec k(n_max);
  for (int n = 1; n <= n_max; ++n) k[n - 1] = solve_resolvent(p, g, n).kappa;
  return k;
}

// ---------------------------------------------------------------------------
// Shape coefficients and the conformal map

// cos((n - 1) pi / 2 + n theta), evaluated without rounding the phase.
inline double shape_basis(int n, double theta) {
  const double x = n * theta;
  switch (((n - 1) % 4 + 4) % 4) {
    case 0: return std::cos(x);
    case 1: return -std::sin(x);
    case 2: return -std::cos(x);
    default: return std::sin(x);
  }
}

struct ShapeCoeffs {
  Vec beta;  // beta[k] holds beta_{k+2}

  ShapeCoeffs() = default;
  explicit ShapeCoeffs(int n_max) : beta(Vec::Zero(std::max(0, n_max - 1))) {}

  int n_max() const { return static_cast<int>(beta.size()) + 1; }
  double get(int n) const { return (n >= 2 && n <= n_max()) ? beta[n - 2] : 0.0; }
  void set(int n, double v) {
    if (n < 2 || n > n_max()) throw std::out_of_range(fmt::format("ShapeCoeffs: mode {} outside 2..{}", n, n_max()));
    beta[n - 2] = v;
  }
  double evaluate(double theta) const {
    double s = 0.0;
    for (int n = 2; n <= n_max(); ++n) s += get(n) * shape_basis(n, theta);
    return s;
  }
  double sobolev_norm(double s) const {
    double acc = 0.0;
    for (int n = 2; n <= n_max(); ++n) acc += std::pow(double(n), 2.0 * s) * get(n) * get(n);
    return std::sqrt(acc);
  }
};

class ShapeTooDeformedError : public std::runtime_error {
 public:
  explicit ShapeTooDeformedError(double m)
      : std::runtime_error(fmt::format("conformal map: min |Gamma'| = {:.3e} is below the univalence guard", m)),
        min_derivative(m) {}
  double min_derivative;
};

// Gamma(z) = z + sum_{n>=2} i^{n-1} beta_n z^n
class ConformalMap {
 public:
  explicit ConformalMap(ShapeCoeffs b = ShapeCoeffs(2), double guard = 0.1) : beta_(std::move(b)) {
    if (!beta_.beta.allFinite()) throw std::invalid_argument("conformal map: coefficients must be finite");
    const int N = beta_.n_max();
    a_ = CVec::Zero(N + 1);
    a_[1] = 1.0;
    const cplx i_pow[4] = {1.0, cplx(0, 1), -1.0, cplx(0, -1)};
    for (int n = 2; n <= N; ++n) a_[n] = i_pow[(n - 1) % 4] * beta_.get(n);
    min_dgamma_ = std::numeric_limits<double>::infinity();
    max_boundary_ = 0.0;
    const int nr = 16, nt = 256;
    for (int i = 0; i <= nr; ++i) {
      for (int k = 0; k < nt; ++k) {
        const cplx z = std::polar(double(i) / nr, 2.0 * pi * k / nt);
        min_dgamma_ = std::min(min_dgamma_, std::abs(derivative(z)));
        if (i == nr) max_boundary_ = std::max(max_boundary_, std::abs((*this)(z)));
      }
    }
    if (!(min_dgamma_ > guard)) throw ShapeTooDeformedError(min_dgamma_);
  }

  const ShapeCoeffs& shape() const { return beta_; }
  const CVec& coefficients() const { return a_; }  // a_0 .. a_{n_max}
  double min_derivative_modulus() const { return min_dgamma_; }
  double max_boundary_modulus() const { return max_boundary_; }

  cplx operator()(cplx z) const {
    cplx s = 0.0;
    for (int n = static_cast<int>(a_.size()) - 1; n >= 1; --n) s = (s + a_[n]) * z;
    return s;
  }
  cplx derivative(cplx z) const {
    cplx s = 0.0;
    for (int n = static_cast<int>(a_.size()) - 1; n >= 1; --n) s = s * z + double(n) * a_[n];
    return s;
  }
  // (Gamma(w) - Gamma(z)) / (w - z), regular at w = z.
  cplx difference_quotient(cplx w, cplx z) const {
    cplx S = 1.0, zp = 1.0, q = a_[1];
    for (int n = 2; n < a_.size(); ++n) {
      zp *= z;
      S = w * S + zp;
      q += a_[n] * S;
    }
    return q;
  }
  cplx boundary(double theta) const { return (*this)(std::polar(1.0, theta)); }

  // Re Gamma odd and Im Gamma even in x1, at sampled points.
  double symmetry_defect(int samples = 64) const {
    double d = 0.0;
    for (int k = 0; k < samples; ++k) {
      const cplx z = std::polar(0.3 + 0.7 * k / samples, 2.0 * pi * (k * 0.618034));
      const cplx zm(-z.real(), z.imag());
      const cplx g = (*this)(z), gm = (*this)(zm);
      d = std::max({d, std::abs(g.real() + gm.real()), std::abs(g.imag() - gm.imag())});
    }
    return d;
  }

 private:
  ShapeCoeffs beta_;
  CVec a_;
  double min_dgamma_ = 0.0;
  double max_boundary_ = 0.0;
};

inline ConformalMap build_conformal_map(const ShapeCoeffs& b) { return ConformalMap(b); }

// ---------------------------------------------------------------------------
// Semilinear problem on the disk

struct DiskConfig {
  int radial = 24;       // positive Chebyshev nodes
  int angular = 64;      // Fourier nodes, even
  int quad_radial = 28;  // Gauss-Legendre nodes for integrals over the disk
  double tol = 1e-9;  // max-norm PDE residual
  int max_iterations = 20;
};

// F = a U on the polar grid; rho = Delta F at the quadrature nodes.
struct DiskField {
  Mat U;    // radial x angular
  double a = 0.0;
  Mat rho;  // quad_radial x angular
  Mat weights;  // r dr dtheta quadrature weights, same shape as rho
  double residual = 0.0;
  int iterations = 0;

  Mat F() const { return a * U; }
  double total() const { return rho.cwiseProduct(weights).sum(); }
  // Largest |F(x1, x2) - F(-x1, x2)| on the grid.
  double symmetry_defect() const {
    const int nt = static_cast<int>(U.cols());
    double d = 0.0;
    for (int k = 0; k < nt; ++k) d = std::max(d, (U.col(k) - U.col(((nt / 2 - k) % nt + nt) % nt)).cwiseAbs().maxCoeff());
    return a * d;
  }
};

class SemilinearNonConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DiskSolver {
 public:
  explicit DiskSolver(StrengthFn g, DiskConfig cfg = {}) : g_(std::move(g)), cfg_(cfg) {
    if (cfg_.angular < 8 || cfg_.angular % 2) throw std::invalid_argument("DiskConfig: angular must be even and >= 8");
    RadialConfig rc;
    rc.nodes = cfg_.radial;
    profile_ = solve_radial_profile(g_, rc);
    const detail::RadialGrid& G = *profile_.grid;
    const int nr = G.nr;
    Mat M = G.D2;
    for (int i = 1; i < G.N; ++i) M.row(i) += G.ch.D.row(i) / G.ch.x[i];
    E1_.resize(nr, nr), E2_.resize(nr, nr);
    for (int i = 0; i < nr; ++i) {
      for (int j = 0; j < nr; ++j) E1_(i, j) = M(i + 1, j + 1), E2_(i, j) = M(i + 1, G.N - 1 - j);
    }
    inv_r2_ = G.r.array().inverse().square().matrix();
    for (int m = 0; m <= cfg_.angular / 2; ++m) {
      Mat A = G.bessel_operator(m);
      for (int i = 0; i < nr; ++i) A(i, i) -= g_.dgamma(profile_.u[i]);
      lu_.emplace_back(A);
    }
    theta_.resize(cfg_.angular);
    for (int k = 0; k < cfg_.angular; ++k) theta_[k] = 2.0 * pi * k / cfg_.angular;
    std::tie(tq_, wq_) = detail::gauss_legendre01(cfg_.quad_radial);
    std::tie(Ipos_, Ineg_) = G.interpolation(tq_);
  }

  const StrengthFn& strength() const { return g_; }
  const DiskConfig& config() const { return cfg_; }
  const RadialProfile& profile() const { return profile_; }
  const Vec& radii() const { return profile_.r; }
  const Vec& angles() const { return theta_; }
  const Vec& quad_radii() const { return tq_; }
  const Vec& quad_weights() const { return wq_; }

  Mat laplacian(const Mat& U) const {
    return E1_ * U + E2_ * half_turn(U) + inv_r2_.asDiagonal() * theta_second_derivative(U);
  }

  // Inverse of the linearization at the radial solution, mode by mode.
  Mat radial_inverse(const Mat& R) const {
    const int nr = static_cast<int>(R.rows()), nt = cfg_.angular;
    Eigen::MatrixXcd C(nr, nt);
    std::vector<double> in(nt);
    std::vector<cplx> out;
    for (int i = 0; i < nr; ++i) {
      for (int k = 0; k < nt; ++k) in[k] = R(i, k);
      detail::fft_engine().fwd(out, in);
      for (int k = 0; k < nt; ++k) C(i, k) = out[k];
    }
    for (int k = 0; k < nt; ++k) {
      const int m = std::abs(k <= nt / 2 ? k : k - nt);
      const Vec re = lu_[m].solve(C.col(k).real()), im = lu_[m].solve(C.col(k).imag());
      for (int i = 0; i < nr; ++i) C(i, k) = cplx(re[i], im[i]);
    }
    Mat X(nr, nt);
    std::vector<cplx> cin(nt), cout;
    for (int i = 0; i < nr; ++i) {
      for (int k = 0; k < nt; ++k) cin[k] = C(i, k);
      detail::fft_engine().inv(cout, cin);
      for (int k = 0; k < nt; ++k) X(i, k) = cout[k].real();
    }
    return X;
  }

  // Outward flux of grad F through the unit circle; equals int_B Delta F.
  double boundary_flux(const DiskField& f) const {
    const detail::RadialGrid& G = *profile_.grid;
    const Mat S = half_turn(f.U);
    double flux = 0.0;
    for (int k = 0; k < cfg_.angular; ++k) {
      for (int j = 0; j < G.nr; ++j) flux += G.ch.D(0, j + 1) * f.U(j, k) + G.ch.D(0, G.N - 1 - j) * S(j, k);
    }
    return f.a * flux * 2.0 * pi / cfg_.angular;
  }

  // Values at the quadrature radii (rows) on the same angles.
  Mat to_quadrature(const Mat& U) const { return Ipos_ * U + Ineg_ * half_turn(U); }

  DiskField solve(const ConformalMap& map) const {
    const int nr = static_cast<int>(profile_.r.size()), nt = cfg_.angular;
    Mat J2(nr, nt);
    for (int i = 0; i < nr; ++i) {
      for (int k = 0; k < nt; ++k) J2(i, k) = std::norm(map.derivative(std::polar(profile_.r[i], theta_[k])));
    }
    Mat U = profile_.u.replicate(1, nt);
    auto gam = [&](const Mat& V) { return V.unaryExpr([&](double t) { return g_.gamma(t); }).eval(); };
    auto flat = [nr, nt](const Mat& A) { return Eigen::Map<const Vec>(A.data(), nr * nt).eval(); };
    auto shape = [nr, nt](const Vec& v) { return Eigen::Map<const Mat>(v.data(), nr, nt).eval(); };

    DiskField out;
    double last = std::numeric_limits<double>::infinity();
    for (int it = 0;; ++it) {
      const Mat R = laplacian(U) - J2.cwiseProduct(gam(U));
      const double rn = R.cwiseAbs().maxCoeff();
      if (!std::isfinite(rn)) throw SemilinearNonConvergence("semilinear solve: residual is not finite; try a smaller beta");
      // stop at the tolerance, or at the rounding floor once Newton stops gaining
      if (rn < cfg_.tol || (rn < 1e3 * cfg_.tol && rn > 0.5 * last)) {
        out.residual = rn;
        out.iterations = it;
        break;
      }
      if (it >= cfg_.max_iterations) {
        throw SemilinearNonConvergence(
            fmt::format("semilinear solve: no convergence in {} iterations (residual {:.3e}); try a smaller beta", it, rn));
      }
      const Mat W = J2.cwiseProduct(U.unaryExpr([&](double t) { return g_.dgamma(t); }));
      const KrylovResult kr = gmres_solve(
          [&](const Vec& v) {
            const Mat V = shape(v);
            return flat(laplacian(V) - W.cwiseProduct(V));
          },
          [&](const Vec& v) { return flat(radial_inverse(shape(v))); }, -flat(R), 1e-13, 200, 60);
      U += shape(kr.x);
      last = rn;
    }
    if (!(U.maxCoeff() < 0.0)) throw SemilinearNonConvergence("semilinear solve: F is not negative inside the disk");

    const Mat Uq = to_quadrature(U);
    out.U = U;
    out.weights.resize(tq_.size(), nt);
    out.rho.resize(tq_.size(), nt);
    for (int q = 0; q < tq_.size(); ++q) {
      for (int k = 0; k < nt; ++k) {
        out.weights(q, k) = wq_[q] * tq_[q] * 2.0 * pi / nt;
        out.rho(q, k) = std::norm(map.derivative(std::polar(tq_[q], theta_[k]))) * g_.gamma(Uq(q, k));
      }
    }
    out.a = 1.0 / out.total();
    out.rho *= out.a;
    return out;
  }

 private:
  Mat half_turn(const Mat& U) const {
    const int h = cfg_.angular / 2;
    Mat S(U.rows(), U.cols());
    S.leftCols(h) = U.rightCols(h);
    S.rightCols(h) = U.leftCols(h);
    return S;
  }

  Mat theta_second_derivative(const Mat& U) const {
    const int nt = cfg_.angular;
    Mat X(U.rows(), nt);
    std::vector<double> in(nt);
    std::vector<cplx> out, back;
    for (int i = 0; i < U.rows(); ++i) {
      for (int k = 0; k < nt; ++k) in[k] = U(i, k);
      detail::fft_engine().fwd(out, in);
      for (int k = 0; k < nt; ++k) {
        const double m = k <= nt / 2 ? k : k - nt;
        out[k] *= -m * m;
      }
      detail::fft_engine().inv(back, out);
      for (int k = 0; k < nt; ++k) X(i, k) = back[k].real();
    }
    return X;
  }

  StrengthFn g_;
  DiskConfig cfg_;
  RadialProfile profile_;
  Mat E1_, E2_;
  Vec inv_r2_;
  std::vector<Eigen::PartialPivLU<Mat>> lu_;
  Vec theta_, tq_, wq_;
  Mat Ipos_, Ineg_;
};

inline DiskField solve_semilinear(const ConformalMap& map, const StrengthFn& g, const DiskConfig& cfg = {}) {
  return DiskSolver(g, cfg).solve(map);
}

// ---------------------------------------------------------------------------
// Boundary operator H

struct BoundaryTrace {
  Vec theta;
  Vec values;
  double mean = 0.0;
};

// (1/2 pi) int_B log|Gamma(e^{i theta}) - Gamma(z)| Delta F(z) dz on M equispaced angles.
// log|Gamma(w) - Gamma(z)| = log|w - z| + log|Q(w, z)|; the first part is done by disk moments.
inline BoundaryTrace eval_H(const DiskSolver& solver, const ConformalMap& map, const DiskField& f, int M) {
  const Vec& tq = solver.quad_radii();
  const Vec& wq = solver.quad_weights();
  const Vec& th = solver.angles();
  const int nq = static_cast<int>(tq.size()), nt = static_cast<int>(th.size());
  BoundaryTrace out;
  out.theta.resize(M);
  out.values = Vec::Zero(M);
  std::vector<cplx> nodes;
  std::vector<double> mass;
  nodes.reserve(nq * nt);
  for (int k = 0; k < nt; ++k) {
    for (int q = 0; q < nq; ++q) {
      nodes.push_back(std::polar(tq[q], th[k]));
      mass.push_back(f.rho(q, k) * f.weights(q, k));
    }
  }
  // radial moments of the angular modes of rho
  Eigen::MatrixXcd moments = Eigen::MatrixXcd::Zero(nt / 2, 1);
  std::vector<double> in(nt);
  std::vector<cplx> spec;
  for (int q = 0; q < nq; ++q) {
    for (int k = 0; k < nt; ++k) in[k] = f.rho(q, k);
    detail::fft_engine().fwd(spec, in);
    for (int m = 1; m < nt / 2; ++m) moments(m, 0) += wq[q] * std::pow(tq[q], m + 1) * spec[m] / double(nt);
  }
  for (int j = 0; j < M; ++j) {
    const double t = 2.0 * pi * j / M;
    out.theta[j] = t;
    const cplx w = std::polar(1.0, t);
    double A = 0.0;
    for (std::size_t p = 0; p < nodes.size(); ++p) A += std::log(std::abs(map.difference_quotient(w, nodes[p]))) * mass[p];
    double B = 0.0;
    // rho real: modes m and -m combine into 2 Re
    for (int m = 1; m < nt / 2; ++m) B -= 2.0 * pi / m * (moments(m, 0) * std::polar(1.0, m * t)).real();
    out.values[j] = (A + B) / (2.0 * pi);
  }
  out.mean = out.values.mean();
  return out;
}

// ---------------------------------------------------------------------------
// Far field of the patch

class SeparationError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct PatchGeometry {
  double delta = 0.0;
  std::vector<Point> nodes;  // delta Gamma(z) at the quadrature nodes
  std::vector<double> mass;  // Delta F weights, summing to 1
  double surface_floor = 0.55;

  double total_mass() const {
    double s = 0.0;
    for (double m : mass) s += m;
    return s;
  }

  // Unit-strength Newtonian potential of the patch minus the point image at 2 e2.
  std::pair<Grad2, Hess2> eval(Point x) const {
    if (!(x.x2 > surface_floor)) {
      throw SeparationError(fmt::format("patch far field: point ({:.4g}, {:.4g}) is below the surface floor", x.x1, x.x2));
    }
    double g1 = 0, g2 = 0, h11 = 0, h12 = 0;
    auto add = [&](double d1, double d2, double m) {
      const double r2 = d1 * d1 + d2 * d2, r4 = r2 * r2;
      g1 += m * d1 / r2;
      g2 += m * d2 / r2;
      h11 += m * (d2 * d2 - d1 * d1) / r4;
      h12 -= m * 2.0 * d1 * d2 / r4;
    };
    for (std::size_t p = 0; p < nodes.size(); ++p) add(x.x1 - nodes[p].x1, x.x2 - nodes[p].x2, mass[p]);
    add(x.x1, x.x2 - 2.0, -1.0);
    const double s = 1.0 / (2.0 * pi);
    return {{s * g1, s * g2}, {s * h11, s * h12, s * h12, -s * h11}};
  }

  FarField far_field() const {
    auto self = std::make_shared<const PatchGeometry>(*this);
    return FarField{[self](Point x) { return self->eval(x); }};
  }
};

inline PatchGeometry patch_geometry(const DiskSolver& solver, const ConformalMap& map, const DiskField& f, double delta,
                                    double max_extent = 0.45) {
  if (!(delta > 0.0)) throw std::invalid_argument("patch geometry: delta must be positive");
  if (!(delta * map.max_boundary_modulus() < max_extent)) {
    throw SeparationError(fmt::format("patch geometry: delta max|Gamma| = {:.4g} exceeds {}", delta * map.max_boundary_modulus(),
                                      max_extent));
  }
  PatchGeometry g;
  g.delta = delta;
  const Vec& tq = solver.quad_radii();
  const Vec& th = solver.angles();
  for (int k = 0; k < th.size(); ++k) {
    for (int q = 0; q < tq.size(); ++q) {
      const cplx y = delta * map(std::polar(tq[q], th[k]));
      g.nodes.push_back({y.real(), y.imag()});
      g.mass.push_back(f.rho(q, k) * f.weights(q, k));
    }
  }
  return g;
}

// d/dtheta of samples on M equispaced angles.
inline Vec boundary_derivative(const Vec& v) {
  const int M = static_cast<int>(v.size());
  std::vector<double> in(v.data(), v.data() + M);
  std::vector<cplx> spec, back;
  detail::fft_engine().fwd(spec, in);
  for (int k = 0; k < M; ++k) {
    const int m = k < M / 2 ? k : (k == M / 2 ? 0 : k - M);
    spec[k] *= cplx(0.0, m);
  }
  detail::fft_engine().inv(back, spec);
  Vec d(M);
  for (int j = 0; j < M; ++j) d[j] = back[j].real();
  return d;
}

// Coefficients of cos((n-1) pi/2 + n theta), n = 1..count, from samples on M equispaced angles.
inline Vec shape_projection(const Vec& v, int count) {
  const int M = static_cast<int>(v.size());
  Vec c(count);
  for (int n = 1; n <= count; ++n) {
    double acc = 0.0;
    for (int j = 0; j < M; ++j) acc += v[j] * shape_basis(n, 2.0 * pi * j / M);
    c[n - 1] = 2.0 * acc / M;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Coupled patch problem

struct PatchConfig {
  PhysicalParams physical{1.0, 1.0, Setting::Localized, 1.0, 60.0};
  SolverConfig surface{};
  DiskConfig disk{};
  int n_max = 32;
  int boundary_points = 0;  // 0 selects 4 n_max
  double tol = 1e-10;       // inner layers
  double final_tol = 1e-8;
  int max_inner = 60;
  int max_outer = 20;
  double max_epsilon = 0.05, max_delta = 0.1, max_tau = 0.2;
  double patch_extent = 0.45;
  double surface_floor = 0.55;

  PatchConfig() { surface.n = 512; }

  int boundary_size() const { return boundary_points > 0 ? boundary_points : 4 * n_max; }

  void validate() const {
    if (physical.setting != Setting::Localized) throw std::invalid_argument("PatchConfig: the patch problem is localized");
    physical.validate();
    if (n_max < 3) throw std::invalid_argument("PatchConfig: n_max must be at least 3");
    if (boundary_size() < 2 * n_max || boundary_size() % 2) {
      throw std::invalid_argument("PatchConfig: boundary_points must be even and >= 2 n_max");
    }
    if (!(tol > 0.0) || !(final_tol > 0.0)) throw std::invalid_argument("PatchConfig: tolerances must be positive");
  }
};

struct PatchState {
  double epsilon = 0.0, delta = 0.0, tau = 0.0;
  Vec eta_scaled, psi_scaled;  // eta / eps, psi / eps on the surface grid
  ShapeCoeffs beta;
  double c_tilde = -1.0 / (4.0 * pi);
  // derived
  double a = 0.0;
  double mu = 0.0;  // makes the boundary mean of f o Gamma vanish
  DiskField field;
  Vec nodes;
  double residual = 0.0;
  int outer_iterations = 0;
  int inner_iterations = 0;

  double c() const { return epsilon * c_tilde; }
  Vec eta() const { return epsilon * eta_scaled; }
  Vec psi() const { return epsilon * psi_scaled; }
  // c / eps + 1 / 4 pi; O(eps + delta)
  double speed_bracket() const { return c_tilde + 1.0 / (4.0 * pi); }

  std::vector<Point> boundary_curve(int M) const {
    const ConformalMap map(beta);
    std::vector<Point> pts(M);
    for (int j = 0; j < M; ++j) {
      const cplx z = delta * map.boundary(2.0 * pi * j / M);
      pts[j] = {z.real(), z.imag()};
    }
    return pts;
  }
};

struct PatchResidual {
  Vec F1, F2;     // scaled surface residuals on the grid
  Vec theta, F3;  // boundary equation on M angles
  Vec coeffs;     // F3 = sum_{n>=1} coeffs[n-1] cos((n-1) pi/2 + n theta)
  double h = 0.0;  // coeffs[0] / delta
  double surface_norm = 0.0;
  double boundary_norm = 0.0;
  double mu = 0.0;

  double norm() const { return std::max(surface_norm, boundary_norm); }
};

class PatchSolveError : public std::runtime_error {
 public:
  PatchSolveError(const std::string& layer, const std::string& what)
      : std::runtime_error(fmt::format("solve_patch [{}]: {}", layer, what)), layer_(layer) {}
  const std::string& layer() const { return layer_; }

 private:
  std::string layer_;
};

class PatchSolver {
 public:
  PatchSolver(StrengthFn g, PatchConfig cfg = {}) : g_(std::move(g)), cfg_(std::move(cfg)), disk_(g_, cfg_.disk) {
    cfg_.validate();
    kappa_ = linearized_H_spectrum(disk_.profile(), g_, cfg_.n_max);
    base_ = std::make_unique<PointVortexModel>(cfg_.physical, cfg_.surface);
  }

  const PatchConfig& config() const { return cfg_; }
  const StrengthFn& strength() const { return g_; }
  const DiskSolver& disk() const { return disk_; }
  const Vec& kappa() const { return kappa_; }
  const PointVortexModel& base_model() const { return *base_; }

  // Everything fixed by (beta, delta): map, disk solution, far field, surface model.
  struct Geometry {
    ConformalMap map;
    DiskField field;
    PatchGeometry patch;
    std::unique_ptr<PointVortexModel> model;
  };

  Geometry geometry(const ShapeCoeffs& beta, double delta) const {
    Geometry G{ConformalMap(beta), {}, {}, nullptr};
    try {
      G.field = disk_.solve(G.map);
    } catch (const SemilinearNonConvergence& e) {
      throw PatchSolveError("semilinear", e.what());
    }
    G.patch = patch_geometry(disk_, G.map, G.field, delta, cfg_.patch_extent);
    G.patch.surface_floor = cfg_.surface_floor;
    G.model = std::make_unique<PointVortexModel>(cfg_.physical, cfg_.surface, G.patch.far_field());
    return G;
  }

  static PointVortexState unscaled(const PatchState& s) { return {s.epsilon, s.eta(), s.psi(), s.c()}; }

  // (F1, F2) / eps; at eps = 0 the limit is the linearization along the scaled state.
  static Residual scaled_surface_residual(const PointVortexEvaluation& ev, const PatchState& s) {
    if (s.epsilon != 0.0) {
      Residual r = ev.residual();
      r.F1 /= s.epsilon;
      r.F2 /= s.epsilon;
      return r;
    }
    return ev.apply({s.eta_scaled, s.psi_scaled, s.c_tilde, 1.0});
  }

  PatchResidual residual(const PatchState& s, const Geometry& G) const {
    const PointVortexModel& m = *G.model;
    PatchResidual out;
    const PointVortexEvaluation ev(m, unscaled(s));
    const Residual r = scaled_surface_residual(ev, s);
    out.F1 = r.F1;
    out.F2 = r.F2;
    Vec red = m.reduce(r);
    red[red.size() - 1] = 0.0;
    out.surface_norm = m.residual_norm(red);

    const int M = cfg_.boundary_size();
    const BoundaryTrace H = eval_H(disk_, G.map, G.field, M);
    const DtnOperator op(m.grid(), s.eta(), m.config().dtn);
    const HarmonicExtension ext = op.extend(s.psi_scaled);
    Vec bracket(M);
    for (int j = 0; j < M; ++j) {
      const cplx gw = G.map.boundary(H.theta[j]);
      const cplx x = s.delta * gw;
      bracket[j] = ext.value({x.real(), x.imag()}) + s.c_tilde * s.delta * gw.imag() -
                   std::log(std::abs(x - cplx(0.0, 2.0))) / (2.0 * pi) + H.values[j];
    }
    out.mu = -bracket.mean();
    out.theta = H.theta;
    out.F3 = boundary_derivative(bracket);
    out.coeffs = shape_projection(out.F3, M / 2 - 1);
    out.h = out.coeffs[0] / s.delta;
    out.boundary_norm = out.F3.cwiseAbs().maxCoeff();
    return out;
  }

  PatchResidual residual(const PatchState& s) const { return residual(s, geometry(s.beta, s.delta)); }

  // Newton-GMRES for the scaled surface unknowns at fixed (beta, c).
  int solve_surface(PatchState& s, const Geometry& G) const {
    const PointVortexModel& m = *G.model;
    const int N = m.reduced_size();
    auto pad = [N](const Vec& v) {
      Vec u = Vec::Zero(N);
      u.head(N - 1) = v;
      return u;
    };
    for (int it = 0;; ++it) {
      const PointVortexEvaluation ev(m, unscaled(s));
      const Vec r = m.reduce(scaled_surface_residual(ev, s)).head(N - 1);
      const double rn = m.residual_norm(pad(r));
      if (!std::isfinite(rn)) throw PatchSolveError("surface", "residual is not finite");
      if (rn < cfg_.tol) return it;
      if (it >= m.config().max_iterations) {
        throw PatchSolveError("surface", fmt::format("Newton did not converge (residual {:.3e})", rn));
      }
      const KrylovResult kr = gmres_solve(
          [&](const Vec& v) { return m.reduce(ev.apply(m.direction_from_reduced(0.0, pad(v)))).head(N - 1).eval(); },
          [&](const Vec& v) { return m.flat_inverse(pad(v), s.c()).head(N - 1).eval(); }, -r,
          m.config().gmres_tol, 200, 80);
      PointVortexState d = m.from_reduced(0.0, pad(kr.x));
      s.eta_scaled += d.eta;
      s.psi_scaled += d.psi;
    }
  }

  // Inner layer at fixed c: alternate the surface Newton and a diagonal chord step for beta_3..beta_nmax.
  PatchResidual solve_inner(PatchState& s) const {
    for (int it = 0;; ++it) {
      Geometry G = geometry(s.beta, s.delta);
      solve_surface(s, G);
      PatchResidual r = residual(s, G);
      double perp = 0.0;
      for (int n = 2; n < cfg_.n_max; ++n) perp = std::max(perp, std::abs(r.coeffs[n - 1]));
      s.inner_iterations++;
      if (perp < cfg_.tol) {
        finish(s, G, r);
        return r;
      }
      if (it >= cfg_.max_inner) {
        throw PatchSolveError("shape", fmt::format("chord iteration did not converge (F3 perp {:.3e})", perp));
      }
      for (int n = 2; n < cfg_.n_max; ++n) {
        s.beta.set(n + 1, s.beta.get(n + 1) + r.coeffs[n - 1] * 2.0 * pi / (n * kappa_[n - 1]));
      }
    }
  }

  PatchState solve(double eps, double delta, double tau) const {
    if (!(eps >= 0.0) || !(delta >= 0.0) || !(tau >= 0.0)) {
      throw std::invalid_argument("solve_patch: eps, delta, tau must be non-negative");
    }
    if (eps > cfg_.max_epsilon || delta > cfg_.max_delta || tau > cfg_.max_tau) {
      throw std::invalid_argument(fmt::format("solve_patch: ({}, {}, {}) is outside the box eps <= {}, delta <= {}, tau <= {}",
                                              eps, delta, tau, cfg_.max_epsilon, cfg_.max_delta, cfg_.max_tau));
    }
    PatchState s;
    s.epsilon = eps, s.delta = delta, s.tau = tau;
    s.beta = ShapeCoeffs(cfg_.n_max);
    s.eta_scaled = Vec::Zero(cfg_.surface.n);
    s.psi_scaled = Vec::Zero(cfg_.surface.n);
    s.nodes = base_->nodes();
    if (delta == 0.0) return point_limit(s);
    // the sin(2 theta) amplitude of beta is delta tau
    s.beta.set(2, -delta * tau);

    // secant on c for h = 0
    double c0 = s.c_tilde;
    PatchResidual r = solve_inner(s);
    double h0 = r.h;
    double c1 = c0 - h0;
    for (int k = 1;; ++k) {
      s.c_tilde = c1;
      r = solve_inner(s);
      s.outer_iterations = k;
      if (std::abs(r.coeffs[0]) < cfg_.tol && r.norm() < cfg_.final_tol) break;
      if (k >= cfg_.max_outer) {
        throw PatchSolveError("speed", fmt::format("secant on c did not converge (h = {:.3e})", r.h));
      }
      const double slope = (r.h - h0) / (c1 - c0);
      if (!std::isfinite(slope) || std::abs(slope) < 0.1) throw PatchSolveError("speed", "h is flat in c");
      c0 = c1, h0 = r.h;
      c1 -= r.h / slope;
    }
    s.residual = r.norm();
    return s;
  }

 private:
  void finish(PatchState& s, const Geometry& G, const PatchResidual& r) const {
    s.field = G.field;
    s.a = G.field.a;
    s.mu = r.mu;
    s.residual = r.norm();
  }

  // delta = 0: no patch; the surface problem is the point vortex one.
  PatchState point_limit(PatchState s) const {
    if (s.epsilon == 0.0) {
      s.c_tilde = -1.0 / (4.0 * pi);
      return s;
    }
    const NewtonResult nr = newton_solve(*base_, base_->asymptotic_predictor(s.epsilon));
    s.eta_scaled = nr.state.eta / s.epsilon;
    s.psi_scaled = nr.state.psi / s.epsilon;
    s.c_tilde = nr.state.c / s.epsilon;
    s.residual = nr.history.back() / s.epsilon;
    return s;
  }

  StrengthFn g_;
  PatchConfig cfg_;
  DiskSolver disk_;
  Vec kappa_;
  std::unique_ptr<PointVortexModel> base_;
};

inline PatchState solve_patch(double eps, double delta, double tau, const StrengthFn& g, const PatchConfig& cfg = {}) {
  return PatchSolver(g, cfg).solve(eps, delta, tau);
}

inline PatchResidual patch_residual(const PatchState& s, const StrengthFn& g, const PatchConfig& cfg = {}) {
  return PatchSolver(g, cfg).residual(s);
}

}  // namespace vwave
