#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "vwave/spectral.hpp"
#include "vwave/vortex_green.hpp"

namespace vwave {

enum class DtnMethod { CollocationLeastSquares, FlatMultiplier };
enum class DtnSymmetry { General, Even };
// Analytic: continuum shape-derivative formula. Collocation: exact linearization of the discrete operator.
enum class ShapeDerivativeBackend { Analytic, Collocation, FiniteDifference };

struct DtnConfig {
  DtnMethod method = DtnMethod::CollocationLeastSquares;
  double regularization = 0.0;
  double oversampling = 1.0;
  double condition_limit = 1e12;
  double separation = 0.05;
  DtnSymmetry symmetry = DtnSymmetry::General;
  ShapeDerivativeBackend shape_backend = ShapeDerivativeBackend::FiniteDifference;
  double fd_step = 1e-6;
};

class IllConditionedError : public std::runtime_error {
 public:
  explicit IllConditionedError(double cond)
      : std::runtime_error(fmt::format("dtn: collocation system ill-conditioned (condition estimate {:.3e})", cond)),
        condition(cond) {}
  double condition;
};

// psi_H(x1, x2) = sum_k a_k cos(k x1/L) e^{k(x2-1)/L} + sum_k b_k sin(k x1/L) e^{k(x2-1)/L}
class HarmonicExtension {
 public:
  HarmonicExtension(PeriodicGrid grid, Vec cos_c, Vec sin_c, Vec trace, Vec shape, double residual, double cond)
      : grid_(std::move(grid)),
        a_(std::move(cos_c)),
        b_(std::move(sin_c)),
        trace_(std::move(trace)),
        shape_(std::move(shape)),
        residual_(residual),
        cond_(cond) {}

  const PeriodicGrid& grid() const { return grid_; }
  const Vec& cos_coefficients() const { return a_; }  // k = 0..
  const Vec& sin_coefficients() const { return b_; }  // k = 1..
  const Vec& surface_trace() const { return trace_; }
  const Vec& surface_shape() const { return shape_; }
  double trace_residual() const { return residual_; }
  double condition_estimate() const { return cond_; }

  // Complex coefficients attached to e^{i m x1/L} e^{|m|(x2-1)/L}, FFT order.
  CVec mode_coefficients() const {
    const int n = grid_.n();
    CVec c = CVec::Zero(n);
    for (int k = 0; k < a_.size() && k <= n / 2; ++k) {
      if (k == 0 || k == n / 2) {
        c[k] += a_[k];
      } else {
        c[k] += 0.5 * a_[k];
        c[n - k] += 0.5 * a_[k];
      }
    }
    for (int i = 0; i < b_.size(); ++i) {
      const int k = i + 1;
      if (k >= n / 2) break;
      c[k] += cplx(0.0, -0.5 * b_[i]);
      c[n - k] += cplx(0.0, 0.5 * b_[i]);
    }
    return c;
  }

  double surface_height(double x1) const { return 1.0 + interpolate(grid_, shape_, x1); }

  double value(Point p) const {
    const double L = grid_.L();
    double s = 0.0;
    for (int k = 0; k < a_.size(); ++k) s += a_[k] * std::cos(k * p.x1 / L) * std::exp(k * (p.x2 - 1.0) / L);
    for (int i = 0; i < b_.size(); ++i) {
      const int k = i + 1;
      s += b_[i] * std::sin(k * p.x1 / L) * std::exp(k * (p.x2 - 1.0) / L);
    }
    return s;
  }

  // Differentiates the mode sum; the point is assumed to be inside the fluid.
  Grad2 gradient_unchecked(Point p) const {
    const double L = grid_.L();
    double g1 = 0.0, g2 = 0.0;
    for (int k = 1; k < a_.size(); ++k) {
      const double kl = k / L;
      const double e = std::exp(kl * (p.x2 - 1.0));
      g1 -= a_[k] * kl * std::sin(kl * p.x1) * e;
      g2 += a_[k] * kl * std::cos(kl * p.x1) * e;
    }
    for (int i = 0; i < b_.size(); ++i) {
      const double kl = (i + 1) / L;
      const double e = std::exp(kl * (p.x2 - 1.0));
      g1 += b_[i] * kl * std::cos(kl * p.x1) * e;
      g2 += b_[i] * kl * std::sin(kl * p.x1) * e;
    }
    return {g1, g2};
  }

  Grad2 gradient(Point p) const {
    if (!(p.x2 < surface_height(p.x1))) throw std::domain_error("eval_interior_gradient: point is not below the surface");
    return gradient_unchecked(p);
  }

 private:
  PeriodicGrid grid_;
  Vec a_, b_;
  Vec trace_, shape_;
  double residual_;
  double cond_;
};

// Collocation solver for one surface shape; reuse it for several traces.
class DtnOperator {
 public:
  DtnOperator(const PeriodicGrid& grid, const Vec& eta, const DtnConfig& cfg = {})
      : grid_(grid), eta_(eta), cfg_(cfg) {
    const int n = grid.n();
    if (eta.size() != n) throw std::invalid_argument("dtn: eta size does not match grid");
    if (!(cfg.oversampling >= 1.0)) throw std::invalid_argument("dtn: oversampling must be >= 1");
    if (cfg.regularization < 0.0) throw std::invalid_argument("dtn: regularization must be nonnegative");
    if (!eta.allFinite()) throw std::domain_error("dtn: eta is not finite");
    if (1.0 + eta.minCoeff() <= cfg.separation) {
      throw std::domain_error(fmt::format("dtn: surface dips to x2 = {:.6g}, below the separation margin {:.3g}",
                                          1.0 + eta.minCoeff(), cfg.separation));
    }
    eta_prime_ = derivative(grid, eta, 1);
    if (cfg.method == DtnMethod::FlatMultiplier) {
      if (eta.cwiseAbs().maxCoeff() != 0.0) throw std::invalid_argument("dtn: flat multiplier requires eta == 0");
      cond_ = 1.0;
      return;
    }
    even_ = cfg.symmetry == DtnSymmetry::Even;
    if (even_ && parity_defect(eta, Parity::Even) > 1e-9 * (1.0 + eta.cwiseAbs().maxCoeff())) {
      throw std::invalid_argument("dtn: even symmetry requested for a non-even surface");
    }
    build();
  }

  const PeriodicGrid& grid() const { return grid_; }
  const Vec& eta() const { return eta_; }
  const Vec& eta_prime() const { return eta_prime_; }
  const DtnConfig& config() const { return cfg_; }
  double condition_estimate() const { return cond_; }

  HarmonicExtension extend(const Vec& psi) const {
    const int n = grid_.n();
    if (psi.size() != n) throw std::invalid_argument("dtn: psi size does not match grid");
    if (cfg_.method == DtnMethod::FlatMultiplier) {
      Vec a = cos_coefficients(psi, 0, n / 2);
      Vec b = n / 2 > 1 ? sin_coefficients(psi, 1, n / 2 - 1) : Vec();
      return HarmonicExtension(grid_, a, b, psi, eta_, 0.0, 1.0);
    }
    if (even_ && parity_defect(psi, Parity::Even) > 1e-9 * (1.0 + psi.cwiseAbs().maxCoeff())) {
      throw std::invalid_argument("dtn: even symmetry requested for a non-even trace");
    }
    const Vec rhs = collocation_rhs(psi);
    const Vec coef = solve_collocation(rhs);
    const double res = (system_ * coef - rhs).cwiseAbs().maxCoeff();
    Vec a, b;
    if (even_) {
      a = coef;
      b = Vec();
    } else {
      a = coef.head(n / 2 + 1);
      b = coef.tail(n / 2 - 1);
    }
    return HarmonicExtension(grid_, a, b, psi, eta_, res, cond_);
  }

  // G(eta) psi = (-eta', 1) . grad psi_H on the surface.
  Vec apply(const Vec& psi) const {
    if (cfg_.method == DtnMethod::FlatMultiplier) {
      const double L = grid_.L();
      return apply_multiplier(grid_, psi, [L](int m) { return cplx(std::abs(m) / L, 0.0); });
    }
    const HarmonicExtension ext = extend(psi);
    return normal_derivative(ext);
  }

  Vec normal_derivative(const HarmonicExtension& ext) const {
    if (cfg_.method == DtnMethod::FlatMultiplier) return apply(ext.surface_trace());
    const Vec coef = even_ ? ext.cos_coefficients() : pack(ext);
    return apply_normal(dx_ * coef, dy_ * coef);
  }

  // Vertical derivative of psi_H on the surface nodes.
  Vec vertical_derivative(const HarmonicExtension& ext) const {
    if (cfg_.method == DtnMethod::FlatMultiplier) return apply(ext.surface_trace());
    const Vec coef = even_ ? ext.cos_coefficients() : pack(ext);
    return dy_ * coef;
  }

  // Derivative of apply(psi) with respect to the collocation surface in direction zeta.
  Vec linearized_apply(const Vec& zeta, const Vec& psi) const {
    if (cfg_.method == DtnMethod::FlatMultiplier) throw std::logic_error("dtn: flat multiplier has no linearization");
    const HarmonicExtension ext = extend(psi);
    const Vec c = even_ ? ext.cos_coefficients() : pack(ext);
    const Vec dc = coefficient_variation(zeta, c);
    const Vec kc = wavenumbers().cwiseProduct(c);
    const Vec dzeta = derivative(grid_, zeta, 1);
    const Vec d2 = zeta.cwiseProduct(dy_ * kc) + dy_ * dc;
    const Vec d1 = zeta.cwiseProduct(dx_ * kc) + dx_ * dc;
    return d2 - eta_prime_.cwiseProduct(d1) - dzeta.cwiseProduct(dx_ * c);
  }

  // Extension whose coefficients are the zeta-variation of those of psi (trace held fixed).
  HarmonicExtension linearized_extend(const Vec& zeta, const Vec& psi) const {
    const HarmonicExtension ext = extend(psi);
    const Vec c = even_ ? ext.cos_coefficients() : pack(ext);
    const Vec dc = coefficient_variation(zeta, c);
    const int n = grid_.n();
    if (even_) return HarmonicExtension(grid_, dc, Vec(), Vec::Zero(n), eta_, 0.0, cond_);
    return HarmonicExtension(grid_, dc.head(n / 2 + 1), dc.tail(n / 2 - 1), Vec::Zero(n), eta_, 0.0, cond_);
  }

 private:
  Vec wavenumbers() const {
    const int n = grid_.n();
    Vec k(even_ ? n / 2 + 1 : n);
    for (int i = 0; i <= n / 2; ++i) k[i] = i / grid_.L();
    if (!even_) {
      for (int i = 1; i < n / 2; ++i) k[n / 2 + i] = i / grid_.L();
    }
    return k;
  }

  // d(coef) = -S^{-1} (dS coef), dS = diag(zeta) times the vertical derivative of the basis.
  Vec coefficient_variation(const Vec& zeta, const Vec& c) const {
    return solve_collocation(collocation_rhs(-zeta.cwiseProduct(dy_ * c)));
  }

  Vec solve_collocation(const Vec& rhs) const {
    if (square_) return lu_.solve(rhs);
    Vec aug = Vec::Zero(qr_rows_);
    aug.head(rhs.size()) = rhs;
    return qr_.solve(aug);
  }

  Vec pack(const HarmonicExtension& ext) const {
    const int n = grid_.n();
    Vec c(n);
    c.head(n / 2 + 1) = ext.cos_coefficients();
    c.tail(n / 2 - 1) = ext.sin_coefficients();
    return c;
  }

  Vec apply_normal(const Vec& d1, const Vec& d2) const { return d2 - eta_prime_.cwiseProduct(d1); }

  int collocation_count() const {
    int m = static_cast<int>(std::ceil(cfg_.oversampling * grid_.n() - 1e-9));
    if (m % 2) ++m;
    return m;
  }

  Vec collocation_rhs(const Vec& psi) const {
    const int m = collocation_count();
    const Vec p = m == grid_.n() ? psi : resample(psi, m);
    if (!even_) return p;
    return p.head(m / 2 + 1);
  }

  // Basis values at (x, 1 + h): column layout [cos k = 0..n/2 | sin k = 1..n/2-1] (cos only if even).
  void fill_rows(const Vec& x, const Vec& h, Mat& V, Mat* D1, Mat* D2) const {
    const int n = grid_.n();
    const double L = grid_.L();
    const int cols = even_ ? n / 2 + 1 : n;
    const int rows = static_cast<int>(x.size());
    V.resize(rows, cols);
    if (D1) D1->resize(rows, cols);
    if (D2) D2->resize(rows, cols);
    for (int j = 0; j < rows; ++j) {
      for (int k = 0; k <= n / 2; ++k) {
        const double kl = k / L;
        const double e = std::exp(kl * h[j]);
        const double c = std::cos(kl * x[j]);
        V(j, k) = c * e;
        if (D1) (*D1)(j, k) = -kl * std::sin(kl * x[j]) * e;
        if (D2) (*D2)(j, k) = kl * c * e;
      }
      if (even_) continue;
      for (int k = 1; k < n / 2; ++k) {
        const double kl = k / L;
        const double e = std::exp(kl * h[j]);
        const double s = std::sin(kl * x[j]);
        V(j, n / 2 + k) = s * e;
        if (D1) (*D1)(j, n / 2 + k) = kl * std::cos(kl * x[j]) * e;
        if (D2) (*D2)(j, n / 2 + k) = kl * s * e;
      }
    }
  }

  void build() {
    const int n = grid_.n();
    const int m = collocation_count();
    Vec xs(m), hs;
    const PeriodicGrid cg(grid_.L(), m);
    for (int j = 0; j < m; ++j) xs[j] = cg.x(j);
    hs = m == n ? eta_ : resample(eta_, m);
    if (even_) {
      xs = xs.head(m / 2 + 1).eval();
      hs = hs.head(m / 2 + 1).eval();
    }
    fill_rows(xs, hs, system_, nullptr, nullptr);

    Mat v_nodes;
    fill_rows(grid_.nodes(), eta_, v_nodes, &dx_, &dy_);

    square_ = system_.rows() == system_.cols() && cfg_.regularization == 0.0;
    if (square_) {
      lu_.compute(system_);
      const double rc = lu_.rcond();
      cond_ = rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
    } else {
      const int cols = static_cast<int>(system_.cols());
      qr_rows_ = static_cast<int>(system_.rows()) + (cfg_.regularization > 0.0 ? cols : 0);
      Mat aug = Mat::Zero(qr_rows_, cols);
      aug.topRows(system_.rows()) = system_;
      if (cfg_.regularization > 0.0) {
        aug.bottomRows(cols) = std::sqrt(cfg_.regularization) * Mat::Identity(cols, cols);
      }
      qr_.compute(aug);
      const Vec diag = qr_.matrixR().diagonal().cwiseAbs();
      cond_ = diag.minCoeff() > 0.0 ? diag.maxCoeff() / diag.minCoeff() : std::numeric_limits<double>::infinity();
    }
    if (!(cond_ <= cfg_.condition_limit)) throw IllConditionedError(cond_);
  }

  PeriodicGrid grid_;
  Vec eta_;
  Vec eta_prime_;
  DtnConfig cfg_;
  bool even_ = false;
  bool square_ = true;
  double cond_ = 1.0;
  int qr_rows_ = 0;
  Mat system_;
  Mat dx_, dy_;
  Eigen::PartialPivLU<Mat> lu_;
  Eigen::ColPivHouseholderQR<Mat> qr_;
};

// Directional derivative of eta -> G(eta) psi in direction zeta, on an existing operator.
inline Vec dtn_shape_derivative(const DtnOperator& op, const Vec& zeta, const Vec& psi) {
  const PeriodicGrid& grid = op.grid();
  if (op.config().shape_backend == ShapeDerivativeBackend::FiniteDifference) {
    const double h = op.config().fd_step;
    const DtnOperator plus(grid, op.eta() + h * zeta, op.config());
    const DtnOperator minus(grid, op.eta() - h * zeta, op.config());
    return (plus.apply(psi) - minus.apply(psi)) / (2.0 * h);
  }
  if (op.config().shape_backend == ShapeDerivativeBackend::Collocation) return op.linearized_apply(zeta, psi);
  // dG = -G(zeta Z) - d/dx (zeta V),  Z = vertical velocity, V = horizontal velocity on the surface.
  const Vec& ep = op.eta_prime();
  const Vec gpsi = op.apply(psi);
  const Vec dpsi = derivative(grid, psi, 1);
  const Vec Z = (gpsi + ep.cwiseProduct(dpsi)).cwiseQuotient((1.0 + ep.array().square()).matrix());
  const Vec V = dpsi - Z.cwiseProduct(ep);
  return -op.apply(zeta.cwiseProduct(Z)) - derivative(grid, zeta.cwiseProduct(V), 1);
}

// Gradient at an interior point of the eta-derivative of the harmonic extension of psi.
inline Grad2 harmonic_extension_shape_derivative(const DtnOperator& op, const Vec& zeta, const Vec& psi, Point p) {
  const PeriodicGrid& grid = op.grid();
  if (op.config().shape_backend == ShapeDerivativeBackend::FiniteDifference) {
    const double h = op.config().fd_step;
    const DtnOperator plus(grid, op.eta() + h * zeta, op.config());
    const DtnOperator minus(grid, op.eta() - h * zeta, op.config());
    const Grad2 gp = plus.extend(psi).gradient(p);
    const Grad2 gm = minus.extend(psi).gradient(p);
    return {(gp[0] - gm[0]) / (2.0 * h), (gp[1] - gm[1]) / (2.0 * h)};
  }
  if (op.config().shape_backend == ShapeDerivativeBackend::Collocation) {
    return op.linearized_extend(zeta, psi).gradient_unchecked(p);
  }
  // The surface trace stays fixed, so the variation is the extension of -zeta * d2 psi_H.
  const HarmonicExtension ext = op.extend(psi);
  const Vec Z = op.vertical_derivative(ext);
  return op.extend(-zeta.cwiseProduct(Z)).gradient(p);
}

template <class Grid>
HarmonicExtension harmonic_extend(const Field<Grid>& eta, const Field<Grid>& psi, const DtnConfig& cfg = {}) {
  if (!(eta.grid == psi.grid)) throw std::invalid_argument("harmonic_extend: grids differ");
  return DtnOperator(spectral_grid(eta.grid), eta.values, cfg).extend(psi.values);
}

template <class Grid>
Field<Grid> dtn_apply(const Field<Grid>& eta, const Field<Grid>& psi, const DtnConfig& cfg = {}) {
  if (!(eta.grid == psi.grid)) throw std::invalid_argument("dtn_apply: grids differ");
  return Field<Grid>(eta.grid, DtnOperator(spectral_grid(eta.grid), eta.values, cfg).apply(psi.values));
}

inline Grad2 eval_interior_gradient(const HarmonicExtension& ext, Point p) { return ext.gradient(p); }

template <class Grid>
Field<Grid> dtn_shape_derivative(const Field<Grid>& eta, const Field<Grid>& zeta, const Field<Grid>& psi,
                                 const DtnConfig& cfg = {}) {
  const DtnOperator op(spectral_grid(eta.grid), eta.values, cfg);
  return Field<Grid>(eta.grid, dtn_shape_derivative(op, zeta.values, psi.values));
}

template <class Grid>
Grad2 harmonic_extension_shape_derivative(const Field<Grid>& eta, const Field<Grid>& zeta, const Field<Grid>& psi,
                                          Point p, const DtnConfig& cfg = {}) {
  const DtnOperator op(spectral_grid(eta.grid), eta.values, cfg);
  return harmonic_extension_shape_derivative(op, zeta.values, psi.values, p);
}

}  // namespace vwave
