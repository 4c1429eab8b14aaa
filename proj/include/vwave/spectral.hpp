#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

namespace vwave {

using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXd;
using cplx = std::complex<double>;

inline constexpr double pi = std::numbers::pi;

enum class Parity { Even, Odd };

// Equispaced collocation on [-pi L, pi L), x_j = -pi L + 2 pi L j / n.
class PeriodicGrid {
 public:
  PeriodicGrid(double L, int n) : L_(L), n_(n) {
    if (!(L > 0.0) || !std::isfinite(L)) throw std::invalid_argument("PeriodicGrid: L must be positive");
    if (n < 8 || n % 2 != 0) throw std::invalid_argument("PeriodicGrid: n must be even and >= 8");
  }

  double L() const { return L_; }
  int n() const { return n_; }
  double length() const { return 2.0 * pi * L_; }
  double spacing() const { return length() / n_; }
  double x(int j) const { return -pi * L_ + spacing() * j; }
  int mirror(int j) const { return (n_ - j) % n_; }
  // signed mode number stored at FFT slot k
  int mode(int k) const { return k <= n_ / 2 ? k : k - n_; }
  double wavenumber(int mode_number) const { return mode_number / L_; }

  Vec nodes() const {
    Vec v(n_);
    for (int j = 0; j < n_; ++j) v[j] = x(j);
    return v;
  }

  bool operator==(const PeriodicGrid& o) const { return L_ == o.L_ && n_ == o.n_; }

 private:
  double L_;
  int n_;
};

// Truncated line [-w, w) with periodic wrap-around; spectrally it is one period of 2w.
class LineGrid {
 public:
  LineGrid(double half_width, int n) : w_(half_width), n_(n) {
    if (!(half_width > 0.0)) throw std::invalid_argument("LineGrid: half_width must be positive");
    if (n < 8 || n % 2 != 0) throw std::invalid_argument("LineGrid: n must be even and >= 8");
  }

  double half_width() const { return w_; }
  int n() const { return n_; }
  double spacing() const { return 2.0 * w_ / n_; }
  double x(int j) const { return -w_ + spacing() * j; }
  int mirror(int j) const { return (n_ - j) % n_; }
  PeriodicGrid periodic() const { return PeriodicGrid(w_ / pi, n_); }

  Vec nodes() const {
    Vec v(n_);
    for (int j = 0; j < n_; ++j) v[j] = x(j);
    return v;
  }

  bool operator==(const LineGrid& o) const { return w_ == o.w_ && n_ == o.n_; }

 private:
  double w_;
  int n_;
};

inline PeriodicGrid spectral_grid(const PeriodicGrid& g) { return g; }
inline PeriodicGrid spectral_grid(const LineGrid& g) { return g.periodic(); }

template <class Grid>
struct Field {
  Grid grid;
  Vec values;

  Field(Grid g, Vec v) : grid(std::move(g)), values(std::move(v)) {
    if (values.size() != grid.n()) throw std::invalid_argument("Field: value count does not match grid");
  }
  explicit Field(Grid g) : grid(std::move(g)), values(Vec::Zero(grid.n())) {}

  int size() const { return grid.n(); }
  double operator[](int j) const { return values[j]; }
};

using PeriodicField = Field<PeriodicGrid>;
using LineField = Field<LineGrid>;

template <class Grid>
Field<Grid> sample(const Grid& grid, const std::function<double(double)>& f) {
  Vec v(grid.n());
  for (int j = 0; j < grid.n(); ++j) v[j] = f(grid.x(j));
  return Field<Grid>(grid, v);
}

namespace detail {

inline Eigen::FFT<double>& fft_engine() {
  thread_local Eigen::FFT<double> engine;
  return engine;
}

}  // namespace detail

// Coefficients a_m of f(x) = sum_m a_m exp(i m x / L), stored in FFT order (slot k <-> mode grid.mode(k)).
inline CVec fourier_coefficients(const Vec& values) {
  const int n = static_cast<int>(values.size());
  std::vector<double> in(values.data(), values.data() + n);
  std::vector<cplx> out;
  detail::fft_engine().fwd(out, in);
  CVec c(n);
  for (int k = 0; k < n; ++k) {
    // nodes start at -pi L, so exp(i m x_j / L) = (-1)^m exp(2 pi i j k / n)
    const int m = k <= n / 2 ? k : k - n;
    c[k] = out[k] * ((m % 2 == 0) ? 1.0 : -1.0) / static_cast<double>(n);
  }
  return c;
}

inline Vec from_fourier_coefficients(const CVec& coeffs) {
  const int n = static_cast<int>(coeffs.size());
  std::vector<cplx> in(n);
  for (int k = 0; k < n; ++k) {
    const int m = k <= n / 2 ? k : k - n;
    in[k] = coeffs[k] * ((m % 2 == 0) ? 1.0 : -1.0) * static_cast<double>(n);
  }
  std::vector<cplx> out;
  detail::fft_engine().inv(out, in);
  Vec v(n);
  for (int j = 0; j < n; ++j) v[j] = out[j].real();
  return v;
}

template <class Grid>
CVec fourier_coefficients(const Field<Grid>& f) {
  return fourier_coefficients(f.values);
}

// Coefficient-wise multiplication by symbol(m), m the signed mode number.
// The Nyquist slot uses the even part of the symbol so that real input stays real.
inline Vec apply_multiplier(const PeriodicGrid& grid, const Vec& values, const std::function<cplx(int)>& symbol) {
  CVec c = fourier_coefficients(values);
  const int n = grid.n();
  for (int k = 0; k < n; ++k) {
    const int m = grid.mode(k);
    if (m == n / 2) {
      c[k] *= 0.5 * (symbol(m) + symbol(-m));
    } else {
      c[k] *= symbol(m);
    }
  }
  return from_fourier_coefficients(c);
}

template <class Grid>
Field<Grid> fourier_multiplier(const Field<Grid>& f, const std::function<double(int)>& symbol) {
  const PeriodicGrid sg = spectral_grid(f.grid);
  for (int m = -sg.n() / 2; m <= sg.n() / 2; ++m) {
    if (!std::isfinite(symbol(m))) throw std::invalid_argument("fourier_multiplier: symbol not finite");
  }
  return Field<Grid>(f.grid, apply_multiplier(sg, f.values, [&](int m) { return cplx(symbol(m), 0.0); }));
}

inline Vec derivative(const PeriodicGrid& grid, const Vec& values, int order = 1) {
  if (order <= 0) throw std::invalid_argument("derivative: order must be positive");
  const double L = grid.L();
  const int n = grid.n();
  return apply_multiplier(grid, values, [&](int m) -> cplx {
    if (order % 2 == 1 && std::abs(m) == n / 2) return 0.0;
    return std::pow(cplx(0.0, m / L), order);
  });
}

template <class Grid>
Field<Grid> derivative(const Field<Grid>& f, int order = 1) {
  return Field<Grid>(f.grid, derivative(spectral_grid(f.grid), f.values, order));
}

inline double mean(const Vec& v) { return v.mean(); }

template <class Grid>
Field<Grid> project_mean_zero(const Field<Grid>& f) {
  return Field<Grid>(f.grid, f.values.array() - f.values.mean());
}

inline Vec project_parity(const Vec& v, Parity p) {
  const int n = static_cast<int>(v.size());
  Vec out(n);
  const double s = p == Parity::Even ? 1.0 : -1.0;
  for (int j = 0; j < n; ++j) out[j] = 0.5 * (v[j] + s * v[(n - j) % n]);
  return out;
}

template <class Grid>
Field<Grid> project_parity(const Field<Grid>& f, Parity p) {
  return Field<Grid>(f.grid, project_parity(f.values, p));
}

inline double parity_defect(const Vec& v, Parity p) {
  return (v - project_parity(v, p)).cwiseAbs().maxCoeff();
}

// Trigonometric interpolation onto m equispaced nodes of the same period (m even).
inline Vec resample(const Vec& values, int m) {
  const int n = static_cast<int>(values.size());
  if (m % 2 != 0) throw std::invalid_argument("resample: target size must be even");
  if (m == n) return values;
  const CVec c = fourier_coefficients(values);
  CVec d = CVec::Zero(m);
  if (m > n) {
    for (int mode = -n / 2 + 1; mode < n / 2; ++mode) d[(mode + m) % m] = c[(mode + n) % n];
    d[n / 2] += 0.5 * c[n / 2];
    d[m - n / 2] += 0.5 * c[n / 2];
  } else {
    for (int mode = -m / 2 + 1; mode < m / 2; ++mode) d[(mode + m) % m] = c[(mode + n) % n];
    d[m / 2] = c[m / 2] + c[n - m / 2];
  }
  return from_fourier_coefficients(d);
}

// Product with 3/2-rule padding: evaluate on 3n/2 nodes, truncate back to n.
inline Vec dealiased_product(const Vec& f, const Vec& g) {
  const int n = static_cast<int>(f.size());
  const int m = 3 * n / 2 + ((3 * n / 2) % 2);
  const Vec pf = resample(f, m);
  const Vec pg = resample(g, m);
  const Vec prod = pf.cwiseProduct(pg);
  CVec c = fourier_coefficients(prod);
  CVec d = CVec::Zero(n);
  for (int mode = -n / 2 + 1; mode < n / 2; ++mode) d[(mode + n) % n] = c[(mode + m) % m];
  return from_fourier_coefficients(d);
}

// Evaluate the trigonometric interpolant at an arbitrary point.
inline double interpolate(const PeriodicGrid& grid, const Vec& values, double x) {
  const CVec c = fourier_coefficients(values);
  const int n = grid.n();
  double s = c[0].real();
  for (int m = 1; m < n / 2; ++m) {
    const cplx e = std::exp(cplx(0.0, m * x / grid.L()));
    s += 2.0 * (c[m] * e).real();
  }
  s += c[n / 2].real() * std::cos(0.5 * n * x / grid.L());
  return s;
}

// Discrete L2 mean square (1/n) sum f_j^2 and its coefficient-side counterpart.
inline double mean_square(const Vec& v) { return v.squaredNorm() / static_cast<double>(v.size()); }
inline double coefficient_square_sum(const CVec& c) { return c.squaredNorm(); }

// Cosine / sine expansions used for even and odd fields.
// f = a_0 + sum_{k>=1} a_k cos(k x / L); returns a_k for k in [k_first, k_last].
inline Vec cos_coefficients(const Vec& values, int k_first, int k_last) {
  const CVec c = fourier_coefficients(values);
  const int n = static_cast<int>(values.size());
  Vec a(k_last - k_first + 1);
  for (int k = k_first; k <= k_last; ++k) {
    if (k == 0) {
      a[k - k_first] = c[0].real();
    } else if (k == n / 2) {
      a[k - k_first] = c[n / 2].real();
    } else {
      a[k - k_first] = 2.0 * c[k].real();
    }
  }
  return a;
}

// f = sum_{k>=1} b_k sin(k x / L)
inline Vec sin_coefficients(const Vec& values, int k_first, int k_last) {
  const CVec c = fourier_coefficients(values);
  Vec b(k_last - k_first + 1);
  for (int k = k_first; k <= k_last; ++k) b[k - k_first] = -2.0 * c[k].imag();
  return b;
}

inline Vec from_cos_coefficients(const PeriodicGrid& grid, const Vec& a, int k_first) {
  const int n = grid.n();
  CVec c = CVec::Zero(n);
  for (int i = 0; i < a.size(); ++i) {
    const int k = k_first + i;
    if (k == 0) {
      c[0] += a[i];
    } else if (k == n / 2) {
      c[n / 2] += a[i];
    } else {
      c[k] += 0.5 * a[i];
      c[n - k] += 0.5 * a[i];
    }
  }
  return from_fourier_coefficients(c);
}

inline Vec from_sin_coefficients(const PeriodicGrid& grid, const Vec& b, int k_first) {
  const int n = grid.n();
  CVec c = CVec::Zero(n);
  for (int i = 0; i < b.size(); ++i) {
    const int k = k_first + i;
    if (k == 0 || k == n / 2) continue;
    c[k] += cplx(0.0, -0.5 * b[i]);
    c[n - k] += cplx(0.0, 0.5 * b[i]);
  }
  return from_fourier_coefficients(c);
}

}  // namespace vwave
