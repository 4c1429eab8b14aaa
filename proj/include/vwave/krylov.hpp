#pragma once

#include <functional>
#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <unsupported/Eigen/IterativeSolvers>

#include "vwave/spectral.hpp"

namespace vwave {

using LinearMap = std::function<Vec(const Vec&)>;

class MatrixFreeOperator;

}  // namespace vwave

namespace Eigen::internal {
template <>
struct traits<vwave::MatrixFreeOperator> : public traits<Eigen::SparseMatrix<double>> {};
}  // namespace Eigen::internal

namespace vwave {

// Adapter so Eigen's iterative solvers can drive a matrix-free map.
class MatrixFreeOperator : public Eigen::EigenBase<MatrixFreeOperator> {
 public:
  using Scalar = double;
  using RealScalar = double;
  using StorageIndex = int;
  enum { ColsAtCompileTime = Eigen::Dynamic, MaxColsAtCompileTime = Eigen::Dynamic, IsRowMajor = false };

  MatrixFreeOperator(Eigen::Index n, LinearMap map) : n_(n), map_(std::move(map)) {}

  Eigen::Index rows() const { return n_; }
  Eigen::Index cols() const { return n_; }
  Vec apply(const Vec& x) const { return map_(x); }

  template <typename Rhs>
  Eigen::Product<MatrixFreeOperator, Rhs, Eigen::AliasFreeProduct> operator*(const Eigen::MatrixBase<Rhs>& x) const {
    return Eigen::Product<MatrixFreeOperator, Rhs, Eigen::AliasFreeProduct>(*this, x.derived());
  }

 private:
  Eigen::Index n_;
  LinearMap map_;
};

// Preconditioner built from an approximate inverse map.
class MapPreconditioner {
 public:
  using StorageIndex = int;
  enum { ColsAtCompileTime = Eigen::Dynamic, MaxColsAtCompileTime = Eigen::Dynamic };

  MapPreconditioner() = default;
  template <typename M>
  explicit MapPreconditioner(const M&) {}
  template <typename M>
  MapPreconditioner& analyzePattern(const M&) { return *this; }
  template <typename M>
  MapPreconditioner& factorize(const M&) { return *this; }
  template <typename M>
  MapPreconditioner& compute(const M&) { return *this; }

  void set(LinearMap inv) { inv_ = std::move(inv); }

  template <typename Rhs>
  Vec solve(const Eigen::MatrixBase<Rhs>& b) const {
    if (!inv_) return b;
    return inv_(Vec(b));
  }

  Eigen::ComputationInfo info() const { return Eigen::Success; }

 private:
  LinearMap inv_;
};

struct KrylovResult {
  Vec x;
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

inline KrylovResult gmres_solve(const LinearMap& A, const LinearMap& precond, const Vec& b, double tol = 1e-12,
                                int max_iterations = 200, int restart = 60) {
  const MatrixFreeOperator op(b.size(), A);
  Eigen::GMRES<MatrixFreeOperator, MapPreconditioner> solver;
  solver.preconditioner().set(precond);
  solver.setTolerance(tol);
  solver.setMaxIterations(max_iterations);
  solver.set_restart(restart);
  solver.compute(op);
  KrylovResult r;
  r.x = solver.solve(b);
  r.iterations = static_cast<int>(solver.iterations());
  r.relative_residual = solver.error();
  r.converged = solver.info() == Eigen::Success;
  return r;
}

}  // namespace vwave

namespace Eigen::internal {

template <typename Rhs>
struct generic_product_impl<vwave::MatrixFreeOperator, Rhs, SparseShape, DenseShape, GemvProduct>
    : generic_product_impl_base<vwave::MatrixFreeOperator, Rhs,
                                generic_product_impl<vwave::MatrixFreeOperator, Rhs>> {
  using Scalar = typename Product<vwave::MatrixFreeOperator, Rhs>::Scalar;

  template <typename Dest>
  static void scaleAndAddTo(Dest& dst, const vwave::MatrixFreeOperator& lhs, const Rhs& rhs, const Scalar& alpha) {
    dst.noalias() += alpha * lhs.apply(vwave::Vec(rhs));
  }
};

}  // namespace Eigen::internal
