#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <memory>
#include <string>

#include "qsc/errors.hpp"

namespace qsc {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Points of the primal space E and linear forms from E*. Both are stored in
// coordinates; the pairing <s, x> is the plain dot product.
using PrimalVector = Vector;
using DualVector = Vector;

inline Matrix symmetrized(const Matrix& a) { return 0.5 * (a + a.transpose()); }

inline void require_same_dimension(Index expected, Index got, const char* what) {
  if (expected != got) {
    throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(expected) +
                         ", got " + std::to_string(got));
  }
}

/// Self-adjoint positive-definite operator B defining the global norms
///   ||h|| = <Bh, h>^{1/2},   ||s||_* = <s, B^{-1}s>^{1/2}.
/// Immutable; the Cholesky factor is computed once and shared between copies.
class MetricOperator {
 public:
  explicit MetricOperator(const Matrix& b) {
    if (b.rows() != b.cols() || b.rows() == 0) {
      throw DimensionError("metric operator must be a non-empty square matrix");
    }
    if (!b.allFinite()) throw NotPositiveDefinite("metric operator has non-finite entries");
    const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
    if ((b - b.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw NotPositiveDefinite("metric operator is not symmetric");
    }
    auto impl = std::make_shared<Impl>();
    impl->matrix = symmetrized(b);
    impl->llt.compute(impl->matrix);
    if (impl->llt.info() != Eigen::Success) {
      throw NotPositiveDefinite("metric operator is not positive definite");
    }
    impl->is_identity = impl->matrix.isIdentity(0.0);
    impl_ = std::move(impl);
  }

  static MetricOperator identity(Index n) { return MetricOperator(Matrix::Identity(n, n)); }

  Index dimension() const { return impl_->matrix.rows(); }
  const Matrix& matrix() const { return impl_->matrix; }
  bool is_identity() const { return impl_->is_identity; }

  /// Bh, mapping E to E*.
  DualVector apply(const PrimalVector& h) const {
    require_same_dimension(dimension(), h.size(), "metric apply");
    return impl_->is_identity ? h : Vector(impl_->matrix * h);
  }

  /// B^{-1}s, mapping E* to E.
  PrimalVector solve(const DualVector& s) const {
    require_same_dimension(dimension(), s.size(), "metric solve");
    return impl_->is_identity ? s : Vector(impl_->llt.solve(s));
  }

  double primal_norm(const PrimalVector& h) const {
    require_same_dimension(dimension(), h.size(), "primal_norm");
    if (impl_->is_identity) return h.norm();
    // ||L^T h||_2 with B = L L^T.
    return (impl_->llt.matrixU() * h).norm();
  }

  double dual_norm(const DualVector& s) const {
    require_same_dimension(dimension(), s.size(), "dual_norm");
    if (impl_->is_identity) return s.norm();
    // ||L^{-1} s||_2: one triangular solve, no explicit inverse.
    return impl_->llt.matrixL().solve(s).norm();
  }

 private:
  struct Impl {
    Matrix matrix;
    Eigen::LLT<Matrix> llt;
    bool is_identity = false;
  };
  std::shared_ptr<const Impl> impl_;
};

inline double primal_norm(const PrimalVector& h, const MetricOperator& b) { return b.primal_norm(h); }
inline double dual_norm(const DualVector& s, const MetricOperator& b) { return b.dual_norm(s); }

/// Local (semi)norm <Hh, h>^{1/2}. Negative round-off in the quadratic form is clamped to zero.
inline double local_norm(const PrimalVector& h, const Matrix& hessian) {
  require_same_dimension(hessian.rows(), h.size(), "local_norm");
  require_same_dimension(hessian.cols(), h.size(), "local_norm");
  return std::sqrt(std::max(0.0, h.dot(hessian * h)));
}

struct SolveOptions {
  double initial_jitter = 1e-12;
  double jitter_growth = 10.0;
  int max_jitter_retries = 6;
};

/// Solves (H + beta*B) d = rhs with a Cholesky factorization of the symmetrized
/// system matrix. When the factorization fails, delta*B is added with delta growing
/// geometrically; SingularSystem is raised when the ladder is exhausted.
inline PrimalVector regularized_solve(const Matrix& hessian, const MetricOperator& b, double beta,
                                      const DualVector& rhs, const SolveOptions& opts = {}) {
  const Index n = b.dimension();
  require_same_dimension(n, hessian.rows(), "regularized_solve");
  require_same_dimension(n, hessian.cols(), "regularized_solve");
  require_same_dimension(n, rhs.size(), "regularized_solve");
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw std::invalid_argument("regularized_solve: beta must be finite and non-negative");
  }
  Matrix system = symmetrized(hessian) + beta * b.matrix();
  Eigen::LLT<Matrix> llt(system);
  double jitter = opts.initial_jitter;
  for (int retry = 0; llt.info() != Eigen::Success; ++retry) {
    if (retry >= opts.max_jitter_retries) {
      throw SingularSystem("H + beta*B is not positive definite (beta = " + std::to_string(beta) + ")");
    }
    system += jitter * b.matrix();
    llt.compute(system);
    jitter *= opts.jitter_growth;
  }
  PrimalVector d = llt.solve(rhs);
  if (!d.allFinite()) throw SingularSystem("regularized_solve produced non-finite values");
  assert((system * d - rhs).norm() <= 1e-10 * (rhs.norm() + 1.0) * std::max(1.0, system.norm()));
  return d;
}

namespace detail {

inline Eigen::VectorXd generalized_eigenvalues(const Matrix& hessian, const MetricOperator& b) {
  require_same_dimension(b.dimension(), hessian.rows(), "generalized eigenvalue");
  require_same_dimension(b.dimension(), hessian.cols(), "generalized eigenvalue");
  if (b.is_identity()) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(hessian), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(symmetrized(hessian), b.matrix(),
                                                      Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
  if (es.info() != Eigen::Success) throw NotPositiveDefinite("generalized eigensolve failed");
  return es.eigenvalues();
}

}  // namespace detail

/// lambda(x): the largest lambda with H - lambda*B PSD. Values within round-off of zero are clamped.
inline double min_generalized_eigenvalue(const Matrix& hessian, const MetricOperator& b) {
  const Eigen::VectorXd ev = detail::generalized_eigenvalues(hessian, b);
  const double lo = ev.minCoeff();
  const double tol = 1e-10 * std::max(1.0, std::abs(ev.maxCoeff()));
  if (lo < -tol) throw NotPositiveDefinite("Hessian has a negative generalized eigenvalue");
  return std::max(0.0, lo);
}

inline double max_generalized_eigenvalue(const Matrix& hessian, const MetricOperator& b) {
  return detail::generalized_eigenvalues(hessian, b).maxCoeff();
}

}  // namespace qsc
