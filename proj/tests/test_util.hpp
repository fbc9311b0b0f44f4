#pragma once

#include <random>
#include <string>

#include "qsc/qsc.hpp"

namespace qsc::testing {

inline Problem synthetic(const std::string& kind, Index n, Index m, std::uint64_t seed, double mu = 1.0) {
  SyntheticSpec s;
  s.kind = kind;
  s.n = n;
  s.m = m;
  s.seed = seed;
  s.mu = mu;
  return generate_synthetic(s);
}

inline Problem logistic(Index n = 20, Index m = 200, std::uint64_t seed = 1) {
  return synthetic("logistic", n, m, seed);
}

inline Matrix random_matrix(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix a(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) a(i, j) = normal(rng);
  }
  return a;
}

inline Vector random_vector(Index n, std::uint64_t seed) { return random_matrix(n, 1, seed).col(0); }

inline Matrix random_spd(Index n, std::uint64_t seed) {
  const Matrix a = random_matrix(n, n, seed);
  return a * a.transpose() + Matrix::Identity(n, n);
}

inline Matrix random_psd(Index n, Index rank, std::uint64_t seed) {
  const Matrix a = random_matrix(n, rank, seed);
  return a * a.transpose();
}

inline Matrix random_nonnegative(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u;
  Matrix a(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) a(i, j) = u(rng);
  }
  return a;
}

/// Projected gradient on the box subproblem to a 1e-12 fixed-point residual.
inline PrimalVector brute_force_box_step(const DualVector& grad, const Matrix& hess, const MetricOperator& b,
                                         double beta, const PrimalVector& x, const CompositeTerm& psi) {
  const Matrix q = hess + beta * b.matrix();
  const double step = 1.0 / Eigen::SelfAdjointEigenSolver<Matrix>(q).eigenvalues().maxCoeff();
  PrimalVector y = psi.project(x);
  for (int it = 0; it < 2000000; ++it) {
    const PrimalVector next = psi.project(y - step * (grad + q * (y - x)));
    const double moved = (next - y).norm();
    y = next;
    if (moved <= 1e-14) break;
  }
  return y;
}

}  // namespace qsc::testing
