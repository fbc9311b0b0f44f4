#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qsc/oracle.hpp"

namespace qsc {

/// Exponents above this are clamped (and flagged) so that e^t stays finite.
inline constexpr double kExpClamp = 700.0;

/// A zoo instance: the oracle plus bookkeeping about how its metric was built.
struct Problem {
  SmoothOracle oracle;
  std::string kind;
  double metric_ridge = 0.0;  // ridge added to a rank-deficient sum of a_i a_i^T
};

namespace detail {

inline double clamped_exp(double t, bool& overflow) {
  if (t > kExpClamp) {
    overflow = true;
    t = kExpClamp;
  }
  return std::exp(t);
}

// B = sum_i a_i a_i^T, with a small ridge when the rows do not span the space.
inline std::pair<MetricOperator, double> design_metric(const Matrix& rows) {
  const Index n = rows.cols();
  Matrix b = rows.transpose() * rows;
  Eigen::LLT<Matrix> llt(b);
  double ridge = 0.0;
  const double floor = 1e-12 * std::max(1.0, b.diagonal().maxCoeff());
  bool deficient = llt.info() != Eigen::Success;
  if (!deficient) deficient = llt.matrixLLT().diagonal().array().square().minCoeff() <= floor;
  if (deficient) {
    ridge = 1e-10 * std::max(b.trace(), 1.0) / static_cast<double>(n);
    b.diagonal().array() += ridge;
  }
  return {MetricOperator(b), ridge};
}

class QuadraticFunction final : public SmoothFunction {
 public:
  QuadraticFunction(Matrix a, Vector b) : a_(symmetrized(a)), b_(std::move(b)) {}
  Index dimension() const override { return a_.rows(); }
  std::string name() const override { return "quadratic"; }
  Evaluation evaluate(const PrimalVector& x, Order order) const override {
    Evaluation e;
    const Vector ax = a_ * x;
    e.value = 0.5 * x.dot(ax) - b_.dot(x);
    if (order >= Order::kGradient) e.gradient = ax - b_;
    if (order >= Order::kHessian) e.hessian = a_;
    return e;
  }

 private:
  Matrix a_;
  Vector b_;
};

class SoftMaxFunction final : public SmoothFunction {
 public:
  SoftMaxFunction(Matrix rows, Vector offsets, double mu) : rows_(std::move(rows)), offsets_(std::move(offsets)), mu_(mu) {}
  Index dimension() const override { return rows_.cols(); }
  std::string name() const override { return "softmax"; }
  Evaluation evaluate(const PrimalVector& x, Order order) const override {
    Evaluation e;
    const Vector t = (rows_ * x - offsets_) / mu_;
    const double shift = t.maxCoeff();
    Vector pi = (t.array() - shift).exp().matrix();
    const double total = pi.sum();
    pi /= total;
    e.value = mu_ * (shift + std::log(total));
    if (order >= Order::kGradient) e.gradient = rows_.transpose() * pi;
    if (order >= Order::kHessian) {
      const Matrix weighted = rows_.transpose() * pi.asDiagonal();
      e.hessian = (weighted * rows_ - e.gradient * e.gradient.transpose()) / mu_;
      e.hessian = symmetrized(e.hessian);
    }
    return e;
  }

 private:
  Matrix rows_;
  Vector offsets_;
  double mu_;
};

}  // namespace detail

enum class LossKind { kLogistic, kExponential };

inline std::string to_string(LossKind k) { return k == LossKind::kLogistic ? "logistic" : "exponential"; }

namespace detail {

// Loss derivatives phi, phi', phi'' at t.
struct LossDerivatives {
  double value, first, second;
};

inline LossDerivatives logistic_loss(double t) {
  // log(1 + e^t) and the sigmoid, both evaluated without overflow.
  const double value = t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
  const double s = t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
  return {value, s, s * (1.0 - s)};
}

class SeparableFunction final : public SmoothFunction {
 public:
  SeparableFunction(Matrix rows, Vector offsets, LossKind loss)
      : rows_(std::move(rows)), offsets_(std::move(offsets)), loss_(loss) {}
  Index dimension() const override { return rows_.cols(); }
  std::string name() const override { return to_string(loss_); }
  Evaluation evaluate(const PrimalVector& x, Order order) const override {
    Evaluation e;
    const Index m = rows_.rows();
    const Vector t = rows_ * x - offsets_;
    Vector d1(m), d2(m);
    double total = 0.0;
    for (Index i = 0; i < m; ++i) {
      LossDerivatives l;
      if (loss_ == LossKind::kLogistic) {
        l = logistic_loss(t[i]);
      } else {
        const double v = clamped_exp(t[i], e.overflow);
        l = {v, v, v};
      }
      total += l.value;
      d1[i] = l.first;
      d2[i] = l.second;
    }
    const double inv_m = 1.0 / static_cast<double>(m);
    e.value = total * inv_m;
    if (order >= Order::kGradient) e.gradient = rows_.transpose() * d1 * inv_m;
    if (order >= Order::kHessian) {
      e.hessian = (rows_.transpose() * (d2 * inv_m).asDiagonal()) * rows_;
      e.hessian = symmetrized(e.hessian);
    }
    return e;
  }

 private:
  Matrix rows_;
  Vector offsets_;
  LossKind loss_;
};

// f(x) = sum_k w_k exp(x_p - x_q): the common form of matrix scaling and balancing.
class ExpPairFunction final : public SmoothFunction {
 public:
  struct Term {
    double weight;
    Index plus, minus;
  };
  ExpPairFunction(Index dim, std::vector<Term> terms, std::string name)
      : dim_(dim), terms_(std::move(terms)), name_(std::move(name)) {}
  Index dimension() const override { return dim_; }
  std::string name() const override { return name_; }
  Evaluation evaluate(const PrimalVector& x, Order order) const override {
    Evaluation e;
    double total = 0.0;
    if (order >= Order::kGradient) e.gradient = Vector::Zero(dim_);
    if (order >= Order::kHessian) e.hessian = Matrix::Zero(dim_, dim_);
    for (const Term& term : terms_) {
      if (term.plus == term.minus) {
        total += term.weight;
        continue;
      }
      const double w = term.weight * clamped_exp(x[term.plus] - x[term.minus], e.overflow);
      total += w;
      if (order >= Order::kGradient) {
        e.gradient[term.plus] += w;
        e.gradient[term.minus] -= w;
      }
      if (order >= Order::kHessian) {
        e.hessian(term.plus, term.plus) += w;
        e.hessian(term.minus, term.minus) += w;
        e.hessian(term.plus, term.minus) -= w;
        e.hessian(term.minus, term.plus) -= w;
      }
    }
    e.value = total;
    return e;
  }

 private:
  Index dim_;
  std::vector<Term> terms_;
  std::string name_;
};

inline void require_rows(const Matrix& rows, const Vector& offsets) {
  if (rows.rows() == 0 || rows.cols() == 0) throw DimensionError("design matrix is empty");
  require_same_dimension(rows.rows(), offsets.size(), "offsets");
}

inline void require_nonnegative_square(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() == 0) throw DimensionError("matrix problem needs a non-empty square matrix");
  if (!a.allFinite() || (a.array() < 0.0).any()) {
    throw std::invalid_argument("matrix problem needs a finite non-negative matrix");
  }
}

}  // namespace detail

/// f(x) = 1/2 <Ax, x> - <b, x>; M = 0 in any metric.
inline Problem make_quadratic(const Matrix& a, const Vector& b, std::optional<MetricOperator> metric = std::nullopt) {
  if (a.rows() != a.cols()) throw DimensionError("quadratic: A must be square");
  require_same_dimension(a.rows(), b.size(), "quadratic: b");
  MetricOperator metric_op = metric ? *metric : MetricOperator::identity(a.rows());
  require_same_dimension(a.rows(), metric_op.dimension(), "quadratic: metric");
  return {SmoothOracle(std::make_shared<detail::QuadraticFunction>(a, b), std::move(metric_op), 0.0), "quadratic", 0.0};
}

/// f(x) = mu ln sum_i exp((<a_i, x> - b_i)/mu) with B = sum a_i a_i^T and M = 2/mu.
inline Problem make_softmax(const Matrix& rows, const Vector& offsets, double mu) {
  detail::require_rows(rows, offsets);
  if (!(mu > 0.0)) throw std::invalid_argument("softmax: mu must be positive");
  auto [metric, ridge] = detail::design_metric(rows);
  return {SmoothOracle(std::make_shared<detail::SoftMaxFunction>(rows, offsets, mu), std::move(metric), 2.0 / mu),
          "softmax", ridge};
}

/// f(x) = (1/m) sum_i loss(<a_i, x> - b_i) with B = sum a_i a_i^T and M = 1.
inline Problem make_separable(const Matrix& rows, const Vector& offsets, LossKind loss) {
  detail::require_rows(rows, offsets);
  auto [metric, ridge] = detail::design_metric(rows);
  return {SmoothOracle(std::make_shared<detail::SeparableFunction>(rows, offsets, loss), std::move(metric), 1.0),
          to_string(loss), ridge};
}

/// f(x, y) = sum_ij A_ij exp(x_i - y_j) over R^{2n}, B = I, M = sqrt(2).
inline Problem make_matrix_scaling(const Matrix& a) {
  detail::require_nonnegative_square(a);
  const Index n = a.rows();
  std::vector<detail::ExpPairFunction::Term> terms;
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      if (a(i, j) > 0.0) terms.push_back({a(i, j), i, n + j});
    }
  }
  return {SmoothOracle(std::make_shared<detail::ExpPairFunction>(2 * n, std::move(terms), "matrix_scaling"),
                       MetricOperator::identity(2 * n), std::numbers::sqrt2),
          "matrix_scaling", 0.0};
}

/// f(x) = sum_ij A_ij exp(x_i - x_j) over R^n, B = I, M = sqrt(2). Diagonal entries are constants.
inline Problem make_matrix_balancing(const Matrix& a) {
  detail::require_nonnegative_square(a);
  const Index n = a.rows();
  std::vector<detail::ExpPairFunction::Term> terms;
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      if (a(i, j) > 0.0) terms.push_back({a(i, j), i, j});
    }
  }
  return {SmoothOracle(std::make_shared<detail::ExpPairFunction>(n, std::move(terms), "matrix_balancing"),
                       MetricOperator::identity(n), std::numbers::sqrt2),
          "matrix_balancing", 0.0};
}

/// problem + (weight/2)||x||^2 in the problem's own metric. Adding a convex quadratic
/// leaves the constant unchanged and makes lambda(x) >= weight.
inline Problem add_strong_convexity(const Problem& p, double weight) {
  if (!(weight >= 0.0)) throw std::invalid_argument("add_strong_convexity: weight must be non-negative");
  const Index n = p.oracle.dimension();
  Problem reg = make_quadratic(weight * p.oracle.metric().matrix(), Vector::Zero(n), p.oracle.metric());
  return {sum_oracles(p.oracle, reg.oracle), p.kind, p.metric_ridge};
}

}  // namespace qsc
