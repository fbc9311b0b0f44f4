#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsc/oracle.hpp"

namespace qsc {

/// The simple closed convex term psi: either zero or the indicator of a box [l, u].
class CompositeTerm {
 public:
  enum class Kind { kZero, kBox };

  static CompositeTerm zero() { return CompositeTerm(); }
  static CompositeTerm box(Vector lower, Vector upper) {
    require_same_dimension(lower.size(), upper.size(), "box bounds");
    for (Index i = 0; i < lower.size(); ++i) {
      if (std::isnan(lower[i]) || std::isnan(upper[i]) || lower[i] > upper[i]) {
        throw std::invalid_argument("box: need l <= u componentwise");
      }
    }
    CompositeTerm t;
    t.kind_ = Kind::kBox;
    t.lower_ = std::move(lower);
    t.upper_ = std::move(upper);
    return t;
  }

  Kind kind() const { return kind_; }
  bool is_zero() const { return kind_ == Kind::kZero; }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }

  bool contains(const PrimalVector& x, double tol = 0.0) const {
    if (is_zero()) return true;
    require_same_dimension(lower_.size(), x.size(), "box");
    return ((x - lower_).array() >= -tol).all() && ((upper_ - x).array() >= -tol).all();
  }
  /// 0 inside the domain, +inf outside.
  double value(const PrimalVector& x) const { return contains(x) ? 0.0 : std::numeric_limits<double>::infinity(); }
  PrimalVector project(const PrimalVector& x) const {
    if (is_zero()) return x;
    require_same_dimension(lower_.size(), x.size(), "box");
    return x.cwiseMax(lower_).cwiseMin(upper_);
  }

  /// A subgradient of f + psi at a feasible x, given grad f(x): on each face the
  /// component is cut back by the normal cone as far as it can go.
  DualVector least_subgradient(const PrimalVector& x, const DualVector& grad) const {
    if (is_zero()) return grad;
    DualVector s = grad;
    for (Index i = 0; i < x.size(); ++i) {
      const bool at_lower = x[i] <= lower_[i];
      const bool at_upper = x[i] >= upper_[i];
      if (at_lower && at_upper) {
        s[i] = 0.0;
      } else if (at_lower) {
        s[i] = std::min(s[i], 0.0);
      } else if (at_upper) {
        s[i] = std::max(s[i], 0.0);
      }
    }
    return s;
  }

  /// Componentwise test s - grad in N(x): zero off the faces, <= 0 on lower faces, >= 0 on upper ones.
  bool in_normal_cone(const PrimalVector& x, const DualVector& n, double tol) const {
    for (Index i = 0; i < x.size(); ++i) {
      const bool at_lower = !is_zero() && x[i] <= lower_[i] + tol;
      const bool at_upper = !is_zero() && x[i] >= upper_[i] - tol;
      if (at_lower && at_upper) continue;
      if (at_lower && n[i] > tol) return false;
      if (at_upper && n[i] < -tol) return false;
      if (!at_lower && !at_upper && std::abs(n[i]) > tol) return false;
    }
    return true;
  }

  std::string describe() const { return is_zero() ? "zero" : "box"; }

 private:
  Kind kind_ = Kind::kZero;
  Vector lower_, upper_;
};

/// weight * ||y - center||^2 added to the model.
struct QuadraticTerm {
  double weight = 0.0;
  PrimalVector center;
};

/// Model data at the current point: f(x), grad f(x), Hessian.
struct ModelPoint {
  PrimalVector x;
  Evaluation eval;
};

inline ModelPoint model_point(const SmoothOracle& o, const PrimalVector& x) {
  return {x, o.evaluate(x, Order::kHessian)};
}

struct StepOptions {
  int max_inner_iterations = 100000;
  int power_iterations = 20;
  double tie_factor = 1e-2;     // stop when the projected-gradient residual <= tie_factor * mu * step
  double absolute_floor = 1e-14;
  SolveOptions solve;
};

struct StepResult {
  PrimalVector x_plus;
  PrimalVector step;           // x_plus - x
  DualVector f_prime_plus;     // selected subgradient of f + psi at x_plus
  Evaluation eval_plus;        // value and gradient of f at x_plus
  double beta = 0.0;
  int inner_iterations = 0;
  double step_length = 0.0;    // ||x_plus - x||
  bool exact = true;           // false when the box path stopped on the tied tolerance
  double inner_residual = 0.0;
};

namespace detail {

// Quadratic model q(y) = <r0, y - x> + 1/2 (y - x)^T Q (y - x) up to a constant.
struct BoxModel {
  const Matrix& q;
  const DualVector& r0;
  const PrimalVector& x;
  DualVector gradient(const PrimalVector& y) const { return r0 + q * (y - x); }
};

inline double power_lambda_max(const Matrix& q, int iterations) {
  const Index n = q.rows();
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = 1.0 + 0.01 * static_cast<double>(i % 7);
  v.normalize();
  double lam = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Vector w = q * v;
    const double len = w.norm();
    if (len == 0.0) return 0.0;
    lam = v.dot(w);
    v = w / len;
  }
  return std::max(lam, (q * v).norm());
}

// Fix the coordinates that sit on a bound, solve for the rest, accept when KKT holds.
inline bool polish_active_set(const BoxModel& m, const CompositeTerm& psi, const std::vector<int>& state,
                              PrimalVector& y) {
  const Index n = m.x.size();
  std::vector<Index> free;
  PrimalVector cand = y;
  for (Index i = 0; i < n; ++i) {
    if (state[i] < 0) cand[i] = psi.lower()[i];
    else if (state[i] > 0) cand[i] = psi.upper()[i];
    else free.push_back(i);
  }
  if (!free.empty()) {
    const Index k = static_cast<Index>(free.size());
    Matrix qff(k, k);
    Vector rhs(k);
    const DualVector full = m.gradient(cand);
    for (Index a = 0; a < k; ++a) {
      rhs[a] = -full[free[a]];
      for (Index b = 0; b < k; ++b) qff(a, b) = m.q(free[a], free[b]);
    }
    Eigen::LLT<Matrix> llt(qff);
    if (llt.info() != Eigen::Success) return false;
    const Vector delta = llt.solve(rhs);
    for (Index a = 0; a < k; ++a) cand[free[a]] += delta[a];
  }
  const double scale = std::max(1.0, m.r0.cwiseAbs().maxCoeff());
  const double tol = 1e-11 * scale;
  const double box_tol = 1e-12 * std::max(1.0, cand.cwiseAbs().maxCoeff());
  if (!psi.contains(cand, box_tol)) return false;
  const DualVector g = m.gradient(cand);
  for (Index i = 0; i < n; ++i) {
    if (state[i] < 0 && g[i] < -tol) return false;
    if (state[i] > 0 && g[i] > tol) return false;
  }
  y = psi.project(cand);
  return true;
}

inline std::vector<int> bound_state(const PrimalVector& y, const CompositeTerm& psi) {
  std::vector<int> s(static_cast<std::size_t>(y.size()), 0);
  for (Index i = 0; i < y.size(); ++i) {
    if (y[i] <= psi.lower()[i]) s[i] = -1;
    else if (y[i] >= psi.upper()[i]) s[i] = 1;
  }
  return s;
}

}  // namespace detail

/// F'(x+) = grad f(x+) - grad f(x) - H(x+ - x) - beta B(x+ - x) - sum 2w B(x+ - c).
inline DualVector select_subgradient(const ModelPoint& at, const DualVector& grad_plus, const PrimalVector& x_plus,
                                     const MetricOperator& b, double beta, std::span<const QuadraticTerm> extras = {}) {
  const PrimalVector d = x_plus - at.x;
  DualVector s = grad_plus - at.eval.gradient - at.eval.hessian * d - beta * b.apply(d);
  for (const QuadraticTerm& t : extras) s -= 2.0 * t.weight * b.apply(x_plus - t.center);
  return s;
}

/// One regularized Newton step from a precomputed model point:
///   argmin_y <grad f(x), y - x> + 1/2 ||y - x||_x^2 + beta/2 ||y - x||^2 + sum w||y - c||^2 + psi(y).
inline StepResult newton_step(const SmoothOracle& o, const CompositeTerm& psi, const ModelPoint& at, double beta,
                              std::span<const QuadraticTerm> extras = {}, const StepOptions& opts = {}) {
  const MetricOperator& b = o.metric();
  const Index n = o.dimension();
  require_same_dimension(n, at.x.size(), "newton_step: x");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("newton_step: beta must be >= 0");
  double weight = 0.0;
  DualVector r0 = at.eval.gradient;
  for (const QuadraticTerm& t : extras) {
    if (!(t.weight >= 0.0)) throw std::invalid_argument("newton_step: quadratic weight must be >= 0");
    require_same_dimension(n, t.center.size(), "newton_step: quadratic center");
    weight += t.weight;
    r0 += 2.0 * t.weight * b.apply(at.x - t.center);
  }
  const double mu = beta + 2.0 * weight;

  StepResult res;
  res.beta = beta;
  if (psi.is_zero()) {
    res.step = regularized_solve(at.eval.hessian, b, mu, -r0, opts.solve);
    res.x_plus = at.x + res.step;
  } else {
    if (!(mu > 0.0)) throw std::invalid_argument("newton_step: a box term needs beta > 0 or an extra quadratic");
    const Matrix q = symmetrized(at.eval.hessian) + mu * b.matrix();
    const detail::BoxModel model{q, r0, at.x};
    const double lmax = detail::power_lambda_max(q, opts.power_iterations);
    const double step = 1.0 / (1.1 * std::max(lmax, std::numeric_limits<double>::min()));

    // Start from the projected unconstrained minimizer; often it is already optimal.
    PrimalVector y = psi.project(at.x - regularized_solve(at.eval.hessian, b, mu, r0, opts.solve));
    std::vector<int> state = detail::bound_state(y, psi);
    bool done = detail::polish_active_set(model, psi, std::vector<int>(state.size(), 0), y) ||
                detail::polish_active_set(model, psi, state, y);
    int stable = 0;
    int it = 0;
    double residual = 0.0;
    while (!done) {
      if (it >= opts.max_inner_iterations) {
        throw MaxInnerIterations("box subproblem: projected gradient did not converge in " +
                                 std::to_string(opts.max_inner_iterations) + " iterations");
      }
      const PrimalVector next = psi.project(y - step * model.gradient(y));
      residual = (next - y).norm() / step;
      y = next;
      ++it;
      const std::vector<int> s = detail::bound_state(y, psi);
      stable = s == state ? stable + 1 : 0;
      state = s;
      const double tied = opts.tie_factor * mu * b.primal_norm(y - at.x);
      if ((stable >= 3 || it % 25 == 0) && detail::polish_active_set(model, psi, state, y)) break;
      if (residual <= std::max(tied, opts.absolute_floor)) {
        if (!detail::polish_active_set(model, psi, state, y)) {
          res.exact = false;
          res.inner_residual = residual;
        }
        break;
      }
    }
    res.inner_iterations = it;
    res.x_plus = y;
    res.step = y - at.x;
  }
  res.step_length = b.primal_norm(res.step);
  res.eval_plus = o.evaluate(res.x_plus, Order::kGradient);
  res.f_prime_plus = select_subgradient(at, res.eval_plus.gradient, res.x_plus, b, beta, extras);
  return res;
}

inline StepResult newton_step(const SmoothOracle& o, const CompositeTerm& psi, const PrimalVector& x, double beta,
                              std::span<const QuadraticTerm> extras = {}, const StepOptions& opts = {}) {
  return newton_step(o, psi, model_point(o, x), beta, extras, opts);
}

struct StepBoundCheck {
  bool passed = true;
  double length_slack = 0.0;  // g/(beta+lambda) + tol - ||d||
  double local_slack = 0.0;   // ||d|| g + tol - ||d||_x^2
};

/// ||x+ - x|| <= g/(beta + lambda) + 1e-8 and ||x+ - x||_x^2 <= ||x+ - x|| g + 1e-8,
/// where g = ||F'(x)||_* and H is the Hessian at x.
inline StepBoundCheck verify_step_bound(const StepResult& step, const Matrix& hessian, double g, double beta,
                                        double lambda = 0.0) {
  StepBoundCheck c;
  const double denom = beta + lambda;
  c.length_slack = denom > 0.0 ? g / denom + 1e-8 - step.step_length : std::numeric_limits<double>::infinity();
  const double local_sq = std::max(0.0, step.step.dot(hessian * step.step));
  c.local_slack = step.step_length * g + 1e-8 - local_sq;
  c.passed = c.length_slack >= 0.0 && c.local_slack >= 0.0;
  return c;
}

}  // namespace qsc
