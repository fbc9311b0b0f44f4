#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "qsc/linalg.hpp"

namespace qsc {

/// How much of the Taylor expansion an evaluation must produce.
enum class Order { kValue = 0, kGradient = 1, kHessian = 2 };

struct Evaluation {
  double value = 0.0;
  DualVector gradient;  // empty when Order < kGradient
  Matrix hessian;       // empty when Order < kHessian
  bool overflow = false;  // an exponent was clamped to stay finite
};

/// A convex, several-times differentiable function with full domain.
/// Implementations are immutable and safe to evaluate from several threads.
class SmoothFunction {
 public:
  virtual ~SmoothFunction() = default;
  virtual Index dimension() const = 0;
  virtual Evaluation evaluate(const PrimalVector& x, Order order) const = 0;
  virtual std::string name() const = 0;
};

/// A smooth function together with the metric B it is measured in and a certified
/// quasi-self-concordance constant M for that metric:
///   D^3 f(x)[u]^2[v] <= M ||u||_x^2 ||v||.
/// Cheap to copy; all state is shared and immutable.
class SmoothOracle {
 public:
  SmoothOracle(std::shared_ptr<const SmoothFunction> fn, MetricOperator metric, double qsc_constant)
      : fn_(std::move(fn)), metric_(std::move(metric)), qsc_(qsc_constant) {
    if (!fn_) throw std::invalid_argument("SmoothOracle: null function");
    require_same_dimension(fn_->dimension(), metric_.dimension(), "SmoothOracle metric");
    if (!(qsc_ >= 0.0) || !std::isfinite(qsc_)) {
      throw std::invalid_argument("SmoothOracle: QSC constant must be finite and non-negative");
    }
  }

  Index dimension() const { return fn_->dimension(); }
  double qsc_constant() const { return qsc_; }
  const MetricOperator& metric() const { return metric_; }
  const SmoothFunction& function() const { return *fn_; }
  const std::shared_ptr<const SmoothFunction>& function_ptr() const { return fn_; }
  std::string name() const { return fn_->name(); }

  Evaluation evaluate(const PrimalVector& x, Order order) const {
    require_same_dimension(dimension(), x.size(), fn_->name().c_str());
    return fn_->evaluate(x, order);
  }
  double value(const PrimalVector& x) const { return evaluate(x, Order::kValue).value; }
  DualVector gradient(const PrimalVector& x) const { return evaluate(x, Order::kGradient).gradient; }
  Matrix hessian(const PrimalVector& x) const { return evaluate(x, Order::kHessian).hessian; }

  /// Same function and metric, different declared constant. Used to probe the
  /// checkers with deliberately wrong constants.
  SmoothOracle with_qsc_constant(double m) const { return SmoothOracle(fn_, metric_, m); }

 private:
  std::shared_ptr<const SmoothFunction> fn_;
  MetricOperator metric_;
  double qsc_;
};

namespace detail {

class ScaledFunction final : public SmoothFunction {
 public:
  ScaledFunction(std::shared_ptr<const SmoothFunction> inner, double c) : inner_(std::move(inner)), c_(c) {}
  Index dimension() const override { return inner_->dimension(); }
  std::string name() const override { return "scaled(" + inner_->name() + ")"; }
  Evaluation evaluate(const PrimalVector& x, Order order) const override {
    Evaluation e = inner_->evaluate(x, order);
    e.value *= c_;
    if (order >= Order::kGradient) e.gradient *= c_;
    if (order >= Order::kHessian) e.hessian *= c_;
    return e;
  }

 private:
  std::shared_ptr<const SmoothFunction> inner_;
  double c_;
};

// g(x) = f(Ax - b) with A : E2 -> E1.
class AffineFunction final : public SmoothFunction {
 public:
  AffineFunction(std::shared_ptr<const SmoothFunction> inner, Matrix a, Vector b)
      : inner_(std::move(inner)), a_(std::move(a)), b_(std::move(b)) {}
  Index dimension() const override { return a_.cols(); }
  std::string name() const override { return "affine(" + inner_->name() + ")"; }
  Evaluation evaluate(const PrimalVector& x, Order order) const override {
    Evaluation e = inner_->evaluate(a_ * x - b_, order);
    if (order >= Order::kGradient) e.gradient = a_.transpose() * e.gradient;
    if (order >= Order::kHessian) e.hessian = a_.transpose() * e.hessian * a_;
    return e;
  }

 private:
  std::shared_ptr<const SmoothFunction> inner_;
  Matrix a_;
  Vector b_;
};

// scale * f(gamma*x + (1 - gamma)*anchor)
class ContractedFunction final : public SmoothFunction {
 public:
  ContractedFunction(std::shared_ptr<const SmoothFunction> inner, double gamma, Vector anchor, double scale)
      : inner_(std::move(inner)), gamma_(gamma), shift_((1.0 - gamma) * anchor), scale_(scale) {}
  Index dimension() const override { return inner_->dimension(); }
  std::string name() const override { return "contracted(" + inner_->name() + ")"; }
  Evaluation evaluate(const PrimalVector& x, Order order) const override {
    Evaluation e = inner_->evaluate(gamma_ * x + shift_, order);
    e.value *= scale_;
    if (order >= Order::kGradient) e.gradient *= scale_ * gamma_;
    if (order >= Order::kHessian) e.hessian *= scale_ * gamma_ * gamma_;
    return e;
  }

 private:
  std::shared_ptr<const SmoothFunction> inner_;
  double gamma_;
  Vector shift_;
  double scale_;
};

class SumFunction final : public SmoothFunction {
 public:
  SumFunction(std::shared_ptr<const SmoothFunction> f1, std::shared_ptr<const SmoothFunction> f2)
      : f1_(std::move(f1)), f2_(std::move(f2)) {}
  Index dimension() const override { return f1_->dimension(); }
  std::string name() const override { return f1_->name() + "+" + f2_->name(); }
  Evaluation evaluate(const PrimalVector& x, Order order) const override {
    Evaluation e = f1_->evaluate(x, order);
    const Evaluation e2 = f2_->evaluate(x, order);
    e.value += e2.value;
    if (order >= Order::kGradient) e.gradient += e2.gradient;
    if (order >= Order::kHessian) e.hessian += e2.hessian;
    e.overflow = e.overflow || e2.overflow;
    return e;
  }

 private:
  std::shared_ptr<const SmoothFunction> f1_, f2_;
};

}  // namespace detail

/// c*f keeps the same QSC constant.
inline SmoothOracle scale_oracle(const SmoothOracle& o, double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("scale_oracle: c must be positive");
  return SmoothOracle(std::make_shared<detail::ScaledFunction>(o.function_ptr(), c), o.metric(), o.qsc_constant());
}

/// g(x) = f(Ax - b) measured in B' = A^T B A, where the constant carries over unchanged.
inline SmoothOracle affine_substitute(const SmoothOracle& o, const Matrix& a, const Vector& b) {
  require_same_dimension(o.dimension(), a.rows(), "affine_substitute: rows of A");
  require_same_dimension(o.dimension(), b.size(), "affine_substitute: shift");
  MetricOperator pulled_back(a.transpose() * o.metric().matrix() * a);
  return SmoothOracle(std::make_shared<detail::AffineFunction>(o.function_ptr(), a, b), std::move(pulled_back),
                      o.qsc_constant());
}

/// g(x) = f(Ax - b) measured in an arbitrary metric. The caller supplies kappa with
/// ||h||_{A^T B A} <= kappa ||h||_{new_metric}; the constant becomes kappa*M.
inline SmoothOracle affine_substitute(const SmoothOracle& o, const Matrix& a, const Vector& b,
                                      const MetricOperator& new_metric, double kappa) {
  require_same_dimension(o.dimension(), a.rows(), "affine_substitute: rows of A");
  require_same_dimension(o.dimension(), b.size(), "affine_substitute: shift");
  require_same_dimension(a.cols(), new_metric.dimension(), "affine_substitute: new metric");
  if (!(kappa >= 0.0)) throw std::invalid_argument("affine_substitute: kappa must be non-negative");
  return SmoothOracle(std::make_shared<detail::AffineFunction>(o.function_ptr(), a, b), new_metric,
                      kappa * o.qsc_constant());
}

/// scale * f(gamma*x + (1 - gamma)*anchor), QSC with constant gamma*M in the same metric.
inline SmoothOracle contract_oracle(const SmoothOracle& o, double gamma, const PrimalVector& anchor, double scale) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("contract_oracle: gamma must lie in (0, 1)");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw std::invalid_argument("contract_oracle: scale must be positive");
  require_same_dimension(o.dimension(), anchor.size(), "contract_oracle: anchor");
  return SmoothOracle(std::make_shared<detail::ContractedFunction>(o.function_ptr(), gamma, anchor, scale),
                      o.metric(), gamma * o.qsc_constant());
}

/// f1 + f2 over a shared metric; the constant is max(M1, M2).
inline SmoothOracle sum_oracles(const SmoothOracle& o1, const SmoothOracle& o2) {
  require_same_dimension(o1.dimension(), o2.dimension(), "sum_oracles");
  if (!o1.metric().matrix().isApprox(o2.metric().matrix(), 1e-12)) {
    throw std::invalid_argument("sum_oracles: both terms must use the same metric");
  }
  return SmoothOracle(std::make_shared<detail::SumFunction>(o1.function_ptr(), o2.function_ptr()), o1.metric(),
                      std::max(o1.qsc_constant(), o2.qsc_constant()));
}

}  // namespace qsc
