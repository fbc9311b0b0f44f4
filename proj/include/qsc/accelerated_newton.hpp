#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qsc/dual_newton.hpp"

namespace qsc {

struct AccelConfig {
  double r = 0.0;                     // R >= max(||x0 - x*||, 2^{3/2}/M)
  double c = 1.0;
  std::optional<double> gamma;        // overrides 1/(MR)^{2/3}
  std::optional<double> a0;           // overrides c^2 R^2 / (2 (F(x0) - F*))
  std::optional<double> f_star;       // needed by the A0 rule and by the relative-gap stop
  std::optional<double> m;            // defaults to the oracle's M
  double target_relative_gap = 1e-6;  // eps
  int max_outer = 1000;
  bool strict = false;                // parameter preconditions become ParameterError
  DualConfig inner = [] {
    DualConfig d;
    d.max_outer = 200;
    d.max_inner = 50;
    return d;
  }();
};

struct AccelTraceRow {
  int k = 0;
  double big_a = 0.0;   // A_k
  double a = 0.0;       // a_k (0 for k = 0)
  double nu = 0.0;      // nu_k (0 for k = 0)
  int inner_outer = 0;  // Dual Newton outer iterations spent on v_k
  int inner_inner = 0;  // and their pure Newton steps
  int inner_doublings = 0;
  double inner_g = 0.0;         // ||h'(v_k)||_* reported by the inner method
  double inner_g_direct = std::numeric_limits<double>::quiet_NaN();  // recomputed (zero psi only)
  double value = 0.0;           // F(x_k)
  double dist_v = std::numeric_limits<double>::quiet_NaN();  // ||v_k - x*|| when a reference is known
  double dist_x = std::numeric_limits<double>::quiet_NaN();
};

struct AccelResult {
  PrimalVector x;
  std::vector<AccelTraceRow> trace;
  std::vector<PrimalVector> xs, vs;
  SolveStatus status = SolveStatus::kMaxIters;
  std::string message;
  double m = 0.0;            // QSC parameter used, after any clamp
  double r = 0.0;
  double c = 1.0;
  double gamma = 0.0;
  double a0 = 0.0;
  double value0 = 0.0;
  bool clamped_gamma = false;
  CallCounts calls;
  double seconds = 0.0;

  int iterations() const { return trace.empty() ? 0 : trace.back().k; }
  int inner_total() const {
    int n = 0;
    for (const AccelTraceRow& row : trace) n += row.inner_inner;
    return n;
  }
  double final_value() const { return trace.empty() ? value0 : trace.back().value; }
};

/// R >= 2^{3/2}/M is what makes gamma <= 1/2.
inline constexpr double kAccelRFloorConstant = 2.8284271247461900976;

/// Accelerated Newton scheme: contracting proximal-point steps, each solved by the Dual Newton method.
inline AccelResult solve_accelerated(const SmoothOracle& o, const CompositeTerm& psi, const PrimalVector& x0,
                                     const AccelConfig& cfg) {
  require_same_dimension(o.dimension(), x0.size(), "solve_accelerated: x0");
  if (!psi.contains(x0)) throw std::invalid_argument("solve_accelerated: x0 is outside the domain of psi");
  if (!(cfg.r > 0.0) || !std::isfinite(cfg.r)) throw ParameterError("solve_accelerated: R must be positive");
  if (!(cfg.c > 0.0)) throw ParameterError("solve_accelerated: c must be positive");
  if (!cfg.a0 && !cfg.f_star) throw ParameterError("solve_accelerated: A0 needs a reference value F*");

  const auto start = std::chrono::steady_clock::now();
  const MetricOperator& b = o.metric();
  AccelResult res;
  res.r = cfg.r;
  res.c = cfg.c;
  double m = cfg.m.value_or(o.qsc_constant());
  const double m_floor = kAccelRFloorConstant / cfg.r;
  if (!(m >= m_floor)) {
    if (cfg.strict) {
      throw ParameterError("solve_accelerated: R = " + std::to_string(cfg.r) + " is below 2^{3/2}/M");
    }
    // Any larger constant is still valid, and this one puts gamma at exactly 1/2.
    m = m_floor;
    res.clamped_gamma = true;
  }
  res.m = m;
  res.gamma = cfg.gamma.value_or(1.0 / std::cbrt(m * cfg.r * m * cfg.r));
  if (!(res.gamma > 0.0 && res.gamma < 1.0)) throw ParameterError("solve_accelerated: gamma must lie in (0, 1)");
  const double gamma = res.gamma;

  res.value0 = o.value(x0);
  ++res.calls.values;
  const double gap0 = cfg.f_star ? res.value0 - *cfg.f_star : std::numeric_limits<double>::quiet_NaN();

  PrimalVector xk = x0, vk = x0;
  AccelTraceRow row0;
  row0.value = res.value0;
  res.xs.push_back(xk);
  res.vs.push_back(vk);
  if (cfg.f_star && !(gap0 > 0.0)) {
    res.trace.push_back(row0);
    res.status = SolveStatus::kTargetGapReached;
    res.x = x0;
    return res;
  }
  res.a0 = cfg.a0.value_or(cfg.c * cfg.c * cfg.r * cfg.r / (2.0 * gap0));
  if (!(res.a0 > 0.0) || !std::isfinite(res.a0)) throw ParameterError("solve_accelerated: A0 must be positive");
  row0.big_a = res.a0;
  res.trace.push_back(row0);
  double big_a = res.a0;

  for (int k = 0;; ++k) {
    const double value = res.trace.back().value;
    if (cfg.f_star && k > 0 && value - *cfg.f_star <= cfg.target_relative_gap * gap0) {
      res.status = SolveStatus::kTargetGapReached;
      break;
    }
    if (k >= cfg.max_outer) {
      res.status = SolveStatus::kMaxIters;
      break;
    }
    AccelTraceRow row;
    row.k = k + 1;
    row.big_a = big_a / (1.0 - gamma);
    row.a = gamma * big_a / (1.0 - gamma);
    row.nu = cfg.r / static_cast<double>((k + 1) * (k + 1));

    const SmoothOracle fbar = contract_oracle(o, gamma, xk, row.big_a);
    DualConfig inner = cfg.inner;
    inner.m = gamma * m;
    inner.nu = row.nu;
    inner.fixed_quadratic = QuadraticTerm{0.5, vk};
    // a_{k+1} * psi is psi itself for a box indicator.
    const DualResult d = solve_dual(fbar, psi, vk, inner);
    res.calls += d.calls;
    row.inner_outer = d.outer_iterations();
    row.inner_inner = d.inner_total();
    row.inner_doublings = d.m_doublings;
    row.inner_g = d.final_g();
    if (!succeeded(d.status)) {
      res.status = d.status;
      res.message = "inner Dual Newton: " + to_string(d.status) + (d.message.empty() ? "" : " (" + d.message + ")");
      break;
    }
    const PrimalVector v_next = d.x;
    if (psi.is_zero()) {
      row.inner_g_direct = b.dual_norm(fbar.gradient(v_next) + b.apply(v_next - vk));
      ++res.calls.gradients;
    }
    PrimalVector x_next = gamma * v_next + (1.0 - gamma) * xk;
    if (!psi.is_zero()) x_next = psi.project(x_next);  // removes round-off only
    row.value = o.value(x_next);
    ++res.calls.values;
    res.trace.push_back(row);
    res.xs.push_back(x_next);
    res.vs.push_back(v_next);
    xk = x_next;
    vk = v_next;
    big_a = row.big_a;
  }
  res.x = xk;
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

/// Fills dist_v / dist_x once a reference minimizer is known.
inline void attach_reference(AccelResult& r, const MetricOperator& b, const PrimalVector& x_star) {
  for (std::size_t i = 0; i < r.trace.size() && i < r.xs.size(); ++i) {
    r.trace[i].dist_v = b.primal_norm(r.vs[i] - x_star);
    r.trace[i].dist_x = b.primal_norm(r.xs[i] - x_star);
  }
}

struct AccelPotentialCheck {
  bool passed = true;            // against 1/2 (||x0 - x*|| + sqrt(2 A0 gap0) + 4R)^2
  bool parameter_passed = true;  // against (5 + c)^2 R^2 / 2
  double rhs = 0.0;
  double parameter_rhs = 0.0;
  double worst_ratio = 0.0;
  double worst_parameter_ratio = 0.0;
};

/// A_k (F(x_k) - F*) + 1/2 ||v_k - x*||^2 + 1/2 sum ||v_i - v_{i-1}||^2 at every k, slack 1e-6 relative.
inline AccelPotentialCheck verify_accel_potential(const AccelResult& r, const MetricOperator& b,
                                                  const PrimalVector& x_star, double f_star) {
  AccelPotentialCheck c;
  const double gap0 = r.value0 - f_star;
  const double root = b.primal_norm(r.xs.front() - x_star) + std::sqrt(2.0 * r.a0 * std::max(gap0, 0.0)) + 4.0 * r.r;
  c.rhs = 0.5 * root * root;
  c.parameter_rhs = 0.5 * (5.0 + r.c) * (5.0 + r.c) * r.r * r.r;
  double path = 0.0;
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    if (i > 0) {
      const double step = b.primal_norm(r.vs[i] - r.vs[i - 1]);
      path += 0.5 * step * step;
    }
    const double dv = b.primal_norm(r.vs[i] - x_star);
    const double lhs = r.trace[i].big_a * (r.trace[i].value - f_star) + 0.5 * dv * dv + path;
    c.worst_ratio = std::max(c.worst_ratio, lhs / c.rhs);
    c.worst_parameter_ratio = std::max(c.worst_parameter_ratio, lhs / c.parameter_rhs);
  }
  c.passed = c.worst_ratio <= 1.0 + 1e-6;
  c.parameter_passed = c.worst_parameter_ratio <= 1.0 + 1e-6;
  return c;
}

struct AccelRateCheck {
  bool passed = true;
  bool bounded = true;  // ||v_k - x*||, ||x_k - x*|| <= (5 + c) R
  double worst_ratio = 0.0;
  double worst_distance_ratio = 0.0;
};

/// F(x_k) - F* <= exp(-gamma k) (1 + 5/c)^2 (F(x0) - F*) (1 + 1e-6) for k >= 1, plus the boundedness companions.
inline AccelRateCheck verify_accel_rate(const AccelResult& r, const MetricOperator& b, const PrimalVector& x_star,
                                        double f_star) {
  AccelRateCheck c;
  const double gap0 = r.value0 - f_star;
  const double factor = (1.0 + 5.0 / r.c) * (1.0 + 5.0 / r.c);
  const double radius = (5.0 + r.c) * r.r;
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    const double k = static_cast<double>(r.trace[i].k);
    if (i > 0 && gap0 > 0.0) {
      const double bound = std::exp(-r.gamma * k) * factor * gap0 * (1.0 + 1e-6);
      c.worst_ratio = std::max(c.worst_ratio, (r.trace[i].value - f_star) / bound);
    }
    const double d = std::max(b.primal_norm(r.vs[i] - x_star), b.primal_norm(r.xs[i] - x_star));
    c.worst_distance_ratio = std::max(c.worst_distance_ratio, d / radius);
  }
  c.passed = c.worst_ratio <= 1.0;
  c.bounded = c.worst_distance_ratio <= 1.0;
  return c;
}

}  // namespace qsc
