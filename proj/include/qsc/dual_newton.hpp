#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "qsc/primal_newton.hpp"

namespace qsc {

struct DualConfig {
  std::optional<double> m;  // QSC parameter handed to the method; defaults to the oracle's M
  double nu = 1e-8;
  int max_outer = 1000;
  int max_inner = 50;
  int max_m_doublings = 40;  // an inner loop that stalls doubles M and restarts the outer step
  // A quadratic weight*||x - center||^2 that belongs to the objective (not to the model only).
  std::optional<QuadraticTerm> fixed_quadratic;
  StepOptions step;
};

struct DualTraceRow {
  int k = 0;
  double g = 0.0;          // g_k
  double m = 0.0;          // QSC parameter used for this outer step
  double a = 0.0;          // a_{k+1} = 1/(2 M g_k)
  int inner_iterations = 0;
  double inner_residual = 0.0;  // ||s_{t+1}||_* at exit
  double threshold = 0.0;       // 2 M g_k nu / (k+1)^2
  bool floor_exit = false;      // stopped because the residual hit round-off before the threshold
  double g_next = 0.0;          // g_{k+1}
  double value_next = 0.0;      // F(x_{k+1})
  double s_mismatch = 0.0;      // ||s_{t+1} - h'(x_{k+1})||_* recomputed directly
  std::vector<double> inner_residuals;  // ||h'(z_t)||_* for t = 0, 1, ...
};

struct DualResult {
  PrimalVector x;
  PrimalVector x0;
  double g0 = 0.0;
  double value0 = 0.0;
  double nu = 0.0;
  double m_final = 0.0;
  std::vector<DualTraceRow> trace;
  std::vector<PrimalVector> iterates;
  SolveStatus status = SolveStatus::kMaxIters;
  std::string message;
  CallCounts calls;
  int m_doublings = 0;
  bool inexact_steps = false;
  double seconds = 0.0;

  int outer_iterations() const { return static_cast<int>(trace.size()); }
  int inner_total() const {
    int n = 0;
    for (const DualTraceRow& r : trace) n += r.inner_iterations;
    return n;
  }
  double final_g() const { return trace.empty() ? g0 : trace.back().g_next; }
  double final_value() const { return trace.empty() ? value0 : trace.back().value_next; }
};

namespace detail {

// F = f + psi (+ fixed quadratic). Returns value and grad of the smooth part.
struct DualObjective {
  const SmoothOracle& o;
  const std::optional<QuadraticTerm>& fixed;

  Evaluation smooth(const PrimalVector& x, Order order) const {
    Evaluation e = o.evaluate(x, order);
    if (fixed) {
      const PrimalVector d = x - fixed->center;
      const DualVector bd = o.metric().apply(d);
      e.value += fixed->weight * d.dot(bd);
      if (order >= Order::kGradient) e.gradient += 2.0 * fixed->weight * bd;
      if (order >= Order::kHessian) e.hessian += 2.0 * fixed->weight * o.metric().matrix();
    }
    return e;
  }
};

}  // namespace detail

/// Dual Newton method: inexact proximal point with a_{k+1} = 1/(2 M g_k), each
/// subproblem solved by pure Newton steps. Returns once ||F'(x_k)||_* <= nu.
inline DualResult solve_dual(const SmoothOracle& o, const CompositeTerm& psi, const PrimalVector& x0,
                             const DualConfig& cfg = {}) {
  require_same_dimension(o.dimension(), x0.size(), "solve_dual: x0");
  if (!psi.contains(x0)) throw std::invalid_argument("solve_dual: x0 is outside the domain of psi");
  if (!(cfg.nu > 0.0)) throw std::invalid_argument("solve_dual: nu must be positive");
  double m = cfg.m.value_or(o.qsc_constant());
  if (!(m > 0.0) || !std::isfinite(m)) throw ParameterError("solve_dual: M must be positive");
  if (cfg.max_inner < 1) throw std::invalid_argument("solve_dual: max_inner must be >= 1");

  const auto start = std::chrono::steady_clock::now();
  const MetricOperator& b = o.metric();
  const detail::DualObjective obj{o, cfg.fixed_quadratic};
  std::vector<QuadraticTerm> fixed_terms;
  if (cfg.fixed_quadratic) {
    require_same_dimension(o.dimension(), cfg.fixed_quadratic->center.size(), "solve_dual: fixed quadratic");
    fixed_terms.push_back(*cfg.fixed_quadratic);
  }

  DualResult res;
  res.x = x0;
  res.x0 = x0;
  res.nu = cfg.nu;
  const Evaluation e0 = obj.smooth(x0, Order::kGradient);
  ++res.calls.gradients;
  res.value0 = e0.value;
  res.g0 = b.dual_norm(psi.least_subgradient(x0, e0.gradient));
  res.iterates.push_back(x0);
  res.status = SolveStatus::kGradTolReached;
  double g = res.g0;
  PrimalVector xk = x0;

  for (int k = 0; g > cfg.nu; ++k) {
    if (k >= cfg.max_outer) {
      res.status = SolveStatus::kMaxIters;
      break;
    }
    DualTraceRow row;
    PrimalVector x_next;
    DualVector s_last;
    for (;;) {
      row = DualTraceRow{};
      row.k = k;
      row.g = g;
      row.m = m;
      row.a = 1.0 / (2.0 * m * g);
      row.threshold = 2.0 * m * g * cfg.nu / static_cast<double>((k + 1) * (k + 1));
      row.inner_residuals.push_back(g);
      std::vector<QuadraticTerm> extras = fixed_terms;
      extras.push_back({m * g, xk});

      ModelPoint z = model_point(o, xk);
      ++res.calls.hessians;
      bool reached = false;
      for (int t = 0; t < cfg.max_inner; ++t) {
        StepResult step;
        try {
          step = newton_step(o, psi, z, 0.0, extras, cfg.step);
        } catch (const SingularSystem& e) {
          res.status = SolveStatus::kSingularSystem;
          res.message = e.what();
          break;
        } catch (const MaxInnerIterations& e) {
          res.status = SolveStatus::kInnerFailure;
          res.message = e.what();
          break;
        }
        ++res.calls.gradients;
        res.inexact_steps = res.inexact_steps || !step.exact;
        s_last = step.eval_plus.gradient - z.eval.gradient - z.eval.hessian * step.step;
        const double r = b.dual_norm(s_last);
        row.inner_residuals.push_back(r);
        row.inner_iterations = t + 1;
        row.inner_residual = r;
        const double prev = row.inner_residuals[row.inner_residuals.size() - 2];
        // Once deep inside the quadratic region the residual can only stall on round-off.
        const bool stalled = t >= 1 && r >= 0.5 * prev && prev <= 1e-6 * g;
        if (r <= row.threshold || stalled) {
          row.floor_exit = r > row.threshold;
          reached = true;
          x_next = step.x_plus;
          break;
        }
        z = model_point(o, step.x_plus);
        ++res.calls.hessians;
      }
      if (res.status == SolveStatus::kSingularSystem || res.status == SolveStatus::kInnerFailure) break;
      if (reached) break;
      if (res.m_doublings >= cfg.max_m_doublings) {
        res.status = SolveStatus::kQscParameterSuspect;
        res.message = "inner loop did not reach its threshold; M looks too small";
        break;
      }
      m *= 2.0;
      ++res.m_doublings;
    }
    if (res.status != SolveStatus::kGradTolReached) break;

    // g_{k+1} = ||s - 2 M g_k B (x_{k+1} - x_k)||_*, the norm of the selected subgradient of F.
    const DualVector aug = 2.0 * row.m * row.g * b.apply(x_next - xk);
    row.g_next = b.dual_norm(s_last - aug);
    const Evaluation e_next = obj.smooth(x_next, Order::kGradient);
    ++res.calls.gradients;
    row.value_next = e_next.value;
    row.s_mismatch = psi.is_zero() ? b.dual_norm(e_next.gradient + aug - s_last)
                                   : std::numeric_limits<double>::quiet_NaN();
    res.trace.push_back(row);
    xk = x_next;
    g = row.g_next;
    res.iterates.push_back(xk);
    res.x = xk;
  }
  res.m_final = m;
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

struct DualGuaranteeCheck {
  bool passed = true;
  double worst_ratio = 0.0;  // max over k of LHS_k / RHS
  double rhs = 0.0;
};

/// sum_{i<=k} a_i (F(x_i) - F*) + 1/2 sum_{i<=k} a_i^2 g_i^2 <= 1/2 (||x0 - x*|| + 2 nu)^2 for every k,
/// with slack 1e-6 * RHS.
inline DualGuaranteeCheck verify_dual_guarantee(const DualResult& r, const MetricOperator& b,
                                                const PrimalVector& x_star, double f_star) {
  DualGuaranteeCheck c;
  const double dist = b.primal_norm(r.x0 - x_star);
  c.rhs = 0.5 * (dist + 2.0 * r.nu) * (dist + 2.0 * r.nu);
  double lhs = 0.0;
  for (const DualTraceRow& row : r.trace) {
    lhs += row.a * (row.value_next - f_star) + 0.5 * row.a * row.a * row.g_next * row.g_next;
    const double ratio = c.rhs > 0.0 ? lhs / c.rhs : (lhs <= 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    c.worst_ratio = std::max(c.worst_ratio, ratio);
    if (lhs > c.rhs * (1.0 + 1e-6)) c.passed = false;
  }
  return c;
}

struct DualRateCheck {
  bool passed = true;
  bool envelope_passed = true;
  bool count_passed = true;
  double burn_in = 0.0;           // 2 M^2 (||x0 - x*|| + 2 nu)^2
  double fitted_log_decay = 0.0;  // least-squares slope of ln g_k over the trace
  double worst_envelope_margin = std::numeric_limits<double>::infinity();  // log-space, bound - actual
  double worst_count_margin = std::numeric_limits<double>::infinity();
};

/// Envelope g_k <= exp(2 M^2 (||x0 - x*|| + 2 nu)^2 - k/2) g_0, checked in log space, and
/// N_k <= k (1 + lnln(L)/ln 2) + slack k where L is the larger of (k+1)^2/(2 M nu) and
/// (k+1)^2/nu, clamped below at e.
inline DualRateCheck verify_dual_rate(const DualResult& r, const MetricOperator& b, const PrimalVector& x_star,
                                      double slack_per_step = 2.0) {
  DualRateCheck c;
  double m = 0.0;
  for (const DualTraceRow& row : r.trace) m = std::max(m, row.m);
  const double dist = b.primal_norm(r.x0 - x_star) + 2.0 * r.nu;
  c.burn_in = 2.0 * m * m * dist * dist;
  const double log_g0 = std::log(r.g0);
  int n_total = 0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int pts = 0;
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    const double k = static_cast<double>(i + 1);
    const double gk = r.trace[i].g_next;
    if (gk > 0.0) {
      const double margin = c.burn_in - 0.5 * k + log_g0 - std::log(gk);
      c.worst_envelope_margin = std::min(c.worst_envelope_margin, margin);
      if (margin < -1e-9) c.envelope_passed = false;
      sx += k;
      sy += std::log(gk);
      sxx += k * k;
      sxy += k * std::log(gk);
      ++pts;
    }
    n_total += r.trace[i].inner_iterations;
    const double arg = std::max({std::numbers::e, (k + 1) * (k + 1) / (2.0 * m * r.nu), (k + 1) * (k + 1) / r.nu});
    const double bound = k * (1.0 + std::log(std::log(arg)) / std::numbers::ln2) + slack_per_step * k;
    c.worst_count_margin = std::min(c.worst_count_margin, bound - n_total);
    if (n_total > bound) c.count_passed = false;
  }
  if (pts >= 2) c.fitted_log_decay = (pts * sxy - sx * sy) / (pts * sxx - sx * sx);
  c.passed = c.envelope_passed && c.count_passed;
  return c;
}

struct InnerQuadraticCheck {
  bool passed = true;
  int pairs = 0;
  double worst_ratio = 0.0;  // max of r_{t+1} / ((M phi(1/2) / mu) r_t^2 + 1e-10)
};

/// Pure-Newton inner residuals r_{t+1} <= (M phi(1/2)/mu) r_t^2 + 1e-10 with mu = 2 M g_k,
/// over the pairs whose r_t lies in the region r_t <= mu/(2M) = g_k.
inline InnerQuadraticCheck check_inner_quadratic(const DualResult& r) {
  InnerQuadraticCheck c;
  for (const DualTraceRow& row : r.trace) {
    const double mu = 2.0 * row.m * row.g;
    const double coef = row.m * phi(0.5) / mu;
    for (std::size_t t = 0; t + 1 < row.inner_residuals.size(); ++t) {
      const double rt = row.inner_residuals[t];
      if (rt > row.g) continue;
      const double bound = coef * rt * rt + 1e-10;
      const double ratio = row.inner_residuals[t + 1] / bound;
      c.worst_ratio = std::max(c.worst_ratio, ratio);
      ++c.pairs;
      if (ratio > 1.0) c.passed = false;
    }
  }
  return c;
}

}  // namespace qsc
