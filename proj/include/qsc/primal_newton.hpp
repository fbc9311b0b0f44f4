#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qsc/composite.hpp"
#include "qsc/phi.hpp"

namespace qsc {

enum class SolveStatus {
  kGradTolReached,
  kTargetGapReached,
  kMaxIters,
  kSingularSystem,
  kAdaptiveFailure,
  kInnerFailure,
  kQscParameterSuspect,
  kStalled,
};

inline std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kGradTolReached: return "GradTolReached";
    case SolveStatus::kTargetGapReached: return "TargetGapReached";
    case SolveStatus::kMaxIters: return "MaxIters";
    case SolveStatus::kSingularSystem: return "SingularSystem";
    case SolveStatus::kAdaptiveFailure: return "AdaptiveFailure";
    case SolveStatus::kInnerFailure: return "InnerFailure";
    case SolveStatus::kQscParameterSuspect: return "QscParameterSuspect";
    case SolveStatus::kStalled: return "Stalled";
  }
  return "Unknown";
}

inline bool succeeded(SolveStatus s) {
  return s == SolveStatus::kGradTolReached || s == SolveStatus::kTargetGapReached;
}

/// Oracle call counts of one solve.
struct CallCounts {
  long values = 0;
  long gradients = 0;
  long hessians = 0;
  CallCounts& operator+=(const CallCounts& o) {
    values += o.values;
    gradients += o.gradients;
    hessians += o.hessians;
    return *this;
  }
};

class AdaptiveFailure : public Error {
 public:
  using Error::Error;
};

struct PrimalConfig {
  enum class SigmaMode { kConstant, kAdaptive };
  SigmaMode mode = SigmaMode::kConstant;
  std::optional<double> sigma;  // constant mode; defaults to the oracle's M
  double sigma0 = 1.0;          // adaptive mode
  double sigma_min = 1e-12;
  int max_doublings = 60;

  double grad_tolerance = 1e-9;  // nu
  int max_iterations = 1000;
  std::optional<double> f_star;  // enables the relative-gap stop
  double target_relative_gap = 0.0;
  bool diagnostics = false;      // record lambda(x_k) and eta(x_k)
  int stall_iterations = 0;      // > 0: stop once the best g has not halved for this many steps
  StepOptions step;

  static PrimalConfig constant(std::optional<double> sigma = std::nullopt) {
    PrimalConfig c;
    c.sigma = sigma;
    return c;
  }
  static PrimalConfig adaptive(double sigma0 = 1.0, double sigma_min = 1e-12) {
    PrimalConfig c;
    c.mode = SigmaMode::kAdaptive;
    c.sigma0 = sigma0;
    c.sigma_min = sigma_min;
    return c;
  }
};

/// Row k describes x_k and the step taken from it. The last row has no step (NaN fields).
struct PrimalTraceRow {
  int k = 0;
  double value = 0.0;  // F(x_k)
  double g = 0.0;      // ||F'(x_k)||_*
  double sigma = std::numeric_limits<double>::quiet_NaN();
  double beta = std::numeric_limits<double>::quiet_NaN();
  double step_length = std::numeric_limits<double>::quiet_NaN();
  double progress = std::numeric_limits<double>::quiet_NaN();  // <F'(x_{k+1}), x_k - x_{k+1}>
  int retries = 0;
  int inner_iterations = 0;
  double local_step_slack = std::numeric_limits<double>::quiet_NaN();  // ||d|| g - ||d||_x^2
  double lambda = std::numeric_limits<double>::quiet_NaN();
  double eta = std::numeric_limits<double>::quiet_NaN();
};

struct PrimalResult {
  PrimalVector x;
  std::vector<PrimalTraceRow> trace;
  std::vector<PrimalVector> iterates;
  SolveStatus status = SolveStatus::kMaxIters;
  std::string message;
  CallCounts calls;
  int step_computations = 0;  // every newton_step, including rejected adaptive trials
  bool inexact_steps = false;
  double seconds = 0.0;

  int iterations() const { return trace.empty() ? 0 : trace.back().k; }
  double final_g() const { return trace.empty() ? std::numeric_limits<double>::quiet_NaN() : trace.back().g; }
  double final_value() const { return trace.empty() ? std::numeric_limits<double>::quiet_NaN() : trace.back().value; }
};

struct AdaptiveStep {
  double sigma = 0.0;
  StepResult step;
  int retries = 0;
};

/// Doubles sigma from sigma_start until <F'(x+), x - x+> >= ||F'(x+)||_*^2 / (2 sigma g).
inline AdaptiveStep adaptive_sigma_search(const SmoothOracle& o, const CompositeTerm& psi, const ModelPoint& at,
                                          double g, double sigma_start, int max_doublings = 60,
                                          const StepOptions& opts = {}) {
  if (!(g > 0.0)) throw std::invalid_argument("adaptive_sigma_search: g must be positive");
  if (!(sigma_start > 0.0)) throw std::invalid_argument("adaptive_sigma_search: sigma_start must be positive");
  AdaptiveStep out;
  double sigma = sigma_start;
  for (int r = 0; r <= max_doublings; ++r) {
    const double beta = sigma * g;
    StepResult step = newton_step(o, psi, at, beta, {}, opts);
    const double g_plus = o.metric().dual_norm(step.f_prime_plus);
    const double progress = -step.f_prime_plus.dot(step.step);
    if (progress >= g_plus * g_plus / (2.0 * beta)) {
      out.sigma = sigma;
      out.step = std::move(step);
      out.retries = r;
      return out;
    }
    sigma *= 2.0;
  }
  throw AdaptiveFailure("adaptive sigma search exceeded " + std::to_string(max_doublings) + " doublings");
}

/// eta(x) = ||F'(x)||_* / lambda(x), +inf when lambda(x) = 0.
inline double eta_measure(const Matrix& hessian, const MetricOperator& b, const DualVector& f_prime) {
  const double g = b.dual_norm(f_prime);
  if (g == 0.0) return 0.0;
  const double lam = min_generalized_eigenvalue(hessian, b);
  return lam > 0.0 ? g / lam : std::numeric_limits<double>::infinity();
}

inline double eta_measure(const SmoothOracle& o, const CompositeTerm& /*psi*/, const PrimalVector& x,
                          const DualVector& f_prime) {
  return eta_measure(o.hessian(x), o.metric(), f_prime);
}

/// Minimizes F = f + psi with the gradient-regularized Newton method.
inline PrimalResult solve_primal(const SmoothOracle& o, const CompositeTerm& psi, const PrimalVector& x0,
                                 const PrimalConfig& cfg = {}) {
  require_same_dimension(o.dimension(), x0.size(), "solve_primal: x0");
  if (!psi.contains(x0)) throw std::invalid_argument("solve_primal: x0 is outside the domain of psi");
  if (!(cfg.grad_tolerance > 0.0)) throw std::invalid_argument("solve_primal: grad_tolerance must be positive");
  const bool adaptive = cfg.mode == PrimalConfig::SigmaMode::kAdaptive;
  const double sigma_const = cfg.sigma.value_or(o.qsc_constant());
  if (!adaptive && !(sigma_const >= 0.0)) throw std::invalid_argument("solve_primal: sigma must be >= 0");
  if (adaptive && !(cfg.sigma0 > 0.0 && cfg.sigma_min >= 0.0)) {
    throw std::invalid_argument("solve_primal: need sigma0 > 0 and sigma_min >= 0");
  }
  if (!adaptive && sigma_const == 0.0 && !psi.is_zero()) {
    throw ParameterError("solve_primal: sigma = 0 is not allowed with a box term");
  }

  const auto start = std::chrono::steady_clock::now();
  const MetricOperator& b = o.metric();
  PrimalResult res;
  res.x = x0;
  ModelPoint at = model_point(o, x0);
  ++res.calls.hessians;
  DualVector f_prime = psi.least_subgradient(x0, at.eval.gradient);
  double sigma_next = cfg.sigma0;
  double best_g = std::numeric_limits<double>::infinity();
  int best_k = 0;

  for (int k = 0;; ++k) {
    PrimalTraceRow row;
    row.k = k;
    row.value = at.eval.value;
    row.g = b.dual_norm(f_prime);
    if (cfg.diagnostics) {
      try {
        row.lambda = min_generalized_eigenvalue(at.eval.hessian, b);
        row.eta = row.g == 0.0 ? 0.0 : (row.lambda > 0.0 ? row.g / row.lambda : std::numeric_limits<double>::infinity());
      } catch (const NotPositiveDefinite&) {
      }
    }
    res.iterates.push_back(at.x);

    const auto finish = [&](SolveStatus s, std::string msg = {}) {
      res.trace.push_back(row);
      res.status = s;
      res.message = std::move(msg);
    };
    if (row.g <= cfg.grad_tolerance) {
      finish(SolveStatus::kGradTolReached);
      break;
    }
    if (cfg.f_star && k > 0 &&
        row.value - *cfg.f_star <= cfg.target_relative_gap * (res.trace.front().value - *cfg.f_star)) {
      finish(SolveStatus::kTargetGapReached);
      break;
    }
    if (cfg.f_star && k == 0 && row.value - *cfg.f_star <= 0.0) {
      finish(SolveStatus::kTargetGapReached);
      break;
    }
    if (k >= cfg.max_iterations) {
      finish(SolveStatus::kMaxIters);
      break;
    }
    if (row.g < 0.5 * best_g) {
      best_g = row.g;
      best_k = k;
    }
    if (cfg.stall_iterations > 0 && k - best_k >= cfg.stall_iterations) {
      finish(SolveStatus::kStalled, "g stopped decreasing at " + std::to_string(best_g));
      break;
    }

    StepResult step;
    try {
      if (adaptive) {
        AdaptiveStep a = adaptive_sigma_search(o, psi, at, row.g, sigma_next, cfg.max_doublings, cfg.step);
        row.sigma = a.sigma;
        row.retries = a.retries;
        step = std::move(a.step);
        sigma_next = std::max(a.sigma / 2.0, cfg.sigma_min);
        if (sigma_next <= 0.0) sigma_next = cfg.sigma0;
      } else {
        row.sigma = sigma_const;
        step = newton_step(o, psi, at, sigma_const * row.g, {}, cfg.step);
      }
    } catch (const SingularSystem& e) {
      finish(SolveStatus::kSingularSystem, e.what());
      break;
    } catch (const AdaptiveFailure& e) {
      res.step_computations += cfg.max_doublings + 1;
      finish(SolveStatus::kAdaptiveFailure, e.what());
      break;
    } catch (const MaxInnerIterations& e) {
      finish(SolveStatus::kInnerFailure, e.what());
      break;
    }
    res.step_computations += row.retries + 1;
    res.calls.gradients += row.retries + 1;
    res.inexact_steps = res.inexact_steps || !step.exact;
    row.beta = step.beta;
    row.step_length = step.step_length;
    row.progress = -step.f_prime_plus.dot(step.step);
    row.inner_iterations = step.inner_iterations;
    row.local_step_slack = step.step_length * row.g - std::max(0.0, step.step.dot(at.eval.hessian * step.step));
    res.trace.push_back(row);

    f_prime = step.f_prime_plus;
    at = model_point(o, step.x_plus);
    ++res.calls.hessians;
    res.x = at.x;
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

struct StepInvariantReport {
  int steps = 0;
  int progress_failures = 0;   // <F'(x+), x - x+> >= g+^2/(2 beta) - 1e-8
  int length_failures = 0;     // ||x+ - x|| <= g/beta + 1e-8
  int local_failures = 0;      // ||d||_x^2 <= ||d|| g + 1e-8
  int monotone_failures = 0;   // F(x+) <= F(x) + 1e-10
  double worst_progress_slack = std::numeric_limits<double>::infinity();
  double worst_length_slack = std::numeric_limits<double>::infinity();
  bool passed() const {
    return progress_failures == 0 && length_failures == 0 && local_failures == 0 && monotone_failures == 0;
  }
};

/// Per-step checks that only need the trace.
inline StepInvariantReport check_step_invariants(const std::vector<PrimalTraceRow>& trace) {
  StepInvariantReport rep;
  for (std::size_t i = 0; i + 1 < trace.size(); ++i) {
    const PrimalTraceRow& r = trace[i];
    const PrimalTraceRow& next = trace[i + 1];
    ++rep.steps;
    const double need = r.beta > 0.0 ? next.g * next.g / (2.0 * r.beta) : 0.0;
    const double pslack = r.progress - need + 1e-8;
    rep.worst_progress_slack = std::min(rep.worst_progress_slack, pslack);
    if (r.beta > 0.0 && pslack < 0.0) ++rep.progress_failures;
    if (r.beta > 0.0) {
      const double lslack = r.g / r.beta + 1e-8 - r.step_length;
      rep.worst_length_slack = std::min(rep.worst_length_slack, lslack);
      if (lslack < 0.0) ++rep.length_failures;
    }
    if (r.local_step_slack + 1e-8 < 0.0) ++rep.local_failures;
    if (next.value > r.value + 1e-10) ++rep.monotone_failures;
  }
  return rep;
}

struct LocalQuadraticCheck {
  bool passed = true;
  bool entered = false;  // false: the trace never reached eta <= 1/(18M)
  int entry_k = -1;
  int pairs = 0;
  double worst_ratio = 0.0;  // max of eta_{k+1} / (e (rho M + sigma_k) eta_k^2 + 1e-12)
};

/// eta(x_{k+1}) <= e (rho M + sigma_k) eta(x_k)^2 + 1e-12 for every step after the trace
/// enters eta <= 1/(18M). Steps that start with eta > 1/M are outside the region where
/// the inequality applies and are skipped.
inline LocalQuadraticCheck check_local_quadratic(const std::vector<PrimalTraceRow>& trace, double m) {
  LocalQuadraticCheck out;
  const double entry = m > 0.0 ? 1.0 / (18.0 * m) : std::numeric_limits<double>::infinity();
  const double region = m > 0.0 ? 1.0 / m : std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < trace.size(); ++i) {
    const PrimalTraceRow& r = trace[i];
    if (!out.entered && std::isfinite(r.eta) && r.eta <= entry) {
      out.entered = true;
      out.entry_k = r.k;
    }
    if (!out.entered || !(r.eta <= region) || std::isnan(trace[i + 1].eta)) continue;
    const double bound = std::exp(1.0) * (kRho * m + r.sigma) * r.eta * r.eta + 1e-12;
    const double ratio = trace[i + 1].eta / bound;
    out.worst_ratio = std::max(out.worst_ratio, ratio);
    ++out.pairs;
    if (ratio > 1.0) out.passed = false;
  }
  return out;
}

}  // namespace qsc
