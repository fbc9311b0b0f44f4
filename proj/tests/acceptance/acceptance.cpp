// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "qsc/harness/rate_fit.hpp"
#include "qsc/qsc.hpp"

namespace {

using namespace qsc;

struct Named {
  std::string name;
  Problem problem;
};

Problem synthetic(const std::string& kind, Index n, Index m, std::uint64_t seed, double mu = 1.0) {
  SyntheticSpec s;
  s.kind = kind;
  s.n = n;
  s.m = m;
  s.seed = seed;
  s.mu = mu;
  return generate_synthetic(s);
}

std::vector<Named> zoo() {
  return {{"quadratic", synthetic("quadratic", 10, 10, 1)},
          {"softmax(mu=1)", synthetic("softmax", 10, 50, 1, 1.0)},
          {"softmax(mu=0.1)", synthetic("softmax", 10, 50, 1, 0.1)},
          {"logistic", synthetic("logistic", 10, 100, 1)},
          {"exponential", synthetic("exponential", 10, 100, 1)},
          {"matrix_scaling", synthetic("matrix_scaling", 10, 10, 1)},
          {"matrix_balancing", synthetic("matrix_balancing", 10, 10, 1)}};
}

Problem logistic_20_200() { return synthetic("logistic", 20, 200, 1); }

struct Reference {
  Vector x;
  double value;
};

Reference reference(const SmoothOracle& o, const CompositeTerm& psi, const Vector& x0) {
  PrimalConfig cfg = PrimalConfig::adaptive();
  cfg.grad_tolerance = 1e-12;
  cfg.max_iterations = 10000;
  const PrimalResult r = solve_primal(o, psi, x0, cfg);
  return {r.x, r.final_value()};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n    %s\n", id, ok ? "PASS" : "FAIL", what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

void criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;
  for (const Named& z : zoo()) {
    QscCheckOptions o;
    o.samples = 10000;
    o.seed = 11;
    const QscCheckReport r = check_qsc(z.problem.oracle, o);
    ok = ok && r.passed;
    detail += z.name + fmt(" %.2e; ", r.max_violation);
  }
  const double t = seconds_since(t0);
  ok = ok && t <= 60.0;
  report(1, ok, "third-derivative bound on every zoo instance, 1e4 samples each",
         "max violation: " + detail + fmt("time %.1fs", t));
}

void criterion2() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;
  for (const Named& z : zoo()) {
    const LemmaSuiteReport r = run_lemma_suite(z.problem.oracle, 21, 1000);
    ok = ok && r.passed();
    detail += z.name + fmt(" %g/%g/%g; ", r.stability_failures, r.gradient_failures, r.function_failures);
  }
  const double t = seconds_since(t0);
  ok = ok && t <= 60.0;
  report(2, ok, "Hessian stability, gradient bound and function bounds on 1e3 pairs per instance",
         "failures stability/gradient/function: " + detail + fmt("time %.1fs", t));
}

void criterion3() {
  bool ok = true;
  std::string detail;
  for (const Named& z : zoo()) {
    PrimalConfig cfg = PrimalConfig::constant();
    cfg.grad_tolerance = 1e-9;
    const Vector x0 = Vector::Constant(z.problem.oracle.dimension(), 0.5);
    const PrimalResult r = solve_primal(z.problem.oracle, CompositeTerm::zero(), x0, cfg);
    const StepInvariantReport inv = check_step_invariants(r.trace);
    const bool cell = succeeded(r.status) && inv.passed();
    ok = ok && cell;
    detail += z.name + fmt(" %g steps", inv.steps) + (cell ? "; " : " FAILED; ");
  }
  report(3, ok, "every primal step (sigma = M) meets the progress and length bounds, F monotone", detail);
}

void criterion4() {
  const auto t0 = std::chrono::steady_clock::now();
  const Problem p = logistic_20_200();
  const Vector x0 = Vector::Zero(20);
  const Reference ref = reference(p.oracle, CompositeTerm::zero(), x0);
  PrimalConfig cfg = PrimalConfig::constant(1.0);
  cfg.grad_tolerance = 1e-12;
  const PrimalResult r = solve_primal(p.oracle, CompositeTerm::zero(), x0, cfg);
  const double gap0 = r.trace.front().value - ref.value;
  int reached = -1;
  std::vector<double> gaps;
  double d_hat = 0.0;
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    const double gap = r.trace[i].value - ref.value;
    gaps.push_back(gap);
    d_hat = std::max(d_hat, p.oracle.metric().primal_norm(r.iterates[i] - ref.x));
    if (reached < 0 && gap <= 1e-10 * gap0) reached = static_cast<int>(i);
  }
  bool ok = reached >= 0;
  std::string detail;
  try {
    const LinearRateFit fit = fit_linear_rate(gaps);
    const double limit = 8.0 * 1.0 * d_hat;
    ok = ok && fit.implied_factor <= limit;
    detail = fmt("eps = 1e-10 at k = %g; -1/slope = %.3f over %g points, 8 M D_hat = %.3f", reached,
                 fit.implied_factor, static_cast<double>(fit.window_end), limit);
  } catch (const InsufficientData& e) {
    ok = false;
    detail = e.what();
  }
  const double t = seconds_since(t0);
  ok = ok && t <= 10.0;
  report(4, ok, "global linear phase on logistic(n=20, m=200, seed=1)", detail + fmt("; time %.2fs", t));
}

void criterion5() {
  const Problem p = add_strong_convexity(logistic_20_200(), 0.1);
  const Vector x0 = Vector::Zero(20);
  const Reference ref = reference(p.oracle, CompositeTerm::zero(), x0);
  PrimalConfig cfg = PrimalConfig::constant();
  cfg.grad_tolerance = 1e-12;
  cfg.diagnostics = true;
  const PrimalResult r = solve_primal(p.oracle, CompositeTerm::zero(), x0, cfg);
  // Gaps below the round-off floor of F carry no information.
  const double floor = 1e-14 * std::max(1.0, std::abs(ref.value));
  std::vector<double> gaps;
  for (const PrimalTraceRow& row : r.trace) {
    const double gap = row.value - ref.value;
    if (gap > floor) gaps.push_back(gap);
  }
  bool ok = succeeded(r.status) && gaps.size() >= 3;
  double order = 0.0;
  std::string tail;
  if (ok) {
    order = fit_local_order(gaps, 3);
    for (std::size_t i = gaps.size() - 3; i < gaps.size(); ++i) tail += fmt("%.3e ", gaps[i]);
  }
  const LocalQuadraticCheck lq = check_local_quadratic(r.trace, p.oracle.qsc_constant());
  ok = ok && order >= 1.9 && lq.entered && lq.passed;
  report(5, ok, "local quadratic burst on 0.1-regularized logistic",
         "last gaps " + tail + fmt("-> exponent %.3f; eta check entered at k = %g, %g pairs, worst ratio %.3e",
                                   order, lq.entry_k, lq.pairs, lq.worst_ratio));
}

void criterion6() {
  const Problem p = logistic_20_200();
  PrimalConfig cfg = PrimalConfig::adaptive(1e-6);
  cfg.grad_tolerance = 1e-9;
  const PrimalResult r = solve_primal(p.oracle, CompositeTerm::zero(), Vector::Zero(20), cfg);
  double max_sigma = 0.0;
  for (std::size_t i = 0; i + 1 < r.trace.size(); ++i) max_sigma = std::max(max_sigma, r.trace[i].sigma);
  const bool ok = succeeded(r.status) && max_sigma <= 2.0 && r.step_computations <= 2 * r.iterations() + 25;
  report(6, ok, "adaptive sigma from 1e-6 on logistic",
         fmt("max accepted sigma %.4f (<= 2); step computations %g <= 2 * %g + 25", max_sigma, r.step_computations,
             r.iterations()));
}

void criterion7() {
  const Problem p = logistic_20_200();
  const Vector x0 = Vector::Zero(20);
  const Reference ref = reference(p.oracle, CompositeTerm::zero(), x0);
  DualConfig cfg;
  cfg.nu = 1e-8;
  const DualResult r = solve_dual(p.oracle, CompositeTerm::zero(), x0, cfg);
  const DualGuaranteeCheck g = verify_dual_guarantee(r, p.oracle.metric(), ref.x, ref.value);
  const DualRateCheck rate = verify_dual_rate(r, p.oracle.metric(), ref.x, 2.0);
  const InnerQuadraticCheck iq = check_inner_quadratic(r);
  const bool ok = succeeded(r.status) && g.passed && rate.envelope_passed && rate.count_passed && iq.passed &&
                  iq.pairs > 0;
  report(7, ok, "Dual Newton guarantee, rate envelope, oracle-call count and inner quadratic decrease",
         fmt("%g outer / %g inner steps; guarantee ratio %.3f; envelope margin %.3f", r.outer_iterations(),
             r.inner_total(), g.worst_ratio, rate.worst_envelope_margin) +
             fmt("; count margin %.1f; inner pairs %g, worst ratio %.3e", rate.worst_count_margin, iq.pairs,
                 iq.worst_ratio));
}

struct SweepPoint {
  double m;
  int primal;
  int accelerated;
};

void criterion8() {
  const auto t0 = std::chrono::steady_clock::now();
  // Part one: the potential, rate and boundedness checks on the logistic instance.
  const Problem p = logistic_20_200();
  const Vector x0 = Vector::Zero(20);
  const Reference ref = reference(p.oracle, CompositeTerm::zero(), x0);
  AccelConfig cfg;
  cfg.r = p.oracle.metric().primal_norm(x0 - ref.x);
  cfg.f_star = ref.value;
  cfg.c = 1.0;
  cfg.target_relative_gap = 1e-6;
  const AccelResult r = solve_accelerated(p.oracle, CompositeTerm::zero(), x0, cfg);
  const AccelPotentialCheck pot = verify_accel_potential(r, p.oracle.metric(), ref.x, ref.value);
  const AccelRateCheck rate = verify_accel_rate(r, p.oracle.metric(), ref.x, ref.value);
  bool ok = succeeded(r.status) && pot.parameter_passed && pot.passed && rate.passed && rate.bounded;
  std::string detail = fmt("logistic: %g iterations, potential ratio %.3f, rate ratio %.3f, distance ratio %.3f",
                           r.iterations(), pot.worst_parameter_ratio, rate.worst_ratio, rate.worst_distance_ratio);

  // Part two: symmetric soft-max, minimizer at the origin, start at metric distance 20.
  std::vector<SweepPoint> sweep;
  for (double mu : {1.0, 0.1, 0.01}) {
    SyntheticSpec s;
    s.kind = "softmax";
    s.n = 10;
    s.m = 40;
    s.seed = 1;
    s.mu = mu;
    s.symmetric = true;
    const Problem sm = generate_synthetic(s);
    const MetricOperator& b = sm.oracle.metric();
    Vector start = Vector::Ones(10);
    start *= 20.0 / b.primal_norm(start);
    const double f_star = sm.oracle.value(Vector::Zero(10));
    PrimalConfig pc = PrimalConfig::constant();
    pc.grad_tolerance = 1e-300;
    pc.f_star = f_star;
    pc.target_relative_gap = 1e-6;
    pc.max_iterations = 100000;
    const PrimalResult pr = solve_primal(sm.oracle, CompositeTerm::zero(), start, pc);
    AccelConfig ac;
    ac.r = b.primal_norm(start);
    ac.f_star = f_star;
    ac.target_relative_gap = 1e-6;
    ac.max_outer = 100000;
    const AccelResult ar = solve_accelerated(sm.oracle, CompositeTerm::zero(), start, ac);
    ok = ok && pr.status == SolveStatus::kTargetGapReached && ar.status == SolveStatus::kTargetGapReached;
    sweep.push_back({sm.oracle.qsc_constant(), pr.iterations(), ar.iterations()});
  }
  std::vector<double> lm, lp, la;
  for (const SweepPoint& s : sweep) {
    lm.push_back(std::log(s.m));
    lp.push_back(std::log(static_cast<double>(s.primal)));
    la.push_back(std::log(static_cast<double>(s.accelerated)));
  }
  const double primal_slope = fit_line(lm, lp).slope;
  const double accel_slope = fit_line(lm, la).slope;
  ok = ok && std::abs(primal_slope - 1.0) <= 0.25 && std::abs(accel_slope - 2.0 / 3.0) <= 0.25;
  const double t = seconds_since(t0);
  ok = ok && t <= 300.0;
  detail += fmt("\n    soft-max sweep M = 2, 20, 200: primal %g/%g/%g", sweep[0].primal, sweep[1].primal,
                sweep[2].primal) +
            fmt(" iterations, accelerated %g/%g/%g", sweep[0].accelerated, sweep[1].accelerated,
                sweep[2].accelerated) +
            fmt("; slopes primal %.3f (1 +- 0.25), accelerated %.3f (2/3 +- 0.25); time %.1fs", primal_slope,
                accel_slope, t);
  report(8, ok, "accelerated potential, rate and boundedness; iteration growth against M", detail);
}

// Minimizer of the step model over the box by enumerating every face: each coordinate sits at
// its lower bound, its upper bound or is free. The best feasible face minimizer wins.
PrimalVector enumerate_faces(const ModelPoint& at, const MetricOperator& b, double beta, const Vector& lo,
                             const Vector& hi) {
  const Index n = at.x.size();
  const Matrix q = at.eval.hessian + beta * b.matrix();
  const auto model = [&](const PrimalVector& y) {
    const PrimalVector d = y - at.x;
    return at.eval.gradient.dot(d) + 0.5 * d.dot(q * d);
  };
  int faces = 1;
  for (Index i = 0; i < n; ++i) faces *= 3;
  PrimalVector best;
  double best_value = std::numeric_limits<double>::infinity();
  for (int code = 0; code < faces; ++code) {
    std::vector<int> state(static_cast<std::size_t>(n));
    std::vector<Index> free;
    PrimalVector y(n);
    for (Index i = 0, c = code; i < n; ++i, c /= 3) {
      state[i] = static_cast<int>(c % 3);
      if (state[i] == 0) y[i] = lo[i];
      if (state[i] == 1) y[i] = hi[i];
      if (state[i] == 2) free.push_back(i);
    }
    if (!free.empty()) {
      const Index k = static_cast<Index>(free.size());
      Matrix qff(k, k);
      Vector rhs(k);
      for (Index a = 0; a < k; ++a) {
        // Stationarity in the free coordinates with the fixed ones held.
        double r = -at.eval.gradient[free[a]];
        for (Index j = 0; j < n; ++j)
          if (state[j] != 2) r -= q(free[a], j) * (y[j] - at.x[j]);
        rhs[a] = r + (q.row(free[a])(free).dot(at.x(free)));
        for (Index c = 0; c < k; ++c) qff(a, c) = q(free[a], free[c]);
      }
      const Vector yf = qff.ldlt().solve(rhs);
      for (Index a = 0; a < k; ++a) y[free[a]] = yf[a];
    }
    bool feasible = true;
    for (Index i = 0; i < n; ++i) feasible = feasible && y[i] >= lo[i] - 1e-15 && y[i] <= hi[i] + 1e-15;
    if (feasible && model(y) < best_value) {
      best_value = model(y);
      best = y;
    }
  }
  return best;
}

void criterion9() {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  int cases = 0;
  for (Index n = 1; n <= 3; ++n) {
    const std::vector<Problem> problems = {synthetic("logistic", n, 10 * n, 3 + n), synthetic("softmax", n, 6 * n, 5 + n),
                                           synthetic("exponential", n, 10 * n, 7 + n),
                                           synthetic("quadratic", n, n, 11 + n)};
    for (const Problem& p : problems) {
      for (int trial = 0; trial < 5; ++trial) {
        Vector lo(n), hi(n), x(n);
        for (Index i = 0; i < n; ++i) {
          lo[i] = -0.5 + 0.3 * u(rng);
          hi[i] = lo[i] + 0.05 + 0.5 * (u(rng) + 1.0);
          x[i] = 2.0 * u(rng);
        }
        const CompositeTerm box = CompositeTerm::box(lo, hi);
        x = box.project(x);
        const ModelPoint at = model_point(p.oracle, x);
        const double beta = 0.05 + (u(rng) + 1.0);
        const StepResult s = newton_step(p.oracle, box, at, beta);
        const PrimalVector ref = enumerate_faces(at, p.oracle.metric(), beta, lo, hi);
        worst = std::max(worst, p.oracle.metric().primal_norm(s.x_plus - ref));
        ++cases;
      }
    }
  }
  report(9, worst <= 1e-8, "box-constrained Newton step against face enumeration for n <= 3",
         fmt("%g cases, worst distance %.2e (<= 1e-8)", cases, worst));
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria = {criterion1, criterion2, criterion3, criterion4, criterion5,
                                                       criterion6, criterion7, criterion8, criterion9};
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    try {
      criteria[i]();
    } catch (const std::exception& e) {
      report(static_cast<int>(i + 1), false, "raised an exception", e.what());
    }
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
