#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qsc/accelerated_newton.hpp"
#include "qsc/checks.hpp"
#include "qsc/harness/config.hpp"
#include "qsc/harness/rate_fit.hpp"
#include "qsc/harness/reference.hpp"
#include "qsc/harness/trace_io.hpp"

namespace qsc {

/// One named verification result. status is "pass", "fail" or "warn" (advisory only).
struct CheckResult {
  std::string name;
  std::string status;
  double margin = 0.0;  // positive means room to spare
  std::string detail;
};

inline Json to_json(const CheckResult& c) {
  Json j{{"name", c.name}, {"status", c.status}, {"detail", c.detail}};
  j["margin"] = std::isfinite(c.margin) ? Json(c.margin) : Json(nullptr);
  return j;
}

inline CheckResult make_check(std::string name, bool ok, double margin, std::string detail = {}) {
  return CheckResult{std::move(name), ok ? "pass" : "fail", margin, std::move(detail)};
}

inline bool all_passed(const std::vector<CheckResult>& checks) {
  return std::none_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.status == "fail"; });
}

struct RunOptions {
  std::optional<std::uint64_t> seed;  // overrides the generator and verification seeds
  bool strict = false;
  std::optional<std::filesystem::path> out_dir;
  bool write_files = true;
  std::optional<std::filesystem::path> cache_dir;
};

inline constexpr const char* kDiameterCaveat =
    "D_hat is the largest observed distance from an iterate to the reference minimizer. "
    "It is a lower estimate of the sublevel-set diameter D, so rate checks against it are advisory.";

struct SolveRun {
  Json report;
  std::string trace_csv;
  std::vector<CheckResult> checks;
  bool solver_ok = false;
  int iterations = 0;
  int inner_steps = 0;
  CallCounts calls;
  double final_g = std::numeric_limits<double>::quiet_NaN();
  double final_gap = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;

  bool checks_ok() const { return all_passed(checks); }
  int exit_code() const { return solver_ok && checks_ok() ? 0 : 2; }
};

inline void apply_options(RunConfig& cfg, const RunOptions& opts) {
  if (opts.seed) {
    cfg.problem.synthetic.seed = *opts.seed;
    if (cfg.problem.canonical.contains("generator")) cfg.problem.canonical["generator"]["seed"] = *opts.seed;
    cfg.verify.seed = *opts.seed;
  }
  if (opts.strict) cfg.solver.strict = true;
  if (opts.out_dir) cfg.out_dir = opts.out_dir->string();
}

inline Json config_echo(const RunConfig& cfg) {
  Json x0;
  if (cfg.x0.mode == "zero") x0 = "zero";
  else if (cfg.x0.mode == "point") x0 = cfg.x0.point;
  else x0 = {{"radius", cfg.x0.radius}};
  return {{"version", cfg.version},
          {"name", cfg.name},
          {"problem", cfg.problem.canonical},
          {"solver", cfg.solver.canonical},
          {"x0", x0},
          {"verify",
           {{"enabled", cfg.verify.enabled},
            {"samples", cfg.verify.samples},
            {"pairs", cfg.verify.pairs},
            {"seed", cfg.verify.seed},
            {"x_scale", cfg.verify.x_scale}}}};
}

inline Json calls_json(const CallCounts& c) {
  return {{"values", c.values}, {"gradients", c.gradients}, {"hessians", c.hessians}};
}

inline Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

namespace detail {

inline std::vector<CheckResult> primal_checks(const PrimalResult& r, const Instance& inst,
                                              const std::optional<Reference>& ref, Json& extra) {
  std::vector<CheckResult> out;
  const StepInvariantReport inv = check_step_invariants(r.trace);
  out.push_back(make_check("step_invariants", inv.passed(), std::min(inv.worst_progress_slack, inv.worst_length_slack),
                           std::to_string(inv.steps) + " steps; failures progress/length/local/monotone = " +
                               std::to_string(inv.progress_failures) + "/" + std::to_string(inv.length_failures) +
                               "/" + std::to_string(inv.local_failures) + "/" +
                               std::to_string(inv.monotone_failures)));
  const double m = inst.problem.oracle.qsc_constant();
  const LocalQuadraticCheck lq = check_local_quadratic(r.trace, m);
  if (!lq.entered) {
    out.push_back({"local_quadratic", "warn", std::numeric_limits<double>::quiet_NaN(),
                   "trace never entered eta <= 1/(18M)"});
  } else {
    out.push_back(make_check("local_quadratic", lq.passed, 1.0 - lq.worst_ratio,
                             std::to_string(lq.pairs) + " pairs from k = " + std::to_string(lq.entry_k)));
  }
  if (ref) {
    const MetricOperator& b = inst.problem.oracle.metric();
    double d_hat = 0.0;
    for (const PrimalVector& x : r.iterates) d_hat = std::max(d_hat, b.primal_norm(x - ref->x));
    extra["d_hat"] = d_hat;
    extra["d_hat_caveat"] = kDiameterCaveat;
    std::vector<double> gaps;
    for (const PrimalTraceRow& row : r.trace) gaps.push_back(row.value - ref->value);
    try {
      const LinearRateFit fit = fit_linear_rate(gaps);
      const double limit = 8.0 * m * d_hat;
      extra["rate_fit"] = {{"slope", fit.slope},
                           {"r_squared", fit.r_squared},
                           {"implied_factor", finite_or_null(fit.implied_factor)},
                           {"window", {fit.window_begin, fit.window_end}},
                           {"limit_8MD", limit}};
      out.push_back({"linear_rate", fit.implied_factor <= limit ? "pass" : "warn", limit - fit.implied_factor,
                     "-1/slope against 8 M D_hat (advisory)"});
    } catch (const InsufficientData& e) {
      out.push_back({"linear_rate", "warn", std::numeric_limits<double>::quiet_NaN(), e.what()});
    }
  }
  return out;
}

inline std::vector<CheckResult> dual_checks(const DualResult& r, const Instance& inst,
                                            const std::optional<Reference>& ref) {
  std::vector<CheckResult> out;
  const MetricOperator& b = inst.problem.oracle.metric();
  if (ref) {
    const DualGuaranteeCheck g = verify_dual_guarantee(r, b, ref->x, ref->value);
    out.push_back(make_check("dual_guarantee", g.passed, 1.0 - g.worst_ratio, "worst LHS/RHS"));
    const DualRateCheck rate = verify_dual_rate(r, b, ref->x);
    out.push_back(make_check("dual_rate_envelope", rate.envelope_passed, rate.worst_envelope_margin,
                             "burn-in exponent " + std::to_string(rate.burn_in)));
    out.push_back(make_check("dual_inner_count", rate.count_passed, rate.worst_count_margin));
  }
  const InnerQuadraticCheck iq = check_inner_quadratic(r);
  out.push_back(make_check("inner_quadratic", iq.passed, 1.0 - iq.worst_ratio, std::to_string(iq.pairs) + " pairs"));
  if (inst.psi.is_zero()) {
    double worst = 0.0;
    for (const DualTraceRow& row : r.trace) worst = std::max(worst, row.s_mismatch);
    const double tol = 1e-9 * (1.0 + r.g0);
    out.push_back(make_check("subgradient_agreement", worst <= tol, tol - worst));
  }
  return out;
}

inline std::vector<CheckResult> accel_checks(const AccelResult& r, const Instance& inst, const Reference& ref) {
  std::vector<CheckResult> out;
  const MetricOperator& b = inst.problem.oracle.metric();
  const AccelPotentialCheck pot = verify_accel_potential(r, b, ref.x, ref.value);
  out.push_back(make_check("accel_potential", pot.passed && pot.parameter_passed,
                           1.0 - std::max(pot.worst_ratio, pot.worst_parameter_ratio), "against (5+c)^2 R^2 / 2"));
  const AccelRateCheck rate = verify_accel_rate(r, b, ref.x, ref.value);
  out.push_back(make_check("accel_rate", rate.passed, 1.0 - rate.worst_ratio));
  out.push_back(make_check("accel_bounded", rate.bounded, 1.0 - rate.worst_distance_ratio, "within (5+c) R"));
  double worst_identity = 0.0, worst_inner = 0.0, worst_direct = 0.0;
  for (std::size_t i = 1; i < r.trace.size(); ++i) {
    const AccelTraceRow& row = r.trace[i];
    const double a_k = r.a0 * std::pow(1.0 - r.gamma, -static_cast<double>(row.k));
    worst_identity = std::max(worst_identity, std::abs(row.big_a - a_k) / a_k);
    worst_inner = std::max(worst_inner, row.inner_g / row.nu);
    if (!std::isnan(row.inner_g_direct)) worst_direct = std::max(worst_direct, std::abs(row.inner_g_direct - row.inner_g));
  }
  out.push_back(make_check("a_sequence", worst_identity <= 1e-12, 1e-12 - worst_identity));
  out.push_back(make_check("inner_tolerance", worst_inner <= 1.0 && worst_direct <= 1e-8, 1.0 - worst_inner,
                           "recomputed inner residual differs by at most " + std::to_string(worst_direct)));
  return out;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  out << text;
}

}  // namespace detail

/// Builds the instance, computes the reference when needed, runs the solver and its checks.
/// ConfigError and ParameterError propagate to the caller.
inline SolveRun run_solve(RunConfig cfg, const RunOptions& opts = {}) {
  apply_options(cfg, opts);
  const auto start = std::chrono::steady_clock::now();
  const Instance inst = build_instance(cfg.problem, cfg.base_dir);
  const PrimalVector x0 = build_x0(cfg.x0, inst);
  const SmoothOracle& o = inst.problem.oracle;
  const SolverSpec& s = cfg.solver;

  SolveRun run;
  Json& rep = run.report;
  rep["config"] = config_echo(cfg);
  rep["instance"] = {{"kind", inst.problem.kind},
                     {"dimension", o.dimension()},
                     {"qsc_constant", o.qsc_constant()},
                     {"metric_ridge", inst.problem.metric_ridge},
                     {"composite", inst.psi.describe()}};

  const bool needs_ref = s.name == "accelerated" || s.target_relative_gap > 0.0 || cfg.verify.enabled;
  std::optional<Reference> ref;
  if (needs_ref) {
    try {
      ref = cached_reference(cfg.problem, inst, x0, {}, opts.cache_dir);
      rep["reference"] = {{"value", ref->value}, {"g", ref->g},         {"iterations", ref->iterations},
                          {"known", ref->known}, {"cache_hit", ref->from_cache}, {"key", ref->key}};
    } catch (const ReferenceNotConverged& e) {
      rep["reference"] = {{"error", e.what()}, {"last_g", e.last_g()}};
      if (s.name == "accelerated" || s.target_relative_gap > 0.0) {
        run.solver_ok = false;
        rep["status"] = "ReferenceNotConverged";
        rep["message"] = e.what();
        rep["checks"] = Json::array();
        return run;
      }
    }
  }

  std::ostringstream trace;
  Json extra = Json::object();
  SolveStatus status = SolveStatus::kMaxIters;
  std::string message;
  PrimalVector x_final;
  if (s.name == "primal" || s.name == "pure_newton_local") {
    PrimalConfig pc = s.sigma_mode == "adaptive" ? PrimalConfig::adaptive(s.sigma0, s.sigma_min)
                                                 : PrimalConfig::constant(s.sigma);
    if (s.name == "pure_newton_local") pc = PrimalConfig::constant(0.0);
    pc.grad_tolerance = s.tolerance;
    pc.max_iterations = s.max_iterations;
    pc.diagnostics = s.diagnostics || cfg.verify.enabled;
    if (s.target_relative_gap > 0.0) {
      pc.f_star = ref->value;
      pc.target_relative_gap = s.target_relative_gap;
    }
    const PrimalResult r = solve_primal(o, inst.psi, x0, pc);
    write_primal_trace(trace, r.trace);
    status = r.status;
    message = r.message;
    x_final = r.x;
    run.iterations = r.iterations();
    run.inner_steps = r.step_computations;
    run.calls = r.calls;
    run.final_g = r.final_g();
    if (ref) run.final_gap = r.final_value() - ref->value;
    extra["step_computations"] = r.step_computations;
    extra["inexact_steps"] = r.inexact_steps;
    if (cfg.verify.enabled) run.checks = detail::primal_checks(r, inst, ref, extra);
  } else if (s.name == "dual") {
    DualConfig dc;
    dc.m = s.sigma;  // an explicit sigma doubles as the M estimate
    dc.nu = s.tolerance;
    dc.max_outer = s.max_iterations;
    dc.max_inner = s.max_inner;
    const DualResult r = solve_dual(o, inst.psi, x0, dc);
    write_dual_trace(trace, r.trace);
    status = r.status;
    message = r.message;
    x_final = r.x;
    run.iterations = r.outer_iterations();
    run.inner_steps = r.inner_total();
    run.calls = r.calls;
    run.final_g = r.final_g();
    if (ref) run.final_gap = r.final_value() - ref->value;
    extra["m_final"] = r.m_final;
    extra["m_doublings"] = r.m_doublings;
    if (cfg.verify.enabled) run.checks = detail::dual_checks(r, inst, ref);
  } else {
    const MetricOperator& b = o.metric();
    AccelConfig ac;
    const double dist = b.primal_norm(x0 - ref->x);
    ac.r = s.r.value_or(dist > 0.0 ? dist : 1.0);
    ac.c = s.c;
    ac.gamma = s.gamma;
    ac.a0 = s.a0;
    ac.f_star = ref->value;
    ac.m = s.sigma;
    ac.target_relative_gap = s.target_relative_gap > 0.0 ? s.target_relative_gap : 1e-6;
    ac.max_outer = s.max_iterations;
    ac.inner.max_inner = s.max_inner;
    ac.strict = s.strict;
    AccelResult r = solve_accelerated(o, inst.psi, x0, ac);
    attach_reference(r, b, ref->x);
    write_accel_trace(trace, r.trace);
    status = r.status;
    message = r.message;
    x_final = r.x;
    run.iterations = r.iterations();
    run.inner_steps = r.inner_total();
    run.calls = r.calls;
    run.final_gap = r.final_value() - ref->value;
    extra["R"] = r.r;
    extra["gamma"] = r.gamma;
    extra["A0"] = r.a0;
    extra["m_used"] = r.m;
    extra["clamped_gamma"] = r.clamped_gamma;
    if (cfg.verify.enabled) run.checks = detail::accel_checks(r, inst, *ref);
  }
  if (std::isnan(run.final_g)) {
    const Evaluation e = o.evaluate(x_final, Order::kGradient);
    run.final_g = o.metric().dual_norm(inst.psi.least_subgradient(x_final, e.gradient));
  }
  run.solver_ok = succeeded(status);
  run.trace_csv = trace.str();
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  rep["status"] = to_string(status);
  rep["message"] = message;
  rep["iterations"] = run.iterations;
  rep["inner_steps"] = run.inner_steps;
  rep["oracle_calls"] = calls_json(run.calls);
  rep["final_g"] = finite_or_null(run.final_g);
  rep["final_gap"] = finite_or_null(run.final_gap);
  rep["x"] = std::vector<double>(x_final.data(), x_final.data() + x_final.size());
  rep["solver_details"] = extra;
  rep["checks"] = Json::array();
  for (const CheckResult& c : run.checks) rep["checks"].push_back(to_json(c));
  rep["wall_seconds"] = run.seconds;

  if (opts.write_files) {
    const std::filesystem::path dir = cfg.out_dir;
    std::filesystem::create_directories(dir);
    detail::write_text(dir / "trace.csv", run.trace_csv);
    detail::write_text(dir / "report.json", rep.dump(2) + "\n");
  }
  return run;
}

struct VerifyRun {
  Json report;
  std::vector<CheckResult> checks;
  bool passed() const { return all_passed(checks); }
  int exit_code() const { return passed() ? 0 : 2; }
};

/// The oracle-level property suite: third-derivative bound, the three pairwise checks and
/// finite-difference derivative checks.
inline VerifyRun run_verify(RunConfig cfg, const RunOptions& opts = {}) {
  apply_options(cfg, opts);
  const Instance inst = build_instance(cfg.problem, cfg.base_dir);
  const SmoothOracle& o = inst.problem.oracle;
  const VerifySpec& v = cfg.verify;
  VerifyRun run;

  QscCheckOptions qo;
  qo.seed = v.seed;
  qo.samples = v.samples;
  qo.x_scale = v.x_scale;
  const QscCheckReport q = check_qsc(o, qo);
  run.checks.push_back(make_check("check_qsc", q.passed, -q.worst_excess,
                                  "max violation " + std::to_string(q.max_violation) + " over " +
                                      std::to_string(q.samples) + " samples at M = " +
                                      std::to_string(o.qsc_constant())));

  const LemmaSuiteReport lem = run_lemma_suite(o, v.seed + 1, v.pairs, v.x_scale);
  run.checks.push_back(make_check("check_hessian_stability", lem.stability_failures == 0, lem.worst_stability_margin,
                                  std::to_string(lem.stability_failures) + " of " + std::to_string(lem.pairs)));
  run.checks.push_back(make_check("check_gradient_bound", lem.gradient_failures == 0, lem.worst_gradient_slack,
                                  std::to_string(lem.gradient_failures) + " of " + std::to_string(lem.pairs)));
  run.checks.push_back(make_check("check_function_bounds", lem.function_failures == 0, lem.worst_function_slack,
                                  std::to_string(lem.function_failures) + " of " + std::to_string(lem.pairs)));

  PointSampler sampler(o.metric(), v.seed + 2, v.x_scale);
  double grad_err = 0.0, hess_err = 0.0;
  for (int i = 0; i < 5; ++i) {
    const PrimalVector x = sampler.point();
    grad_err = std::max(grad_err, check_gradient(o, x));
    hess_err = std::max(hess_err, check_hessian(o, x));
  }
  constexpr double kFdTolerance = 1e-5;
  run.checks.push_back(make_check("gradient_fd", grad_err <= kFdTolerance, kFdTolerance - grad_err));
  run.checks.push_back(make_check("hessian_fd", hess_err <= kFdTolerance, kFdTolerance - hess_err));

  Json& rep = run.report;
  rep["config"] = config_echo(cfg);
  rep["instance"] = {{"kind", inst.problem.kind}, {"dimension", o.dimension()}, {"qsc_constant", o.qsc_constant()}};
  rep["checks"] = Json::array();
  for (const CheckResult& c : run.checks) rep["checks"].push_back(to_json(c));
  rep["passed"] = run.passed();
  if (opts.write_files) {
    const std::filesystem::path dir = cfg.out_dir;
    std::filesystem::create_directories(dir);
    detail::write_text(dir / "verify.json", rep.dump(2) + "\n");
  }
  return run;
}

}  // namespace qsc
