#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "qsc/oracle.hpp"
#include "qsc/phi.hpp"

namespace qsc {

/// Central-difference gradient check. Returns max_i |fd_i - g_i| / max(1, |g_i|).
inline double check_gradient(const SmoothOracle& o, const PrimalVector& x, double h = 1e-5) {
  const DualVector g = o.gradient(x);
  double worst = 0.0;
  PrimalVector xp = x, xm = x;
  for (Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    const double fd = (o.value(xp) - o.value(xm)) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - g[i]) / std::max(1.0, std::abs(g[i])));
    xp[i] = xm[i] = x[i];
  }
  return worst;
}

/// Central differences of the gradient against the Hessian, same error measure.
inline double check_hessian(const SmoothOracle& o, const PrimalVector& x, double h = 1e-5) {
  const Matrix hess = o.hessian(x);
  double worst = 0.0;
  PrimalVector xp = x, xm = x;
  for (Index j = 0; j < x.size(); ++j) {
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    const Vector fd = (o.gradient(xp) - o.gradient(xm)) / (2.0 * h);
    for (Index i = 0; i < x.size(); ++i) {
      worst = std::max(worst, std::abs(fd[i] - hess(i, j)) / std::max(1.0, std::abs(hess(i, j))));
    }
    xp[j] = xm[j] = x[j];
  }
  return worst;
}

/// Draws the random points, directions and pairs used by the property checks.
class PointSampler {
 public:
  /// x ~ N(0, x_scale^2 I); pair offsets have B-norm uniform in [0, pair_radius].
  PointSampler(const MetricOperator& metric, std::uint64_t seed, double x_scale = 1.0, double pair_radius = 2.0)
      : metric_(metric), rng_(seed), x_scale_(x_scale), pair_radius_(pair_radius) {}

  PrimalVector point() { return x_scale_ * gaussian(); }
  PrimalVector gaussian() {
    PrimalVector v(metric_.dimension());
    for (Index i = 0; i < v.size(); ++i) v[i] = normal_(rng_);
    return v;
  }
  /// Standard normal direction normalized to ||v|| = 1 in the metric.
  PrimalVector unit_direction() {
    PrimalVector v = gaussian();
    const double len = metric_.primal_norm(v);
    return len > 0.0 ? PrimalVector(v / len) : unit_direction();
  }
  PrimalVector partner(const PrimalVector& x) { return x + pair_radius_ * uniform_(rng_) * unit_direction(); }

 private:
  MetricOperator metric_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
  std::uniform_real_distribution<double> uniform_;
  double x_scale_;
  double pair_radius_;
};

struct QscCheckOptions {
  std::uint64_t seed = 1;
  int samples = 10000;
  double x_scale = 1.0;
  double relative_tolerance = 1e-4;
};

struct QscCheckReport {
  int samples = 0;
  double max_violation = -std::numeric_limits<double>::infinity();  // max of estimate - M||u||_x^2
  double worst_excess = -std::numeric_limits<double>::infinity();   // max of violation - tolerance
  double tolerance_at_worst = 0.0;
  PrimalVector worst_x, worst_u, worst_v;
  bool passed = true;
};

/// Third-derivative estimate D^3 f(x)[u]^2[v] from central differences of Hessians.
inline double third_derivative_fd(const SmoothOracle& o, const PrimalVector& x, const PrimalVector& u,
                                  const PrimalVector& v, double t) {
  const Matrix hp = o.hessian(x + t * v);
  const Matrix hm = o.hessian(x - t * v);
  return u.dot((hp - hm) * u) / (2.0 * t);
}

/// Numeric certificate of D^3 f(x)[u]^2[v] <= M ||u||_x^2 ||v|| on random triples with ||v|| = 1.
/// The difference step is 1e-4 (1 + ||x||). A sample passes when the excess is at most
/// relative_tolerance * (1 + M ||u||_x^2).
inline QscCheckReport check_qsc(const SmoothOracle& o, const QscCheckOptions& opts = {}) {
  PointSampler sampler(o.metric(), opts.seed, opts.x_scale);
  QscCheckReport report;
  const double m = o.qsc_constant();
  for (int s = 0; s < opts.samples; ++s) {
    const PrimalVector x = sampler.point();
    const PrimalVector u = sampler.gaussian();
    const PrimalVector v = sampler.unit_direction();
    const double t = 1e-4 * (1.0 + o.metric().primal_norm(x));
    const double estimate = third_derivative_fd(o, x, u, v, t);
    const double bound = m * std::max(0.0, u.dot(o.hessian(x) * u));
    const double violation = estimate - bound;
    const double tol = opts.relative_tolerance * (1.0 + bound);
    report.max_violation = std::max(report.max_violation, violation);
    if (violation - tol > report.worst_excess) {
      report.worst_excess = violation - tol;
      report.tolerance_at_worst = tol;
      report.worst_x = x;
      report.worst_u = u;
      report.worst_v = v;
    }
    ++report.samples;
  }
  report.passed = report.worst_excess <= 0.0;
  return report;
}

struct StabilityResult {
  bool passed = true;
  double margin = 0.0;  // M r minus the exponent actually needed
};

/// e^{-Mr} H(x) <= H(y) <= e^{Mr} H(x) with r = ||y - x||. Null directions of H(x), below a
/// relative cutoff or a round-off floor, are factored out (for instance the shift direction
/// of matrix balancing); curvature of H(y) along the null space of H(x) counts as a failure.
inline StabilityResult check_hessian_stability(const SmoothOracle& o, const PrimalVector& x, const PrimalVector& y,
                                               double tolerance = 1e-7) {
  const double r = o.metric().primal_norm(y - x);
  const double allowed = o.qsc_constant() * r;
  const Matrix hx = symmetrized(o.hessian(x));
  const Matrix hy = symmetrized(o.hessian(y));
  Eigen::SelfAdjointEigenSolver<Matrix> es(hx);
  const Vector& lam = es.eigenvalues();
  const Matrix& vecs = es.eigenvectors();
  const double top = std::max(lam.maxCoeff(), 0.0);
  // Hessians such as the soft-max one are differences of terms of size up to M tr(B), so
  // eigenvalues below that scale times round-off are treated as null.
  const double noise = 1e-13 * (1.0 + o.qsc_constant()) * o.metric().matrix().trace();
  const double cutoff = std::max(1e-9 * top, noise);
  std::vector<Index> range, null;
  for (Index i = 0; i < lam.size(); ++i) (lam[i] > cutoff && top > 0.0 ? range : null).push_back(i);

  double needed = 0.0;
  if (!null.empty()) {
    Matrix vn(hx.rows(), static_cast<Index>(null.size()));
    for (std::size_t k = 0; k < null.size(); ++k) vn.col(static_cast<Index>(k)) = vecs.col(null[k]);
    const double leak = Eigen::SelfAdjointEigenSolver<Matrix>(vn.transpose() * hy * vn, Eigen::EigenvaluesOnly)
                            .eigenvalues()
                            .maxCoeff();
    const double hy_scale = std::max(1.0, hy.cwiseAbs().maxCoeff());
    if (leak > std::exp(allowed) * cutoff + 1e-12 * hy_scale) needed = std::numeric_limits<double>::infinity();
  }
  if (!range.empty() && std::isfinite(needed)) {
    Matrix w(hx.rows(), static_cast<Index>(range.size()));
    for (std::size_t k = 0; k < range.size(); ++k) {
      w.col(static_cast<Index>(k)) = vecs.col(range[k]) / std::sqrt(lam[range[k]]);
    }
    const Vector omega =
        Eigen::SelfAdjointEigenSolver<Matrix>(symmetrized(w.transpose() * hy * w), Eigen::EigenvaluesOnly)
            .eigenvalues();
    const double lo = omega.minCoeff();
    const double hi = omega.maxCoeff();
    needed = lo <= 0.0 ? std::numeric_limits<double>::infinity() : std::max(std::log(hi), -std::log(lo));
  }
  StabilityResult res;
  res.margin = allowed - needed;
  res.passed = res.margin >= -tolerance * (1.0 + allowed);
  return res;
}

struct BoundResult {
  bool passed = true;
  double lhs = 0.0;
  double upper = 0.0;
  double lower = 0.0;  // only used by the two-sided function bound
};

/// ||grad f(y) - grad f(x) - H(x)(y - x)||_* <= M ||y - x||_x^2 phi(M ||y - x||) + 1e-8.
inline BoundResult check_gradient_bound(const SmoothOracle& o, const PrimalVector& x, const PrimalVector& y) {
  const Evaluation ex = o.evaluate(x, Order::kHessian);
  const DualVector gy = o.gradient(y);
  const PrimalVector d = y - x;
  const double m = o.qsc_constant();
  BoundResult res;
  res.lhs = o.metric().dual_norm(gy - ex.gradient - ex.hessian * d);
  const double local = std::max(0.0, d.dot(ex.hessian * d));
  res.upper = m * local * phi(m * o.metric().primal_norm(d)) + 1e-8;
  res.passed = res.lhs <= res.upper;
  return res;
}

/// ||y-x||_x^2 phi(-M r) <= f(y) - f(x) - <grad f(x), y - x> <= ||y-x||_x^2 phi(M r), +-1e-8.
inline BoundResult check_function_bounds(const SmoothOracle& o, const PrimalVector& x, const PrimalVector& y) {
  const Evaluation ex = o.evaluate(x, Order::kHessian);
  const double fy = o.value(y);
  const PrimalVector d = y - x;
  const double mr = o.qsc_constant() * o.metric().primal_norm(d);
  const double local = std::max(0.0, d.dot(ex.hessian * d));
  BoundResult res;
  res.lhs = fy - ex.value - ex.gradient.dot(d);
  res.upper = local * phi(mr) + 1e-8;
  res.lower = local * phi(-mr) - 1e-8;
  res.passed = res.lower <= res.lhs && res.lhs <= res.upper;
  return res;
}

struct LemmaSuiteReport {
  int pairs = 0;
  int stability_failures = 0;
  int gradient_failures = 0;
  int function_failures = 0;
  double worst_stability_margin = std::numeric_limits<double>::infinity();
  double worst_gradient_slack = std::numeric_limits<double>::infinity();  // upper - lhs
  double worst_function_slack = std::numeric_limits<double>::infinity();  // min of both sides
  bool passed() const { return stability_failures == 0 && gradient_failures == 0 && function_failures == 0; }
};

/// Runs the Hessian-stability, gradient-bound and function-bound checks on random pairs.
inline LemmaSuiteReport run_lemma_suite(const SmoothOracle& o, std::uint64_t seed, int pairs, double x_scale = 1.0,
                                        double pair_radius = 2.0) {
  PointSampler sampler(o.metric(), seed, x_scale, pair_radius);
  LemmaSuiteReport rep;
  for (int p = 0; p < pairs; ++p) {
    const PrimalVector x = sampler.point();
    const PrimalVector y = sampler.partner(x);
    const StabilityResult st = check_hessian_stability(o, x, y);
    const BoundResult gb = check_gradient_bound(o, x, y);
    const BoundResult fb = check_function_bounds(o, x, y);
    rep.stability_failures += st.passed ? 0 : 1;
    rep.gradient_failures += gb.passed ? 0 : 1;
    rep.function_failures += fb.passed ? 0 : 1;
    rep.worst_stability_margin = std::min(rep.worst_stability_margin, st.margin);
    rep.worst_gradient_slack = std::min(rep.worst_gradient_slack, gb.upper - gb.lhs);
    rep.worst_function_slack = std::min(rep.worst_function_slack, std::min(fb.upper - fb.lhs, fb.lhs - fb.lower));
    ++rep.pairs;
  }
  return rep;
}

}  // namespace qsc
