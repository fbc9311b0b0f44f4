#include <gtest/gtest.h>

#include "test_util.hpp"

namespace qsc {
namespace {

TEST(SolvePrimal, QuadraticPureNewtonOneIteration) {
  const Problem q = testing::synthetic("quadratic", 6, 6, 2);
  const PrimalResult r = solve_primal(q.oracle, CompositeTerm::zero(), Vector::Zero(6), PrimalConfig::constant(0.0));
  EXPECT_EQ(r.status, SolveStatus::kGradTolReached);
  EXPECT_EQ(r.iterations(), 1);
}

TEST(SolvePrimal, StationaryStartReturnsImmediately) {
  const Problem q = testing::synthetic("quadratic", 3, 3, 2);
  const PrimalResult first = solve_primal(q.oracle, CompositeTerm::zero(), Vector::Zero(3), PrimalConfig::constant(0.0));
  const PrimalResult r = solve_primal(q.oracle, CompositeTerm::zero(), first.x, PrimalConfig::constant(0.0));
  EXPECT_EQ(r.iterations(), 0);
  EXPECT_EQ(r.x, first.x);
}

TEST(SolvePrimal, LogisticConstantSigmaSatisfiesStepInvariants) {
  const Problem p = testing::logistic();
  PrimalConfig cfg = PrimalConfig::constant();
  cfg.grad_tolerance = 1e-9;
  const PrimalResult r = solve_primal(p.oracle, CompositeTerm::zero(), Vector::Zero(20), cfg);
  ASSERT_EQ(r.status, SolveStatus::kGradTolReached);
  EXPECT_GT(r.iterations(), 0);
  EXPECT_LT(r.iterations(), 1000);
  const StepInvariantReport inv = check_step_invariants(r.trace);
  EXPECT_TRUE(inv.passed());
  EXPECT_EQ(inv.steps, r.iterations());
  for (std::size_t i = 0; i + 1 < r.trace.size(); ++i) EXPECT_DOUBLE_EQ(r.trace[i].sigma, 1.0);
}

TEST(SolvePrimal, BoxTermKeepsIteratesFeasible) {
  const Problem p = testing::logistic(8, 60, 3);
  const CompositeTerm box = CompositeTerm::box(Vector::Constant(8, -0.1), Vector::Constant(8, 0.1));
  const PrimalResult r = solve_primal(p.oracle, box, Vector::Zero(8), PrimalConfig::constant());
  EXPECT_EQ(r.status, SolveStatus::kGradTolReached);
  for (const Vector& x : r.iterates) EXPECT_TRUE(box.contains(x, 1e-12));
  EXPECT_TRUE(check_step_invariants(r.trace).passed());
}

TEST(SolvePrimal, ZeroSigmaWithBoxIsRejected) {
  const Problem p = testing::logistic(3, 20, 1);
  const CompositeTerm box = CompositeTerm::box(Vector::Constant(3, -1), Vector::Constant(3, 1));
  EXPECT_THROW(solve_primal(p.oracle, box, Vector::Zero(3), PrimalConfig::constant(0.0)), ParameterError);
}

TEST(SolvePrimal, TargetRelativeGapStops) {
  const Problem p = testing::logistic(10, 80, 2);
  const PrimalResult ref = solve_primal(p.oracle, CompositeTerm::zero(), Vector::Zero(10), PrimalConfig::adaptive());
  PrimalConfig cfg = PrimalConfig::constant();
  cfg.grad_tolerance = 1e-15;
  cfg.f_star = ref.final_value();
  cfg.target_relative_gap = 1e-3;
  const PrimalResult r = solve_primal(p.oracle, CompositeTerm::zero(), Vector::Zero(10), cfg);
  EXPECT_EQ(r.status, SolveStatus::kTargetGapReached);
  EXPECT_LE(r.final_value() - ref.final_value(), 1e-3 * (r.trace.front().value - ref.final_value()));
}

TEST(SolvePrimal, MaxIterationsReported) {
  const Problem p = testing::logistic(10, 80, 2);
  PrimalConfig cfg = PrimalConfig::constant(100.0);
  cfg.max_iterations = 3;
  const PrimalResult r = solve_primal(p.oracle, CompositeTerm::zero(), Vector::Zero(10), cfg);
  EXPECT_EQ(r.status, SolveStatus::kMaxIters);
  EXPECT_EQ(r.iterations(), 3);
}

TEST(AdaptiveSigma, AcceptsImmediatelyAtOrAboveM) {
  const Problem p = testing::logistic(10, 80, 4);
  const ModelPoint at = model_point(p.oracle, testing::random_vector(10, 1));
  const double g = p.oracle.metric().dual_norm(at.eval.gradient);
  EXPECT_EQ(adaptive_sigma_search(p.oracle, CompositeTerm::zero(), at, g, 1.0).retries, 0);
  EXPECT_EQ(adaptive_sigma_search(p.oracle, CompositeTerm::zero(), at, g, 5.0).retries, 0);
}

TEST(AdaptiveSigma, QuadraticAcceptsTinySigma) {
  const Problem q = testing::synthetic("quadratic", 5, 5, 3);
  const ModelPoint at = model_point(q.oracle, testing::random_vector(5, 2));
  const double g = q.oracle.metric().dual_norm(at.eval.gradient);
  const AdaptiveStep a = adaptive_sigma_search(q.oracle, CompositeTerm::zero(), at, g, 1e-9);
  EXPECT_EQ(a.retries, 0);
  EXPECT_EQ(a.sigma, 1e-9);
}

TEST(AdaptiveSigma, AcceptedSigmaAtMostTwiceM) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const Problem p = testing::logistic(20, 200, seed);
    const PrimalResult r =
        solve_primal(p.oracle, CompositeTerm::zero(), Vector::Zero(20), PrimalConfig::adaptive(1e-6));
    ASSERT_EQ(r.status, SolveStatus::kGradTolReached);
    for (std::size_t i = 0; i + 1 < r.trace.size(); ++i) EXPECT_LE(r.trace[i].sigma, 2.0) << seed;
    EXPECT_TRUE(check_step_invariants(r.trace).passed());
  }
}

TEST(AdaptiveSigma, FailureAfterCap) {
  const Problem p = testing::logistic(5, 40, 1);
  const ModelPoint far = model_point(p.oracle, 30.0 * testing::random_vector(5, 3));
  const double g = p.oracle.metric().dual_norm(far.eval.gradient);
  // A nearly unregularized step from a saturated point overshoots, and no doubling is allowed.
  EXPECT_THROW(adaptive_sigma_search(p.oracle, CompositeTerm::zero(), far, g, 1e-12, 0), AdaptiveFailure);
}

TEST(EtaMeasure, Examples) {
  const Problem q = make_quadratic(Matrix::Identity(2, 2), Vector::Zero(2));
  const Vector x = Eigen::Vector2d(2, 0);
  EXPECT_DOUBLE_EQ(eta_measure(q.oracle.hessian(x), q.oracle.metric(), q.oracle.gradient(x)), 2.0);
  EXPECT_EQ(eta_measure(q.oracle.hessian(x), q.oracle.metric(), Vector::Zero(2)), 0.0);
  const Problem bal = make_matrix_balancing(testing::random_nonnegative(4, 1));
  const Vector y = testing::random_vector(4, 2);
  EXPECT_TRUE(std::isinf(eta_measure(bal.oracle.hessian(y), bal.oracle.metric(), bal.oracle.gradient(y))));
}

TEST(LocalQuadratic, NeverEnteredIsVacuous) {
  std::vector<PrimalTraceRow> trace(3);
  for (PrimalTraceRow& r : trace) r.eta = 10.0;
  const LocalQuadraticCheck c = check_local_quadratic(trace, 1.0);
  EXPECT_TRUE(c.passed);
  EXPECT_FALSE(c.entered);
}

TEST(LocalQuadratic, RegularizedLogisticFromNearOptimum) {
  const Problem p = add_strong_convexity(testing::logistic(10, 100, 3), 0.1);
  const PrimalResult warm = solve_primal(p.oracle, CompositeTerm::zero(), Vector::Zero(10), PrimalConfig::constant());
  PrimalConfig cfg = PrimalConfig::constant();
  cfg.diagnostics = true;
  cfg.grad_tolerance = 1e-13;
  const Vector start = warm.iterates[std::max(0, warm.iterations() - 3)];
  const PrimalResult r = solve_primal(p.oracle, CompositeTerm::zero(), start, cfg);
  const LocalQuadraticCheck c = check_local_quadratic(r.trace, 1.0);
  EXPECT_TRUE(c.entered);
  EXPECT_TRUE(c.passed) << c.worst_ratio;
  EXPECT_GT(c.pairs, 0);
}

TEST(LocalQuadratic, PureNewtonInsideRegion) {
  const Problem p = add_strong_convexity(testing::logistic(10, 100, 4), 0.1);
  const PrimalResult warm = solve_primal(p.oracle, CompositeTerm::zero(), Vector::Zero(10), PrimalConfig::constant());
  PrimalConfig cfg = PrimalConfig::constant(0.0);
  cfg.diagnostics = true;
  cfg.grad_tolerance = 1e-13;
  const PrimalResult r = solve_primal(p.oracle, CompositeTerm::zero(), warm.iterates[warm.iterations() - 2], cfg);
  ASSERT_FALSE(r.trace.empty());
  ASSERT_LE(r.trace.front().eta, 1.0 / 18.0);
  const LocalQuadraticCheck c = check_local_quadratic(r.trace, 1.0);
  EXPECT_TRUE(c.passed) << c.worst_ratio;
}

}  // namespace
}  // namespace qsc
