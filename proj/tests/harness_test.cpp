#include <gtest/gtest.h>

#include <filesystem>

#include "qsc/harness/benchmark.hpp"
#include "test_util.hpp"

namespace qsc {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("qsc-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Json logistic_config_json() {
  return Json::parse(R"({
    "version": 1,
    "problem": {"kind": "logistic", "n": 8, "m": 60, "seed": 3},
    "solver": {"name": "primal", "tolerance": 1e-10},
    "verify": {"samples": 100, "pairs": 20}
  })");
}

TEST(Config, ParsesAndEchoes) {
  const RunConfig c = parse_run_config(logistic_config_json());
  EXPECT_EQ(c.problem.kind, "logistic");
  EXPECT_EQ(c.problem.synthetic.n, 8);
  EXPECT_EQ(c.solver.tolerance, 1e-10);
  EXPECT_EQ(c.problem.canonical["generator"]["seed"], 3);
}

TEST(Config, RejectsUnknownKeysAndWrongTypes) {
  Json j = logistic_config_json();
  j["problem"]["sedd"] = 2;
  EXPECT_THROW(parse_run_config(j), ConfigError);
  j = logistic_config_json();
  j["extra"] = true;
  EXPECT_THROW(parse_run_config(j), ConfigError);
  j = logistic_config_json();
  j["solver"]["tolerance"] = "small";
  EXPECT_THROW(parse_run_config(j), ConfigError);
  j = logistic_config_json();
  j["version"] = 2;
  EXPECT_THROW(parse_run_config(j), ConfigError);
  j = logistic_config_json();
  j.erase("version");
  EXPECT_THROW(parse_run_config(j), ConfigError);
  j = logistic_config_json();
  j["solver"]["name"] = "gradient_descent";
  EXPECT_THROW(parse_run_config(j), ConfigError);
}

TEST(Config, SigmaForms) {
  EXPECT_EQ(parse_solver(Json::parse(R"({"sigma": "adaptive"})")).sigma_mode, "adaptive");
  EXPECT_EQ(*parse_solver(Json::parse(R"({"sigma": 2.5})")).sigma, 2.5);
  EXPECT_THROW(parse_solver(Json::parse(R"({"sigma": "big"})")), ConfigError);
}

TEST(Config, X0Forms) {
  const Instance inst = build_instance(parse_problem(Json::parse(R"({"kind": "logistic", "n": 4, "m": 20})")));
  EXPECT_EQ(build_x0(parse_x0("zero"), inst), Vector::Zero(4));
  EXPECT_EQ(build_x0(parse_x0(Json::parse("[1,2,3,4]")), inst), Eigen::Vector4d(1, 2, 3, 4));
  EXPECT_NEAR(inst.problem.oracle.metric().primal_norm(build_x0(parse_x0(Json::parse(R"({"radius": 3})")), inst)),
              3.0, 1e-12);
  EXPECT_THROW(build_x0(parse_x0(Json::parse("[1,2]")), inst), ConfigError);
}

TEST(Config, BoxAndDataFile) {
  const ProblemSpec spec = parse_problem(Json::parse(R"({"kind": "matrix_balancing", "data": "balancing3.csv",
                                                         "box": {"lower": -1, "upper": [1, 2, 3]}})"));
  const Instance inst = build_instance(spec, QSC_TEST_DATA_DIR);
  EXPECT_EQ(inst.problem.oracle.dimension(), 3);
  EXPECT_FALSE(inst.psi.is_zero());
  EXPECT_EQ(inst.psi.upper(), Eigen::Vector3d(1, 2, 3));
  EXPECT_FALSE(inst.data_digest.empty());
  const ProblemSpec bad = parse_problem(Json::parse(R"({"kind": "logistic", "box": {"lower": 1, "upper": 0}})"));
  EXPECT_THROW(build_instance(bad), ConfigError);
}

TEST(RateFit, GeometricSequence) {
  std::vector<double> gaps;
  for (int k = 0; k < 20; ++k) gaps.push_back(std::pow(2.0, -k));
  const LinearRateFit f = fit_linear_rate(gaps);
  EXPECT_NEAR(f.slope, -std::log(2.0), 1e-12);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
  EXPECT_NEAR(f.implied_factor, 1.0 / std::log(2.0), 1e-10);
  EXPECT_EQ(f.window_end, 20u);
}

TEST(RateFit, QuadraticBurstExcluded) {
  std::vector<double> gaps;
  for (int k = 0; k < 15; ++k) gaps.push_back(std::pow(0.5, k));
  double g = gaps.back();
  for (int k = 0; k < 3; ++k) gaps.push_back(g = g * g * 100);
  const LinearRateFit f = fit_linear_rate(gaps);
  EXPECT_EQ(f.window_end, 15u);
  EXPECT_NEAR(f.slope, std::log(0.5), 1e-12);
}

TEST(RateFit, InsufficientData) {
  EXPECT_THROW(fit_linear_rate({1.0, 0.5, 0.25}), InsufficientData);
  EXPECT_THROW(fit_local_order({1.0, 0.1}), InsufficientData);
}

TEST(RateFit, LocalOrderOfSquaringSequence) {
  EXPECT_NEAR(fit_local_order({1e-2, 1e-4, 1e-8}), 2.0, 1e-12);
}

TEST(Reference, QuadraticMatchesSolve) {
  const ProblemSpec spec = parse_problem(Json::parse(R"({"kind": "quadratic", "n": 5, "seed": 4})"));
  const Instance inst = build_instance(spec);
  const Reference ref = compute_reference(inst, Vector::Zero(5));
  const Vector grad = inst.problem.oracle.gradient(ref.x);
  EXPECT_LE(grad.norm(), 1e-11);
}

TEST(Reference, BalancingConvergesInGradient) {
  const ProblemSpec spec = parse_problem(Json::parse(R"({"kind": "matrix_balancing", "n": 10, "seed": 2})"));
  const Instance inst = build_instance(spec);
  const Reference ref = compute_reference(inst, Vector::Zero(10));
  EXPECT_LE(ref.g, 1e-10);
}

TEST(Reference, CacheHitIsBitIdentical) {
  const fs::path dir = scratch_dir("cache");
  const ProblemSpec spec = parse_problem(Json::parse(R"({"kind": "logistic", "n": 6, "m": 40, "seed": 5})"));
  const Instance inst = build_instance(spec);
  const Reference a = cached_reference(spec, inst, Vector::Zero(6), {}, dir);
  const Reference b = cached_reference(spec, inst, Vector::Zero(6), {}, dir);
  EXPECT_FALSE(a.from_cache);
  EXPECT_TRUE(b.from_cache);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.g, b.g);
}

TEST(Reference, KeyChangesWithEveryParameter) {
  const ProblemSpec base = parse_problem(Json::parse(R"({"kind": "logistic", "n": 6, "m": 40, "seed": 5})"));
  const Instance inst = build_instance(base);
  const std::string key = reference_key(base, inst, Vector::Zero(6), {});
  for (const char* variant : {R"({"kind": "logistic", "n": 6, "m": 40, "seed": 6})",
                              R"({"kind": "logistic", "n": 6, "m": 41, "seed": 5})",
                              R"({"kind": "logistic", "n": 6, "m": 40, "seed": 5, "regularization": 0.1})",
                              R"({"kind": "exponential", "n": 6, "m": 40, "seed": 5})"}) {
    const ProblemSpec other = parse_problem(Json::parse(variant));
    EXPECT_NE(reference_key(other, build_instance(other), Vector::Zero(6), {}), key) << variant;
  }
  EXPECT_NE(reference_key(base, inst, Vector::Ones(6), {}), key);
}

TEST(Reference, KnownMinimizerIsChecked) {
  const ProblemSpec good = parse_problem(
      Json::parse(R"({"kind": "softmax", "n": 4, "m": 10, "symmetric": true, "known_minimizer": "zero"})"));
  const Reference ref = cached_reference(good, build_instance(good), Vector::Ones(4));
  EXPECT_TRUE(ref.known);
  const ProblemSpec bad = parse_problem(Json::parse(R"({"kind": "softmax", "n": 4, "m": 10, "known_minimizer": "zero"})"));
  EXPECT_THROW(cached_reference(bad, build_instance(bad), Vector::Ones(4)), ReferenceNotConverged);
}

TEST(RunSolve, QuadraticPrimalWritesTraceAndReport) {
  const fs::path out = scratch_dir("solve-quadratic");
  RunConfig cfg = parse_run_config(Json::parse(R"({"version": 1,
      "problem": {"kind": "quadratic", "n": 4, "seed": 1},
      "solver": {"name": "primal", "sigma": 0}, "verify": {"enabled": true}})"));
  RunOptions opts;
  opts.out_dir = out;
  const SolveRun run = run_solve(cfg, opts);
  EXPECT_EQ(run.exit_code(), 0);
  EXPECT_EQ(run.iterations, 1);
  ASSERT_TRUE(fs::exists(out / "trace.csv"));
  const Json report = read_json_file((out / "report.json").string());
  EXPECT_EQ(report["status"], "GradTolReached");
  std::set<std::string> names;
  for (const Json& c : report["checks"]) EXPECT_TRUE(names.insert(c["name"].get<std::string>()).second);
  EXPECT_TRUE(names.count("step_invariants"));
}

TEST(RunSolve, EverySolverOnLogistic) {
  for (const char* name : {"primal", "dual", "accelerated"}) {
    Json j = logistic_config_json();
    j["solver"] = {{"name", name}, {"tolerance", 1e-9}, {"target_relative_gap", 1e-8}};
    RunOptions opts;
    opts.write_files = false;
    const SolveRun run = run_solve(parse_run_config(j), opts);
    EXPECT_TRUE(run.solver_ok) << name << ": " << run.report["status"];
    EXPECT_TRUE(run.checks_ok()) << name << ": " << run.report["checks"].dump();
    EXPECT_TRUE(run.report.contains("reference"));
    EXPECT_LE(run.final_gap, 1e-6);
  }
}

TEST(RunSolve, ReportIsReproducible) {
  RunOptions opts;
  opts.write_files = false;
  const SolveRun a = run_solve(parse_run_config(logistic_config_json()), opts);
  const SolveRun b = run_solve(parse_run_config(logistic_config_json()), opts);
  EXPECT_EQ(a.trace_csv, b.trace_csv);
  ASSERT_EQ(a.checks.size(), b.checks.size());
  for (std::size_t i = 0; i < a.checks.size(); ++i) EXPECT_EQ(a.checks[i].status, b.checks[i].status);
}

TEST(RunVerify, QuadraticPassesAndSmallConstantFails) {
  RunOptions opts;
  opts.write_files = false;
  const VerifyRun quad = run_verify(parse_run_config(Json::parse(R"({"version": 1,
      "problem": {"kind": "quadratic", "n": 4}, "verify": {"samples": 200, "pairs": 50}})")), opts);
  EXPECT_EQ(quad.exit_code(), 0);

  RunConfig small = parse_run_config(Json::parse(R"({"version": 1,
      "problem": {"kind": "logistic", "data": "tiny_logistic.csv", "qsc_constant": 0.5},
      "verify": {"samples": 2000, "pairs": 100, "x_scale": 3}})"), QSC_TEST_DATA_DIR);
  const VerifyRun bad = run_verify(small, opts);
  EXPECT_EQ(bad.exit_code(), 2);
  bool named = false;
  for (const CheckResult& c : bad.checks) named = named || (c.name == "check_qsc" && c.status == "fail");
  EXPECT_TRUE(named);
}

const char* kSuite = R"({
  "version": 1,
  "instances": [
    {"name": "logistic", "problem": {"kind": "logistic", "n": 6, "m": 40, "seed": 2}},
    {"name": "exponential", "problem": {"kind": "exponential", "n": 6, "m": 40, "seed": 2}}
  ],
  "solvers": [
    {"name": "primal"},
    {"label": "primal-adaptive", "solver": {"name": "primal", "sigma": "adaptive"}},
    {"name": "accelerated"}
  ]
})";

TEST(Benchmark, SixCellsAndTable) {
  const fs::path out = scratch_dir("bench");
  RunOptions opts;
  opts.out_dir = out;
  const BenchmarkResult res = run_benchmark(parse_benchmark_suite(Json::parse(kSuite)), 1, opts);
  EXPECT_EQ(res.exit_code(), 0);
  ASSERT_EQ(res.cells.size(), 6u);
  int reports = 0;
  for (const auto& e : fs::recursive_directory_iterator(out)) reports += e.path().filename() == "report.json";
  EXPECT_EQ(reports, 6);
  EXPECT_TRUE(fs::exists(out / "table.csv"));
  EXPECT_TRUE(fs::exists(out / "table.txt"));
}

TEST(Benchmark, ParallelismDoesNotChangeOutput) {
  RunOptions opts;
  opts.write_files = false;
  const BenchmarkSuite suite = parse_benchmark_suite(Json::parse(kSuite));
  const BenchmarkResult serial = run_benchmark(suite, 1, opts);
  const BenchmarkResult parallel = run_benchmark(suite, 4, opts);
  EXPECT_EQ(serial.table_csv, parallel.table_csv);
  EXPECT_EQ(serial.table_txt, parallel.table_txt);
}

TEST(Benchmark, DuplicateLabelsRejected) {
  Json j = Json::parse(kSuite);
  j["solvers"].push_back({{"name", "primal"}});
  EXPECT_THROW(parse_benchmark_suite(j), ConfigError);
}

}  // namespace
}  // namespace qsc
