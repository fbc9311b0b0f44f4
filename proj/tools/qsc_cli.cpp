#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qsc/harness/benchmark.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 2;
constexpr int kExitConfig = 3;

struct CommonFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool strict = false;
  int jobs = 1;
};

qsc::RunOptions options_from(const CommonFlags& f) {
  qsc::RunOptions o;
  o.seed = f.seed;
  o.strict = f.strict;
  if (!f.out.empty()) o.out_dir = f.out;
  return o;
}

void print_failed_checks(const std::vector<qsc::CheckResult>& checks) {
  for (const qsc::CheckResult& c : checks) {
    if (c.status == "fail") {
      std::cerr << "check failed: " << c.name << " (margin " << c.margin << ")";
      if (!c.detail.empty()) std::cerr << ": " << c.detail;
      std::cerr << '\n';
    }
  }
}

int cmd_solve(const CommonFlags& f) {
  const qsc::SolveRun run = qsc::run_solve(qsc::load_run_config(f.config), options_from(f));
  const qsc::Json& r = run.report;
  std::printf("status %s  iterations %d  inner %d  final_g %.3e", r.value("status", "").c_str(), run.iterations,
              run.inner_steps, run.final_g);
  if (std::isfinite(run.final_gap)) std::printf("  gap %.3e", run.final_gap);
  std::printf("\n");
  for (const qsc::CheckResult& c : run.checks) std::printf("  %-24s %s\n", c.name.c_str(), c.status.c_str());
  if (!run.solver_ok) std::cerr << "solver did not succeed: " << r.value("status", "") << ' ' << r.value("message", "") << '\n';
  print_failed_checks(run.checks);
  return run.exit_code();
}

int cmd_verify(const CommonFlags& f) {
  const qsc::VerifyRun run = qsc::run_verify(qsc::load_run_config(f.config), options_from(f));
  for (const qsc::CheckResult& c : run.checks) {
    std::printf("  %-24s %s  margin %.3e\n", c.name.c_str(), c.status.c_str(), c.margin);
  }
  print_failed_checks(run.checks);
  return run.exit_code();
}

int cmd_benchmark(const CommonFlags& f) {
  const qsc::BenchmarkSuite suite =
      qsc::parse_benchmark_suite(qsc::read_json_file(f.config), std::filesystem::path(f.config).parent_path());
  const qsc::BenchmarkResult res = qsc::run_benchmark(suite, f.jobs, options_from(f));
  std::cout << res.table_txt;
  for (const qsc::BenchmarkCell& c : res.cells) {
    if (!c.has_report) std::cerr << "cell " << c.instance << "/" << c.solver << " failed: " << c.error << '\n';
  }
  return res.exit_code();
}

int cmd_reference(const CommonFlags& f) {
  qsc::RunConfig cfg = qsc::load_run_config(f.config);
  const qsc::RunOptions opts = options_from(f);
  qsc::apply_options(cfg, opts);
  const qsc::Instance inst = qsc::build_instance(cfg.problem, cfg.base_dir);
  const qsc::PrimalVector x0 = qsc::build_x0(cfg.x0, inst);
  try {
    const qsc::Reference ref = qsc::cached_reference(cfg.problem, inst, x0);
    std::printf("F* %.17g  g %.3e  iterations %d  %s\n", ref.value, ref.g, ref.iterations,
                ref.known ? "known" : (ref.from_cache ? "cache hit" : "computed"));
    qsc::Json j{{"value", ref.value},     {"g", ref.g},          {"iterations", ref.iterations},
                {"known", ref.known},     {"cache_hit", ref.from_cache}, {"key", ref.key}};
    j["x"] = std::vector<double>(ref.x.data(), ref.x.data() + ref.x.size());
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream(std::filesystem::path(cfg.out_dir) / "reference.json") << j.dump(2) << '\n';
    return kExitOk;
  } catch (const qsc::ReferenceNotConverged& e) {
    std::cerr << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Second-order solvers for quasi-self-concordant composite problems"};
  app.require_subcommand(1);
  CommonFlags flags;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "JSON config file")->required();
    sub->add_option("--out", flags.out, "output directory (overrides the config)");
    sub->add_option("--seed", flags.seed, "override the generator and verification seeds");
  };
  CLI::App* solve = app.add_subcommand("solve", "run one solver and write trace.csv and report.json");
  add_common(solve);
  solve->add_flag("--strict", flags.strict, "parameter preconditions become hard errors");
  CLI::App* verify = app.add_subcommand("verify", "run the oracle property checks on an instance");
  add_common(verify);
  CLI::App* bench = app.add_subcommand("benchmark", "run a suite of instances x solvers");
  add_common(bench);
  bench->add_option("--jobs", flags.jobs, "parallel cells")->check(CLI::PositiveNumber);
  bench->add_flag("--strict", flags.strict, "parameter preconditions become hard errors");
  CLI::App* reference = app.add_subcommand("reference", "compute (or load) the cached reference solution");
  add_common(reference);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*solve) return cmd_solve(flags);
    if (*verify) return cmd_verify(flags);
    if (*bench) return cmd_benchmark(flags);
    return cmd_reference(flags);
  } catch (const qsc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const qsc::ParseError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const qsc::ParameterError& e) {
    std::cerr << "parameter error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const qsc::DimensionError& e) {
    std::cerr << "dimension error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}
