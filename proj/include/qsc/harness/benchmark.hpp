#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "qsc/harness/runner.hpp"

namespace qsc {

struct BenchmarkInstance {
  std::string name;
  ProblemSpec problem;
  X0Spec x0;
};

struct BenchmarkSolver {
  std::string label;
  SolverSpec solver;
};

struct BenchmarkSuite {
  int version = kConfigVersion;
  std::string name;
  std::vector<BenchmarkInstance> instances;
  std::vector<BenchmarkSolver> solvers;
  VerifySpec verify = [] {
    VerifySpec v;
    v.enabled = false;
    return v;
  }();
  std::string out_dir = "out";
  bool slope_fit = false;  // log-log slope of iterations against M, per solver
  std::filesystem::path base_dir;
};

inline BenchmarkSuite parse_benchmark_suite(const Json& j, const std::filesystem::path& base_dir = {}) {
  detail::ObjectReader r(j, "suite");
  BenchmarkSuite s;
  s.version = r.required<int>("version");
  if (s.version != kConfigVersion) throw ConfigError("suite: unsupported version " + std::to_string(s.version));
  s.name = r.get<std::string>("name", "");
  const Json& insts = r.required<Json>("instances");
  if (!insts.is_array() || insts.empty()) throw ConfigError("suite.instances: expected a non-empty array");
  for (std::size_t i = 0; i < insts.size(); ++i) {
    const std::string where = "suite.instances[" + std::to_string(i) + "]";
    detail::ObjectReader ir(insts[i], where);
    BenchmarkInstance bi;
    bi.name = ir.get<std::string>("name", "instance" + std::to_string(i));
    bi.problem = parse_problem(ir.required<Json>("problem"), where + ".problem");
    if (ir.has("x0")) bi.x0 = parse_x0(ir.raw("x0"));
    ir.finish();
    s.instances.push_back(std::move(bi));
  }
  const Json& solvers = r.required<Json>("solvers");
  if (!solvers.is_array() || solvers.empty()) throw ConfigError("suite.solvers: expected a non-empty array");
  for (std::size_t i = 0; i < solvers.size(); ++i) {
    const std::string where = "suite.solvers[" + std::to_string(i) + "]";
    BenchmarkSolver bs;
    if (solvers[i].is_object() && solvers[i].contains("solver")) {
      detail::ObjectReader sr(solvers[i], where);
      bs.solver = parse_solver(sr.required<Json>("solver"), where + ".solver");
      bs.label = sr.get<std::string>("label", bs.solver.name);
      sr.finish();
    } else {
      bs.solver = parse_solver(solvers[i], where);
      bs.label = bs.solver.name;
    }
    s.solvers.push_back(std::move(bs));
  }
  std::map<std::string, int> seen;
  for (const auto& bi : s.instances) {
    if (seen[bi.name]++) throw ConfigError("suite: duplicate instance name '" + bi.name + "'");
  }
  seen.clear();
  for (const auto& bs : s.solvers) {
    if (seen[bs.label]++) throw ConfigError("suite: duplicate solver label '" + bs.label + "'");
  }
  if (r.has("verify")) s.verify = parse_verify(r.raw("verify"));
  if (r.has("output")) {
    detail::ObjectReader o(r.raw("output"), "output");
    s.out_dir = o.get<std::string>("dir", s.out_dir);
    o.finish();
  }
  s.slope_fit = r.get<bool>("slope_fit", false);
  r.finish();
  s.base_dir = base_dir;
  return s;
}

struct BenchmarkCell {
  std::string instance;
  std::string solver;
  bool has_report = false;
  std::string status;
  std::string error;
  double m = 0.0;
  SolveRun run;
};

struct SlopeFit {
  std::string solver;
  double slope = 0.0;
  double r_squared = 0.0;
  int points = 0;
};

struct BenchmarkResult {
  std::vector<BenchmarkCell> cells;  // instance-major order, independent of scheduling
  std::vector<SlopeFit> slopes;
  std::string table_csv;
  std::string table_txt;
  bool all_reported() const {
    for (const BenchmarkCell& c : cells) {
      if (!c.has_report) return false;
    }
    return true;
  }
  int exit_code() const { return all_reported() ? 0 : 2; }
};

namespace detail {

inline std::string fmt_g(double v) {
  if (std::isnan(v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline void render_tables(BenchmarkResult& res) {
  const std::vector<std::string> header = {"instance", "solver",    "status", "M",       "iterations", "inner_steps",
                                           "values",   "gradients", "hessians", "final_g", "final_gap"};
  std::vector<std::vector<std::string>> rows;
  for (const BenchmarkCell& c : res.cells) {
    const SolveRun& r = c.run;
    if (!c.has_report) {
      rows.push_back({c.instance, c.solver, "error", fmt_g(c.m), "-", "-", "-", "-", "-", "-", "-"});
      continue;
    }
    rows.push_back({c.instance, c.solver, c.status, fmt_g(c.m), std::to_string(r.iterations),
                    std::to_string(r.inner_steps), std::to_string(r.calls.values), std::to_string(r.calls.gradients),
                    std::to_string(r.calls.hessians), fmt_g(r.final_g), fmt_g(r.final_gap)});
  }
  std::ostringstream csv;
  for (std::size_t i = 0; i < header.size(); ++i) csv << (i ? "," : "") << header[i];
  csv << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) csv << (i ? "," : "") << row[i];
    csv << '\n';
  }
  res.table_csv = csv.str();

  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::ostringstream txt;
  const auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      txt << (i ? "  " : "") << cells[i] << std::string(width[i] - cells[i].size(), ' ');
    }
    txt << '\n';
  };
  line(header);
  for (const auto& row : rows) line(row);
  if (!res.slopes.empty()) {
    txt << "\nlog-log slope of iterations against M\n";
    for (const SlopeFit& s : res.slopes) {
      txt << "  " << s.solver << ": " << fmt_g(s.slope) << " (R^2 " << fmt_g(s.r_squared) << ", " << s.points
          << " points)\n";
    }
  }
  res.table_txt = txt.str();
}

inline std::string cell_dir_name(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
  return out;
}

}  // namespace detail

/// Runs every instance x solver cell. Cells run on `jobs` threads; each cell is deterministic
/// and results are written after all cells finish, so the outputs do not depend on jobs.
inline BenchmarkResult run_benchmark(const BenchmarkSuite& suite, int jobs = 1, const RunOptions& opts = {}) {
  BenchmarkResult res;
  const std::filesystem::path root = opts.out_dir ? *opts.out_dir : std::filesystem::path(suite.out_dir);
  for (const BenchmarkInstance& bi : suite.instances) {
    for (const BenchmarkSolver& bs : suite.solvers) {
      BenchmarkCell c;
      c.instance = bi.name;
      c.solver = bs.label;
      res.cells.push_back(std::move(c));
    }
  }
  const std::size_t n_solvers = suite.solvers.size();
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < res.cells.size(); i = next++) {
      BenchmarkCell& cell = res.cells[i];
      RunConfig cfg;
      cfg.name = cell.instance + "/" + cell.solver;
      cfg.problem = suite.instances[i / n_solvers].problem;
      cfg.x0 = suite.instances[i / n_solvers].x0;
      cfg.solver = suite.solvers[i % n_solvers].solver;
      cfg.verify = suite.verify;
      cfg.base_dir = suite.base_dir;
      RunOptions cell_opts = opts;
      cell_opts.write_files = false;
      cell_opts.out_dir.reset();
      try {
        cell.run = run_solve(cfg, cell_opts);
        cell.has_report = true;
        cell.status = cell.run.report.value("status", "");
        cell.m = cell.run.report["instance"].value("qsc_constant", 0.0);
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
    }
  };
  const int threads = std::max(1, jobs);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  if (suite.slope_fit) {
    for (const BenchmarkSolver& bs : suite.solvers) {
      std::vector<double> x, y;
      for (const BenchmarkCell& c : res.cells) {
        if (c.solver != bs.label || !c.has_report || !c.run.solver_ok || c.m <= 0.0 || c.run.iterations <= 0) continue;
        x.push_back(std::log(c.m));
        y.push_back(std::log(static_cast<double>(c.run.iterations)));
      }
      SlopeFit s;
      s.solver = bs.label;
      s.points = static_cast<int>(x.size());
      try {
        const LineFit f = fit_line(x, y);
        s.slope = f.slope;
        s.r_squared = f.r_squared;
      } catch (const InsufficientData&) {
        s.slope = std::numeric_limits<double>::quiet_NaN();
      }
      res.slopes.push_back(s);
    }
  }
  detail::render_tables(res);

  if (opts.write_files) {
    std::filesystem::create_directories(root);
    for (const BenchmarkCell& c : res.cells) {
      const std::filesystem::path dir = root / detail::cell_dir_name(c.instance) / detail::cell_dir_name(c.solver);
      std::filesystem::create_directories(dir);
      if (c.has_report) {
        detail::write_text(dir / "trace.csv", c.run.trace_csv);
        detail::write_text(dir / "report.json", c.run.report.dump(2) + "\n");
      } else {
        detail::write_text(dir / "error.txt", c.error + "\n");
      }
    }
    detail::write_text(root / "table.csv", res.table_csv);
    detail::write_text(root / "table.txt", res.table_txt);
  }
  return res;
}

}  // namespace qsc
