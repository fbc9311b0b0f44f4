#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "qsc/accelerated_newton.hpp"

namespace qsc {

/// Shortest round-trip decimal; NaN becomes an empty field.
inline std::string csv_number(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_primal_trace(std::ostream& out, const std::vector<PrimalTraceRow>& trace) {
  out << "k,F,g,sigma,beta,step_len,progress,retries,lambda,eta\n";
  for (const PrimalTraceRow& r : trace) {
    out << r.k << ',' << csv_number(r.value) << ',' << csv_number(r.g) << ',' << csv_number(r.sigma) << ','
        << csv_number(r.beta) << ',' << csv_number(r.step_length) << ',' << csv_number(r.progress) << ','
        << r.retries << ',' << csv_number(r.lambda) << ',' << csv_number(r.eta) << '\n';
  }
}

/// One line per inner step: outer columns repeat, then t, ||s_t||_* and the threshold.
inline void write_dual_trace(std::ostream& out, const std::vector<DualTraceRow>& trace) {
  out << "k,g,m,a,inner_iterations,g_next,F_next,t,s_norm,threshold\n";
  for (const DualTraceRow& r : trace) {
    for (std::size_t t = 1; t < r.inner_residuals.size(); ++t) {
      out << r.k << ',' << csv_number(r.g) << ',' << csv_number(r.m) << ',' << csv_number(r.a) << ','
          << r.inner_iterations << ',' << csv_number(r.g_next) << ',' << csv_number(r.value_next) << ',' << t << ','
          << csv_number(r.inner_residuals[t]) << ',' << csv_number(r.threshold) << '\n';
    }
  }
}

inline void write_accel_trace(std::ostream& out, const std::vector<AccelTraceRow>& trace) {
  out << "k,A,a,nu,inner_outer,inner_steps,inner_g,F,dist_v,dist_x\n";
  for (const AccelTraceRow& r : trace) {
    out << r.k << ',' << csv_number(r.big_a) << ',' << csv_number(r.a) << ',' << csv_number(r.nu) << ','
        << r.inner_outer << ',' << r.inner_inner << ',' << csv_number(r.inner_g) << ',' << csv_number(r.value)
        << ',' << csv_number(r.dist_v) << ',' << csv_number(r.dist_x) << '\n';
  }
}

}  // namespace qsc
