#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "qsc/errors.hpp"

namespace qsc {

class InsufficientData : public Error {
 public:
  using Error::Error;
};

struct LinearRateFit {
  double slope = 0.0;            // d ln(gap) / dk over the window
  double r_squared = 0.0;
  double implied_factor = 0.0;   // -1/slope
  std::size_t window_begin = 0;  // [begin, end) into the gap sequence
  std::size_t window_end = 0;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares y = intercept + slope * x.
inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw InsufficientData("line fit needs at least two points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw InsufficientData("line fit needs distinct abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

/// Fits ln(gap_k) against k over the linear phase. The final quadratic burst (the longest
/// suffix whose successive gap ratios are below burst_ratio) is left out. When that leaves
/// fewer than three points, the whole sequence is used.
inline LinearRateFit fit_linear_rate(const std::vector<double>& gaps, double burst_ratio = 0.1,
                                     std::size_t min_points = 10) {
  std::size_t usable = 0;
  while (usable < gaps.size() && gaps[usable] > 0.0 && std::isfinite(gaps[usable])) ++usable;
  if (usable < min_points) throw InsufficientData("rate fit needs at least " + std::to_string(min_points) +
                                                  " positive gaps, got " + std::to_string(usable));
  std::size_t end = usable;
  while (end >= 2 && gaps[end - 1] / gaps[end - 2] < burst_ratio) --end;
  if (end < 3) end = usable;
  std::vector<double> k, y;
  for (std::size_t i = 0; i < end; ++i) {
    k.push_back(static_cast<double>(i));
    y.push_back(std::log(gaps[i]));
  }
  const LineFit line = fit_line(k, y);
  LinearRateFit out;
  out.slope = line.slope;
  out.r_squared = line.r_squared;
  out.implied_factor = line.slope < 0.0 ? -1.0 / line.slope : std::numeric_limits<double>::infinity();
  out.window_begin = 0;
  out.window_end = end;
  return out;
}

/// Exponent p of gap_{k+1} ~ C gap_k^p fitted on the last `points` gaps (log-log least squares).
inline double fit_local_order(const std::vector<double>& gaps, std::size_t points = 3) {
  if (gaps.size() < points || points < 3) throw InsufficientData("order fit needs at least three gaps");
  std::vector<double> x, y;
  for (std::size_t i = gaps.size() - points; i + 1 < gaps.size(); ++i) {
    if (!(gaps[i] > 0.0 && gaps[i + 1] > 0.0)) throw InsufficientData("order fit needs positive gaps");
    x.push_back(std::log(gaps[i]));
    y.push_back(std::log(gaps[i + 1]));
  }
  return fit_line(x, y).slope;
}

}  // namespace qsc
