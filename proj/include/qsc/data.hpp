#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qsc/problems.hpp"

namespace qsc {

struct DesignData {
  Matrix rows;     // m x n, row i is a_i
  Vector offsets;  // b^(i)
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Numeric CSV rows; blank lines and '#' comments are skipped. Every value must be finite.
inline std::vector<std::vector<double>> read_numeric_csv(std::istream& in) {
  std::vector<std::vector<double>> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    std::vector<double> values;
    std::size_t pos = 0;
    while (pos <= body.size()) {
      const std::size_t comma = body.find(',', pos);
      const std::string_view token = trim(body.substr(pos, comma == std::string_view::npos ? body.npos : comma - pos));
      if (token.empty()) throw ParseError("empty field", line_no);
      double v = 0.0;
      const char* begin = token.data();
      const char* end = token.data() + token.size();
      if (*begin == '+') ++begin;
      const auto [ptr, ec] = std::from_chars(begin, end, v);
      if (ec != std::errc() || ptr != end) throw ParseError("not a number: '" + std::string(token) + "'", line_no);
      if (!std::isfinite(v)) throw ParseError("non-finite value '" + std::string(token) + "'", line_no);
      values.push_back(v);
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (!out.empty() && values.size() != out.front().size()) {
      throw DimensionError("line " + std::to_string(line_no) + ": expected " + std::to_string(out.front().size()) +
                           " columns, got " + std::to_string(values.size()));
    }
    out.push_back(std::move(values));
  }
  if (out.empty()) throw ParseError("no data rows", 0);
  return out;
}

inline std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'", 0);
  return in;
}

}  // namespace detail

/// Each line holds a_i followed by the offset b^(i).
inline DesignData parse_design_matrix(std::istream& in) {
  const auto table = detail::read_numeric_csv(in);
  const std::size_t cols = table.front().size();
  if (cols < 2) throw DimensionError("design matrix needs at least one feature column and the offset column");
  DesignData d{Matrix(table.size(), cols - 1), Vector(table.size())};
  for (std::size_t i = 0; i < table.size(); ++i) {
    for (std::size_t j = 0; j + 1 < cols; ++j) d.rows(i, j) = table[i][j];
    d.offsets[i] = table[i][cols - 1];
  }
  return d;
}

inline DesignData load_design_matrix(const std::string& path) {
  auto in = detail::open_or_throw(path);
  return parse_design_matrix(in);
}

/// n lines of n non-negative values.
inline Matrix parse_square_matrix(std::istream& in) {
  const auto table = detail::read_numeric_csv(in);
  const std::size_t n = table.size();
  if (table.front().size() != n) throw DimensionError("matrix file must be square");
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (table[i][j] < 0.0) throw ParseError("negative entry", static_cast<int>(i + 1));
      a(i, j) = table[i][j];
    }
  }
  return a;
}

inline Matrix load_square_matrix(const std::string& path) {
  auto in = detail::open_or_throw(path);
  return parse_square_matrix(in);
}

/// Knobs for the seeded generators. Which fields matter depends on the kind.
struct SyntheticSpec {
  std::string kind = "logistic";  // quadratic | softmax | logistic | exponential | matrix_scaling | matrix_balancing
  Index n = 10;
  Index m = 50;
  std::uint64_t seed = 1;
  double mu = 1.0;            // softmax smoothing
  double condition = 10.0;    // quadratic eigenvalue spread
  bool separable = false;     // separable labels for logistic/exponential
  double label_noise = 1.0;   // noise added to the planted margin when not separable
  bool symmetric = false;     // softmax rows come in +-a pairs, which puts the minimizer at 0
  double spread = 0.0;        // matrix problems: log-normal row/column mass spread
  double density = 1.0;       // matrix problems: fraction of non-zero entries
};

namespace detail {

inline Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix a(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) a(i, j) = normal(rng);
  }
  return a;
}

inline bool spans_space(const Matrix& rows) {
  Eigen::LLT<Matrix> llt(rows.transpose() * rows);
  if (llt.info() != Eigen::Success) return false;
  const Vector d = llt.matrixLLT().diagonal();
  return d.minCoeff() > 1e-6 * d.maxCoeff();
}

inline Matrix draw_spanning_rows(Index m, Index n, std::mt19937_64& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    Matrix rows = gaussian_matrix(m, n, rng);
    if (spans_space(rows)) return rows;
  }
  throw std::invalid_argument("generator: rows never spanned the space (is m < n?)");
}

}  // namespace detail

inline Problem generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n < 1 || spec.m < 1) throw std::invalid_argument("generate_synthetic: n and m must be >= 1");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;

  if (spec.kind == "quadratic") {
    const Matrix g = detail::gaussian_matrix(spec.n, spec.n, rng);
    const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
    Vector eig(spec.n);
    for (Index i = 0; i < spec.n; ++i) {
      const double frac = spec.n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(spec.n - 1);
      eig[i] = std::pow(spec.condition, frac);
    }
    const Matrix a = q * eig.asDiagonal() * q.transpose();
    Vector b(spec.n);
    for (Index i = 0; i < spec.n; ++i) b[i] = normal(rng);
    return make_quadratic(symmetrized(a), b);
  }
  if (spec.kind == "softmax") {
    if (spec.symmetric) {
      const Index half = std::max<Index>(1, spec.m / 2);
      const Matrix base = detail::draw_spanning_rows(half, spec.n, rng);
      Vector base_off(half);
      for (Index i = 0; i < half; ++i) base_off[i] = normal(rng);
      Matrix rows(2 * half, spec.n);
      rows << base, -base;
      Vector off(2 * half);
      off << base_off, base_off;
      return make_softmax(rows, off, spec.mu);
    }
    const Matrix rows = detail::draw_spanning_rows(spec.m, spec.n, rng);
    Vector off(spec.m);
    for (Index i = 0; i < spec.m; ++i) off[i] = normal(rng);
    return make_softmax(rows, off, spec.mu);
  }
  if (spec.kind == "logistic" || spec.kind == "exponential") {
    const Matrix features = detail::draw_spanning_rows(spec.m, spec.n, rng);
    Vector planted(spec.n);
    for (Index j = 0; j < spec.n; ++j) planted[j] = normal(rng) / std::sqrt(static_cast<double>(spec.n));
    Matrix rows(spec.m, spec.n);
    for (Index i = 0; i < spec.m; ++i) {
      double margin = features.row(i).dot(planted);
      if (!spec.separable) margin += spec.label_noise * normal(rng);
      const double label = margin >= 0.0 ? 1.0 : -1.0;
      rows.row(i) = -label * features.row(i);
    }
    const LossKind loss = spec.kind == "logistic" ? LossKind::kLogistic : LossKind::kExponential;
    return make_separable(rows, Vector::Zero(spec.m), loss);
  }
  if (spec.kind == "matrix_scaling" || spec.kind == "matrix_balancing") {
    Vector row_mass(spec.n), col_mass(spec.n);
    for (Index i = 0; i < spec.n; ++i) row_mass[i] = std::exp(spec.spread * normal(rng));
    for (Index j = 0; j < spec.n; ++j) col_mass[j] = std::exp(spec.spread * normal(rng));
    Matrix a(spec.n, spec.n);
    for (Index j = 0; j < spec.n; ++j) {
      for (Index i = 0; i < spec.n; ++i) {
        const double keep = uniform(rng);
        const double value = uniform(rng) * row_mass[i] * col_mass[j];
        a(i, j) = keep < spec.density ? value : 0.0;
      }
    }
    return spec.kind == "matrix_scaling" ? make_matrix_scaling(a) : make_matrix_balancing(a);
  }
  throw std::invalid_argument("generate_synthetic: unknown kind '" + spec.kind + "'");
}

}  // namespace qsc
