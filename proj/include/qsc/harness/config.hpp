#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsc/composite.hpp"
#include "qsc/data.hpp"

namespace qsc {

using Json = nlohmann::json;

inline constexpr int kConfigVersion = 1;

namespace detail {

// Reads an object field by field and rejects any key nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const Json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    return as<T>(key);
  }

  template <class T>
  std::optional<T> optional(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return as<T>(key);
  }

  template <class T>
  T required(const std::string& key) {
    if (!has(key)) throw ConfigError(where_ + ": missing required key '" + key + "'");
    return as<T>(key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
    }
  }

 private:
  template <class T>
  T as(const std::string& key) {
    const Json& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("");
      }
      return v.get<T>();
    } catch (const std::exception&) {
      throw ConfigError(where_ + "." + key + ": wrong type (" + std::string(v.type_name()) + ")");
    }
  }

  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

inline std::vector<double> number_list(const Json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + ": expected an array of numbers");
  std::vector<double> out;
  for (const Json& e : v) {
    if (!e.is_number()) throw ConfigError(where + ": expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

}  // namespace detail

struct BoxSpec {
  Json lower;  // number (broadcast) or array
  Json upper;
};

struct ProblemSpec {
  std::string kind;
  std::optional<std::string> data;  // CSV path, resolved against the config's directory
  SyntheticSpec synthetic;
  std::optional<BoxSpec> box;
  double regularization = 0.0;        // adds (w/2)||x||^2 in the problem metric
  std::optional<double> qsc_constant; // overrides the declared M (for probing the checkers)
  std::optional<Json> known_minimizer;  // "zero" or an array; skips the reference solve
  Json canonical;                     // normalized description, used for cache keys and echoes
};

struct SolverSpec {
  std::string name = "primal";  // primal | dual | accelerated | pure_newton_local
  std::string sigma_mode = "constant";
  std::optional<double> sigma;
  double sigma0 = 1.0;
  double sigma_min = 1e-12;
  double tolerance = 1e-9;
  int max_iterations = 1000;
  int max_inner = 50;
  double target_relative_gap = 0.0;
  bool diagnostics = false;
  std::optional<double> r;
  double c = 1.0;
  std::optional<double> gamma;
  std::optional<double> a0;
  bool strict = false;
  Json canonical;
};

struct VerifySpec {
  bool enabled = true;
  int samples = 1000;  // third-derivative samples
  int pairs = 200;     // point pairs for the pairwise checks
  std::uint64_t seed = 7;
  double x_scale = 1.0;
};

struct X0Spec {
  std::string mode = "zero";  // zero | point | radius
  std::vector<double> point;
  double radius = 0.0;        // ones direction scaled to this metric norm
};

struct RunConfig {
  int version = kConfigVersion;
  std::string name;
  ProblemSpec problem;
  SolverSpec solver;
  X0Spec x0;
  VerifySpec verify;
  std::string out_dir = "out";
  std::filesystem::path base_dir;  // directory of the config file
};

inline const std::set<std::string>& problem_kinds() {
  static const std::set<std::string> kinds = {"quadratic",   "softmax",        "logistic",
                                              "exponential", "matrix_scaling", "matrix_balancing"};
  return kinds;
}

inline ProblemSpec parse_problem(const Json& j, const std::string& where = "problem") {
  detail::ObjectReader r(j, where);
  ProblemSpec p;
  p.kind = r.required<std::string>("kind");
  if (!problem_kinds().count(p.kind)) throw ConfigError(where + ".kind: unknown problem kind '" + p.kind + "'");
  p.data = r.optional<std::string>("data");
  SyntheticSpec& s = p.synthetic;
  s.kind = p.kind;
  s.n = r.get<Index>("n", s.n);
  s.m = r.get<Index>("m", s.m);
  s.seed = r.get<std::uint64_t>("seed", s.seed);
  s.mu = r.get<double>("mu", s.mu);
  s.condition = r.get<double>("condition", s.condition);
  s.separable = r.get<bool>("separable", s.separable);
  s.label_noise = r.get<double>("label_noise", s.label_noise);
  s.symmetric = r.get<bool>("symmetric", s.symmetric);
  s.spread = r.get<double>("spread", s.spread);
  s.density = r.get<double>("density", s.density);
  if (s.n < 1 || s.m < 1) throw ConfigError(where + ": n and m must be >= 1");
  if (!(s.mu > 0.0)) throw ConfigError(where + ".mu must be positive");
  if (r.has("box")) {
    detail::ObjectReader br(r.raw("box"), where + ".box");
    p.box = BoxSpec{br.raw("lower"), br.raw("upper")};
    br.finish();
  }
  p.regularization = r.get<double>("regularization", 0.0);
  if (p.regularization < 0.0) throw ConfigError(where + ".regularization must be >= 0");
  p.qsc_constant = r.optional<double>("qsc_constant");
  if (r.has("known_minimizer")) {
    const Json& km = r.raw("known_minimizer");
    if (!(km == "zero" || km.is_array())) throw ConfigError(where + ".known_minimizer: expected \"zero\" or an array");
    p.known_minimizer = km;
  }
  r.finish();

  p.canonical = {{"kind", p.kind}, {"regularization", p.regularization}};
  if (p.data) {
    p.canonical["data"] = *p.data;
    if (p.kind == "softmax") p.canonical["mu"] = s.mu;
  } else {
    p.canonical["generator"] = {{"n", s.n},           {"m", s.m},
                                {"seed", s.seed},     {"mu", s.mu},
                                {"condition", s.condition}, {"separable", s.separable},
                                {"label_noise", s.label_noise}, {"symmetric", s.symmetric},
                                {"spread", s.spread}, {"density", s.density}};
  }
  if (p.box) p.canonical["box"] = {{"lower", p.box->lower}, {"upper", p.box->upper}};
  if (p.qsc_constant) p.canonical["qsc_constant"] = *p.qsc_constant;
  if (p.known_minimizer) p.canonical["known_minimizer"] = *p.known_minimizer;
  return p;
}

inline SolverSpec parse_solver(const Json& j, const std::string& where = "solver") {
  detail::ObjectReader r(j, where);
  SolverSpec s;
  s.name = r.get<std::string>("name", s.name);
  if (s.name != "primal" && s.name != "dual" && s.name != "accelerated" && s.name != "pure_newton_local") {
    throw ConfigError(where + ".name: unknown solver '" + s.name + "'");
  }
  if (r.has("sigma")) {
    const Json& v = r.raw("sigma");
    if (v == "adaptive") {
      s.sigma_mode = "adaptive";
    } else if (v.is_number()) {
      s.sigma = v.get<double>();
      if (*s.sigma < 0.0) throw ConfigError(where + ".sigma must be >= 0");
    } else {
      throw ConfigError(where + ".sigma: expected a number or \"adaptive\"");
    }
  }
  s.sigma0 = r.get<double>("sigma0", s.sigma0);
  s.sigma_min = r.get<double>("sigma_min", s.sigma_min);
  s.tolerance = r.get<double>("tolerance", s.tolerance);
  s.max_iterations = r.get<int>("max_iterations", s.max_iterations);
  s.max_inner = r.get<int>("max_inner", s.max_inner);
  s.target_relative_gap = r.get<double>("target_relative_gap", s.target_relative_gap);
  s.diagnostics = r.get<bool>("diagnostics", s.diagnostics);
  s.r = r.optional<double>("R");
  s.c = r.get<double>("c", s.c);
  s.gamma = r.optional<double>("gamma");
  s.a0 = r.optional<double>("A0");
  s.strict = r.get<bool>("strict", s.strict);
  r.finish();
  if (!(s.tolerance > 0.0)) throw ConfigError(where + ".tolerance must be positive");
  if (s.max_iterations < 0 || s.max_inner < 1) throw ConfigError(where + ": iteration limits out of range");
  if (!(s.sigma0 > 0.0) || s.sigma_min < 0.0) throw ConfigError(where + ": need sigma0 > 0 and sigma_min >= 0");
  if (!(s.c > 0.0)) throw ConfigError(where + ".c must be positive");
  s.canonical = j;
  return s;
}

inline X0Spec parse_x0(const Json& j) {
  X0Spec x;
  if (j == "zero") return x;
  if (j.is_array()) {
    x.mode = "point";
    x.point = detail::number_list(j, "x0");
    return x;
  }
  detail::ObjectReader r(j, "x0");
  x.mode = "radius";
  x.radius = r.required<double>("radius");
  r.finish();
  if (!(x.radius >= 0.0)) throw ConfigError("x0.radius must be >= 0");
  return x;
}

inline VerifySpec parse_verify(const Json& j) {
  detail::ObjectReader r(j, "verify");
  VerifySpec v;
  v.enabled = r.get<bool>("enabled", v.enabled);
  v.samples = r.get<int>("samples", v.samples);
  v.pairs = r.get<int>("pairs", v.pairs);
  v.seed = r.get<std::uint64_t>("seed", v.seed);
  v.x_scale = r.get<double>("x_scale", v.x_scale);
  r.finish();
  if (v.samples < 0 || v.pairs < 0) throw ConfigError("verify: counts must be >= 0");
  return v;
}

inline RunConfig parse_run_config(const Json& j, const std::filesystem::path& base_dir = {}) {
  detail::ObjectReader r(j, "config");
  RunConfig c;
  c.version = r.required<int>("version");
  if (c.version != kConfigVersion) {
    throw ConfigError("config: unsupported version " + std::to_string(c.version));
  }
  c.name = r.get<std::string>("name", "");
  c.problem = parse_problem(r.required<Json>("problem"));
  c.solver = r.has("solver") ? parse_solver(r.raw("solver")) : parse_solver(Json::object());
  if (r.has("x0")) c.x0 = parse_x0(r.raw("x0"));
  if (r.has("verify")) c.verify = parse_verify(r.raw("verify"));
  if (r.has("output")) {
    detail::ObjectReader o(r.raw("output"), "output");
    c.out_dir = o.get<std::string>("dir", c.out_dir);
    o.finish();
  }
  r.finish();
  c.base_dir = base_dir;
  return c;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline RunConfig load_run_config(const std::string& path) {
  return parse_run_config(read_json_file(path), std::filesystem::path(path).parent_path());
}

/// The zoo instance plus its composite term.
struct Instance {
  Problem problem;
  CompositeTerm psi;
  std::string data_digest;  // raw file contents when the instance came from disk
};

namespace detail {

inline Vector bound_vector(const Json& v, Index n, const std::string& where) {
  if (v.is_number()) return Vector::Constant(n, v.get<double>());
  const std::vector<double> list = number_list(v, where);
  if (static_cast<Index>(list.size()) != n) {
    throw ConfigError(where + ": expected " + std::to_string(n) + " entries, got " + std::to_string(list.size()));
  }
  return Eigen::Map<const Vector>(list.data(), n);
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + p.string() + "'", 0);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace detail

inline Instance build_instance(const ProblemSpec& spec, const std::filesystem::path& base_dir = {}) {
  Instance inst{make_quadratic(Matrix::Identity(1, 1), Vector::Zero(1)), CompositeTerm::zero(), {}};
  if (spec.data) {
    const std::filesystem::path path = base_dir.empty() ? std::filesystem::path(*spec.data) : base_dir / *spec.data;
    inst.data_digest = detail::slurp(path);
    std::istringstream in(inst.data_digest);
    if (spec.kind == "matrix_scaling" || spec.kind == "matrix_balancing") {
      const Matrix a = parse_square_matrix(in);
      inst.problem = spec.kind == "matrix_scaling" ? make_matrix_scaling(a) : make_matrix_balancing(a);
    } else {
      const DesignData d = parse_design_matrix(in);
      if (spec.kind == "quadratic") {
        // Rows hold A and the last column holds b.
        if (d.rows.rows() != d.rows.cols()) throw DimensionError("quadratic data must be n x (n + 1)");
        inst.problem = make_quadratic(d.rows, d.offsets);
      } else if (spec.kind == "softmax") {
        inst.problem = make_softmax(d.rows, d.offsets, spec.synthetic.mu);
      } else {
        inst.problem = make_separable(d.rows, d.offsets,
                                      spec.kind == "logistic" ? LossKind::kLogistic : LossKind::kExponential);
      }
    }
  } else {
    inst.problem = generate_synthetic(spec.synthetic);
  }
  if (spec.regularization > 0.0) inst.problem = add_strong_convexity(inst.problem, spec.regularization);
  if (spec.qsc_constant) {
    inst.problem.oracle = inst.problem.oracle.with_qsc_constant(*spec.qsc_constant);
  }
  if (spec.box) {
    const Index n = inst.problem.oracle.dimension();
    try {
      inst.psi = CompositeTerm::box(detail::bound_vector(spec.box->lower, n, "problem.box.lower"),
                                    detail::bound_vector(spec.box->upper, n, "problem.box.upper"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("problem.box: ") + e.what());
    }
  }
  return inst;
}

inline PrimalVector build_x0(const X0Spec& spec, const Instance& inst) {
  const Index n = inst.problem.oracle.dimension();
  PrimalVector x = Vector::Zero(n);
  if (spec.mode == "point") {
    if (static_cast<Index>(spec.point.size()) != n) {
      throw ConfigError("x0: expected " + std::to_string(n) + " entries, got " + std::to_string(spec.point.size()));
    }
    x = Eigen::Map<const Vector>(spec.point.data(), n);
  } else if (spec.mode == "radius") {
    x = Vector::Ones(n);
    x *= spec.radius / inst.problem.oracle.metric().primal_norm(x);
  }
  x = inst.psi.project(x);
  return x;
}

}  // namespace qsc
