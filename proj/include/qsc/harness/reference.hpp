#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <thread>

#include "qsc/harness/config.hpp"
#include "qsc/primal_newton.hpp"

namespace qsc {

class ReferenceNotConverged : public Error {
 public:
  ReferenceNotConverged(const std::string& what, double last_g) : Error(what), last_g_(last_g) {}
  double last_g() const noexcept { return last_g_; }

 private:
  double last_g_;
};

struct Reference {
  PrimalVector x;
  double value = 0.0;
  double g = 0.0;
  int iterations = 0;
  bool known = false;       // supplied analytically, not solved for
  bool from_cache = false;
  std::string key;
};

struct ReferenceOptions {
  double tolerance = 1e-12;
  double accept = 1e-9;  // a stalled run is still usable below this g
  int max_iterations = 10000;
};

inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

inline double parse_hex_double(const std::string& s) { return std::strtod(s.c_str(), nullptr); }

/// Adaptive primal Newton to g <= tolerance. Returns the iterate with the smallest g.
inline Reference compute_reference(const Instance& inst, const PrimalVector& x0, const ReferenceOptions& opts = {}) {
  const SmoothOracle& o = inst.problem.oracle;
  PrimalConfig cfg = PrimalConfig::adaptive();
  cfg.grad_tolerance = opts.tolerance;
  cfg.max_iterations = opts.max_iterations;
  cfg.stall_iterations = 50;
  const PrimalResult run = solve_primal(o, inst.psi, x0, cfg);
  std::size_t best = 0;
  for (std::size_t i = 0; i < run.trace.size(); ++i) {
    if (run.trace[i].g < run.trace[best].g) best = i;
  }
  Reference ref;
  ref.x = run.iterates[best];
  ref.value = run.trace[best].value;
  ref.g = run.trace[best].g;
  ref.iterations = run.iterations();
  if (!(ref.g <= opts.accept)) {
    throw ReferenceNotConverged("reference solve stopped (" + to_string(run.status) + ") with g = " +
                                    std::to_string(ref.g),
                                ref.g);
  }
  return ref;
}

/// A supplied minimizer is accepted only if its subgradient norm is tiny.
inline Reference known_reference(const Instance& inst, const PrimalVector& x_star, double accept = 1e-10) {
  const SmoothOracle& o = inst.problem.oracle;
  const Evaluation e = o.evaluate(x_star, Order::kGradient);
  Reference ref;
  ref.x = x_star;
  ref.value = e.value;
  ref.g = o.metric().dual_norm(inst.psi.least_subgradient(x_star, e.gradient));
  ref.known = true;
  if (!(ref.g <= accept) || !inst.psi.contains(x_star)) {
    throw ReferenceNotConverged("supplied minimizer is not stationary (g = " + std::to_string(ref.g) + ")", ref.g);
  }
  return ref;
}

inline std::filesystem::path reference_cache_dir() {
  if (const char* env = std::getenv("QSC_CACHE_DIR"); env && *env) return env;
  return std::filesystem::temp_directory_path() / "qsc-reference-cache";
}

/// Content address: the canonical instance description, the data file bytes and x0.
inline std::string reference_key(const ProblemSpec& spec, const Instance& inst, const PrimalVector& x0,
                                 const ReferenceOptions& opts) {
  Json j = spec.canonical;
  j["x0"] = Json::array();
  for (Index i = 0; i < x0.size(); ++i) j["x0"].push_back(hex_double(x0[i]));
  j["tolerance"] = hex_double(opts.tolerance);
  j["max_iterations"] = opts.max_iterations;
  std::uint64_t h = fnv1a(j.dump());
  h = fnv1a(inst.data_digest, h);
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// compute_reference behind an on-disk cache. A hit is bit-identical to the stored solve.
inline Reference cached_reference(const ProblemSpec& spec, const Instance& inst, const PrimalVector& x0,
                                  const ReferenceOptions& opts = {},
                                  std::optional<std::filesystem::path> dir = std::nullopt) {
  if (spec.known_minimizer) {
    const Index n = inst.problem.oracle.dimension();
    PrimalVector xs = Vector::Zero(n);
    if (spec.known_minimizer->is_array()) {
      const auto list = detail::number_list(*spec.known_minimizer, "problem.known_minimizer");
      if (static_cast<Index>(list.size()) != n) throw ConfigError("problem.known_minimizer: wrong length");
      xs = Eigen::Map<const Vector>(list.data(), n);
    }
    return known_reference(inst, xs);
  }
  const std::filesystem::path root = dir.value_or(reference_cache_dir());
  const std::string key = reference_key(spec, inst, x0, opts);
  const std::filesystem::path file = root / (key + ".json");
  if (std::ifstream in(file); in) {
    try {
      const Json j = Json::parse(in);
      Reference ref;
      ref.key = key;
      ref.from_cache = true;
      ref.value = parse_hex_double(j.at("value").get<std::string>());
      ref.g = parse_hex_double(j.at("g").get<std::string>());
      ref.iterations = j.at("iterations").get<int>();
      const auto& xs = j.at("x");
      ref.x.resize(static_cast<Index>(xs.size()));
      for (std::size_t i = 0; i < xs.size(); ++i) ref.x[static_cast<Index>(i)] = parse_hex_double(xs[i].get<std::string>());
      if (ref.x.size() == inst.problem.oracle.dimension()) return ref;
    } catch (const std::exception&) {
      // A damaged entry is recomputed and overwritten.
    }
  }
  Reference ref = compute_reference(inst, x0, opts);
  ref.key = key;
  Json j{{"key", key}, {"value", hex_double(ref.value)}, {"g", hex_double(ref.g)}, {"iterations", ref.iterations}};
  j["x"] = Json::array();
  for (Index i = 0; i < ref.x.size(); ++i) j["x"].push_back(hex_double(ref.x[i]));
  std::error_code ec;
  std::filesystem::create_directories(root, ec);
  // Concurrent writers of the same key each use their own temporary file.
  const std::filesystem::path tmp =
      root / (key + ".json." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) + ".tmp");
  {
    std::ofstream out(tmp);
    if (out) out << j.dump() << '\n';
  }
  std::filesystem::rename(tmp, file, ec);
  return ref;
}

}  // namespace qsc
