#pragma once

// Experiment configuration, result records and file output.

#include <cfloat>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include "json.hpp"

#include "evtrig/codesign.hpp"
#include "evtrig/errors.hpp"
#include "evtrig/model.hpp"
#include "evtrig/policy.hpp"
#include "evtrig/simulator.hpp"

namespace evtrig {

using json = nlohmann::ordered_json;

struct DiscreteNoise {
  std::vector<double> support;
  std::vector<double> probs;
};

struct GridConfig {
  double k_sigma = kDefaultKSigma;
  std::size_t points = kDefaultPoints;
};

struct IterationConfig {
  double tol = 1e-6;
  int max_iter = 100;
  double alpha0 = 0.1;
};

struct ExperimentConfig {
  double a = 1.0;
  double lambda = 0.5;
  int horizon = 1;
  std::optional<DensitySpec> noise;
  std::optional<DensitySpec> init;
  std::optional<DiscreteNoise> discrete;  // oracle-only noise made of exact atoms
  double init_mean = 0.0;
  GridConfig grid;
  IterationConfig iteration;
  SimConfig mc;
  std::vector<double> sweep_mu;

  /// Problem for the configured noise; `override_noise` replaces noise and init.
  ProblemSpec problem_spec(const std::optional<DensitySpec>& override_noise = std::nullopt) const {
    ProblemSpec s;
    s.a = a;
    s.lambda = lambda;
    s.horizon = horizon;
    s.init_mean = init_mean;
    if (override_noise) {
      s.noise = *override_noise;
      s.init = *override_noise;
      return s;
    }
    if (!noise) throw ConfigError(discrete ? "noise: discrete noise is only accepted by the oracle command"
                                           : "noise: required");
    s.noise = *noise;
    s.init = init ? *init : *noise;
    return s;
  }
};

namespace detail {

inline void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : obj.items())
    if (!ok.count(item.key())) throw ConfigError(where + item.key() + ": unknown key");
}

inline const json& require_object(const json& v, const std::string& key) {
  if (!v.is_object()) throw ConfigError(key + ": expected an object");
  return v;
}

inline double get_number(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError(key + ": expected a number, got " + v.dump());
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(key + ": must be finite");
  return x;
}

inline std::int64_t get_integer(const json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError(key + ": expected an integer, got " + v.dump());
  return v.get<std::int64_t>();
}

inline std::vector<double> get_numbers(const json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError(key + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(get_number(v[i], key + "[" + std::to_string(i) + "]"));
  return out;
}

// Two numeric columns (abscissa, value) separated by commas or whitespace;
// blank lines, '#' comments and a non-numeric header line are skipped.
inline TabulatedSpec read_tabulated_file(const std::filesystem::path& path, const std::string& key) {
  std::ifstream in(path);
  if (!in) throw ConfigError(key + ": cannot open " + path.string());
  TabulatedSpec t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    for (char& c : line)
      if (c == ',' || c == ';' || c == '\t') c = ' ';
    std::istringstream ss(line);
    double x = 0.0, y = 0.0;
    if (!(ss >> x)) {
      if (line.find_first_not_of(' ') == std::string::npos || (lineno == 1 && t.abscissae.empty())) continue;
      throw ConfigError(key + ": " + path.string() + ":" + std::to_string(lineno) + ": expected two numbers");
    }
    if (!(ss >> y)) throw ConfigError(key + ": " + path.string() + ":" + std::to_string(lineno) + ": expected two numbers");
    t.abscissae.push_back(x);
    t.values.push_back(y);
  }
  return t;
}

inline DensitySpec checked(DensitySpec spec, const std::string& key) {
  try {
    validate(spec);
  } catch (const std::exception& e) {
    throw ConfigError(key + ": " + e.what());
  }
  return spec;
}

inline DensitySpec parse_density(const json& v, const std::string& key, const std::filesystem::path& base,
                                 std::optional<DiscreteNoise>* discrete) {
  require_object(v, key);
  if (v.size() != 1) throw ConfigError(key + ": expected exactly one of mu, mixture, tabulated" +
                                       std::string(discrete ? ", discrete" : ""));
  const auto& [kind, body] = *v.items().begin();
  const std::string sub = key + "." + kind;
  if (kind == "mu") {
    const double mu = get_number(body, sub);
    if (!(mu >= 0.0 && mu < 1.0)) throw ConfigError(sub + ": must lie in [0, 1)");
    return make_bimodal_mixture(mu);
  }
  if (kind == "mixture") {
    require_object(body, sub);
    reject_unknown(body, sub + ".", {"weights", "means", "sigmas"});
    for (const char* f : {"weights", "means", "sigmas"})
      if (!body.contains(f)) throw ConfigError(sub + "." + f + ": required");
    return checked(GaussianMixture{get_numbers(body["weights"], sub + ".weights"), get_numbers(body["means"], sub + ".means"),
                                   get_numbers(body["sigmas"], sub + ".sigmas")},
                   sub);
  }
  if (kind == "tabulated") {
    if (body.is_string()) {
      std::filesystem::path p = body.get<std::string>();
      if (p.is_relative()) p = base / p;
      return checked(read_tabulated_file(p, sub), sub);
    }
    require_object(body, sub);
    reject_unknown(body, sub + ".", {"abscissae", "values"});
    for (const char* f : {"abscissae", "values"})
      if (!body.contains(f)) throw ConfigError(sub + "." + f + ": required");
    return checked(TabulatedSpec{get_numbers(body["abscissae"], sub + ".abscissae"), get_numbers(body["values"], sub + ".values")},
                   sub);
  }
  if (kind == "discrete" && discrete) {
    require_object(body, sub);
    reject_unknown(body, sub + ".", {"support", "probs"});
    for (const char* f : {"support", "probs"})
      if (!body.contains(f)) throw ConfigError(sub + "." + f + ": required");
    DiscreteNoise d{get_numbers(body["support"], sub + ".support"), get_numbers(body["probs"], sub + ".probs")};
    if (d.support.empty() || d.support.size() != d.probs.size())
      throw ConfigError(sub + ": support and probs must have equal non-zero length");
    *discrete = std::move(d);
    return DensitySpec{};
  }
  throw ConfigError(sub + ": unknown noise kind");
}

inline std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) line += text[i] == '\n' ? 1 : 0;
  return line;
}

}  // namespace detail

/// Parses a configuration document. Relative tabulated-density paths are
/// resolved against `base`.
inline ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base = ".") {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("line " + std::to_string(detail::line_of_offset(text, e.byte)) + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  detail::reject_unknown(doc, "",
                         {"a", "lambda", "horizon", "noise", "init", "init_mean", "grid", "iteration", "mc", "sweep"});
  ExperimentConfig c;
  if (doc.contains("a")) c.a = detail::get_number(doc["a"], "a");
  if (c.a == 0.0) throw ConfigError("a: must be non-zero");
  if (doc.contains("lambda")) c.lambda = detail::get_number(doc["lambda"], "lambda");
  if (c.lambda < 0.0) throw ConfigError("lambda: must be >= 0");
  if (doc.contains("horizon")) {
    const auto n = detail::get_integer(doc["horizon"], "horizon");
    if (n < 1 || n > 10000) throw ConfigError("horizon: must lie in [1, 10000]");
    c.horizon = static_cast<int>(n);
  }
  if (doc.contains("noise")) {
    DensitySpec d = detail::parse_density(doc["noise"], "noise", base, &c.discrete);
    if (!c.discrete) c.noise = std::move(d);
  }
  if (doc.contains("init")) c.init = detail::parse_density(doc["init"], "init", base, nullptr);
  if (doc.contains("init_mean")) c.init_mean = detail::get_number(doc["init_mean"], "init_mean");
  if (doc.contains("grid")) {
    const json& g = detail::require_object(doc["grid"], "grid");
    detail::reject_unknown(g, "grid.", {"k_sigma", "points"});
    if (g.contains("k_sigma")) c.grid.k_sigma = detail::get_number(g["k_sigma"], "grid.k_sigma");
    if (c.grid.k_sigma < 4.0) throw ConfigError("grid.k_sigma: must be >= 4");
    if (g.contains("points")) {
      const auto m = detail::get_integer(g["points"], "grid.points");
      if (m < 3 || m % 2 == 0) throw ConfigError("grid.points: must be odd and >= 3");
      c.grid.points = static_cast<std::size_t>(m);
    }
  }
  if (doc.contains("iteration")) {
    const json& it = detail::require_object(doc["iteration"], "iteration");
    detail::reject_unknown(it, "iteration.", {"tol", "max_iter", "alpha0"});
    if (it.contains("tol")) c.iteration.tol = detail::get_number(it["tol"], "iteration.tol");
    if (!(c.iteration.tol > 0.0)) throw ConfigError("iteration.tol: must be positive");
    if (it.contains("max_iter")) {
      const auto m = detail::get_integer(it["max_iter"], "iteration.max_iter");
      if (m < 1 || m > 1000000) throw ConfigError("iteration.max_iter: must lie in [1, 1000000]");
      c.iteration.max_iter = static_cast<int>(m);
    }
    if (it.contains("alpha0")) c.iteration.alpha0 = detail::get_number(it["alpha0"], "iteration.alpha0");
  }
  if (doc.contains("mc")) {
    const json& mc = detail::require_object(doc["mc"], "mc");
    detail::reject_unknown(mc, "mc.", {"samples", "seed"});
    if (mc.contains("samples")) {
      const auto s = detail::get_integer(mc["samples"], "mc.samples");
      if (s < 1) throw ConfigError("mc.samples: must be >= 1");
      c.mc.samples = static_cast<std::uint64_t>(s);
    }
    if (mc.contains("seed")) {
      if (!mc["seed"].is_number_unsigned()) throw ConfigError("mc.seed: expected a non-negative integer");
      c.mc.seed = mc["seed"].get<std::uint64_t>();
    }
  }
  if (doc.contains("sweep")) {
    const json& sw = detail::require_object(doc["sweep"], "sweep");
    detail::reject_unknown(sw, "sweep.", {"mu"});
    if (sw.contains("mu")) c.sweep_mu = detail::get_numbers(sw["mu"], "sweep.mu");
    for (std::size_t i = 0; i < c.sweep_mu.size(); ++i)
      if (!(c.sweep_mu[i] >= 0.0 && c.sweep_mu[i] < 1.0))
        throw ConfigError("sweep.mu[" + std::to_string(i) + "]: must lie in [0, 1)");
  }
  if (c.init && !c.noise) throw ConfigError("init: given without a continuous noise");
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

/// Builds the problem on its automatic grid, reporting bad values as config errors.
inline Problem make_problem(const ProblemSpec& spec, const GridConfig& grid) {
  try {
    return Problem::with_auto_grid(spec, grid.k_sigma, grid.points);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("problem: ") + e.what());
  }
}

/// Writes via a temporary file in the same directory followed by a rename.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// ---- JSON encodings ---------------------------------------------------------

inline json density_to_json(const DensitySpec& d) {
  return std::visit(detail::overloaded{[](const GaussianMixture& m) {
                                         return json{{"mixture", {{"weights", m.weights}, {"means", m.means}, {"sigmas", m.sigmas}}}};
                                       },
                                       [](const TabulatedSpec& t) {
                                         return json{{"tabulated", {{"abscissae", t.abscissae}, {"values", t.values}}}};
                                       }},
                    d);
}

inline json spec_to_json(const ProblemSpec& s) {
  return json{{"a", s.a},         {"lambda", s.lambda},           {"horizon", s.horizon},
              {"noise", density_to_json(s.noise)}, {"init", density_to_json(s.init)}, {"init_mean", s.init_mean}};
}

inline json alpha_to_json(const AlphaMap& alpha) {
  json out = json::array();
  for (int k = 0; k < alpha.horizon(); ++k)
    for (int tau = -1; tau < k; ++tau) out.push_back({{"k", k}, {"tau", tau}, {"alpha", alpha(k, tau)}});
  return out;
}

inline AlphaMap alpha_from_json(const json& j, int horizon) {
  std::vector<double> v(slice_count(horizon), 0.0);
  std::vector<bool> seen(v.size(), false);
  for (const auto& e : j) {
    const int k = e.at("k").get<int>(), tau = e.at("tau").get<int>();
    if (k < 0 || k >= horizon || tau < -1 || tau >= k) throw ConfigError("result: alpha entry out of range");
    v[slice_index(k, tau)] = e.at("alpha").get<double>();
    seen[slice_index(k, tau)] = true;
  }
  for (bool s : seen)
    if (!s) throw ConfigError("result: alpha map incomplete");
  return AlphaMap(horizon, std::move(v));
}

/// Keep intervals per slice (plot data) plus the exact rule (center, radii).
inline json policy_to_json(const Policy& p) {
  json slices = json::array();
  for (int k = 0; k < p.horizon(); ++k)
    for (int tau = -1; tau < k; ++tau) {
      const KeepRule& r = p.rule(k, tau);
      json iv = json::array();
      for (const auto& [lo, hi] : p.keep_intervals(k, tau)) iv.push_back({lo, hi});
      slices.push_back({{"k", k}, {"tau", tau}, {"keep_intervals", iv}, {"center", r.center}, {"radius", r.radius}});
    }
  return json{{"grid", {{"half_width", p.grid().half_width()}, {"points", p.grid().size()}}}, {"slices", slices}};
}

inline Policy policy_from_json(const json& j, const Grid& grid, int horizon) {
  std::vector<KeepRule> rules(slice_count(horizon));
  std::vector<bool> seen(rules.size(), false);
  for (const auto& s : j.at("slices")) {
    const int k = s.at("k").get<int>(), tau = s.at("tau").get<int>();
    if (k < 0 || k >= horizon || tau < -1 || tau >= k) throw ConfigError("result: policy slice out of range");
    KeepRule r{s.at("center").get<double>(), s.at("radius").get<std::vector<double>>()};
    if (r.radius.size() != grid.size()) throw ConfigError("result: policy radius length does not match the grid");
    rules[slice_index(k, tau)] = std::move(r);
    seen[slice_index(k, tau)] = true;
  }
  for (bool s : seen)
    if (!s) throw ConfigError("result: policy incomplete");
  return Policy(grid, horizon, std::move(rules));
}

inline json trace_to_json(const IterationTrace& trace) {
  json out = json::array();
  for (const auto& r : trace)
    out.push_back({{"cost", r.cost}, {"alpha_delta", r.alpha_delta}, {"lyapunov", r.lyapunov}, {"degenerate", r.degenerate}});
  return out;
}

/// Bias maps with sup norm below this are reported as the symmetric design.
inline constexpr double kSymmetricThreshold = 1e-3;

inline json solve_record(const Problem& problem, const CodesignResult& r, const BaselineResult& base) {
  const double fwd = forward_cost(r.policy, r.alpha, problem);
  const bool symmetric = r.alpha.sup_norm() < kSymmetricThreshold;
  return json{{"problem", spec_to_json(problem.spec())},
              {"grid", {{"half_width", problem.grid().half_width()}, {"points", problem.grid().size()}}},
              {"converged", r.converged},
              {"iterations", r.iterations},
              {"design", symmetric ? "converged to symmetric design" : "asymmetric design"},
              {"cost", r.cost},
              {"cost_forward", fwd},
              {"baseline_cost", base.cost},
              {"reduction_pct", base.cost > 0.0 ? 100.0 * (base.cost - r.cost) / base.cost : 0.0},
              {"alpha", alpha_to_json(r.alpha)},
              {"trace", trace_to_json(r.trace)},
              {"policy", policy_to_json(r.policy)},
              {"baseline_policy", policy_to_json(base.policy)}};
}

/// A solved design reloaded from a result record.
struct LoadedResult {
  Problem problem;
  Policy policy;
  AlphaMap alpha;
  double cost = 0.0;
};

inline LoadedResult load_result(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("result: cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
    const json& pj = doc.at("problem");
    ProblemSpec spec;
    spec.a = pj.at("a").get<double>();
    spec.lambda = pj.at("lambda").get<double>();
    spec.horizon = pj.at("horizon").get<int>();
    spec.init_mean = pj.at("init_mean").get<double>();
    auto density = [&](const json& d) -> DensitySpec {
      if (d.contains("mixture")) {
        const json& m = d["mixture"];
        return GaussianMixture{m.at("weights").get<std::vector<double>>(), m.at("means").get<std::vector<double>>(),
                               m.at("sigmas").get<std::vector<double>>()};
      }
      const json& t = d.at("tabulated");
      return TabulatedSpec{t.at("abscissae").get<std::vector<double>>(), t.at("values").get<std::vector<double>>()};
    };
    spec.noise = density(pj.at("noise"));
    spec.init = density(pj.at("init"));
    const Grid grid(doc.at("grid").at("half_width").get<double>(), doc.at("grid").at("points").get<std::size_t>());
    Problem problem(spec, grid);
    Policy policy = policy_from_json(doc.at("policy"), grid, spec.horizon);
    AlphaMap alpha = alpha_from_json(doc.at("alpha"), spec.horizon);
    return {std::move(problem), std::move(policy), std::move(alpha), doc.at("cost").get<double>()};
  } catch (const json::exception& e) {
    throw ConfigError("result: " + path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError("result: " + path.string() + ": " + e.what());
  }
}

inline json sim_report_to_json(const SimReport& r) {
  return json{{"samples", r.samples},           {"mc_cost", r.mc_cost},
              {"std_error", r.std_error},       {"transmit_rate", r.transmit_rate},
              {"per_stage_cost", r.per_stage_cost}, {"clamp_rate", r.clamp_rate},
              {"max_identity_gap", r.max_identity_gap}};
}

// ---- sweep -------------------------------------------------------------------

struct SweepRow {
  double mu = 0.0;
  double cost_symmetric = std::nan("");
  double cost_iterative = std::nan("");
  double reduction_pct = std::nan("");
  int iterations = 0;
  bool converged = false;
  std::string error;  // non-empty when this mu failed
};

inline SweepRow sweep_one(const ExperimentConfig& cfg, double mu, const Exec& exec = {}) {
  SweepRow row;
  row.mu = mu;
  try {
    const Problem problem = make_problem(cfg.problem_spec(DensitySpec{make_bimodal_mixture(mu)}), cfg.grid);
    const BaselineResult base = symmetric_baseline(problem, exec);
    const CodesignResult r = iterate(problem, AlphaMap(cfg.horizon, cfg.iteration.alpha0),
                                     IterateOptions{cfg.iteration.tol, cfg.iteration.max_iter}, exec);
    row.cost_symmetric = base.cost;
    row.cost_iterative = r.cost;
    row.reduction_pct = 100.0 * (base.cost - r.cost) / base.cost;
    row.iterations = r.iterations;
    row.converged = r.converged;
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

inline std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, const Exec& exec = {}) {
  std::vector<SweepRow> rows(cfg.sweep_mu.size());
  parallel_for(rows.size(), exec, [&](std::size_t i) { rows[i] = sweep_one(cfg, cfg.sweep_mu[i], Exec{1}); });
  return rows;
}

inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  std::ostringstream ss;
  ss.imbue(std::locale::classic());
  ss << std::setprecision(10) << x;
  return ss.str();
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "mu,cost_symmetric,cost_iterative,reduction_pct,iterations,converged\n";
  for (const auto& r : rows) {
    out += format_number(r.mu) + "," + format_number(r.cost_symmetric) + "," + format_number(r.cost_iterative) + "," +
           format_number(r.reduction_pct) + "," + std::to_string(r.iterations) + "," +
           (r.error.empty() ? (r.converged ? "true" : "false") : "error") + "\n";
  }
  return out;
}

}  // namespace evtrig
