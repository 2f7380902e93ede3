// evtrig: command-line driver for solving, sweeping, simulating and
// checking event-triggered estimation designs.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "evtrig/evtrig.hpp"

namespace fs = std::filesystem;
using namespace evtrig;

namespace {

struct Options {
  std::string config;
  std::string out = "out";
  std::string result;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> samples;
  unsigned threads = 0;
};

Exec exec_of(const Options& o) { return Exec{o.threads}; }

std::string keep_interval_csv(const Policy& p, const AlphaMap& alpha) {
  std::string out = "k,tau,alpha,keep_lo,keep_hi\n";
  for (int k = 0; k < p.horizon(); ++k)
    for (int tau = -1; tau < k; ++tau) {
      const auto intervals = p.keep_intervals(k, tau);
      if (intervals.empty())
        out += std::to_string(k) + "," + std::to_string(tau) + "," + format_number(alpha(k, tau)) + ",nan,nan\n";
      for (const auto& [lo, hi] : intervals)
        out += std::to_string(k) + "," + std::to_string(tau) + "," + format_number(alpha(k, tau)) + "," +
               format_number(lo) + "," + format_number(hi) + "\n";
    }
  return out;
}

int cmd_solve(const Options& o) {
  const ExperimentConfig cfg = load_config(o.config);
  const Problem problem = make_problem(cfg.problem_spec(), cfg.grid);
  const CodesignResult r = iterate(problem, AlphaMap(cfg.horizon, cfg.iteration.alpha0),
                                   IterateOptions{cfg.iteration.tol, cfg.iteration.max_iter}, exec_of(o));
  const BaselineResult base = symmetric_baseline(problem, exec_of(o));
  const json rec = solve_record(problem, r, base);
  write_file_atomic(fs::path(o.out) / "result.json", rec.dump(1) + "\n");
  write_file_atomic(fs::path(o.out) / "keep_intervals.csv", keep_interval_csv(r.policy, r.alpha));
  std::cout << "cost " << format_number(r.cost) << "  baseline " << format_number(base.cost) << "  reduction "
            << format_number(rec["reduction_pct"].get<double>()) << "%  iterations " << r.iterations
            << (r.converged ? "  converged" : "  NOT converged") << "  (" << rec["design"].get<std::string>() << ")\n";
  if (cfg.horizon == 1)
    for (const auto& [lo, hi] : r.policy.keep_intervals(0, -1))
      std::cout << "alpha_0 " << format_number(r.alpha(0, -1)) << "  keep [" << format_number(lo) << ", "
                << format_number(hi) << "]\n";
  return 0;
}

int cmd_baseline(const Options& o) {
  const ExperimentConfig cfg = load_config(o.config);
  const Problem problem = make_problem(cfg.problem_spec(), cfg.grid);
  const BaselineResult base = symmetric_baseline(problem, exec_of(o));
  const json rec{{"problem", spec_to_json(problem.spec())},
                 {"cost", base.cost},
                 {"cost_forward", forward_cost(base.policy, AlphaMap(cfg.horizon, 0.0), problem)},
                 {"policy", policy_to_json(base.policy)}};
  write_file_atomic(fs::path(o.out) / "baseline.json", rec.dump(1) + "\n");
  write_file_atomic(fs::path(o.out) / "baseline_keep_intervals.csv",
                    keep_interval_csv(base.policy, AlphaMap(cfg.horizon, 0.0)));
  std::cout << "baseline cost " << format_number(base.cost) << "\n";
  return 0;
}

int cmd_sweep(const Options& o) {
  const ExperimentConfig cfg = load_config(o.config);
  const auto rows = run_sweep(cfg, exec_of(o));
  const std::string csv = sweep_csv(rows);
  write_file_atomic(fs::path(o.out) / "sweep.csv", csv);
  std::cout << csv;
  for (const auto& r : rows)
    if (!r.error.empty()) std::cerr << "mu=" << r.mu << ": " << r.error << "\n";
  return 0;
}

int cmd_simulate(const Options& o) {
  SimConfig sim;
  if (!o.config.empty()) sim = load_config(o.config).mc;
  if (o.seed) sim.seed = *o.seed;
  if (o.samples) sim.samples = *o.samples;
  const fs::path result = o.result.empty() ? fs::path(o.out) / "result.json" : fs::path(o.result);
  const LoadedResult loaded = load_result(result);
  const double fwd = forward_cost(loaded.policy, loaded.alpha, loaded.problem);
  const SimReport rep = run_closed_loop(loaded.problem, loaded.policy, loaded.alpha, sim, exec_of(o));
  const double diff = rep.mc_cost - fwd;
  double z = 0.0;
  if (rep.std_error > 0.0)
    z = diff / rep.std_error;
  else if (std::abs(diff) > 1e-12 * std::max(1.0, std::abs(fwd)))
    z = std::copysign(std::numeric_limits<double>::infinity(), diff);
  const bool agree = std::abs(z) <= 3.0;
  json rec = sim_report_to_json(rep);
  rec["seed"] = sim.seed;
  rec["forward_cost"] = fwd;
  rec["recorded_cost"] = loaded.cost;
  rec["z_score"] = std::isfinite(z) ? json(z) : json(diff > 0 ? "inf" : "-inf");
  rec["within_3_std_errors"] = agree;
  write_file_atomic(fs::path(o.out) / "simulation.json", rec.dump(1) + "\n");
  std::cout << "mc_cost " << format_number(rep.mc_cost) << " +- " << format_number(rep.std_error) << "  forward "
            << format_number(fwd) << "  z " << format_number(z) << (agree ? "" : "  OUTSIDE 3 SE") << "\n";
  return agree ? 0 : 2;
}

int cmd_oracle(const Options& o) {
  const ExperimentConfig cfg = load_config(o.config);
  json rec;
  if (cfg.discrete) {
    try {
      const double best = oracle::solve_discrete_exact(cfg.discrete->support, cfg.discrete->probs, cfg.lambda,
                                                       cfg.horizon, cfg.a, false);
      const double sym = oracle::solve_discrete_exact(cfg.discrete->support, cfg.discrete->probs, cfg.lambda,
                                                      cfg.horizon, cfg.a, true);
      rec = json{{"kind", "discrete_exact"}, {"cost", best}, {"cost_symmetric", sym}};
    } catch (const std::logic_error& e) {
      throw ConfigError(std::string("noise.discrete: ") + e.what());
    }
  } else {
    if (cfg.horizon != 1) throw ConfigError("horizon: the one-step oracle needs horizon 1");
    const Problem problem = make_problem(cfg.problem_spec(), cfg.grid);
    if (!(cfg.lambda > 0.0)) throw ConfigError("lambda: the one-step oracle needs lambda > 0");
    const auto s = oracle::solve_one_step(problem.noise(), cfg.lambda);
    rec = json{{"kind", "one_step"},
               {"alpha_star", s.alpha_star},
               {"keep_interval", {s.keep_lo, s.keep_hi}},
               {"cost", s.cost},
               {"cost_alpha_zero", oracle::one_step_cost(problem.noise(), cfg.lambda, 0.0)}};
  }
  write_file_atomic(fs::path(o.out) / "oracle.json", rec.dump(1) + "\n");
  std::cout << rec.dump(1) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-triggered estimation: trigger and estimator co-design"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", o.config, "Experiment configuration (JSON)");
    if (config_required) c->required();
    sub->add_option("--out", o.out, "Output directory")->capture_default_str();
    sub->add_option("--threads", o.threads, "Worker threads (0 = hardware)");
    sub->add_option("--seed", o.seed, "Monte Carlo seed (overrides config)");
    sub->add_option("--samples", o.samples, "Monte Carlo sample paths (overrides config)");
  };
  auto* solve = app.add_subcommand("solve", "Run the alternating co-design iteration");
  auto* sweep = app.add_subcommand("sweep", "Baseline vs co-design cost over a list of mu");
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo check of a solved design");
  auto* baseline = app.add_subcommand("baseline", "Optimal trigger for the plain linear predictor");
  auto* oracle_cmd = app.add_subcommand("oracle", "Brute-force reference solutions for tiny instances");
  for (auto* s : {solve, sweep, baseline, oracle_cmd}) add_common(s, true);
  add_common(simulate, false);
  simulate->add_option("--result", o.result, "Result record (default OUT/result.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*solve) return cmd_solve(o);
    if (*sweep) return cmd_sweep(o);
    if (*simulate) return cmd_simulate(o);
    if (*baseline) return cmd_baseline(o);
    if (*oracle_cmd) return cmd_oracle(o);
  } catch (const NumericalInconsistency& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
