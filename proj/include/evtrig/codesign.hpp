#pragma once

// Alternating design of trigger and estimator: dynamic programming for the
// trigger with the bias map fixed, then the conditional-mean bias map for
// the trigger fixed, until the bias map stops moving.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "evtrig/density_engine.hpp"
#include "evtrig/dp_solver.hpp"
#include "evtrig/errors.hpp"
#include "evtrig/kernel.hpp"
#include "evtrig/parallel.hpp"
#include "evtrig/policy.hpp"

namespace evtrig {

struct IterateOptions {
  double tol = 1e-6;
  int max_iter = 100;
  // Relative cost increase tolerated before the run is declared inconsistent.
  double monotone_slack = 1e-6;
};

struct IterationRecord {
  double cost = 0.0;         // J(f^i, alpha^i)
  double alpha_delta = 0.0;  // |alpha^{i+1} - alpha^i|_inf (0 for the final record)
  double lyapunov = 0.0;     // |beta^i|_inf
  std::size_t degenerate = 0;
};

using IterationTrace = std::vector<IterationRecord>;

struct CodesignResult {
  Policy policy;
  AlphaMap alpha;
  IterationTrace trace;
  bool converged = false;
  int iterations = 0;  // number of bias-map updates performed
  double cost = 0.0;   // J(policy, alpha)
};

struct BetaTransform {
  AlphaMap beta;
  std::size_t saturated = 0;  // entries where alpha / a^k overflowed
};

/// beta_{k,tau} = alpha_{k,tau} / a^k.
inline BetaTransform beta_transform(const AlphaMap& alpha, double a) {
  if (a == 0.0 || !std::isfinite(a)) throw std::invalid_argument("beta_transform: a must be finite and non-zero");
  BetaTransform out{alpha, 0};
  const double big = std::numeric_limits<double>::max();
  for (int k = 0; k < alpha.horizon(); ++k) {
    const double scale = std::pow(a, k);
    for (int tau = -1; tau < k; ++tau) {
      double b = alpha(k, tau) / scale;
      if (!std::isfinite(b)) {
        b = alpha(k, tau) == 0.0 ? 0.0 : std::copysign(big, alpha(k, tau) * scale);
        ++out.saturated;
      }
      out.beta(k, tau) = b;
    }
  }
  return out;
}

/// Lyapunov candidate V(beta) = |beta|_inf.
inline double lyapunov(const AlphaMap& beta) { return beta.sup_norm(); }
inline double lyapunov(const std::vector<double>& beta) {
  double m = 0.0;
  for (double b : beta) m = std::max(m, std::abs(b));
  return m;
}

inline CodesignResult iterate(const Problem& problem, const AlphaMap& alpha0, const IterateOptions& opts = {},
                              const Exec& exec = {}) {
  if (!(opts.tol > 0.0)) throw std::invalid_argument("iterate: tol must be positive");
  if (opts.max_iter < 1) throw std::invalid_argument("iterate: max_iter must be >= 1");
  if (alpha0.horizon() != problem.horizon()) throw std::invalid_argument("iterate: alpha0 sized for a different horizon");

  AlphaMap alpha = alpha0;
  IterationTrace trace;
  for (int i = 0;; ++i) {
    DpSolution dp = bellman_backward(alpha, problem, exec);
    const double cost = cost_of(dp.value, problem.init());
    IterationRecord rec{cost, 0.0, lyapunov(beta_transform(alpha, problem.a()).beta), 0};
    if (!trace.empty()) {
      const double prev = trace.back().cost;
      if (cost - prev > opts.monotone_slack * std::abs(prev))
        throw NumericalInconsistency("iterate: cost increased from " + std::to_string(prev) + " to " +
                                     std::to_string(cost) + " at iteration " + std::to_string(i));
      if (trace.back().alpha_delta < opts.tol) {
        trace.push_back(rec);
        return {std::move(dp.policy), std::move(alpha), std::move(trace), true, i, cost};
      }
    }
    if (i == opts.max_iter) {
      trace.push_back(rec);
      return {std::move(dp.policy), std::move(alpha), std::move(trace), false, i, cost};
    }
    AlphaUpdate next = update_alpha(dp.policy, problem, exec);
    rec.alpha_delta = sup_distance(next.alpha, alpha);
    rec.degenerate = next.degenerate_count;
    trace.push_back(rec);
    alpha = std::move(next.alpha);
  }
}

struct BaselineResult {
  Policy policy;
  double cost = 0.0;
};

/// Linear-predictor estimator (alpha = 0) with its optimal trigger.
inline BaselineResult symmetric_baseline(const Problem& problem, const Exec& exec = {}) {
  DpSolution dp = bellman_backward(AlphaMap(problem.horizon(), 0.0), problem, exec);
  const double cost = cost_of(dp.value, problem.init());
  return {std::move(dp.policy), cost};
}

}  // namespace evtrig
