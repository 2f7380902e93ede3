#pragma once

// Brute-force reference solutions for tiny instances. Nothing here shares
// code with the density engine or the dynamic program.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "evtrig/model.hpp"

namespace evtrig::oracle {

struct OneStepSolution {
  double alpha_star = 0.0;
  double keep_lo = 0.0;
  double keep_hi = 0.0;
  double cost = 0.0;
};

/// cost(alpha) = int min(lambda, (e - alpha)^2) phi(e) de by the trapezoid rule.
inline double one_step_cost(const TabulatedDensity& phi, double lambda, double alpha) {
  const Grid& g = phi.grid();
  double acc = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double d = g.node(j) - alpha;
    acc += g.weight(j) * phi[j] * std::min(lambda, d * d);
  }
  return acc;
}

/// Single-stage optimum over alpha: exhaustive scan of [-L, L] with the
/// given step, then golden-section refinement around the best cell. Among
/// equal-cost optima the largest alpha is reported.
inline OneStepSolution solve_one_step(const TabulatedDensity& phi, double lambda, double alpha_grid_step = 1e-3) {
  if (!(lambda > 0.0)) throw std::invalid_argument("solve_one_step: lambda must be positive");
  if (!(alpha_grid_step > 0.0)) throw std::invalid_argument("solve_one_step: step must be positive");
  const double L = phi.grid().half_width();
  const auto steps = static_cast<std::int64_t>(std::floor(2.0 * L / alpha_grid_step));
  double best_alpha = -L, best_cost = std::numeric_limits<double>::infinity();
  for (std::int64_t i = 0; i <= steps; ++i) {
    const double alpha = -L + static_cast<double>(i) * alpha_grid_step;
    const double c = one_step_cost(phi, lambda, alpha);
    if (c <= best_cost + 1e-12 * std::abs(best_cost) || !std::isfinite(best_cost)) {
      if (c < best_cost || std::abs(c - best_cost) <= 1e-12 * std::abs(best_cost)) {
        best_cost = std::min(c, best_cost);
        best_alpha = alpha;
      }
    }
  }
  // Golden-section search on [best - step, best + step].
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = best_alpha - alpha_grid_step, hi = best_alpha + alpha_grid_step;
  double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
  double f1 = one_step_cost(phi, lambda, x1), f2 = one_step_cost(phi, lambda, x2);
  while (hi - lo > 1e-10) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = one_step_cost(phi, lambda, x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = one_step_cost(phi, lambda, x2);
    }
  }
  double alpha = 0.5 * (lo + hi);
  double cost = one_step_cost(phi, lambda, alpha);
  if (best_cost < cost) {
    alpha = best_alpha;
    cost = best_cost;
  }
  const double r = std::sqrt(lambda);
  return {alpha, alpha - r, alpha + r, cost};
}

inline constexpr std::size_t kMaxSupport = 5;
inline constexpr int kMaxHorizon = 3;
inline constexpr std::uint64_t kEnumerationBudget = std::uint64_t{1} << 24;

namespace detail {

using Atoms = std::vector<std::pair<double, double>>;  // (value, probability), sorted by value

inline Atoms merge_atoms(std::map<double, double> raw) {
  Atoms out;
  for (const auto& [v, p] : raw) {
    if (p == 0.0) continue;
    if (!out.empty() && std::abs(v - out.back().first) <= 1e-12 * std::max(1.0, std::abs(v)))
      out.back().second += p;
    else
      out.emplace_back(v, p);
  }
  return out;
}

struct Enumerator {
  const Atoms& noise;
  double a;
  double lambda;
  int horizon;
  bool symmetric_only;
  std::vector<double> fresh_chain;  // optimal cost of a chain started at stage t (index t), 0 at t = horizon
  std::uint64_t work = 0;

  // Minimal expected cost from stage k on, for the chain whose surviving
  // error atoms at stage k are `atoms` (absolute probabilities).
  double best(int k, const Atoms& atoms) {
    const std::size_t m = atoms.size();
    if (m == 0) return 0.0;
    if (m >= 63) throw std::length_error("solve_discrete_exact: too many atoms to enumerate");
    const double transmit = lambda + fresh_chain[static_cast<std::size_t>(k + 1)];
    double result = std::numeric_limits<double>::infinity();
    for (std::uint64_t keep = 0; keep < (std::uint64_t{1} << m); ++keep) {
      if (++work > kEnumerationBudget) throw std::length_error("solve_discrete_exact: enumeration budget exceeded");
      double mass = 0.0, first = 0.0;
      for (std::size_t i = 0; i < m; ++i)
        if (keep >> i & 1U) {
          mass += atoms[i].second;
          first += atoms[i].second * atoms[i].first;
        }
      const double alpha = (symmetric_only || mass == 0.0) ? 0.0 : first / mass;
      double cost = 0.0;
      std::map<double, double> next;
      for (std::size_t i = 0; i < m; ++i) {
        const auto [v, p] = atoms[i];
        if (keep >> i & 1U) {
          cost += p * (v - alpha) * (v - alpha);
          if (k + 1 < horizon)
            for (const auto& [w, q] : noise) next[a * v + w] += p * q;
        } else {
          cost += p * transmit;
        }
      }
      if (cost >= result) continue;
      if (!next.empty()) cost += best(k + 1, merge_atoms(std::move(next)));
      result = std::min(result, cost);
    }
    return result;
  }
};

}  // namespace detail

/// Exact optimum of the relaxed joint problem (trigger and bias map) for
/// discrete noise with e_0 distributed like the noise, by enumerating the
/// keep-set of every reachable (stage, tau) atom set. With `symmetric_only`
/// the bias map is pinned to zero.
inline double solve_discrete_exact(const std::vector<double>& support, const std::vector<double>& probs, double lambda,
                                   int n, double a = 1.0, bool symmetric_only = false) {
  if (support.empty() || support.size() != probs.size())
    throw std::invalid_argument("solve_discrete_exact: support and probs must have equal non-zero length");
  if (support.size() > kMaxSupport || n > kMaxHorizon)
    throw std::length_error("solve_discrete_exact: instance exceeds the enumeration limits (s <= 5, n <= 3)");
  if (n < 1) throw std::invalid_argument("solve_discrete_exact: n must be >= 1");
  if (!(lambda >= 0.0)) throw std::invalid_argument("solve_discrete_exact: lambda must be >= 0");
  double total = 0.0;
  std::map<double, double> raw;
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (!(probs[i] >= 0.0)) throw std::invalid_argument("solve_discrete_exact: negative probability");
    total += probs[i];
    raw[support[i]] += probs[i];
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("solve_discrete_exact: probabilities must sum to 1");
  const detail::Atoms noise = detail::merge_atoms(std::move(raw));

  detail::Enumerator en{noise, a, lambda, n, symmetric_only, std::vector<double>(static_cast<std::size_t>(n) + 1, 0.0)};
  // A transmission at stage t restarts the error at e_{t+1} = w_t.
  for (int t = n - 1; t >= 0; --t) en.fresh_chain[static_cast<std::size_t>(t)] = en.best(t, noise);
  return en.fresh_chain[0];
}

}  // namespace evtrig::oracle
