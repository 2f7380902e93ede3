#pragma once

// Backward dynamic programming over the augmented state (e_k, tau_k) for a
// fixed bias map.
//
// Node j stands for its cell, with the error spread uniformly over the cell.
// Within a cell the continuation value is that of the node, while the
// running cost (e - alpha)^2 is integrated exactly. The optimal decision
// inside a cell is therefore "stay silent iff |e - alpha| <= r_j" with
// r_j = sqrt(lambda + C_k - G_j), and the value table stores the cell average
// of the optimal cost-to-go.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "evtrig/density_engine.hpp"
#include "evtrig/kernel.hpp"
#include "evtrig/model.hpp"
#include "evtrig/parallel.hpp"
#include "evtrig/policy.hpp"

namespace evtrig {

/// Running cost c(e, alpha, delta) = (1 - delta)(e - alpha)^2 + lambda*delta.
inline double stage_cost(double e, double alpha_k_tau, int delta, double lambda) {
  if (delta != 0 && delta != 1) throw std::invalid_argument("stage_cost: delta must be 0 or 1");
  const double d = e - alpha_k_tau;
  return delta == 1 ? lambda : d * d;
}

/// Cell-averaged value functions J_k(., tau), k = 0..N-1; J_N is zero.
class ValueTable {
 public:
  ValueTable(Grid grid, int horizon) : grid_(grid), horizon_(horizon) {
    slices_.assign(slice_count(horizon), std::vector<double>(grid.size(), 0.0));
    transmit_continuation_.assign(static_cast<std::size_t>(horizon), 0.0);
  }

  const Grid& grid() const { return grid_; }
  int horizon() const { return horizon_; }

  const std::vector<double>& at(int k, int tau) const { return slices_.at(checked(k, tau)); }
  std::vector<double>& at(int k, int tau) { return slices_.at(checked(k, tau)); }

  /// C_k = E[J_{k+1}(w, k)], the continuation after a transmission at k.
  double transmit_continuation(int k) const { return transmit_continuation_.at(static_cast<std::size_t>(k)); }
  void set_transmit_continuation(int k, double c) { transmit_continuation_.at(static_cast<std::size_t>(k)) = c; }

  /// Number of (slice, node) pairs whose successor a*e fell outside [-L, L].
  std::size_t clamped_nodes = 0;

 private:
  std::size_t checked(int k, int tau) const {
    if (k < 0 || k >= horizon_ || tau < -1 || tau >= k) throw std::out_of_range("ValueTable: (k, tau) out of range");
    return slice_index(k, tau);
  }

  Grid grid_;
  int horizon_;
  std::vector<std::vector<double>> slices_;
  std::vector<double> transmit_continuation_;
};

struct DpSolution {
  Policy policy;
  ValueTable value;
};

namespace detail {

// One Bellman step for a single (k, tau) slice given the continuation G of
// staying silent and the constant cost B of transmitting.
inline KeepRule bellman_slice(const Grid& g, double alpha, const std::vector<double>& silent_continuation,
                              double transmit_value, std::vector<double>& value_out) {
  const std::size_t m = g.size();
  KeepRule rule{alpha, std::vector<double>(m)};
  for (std::size_t j = 0; j < m; ++j) {
    const double slack = transmit_value - silent_continuation[j];
    rule.radius[j] = slack >= 0.0 ? std::sqrt(slack) : kKeepNothing;
  }
  for (std::size_t j = 0; j < m; ++j) {
    const KeptMoments km = kept_moments(g, rule, j, alpha);
    const double w = g.weight(j);
    value_out[j] = (km.squared_error + km.length * silent_continuation[j] + (w - km.length) * transmit_value) / w;
  }
  return rule;
}

}  // namespace detail

/// Optimal trigger for a fixed bias map, with its value tables.
inline DpSolution bellman_backward(const AlphaMap& alpha, const Problem& problem, const Exec& exec = {}) {
  const int n = problem.horizon();
  if (alpha.horizon() != n) throw std::invalid_argument("bellman_backward: alpha sized for a different horizon");
  const Grid& g = problem.grid();
  const std::size_t m = g.size();
  const double lambda = problem.lambda();
  const std::vector<double> noise_masses = problem.noise().masses();

  ValueTable value(g, n);
  std::vector<KeepRule> rules(slice_count(n));
  const std::vector<double> zeros(m, 0.0);

  for (int k = n - 1; k >= 0; --k) {
    double c_k = 0.0;
    if (k + 1 < n) {
      const auto& next = value.at(k + 1, k);
      c_k = g.mirror_sum([&](std::size_t i) { return noise_masses[i] * next[i]; });
    }
    value.set_transmit_continuation(k, c_k);
    const double transmit_value = lambda + c_k;

    parallel_for(static_cast<std::size_t>(k + 1), exec, [&](std::size_t t) {
      const int tau = static_cast<int>(t) - 1;
      const std::vector<double> g_silent = k + 1 < n ? problem.kernel().expect(value.at(k + 1, tau)) : zeros;
      rules[slice_index(k, tau)] =
          detail::bellman_slice(g, alpha(k, tau), g_silent, transmit_value, value.at(k, tau));
    });
  }
  if (std::abs(problem.a()) > 1.0) {
    // Nodes whose successor a*e_j leaves the grid use the boundary value.
    const double limit = g.half_width() / std::abs(problem.a());
    for (std::size_t j = 0; j < m; ++j)
      if (std::abs(g.node(j)) > limit) value.clamped_nodes += 1;
  }
  return {Policy(g, n, std::move(rules)), std::move(value)};
}

/// J(f, alpha) = E[J_0(e_0, -1)].
inline double cost_of(const ValueTable& value, const TabulatedDensity& init_e_density) {
  if (!(value.grid() == init_e_density.grid())) throw std::invalid_argument("cost_of: grid mismatch");
  const Grid& g = value.grid();
  const auto& j0 = value.at(0, -1);
  return g.mirror_sum([&](std::size_t j) { return g.weight(j) * init_e_density[j] * j0[j]; });
}

}  // namespace evtrig
