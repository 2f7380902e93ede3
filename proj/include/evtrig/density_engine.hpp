#pragma once

// Conditional-density recursions for the error e_k under a fixed trigger
// policy: prediction through the dynamics, truncation to the keep region,
// the bias-map update and an exact forward evaluation of the cost.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "evtrig/errors.hpp"
#include "evtrig/kernel.hpp"
#include "evtrig/model.hpp"
#include "evtrig/parallel.hpp"
#include "evtrig/policy.hpp"

namespace evtrig {

/// Conditioning events with probability below this are treated as null.
inline constexpr double kRhoMin = 1e-12;
/// Allowed drift of total probability mass in the forward recursion.
inline constexpr double kMassTolerance = 1e-6;

struct Prediction {
  TabulatedDensity density;
  double offgrid_mass = 0.0;
};

/// Density of a*e + w for e ~ d, using a prebuilt kernel.
inline Prediction predict(const TabulatedDensity& d, const TransitionKernel& kernel) {
  if (!(d.grid() == kernel.grid())) throw std::invalid_argument("predict: density and kernel grids differ");
  const auto step = kernel.propagate(d.masses());
  if (step.offgrid >= kMaxOffGridMass)
    throw GridOverflow("predict: " + std::to_string(step.offgrid) + " probability mass left the grid");
  return {TabulatedDensity::from_masses(d.grid(), step.masses).normalized(), step.offgrid};
}

inline Prediction predict(const TabulatedDensity& d, double a, const TabulatedDensity& noise) {
  return predict(d, TransitionKernel(d.grid(), a, noise));
}

inline double conditional_mean(const TabulatedDensity& d) {
  const Grid& g = d.grid();
  return g.mirror_sum([&](std::size_t j) { return g.weight(j) * d[j] * g.node(j); }) / d.integral();
}

struct Truncation {
  TabulatedDensity density;  // normalized kept part (zero if degenerate)
  double mass = 0.0;         // probability of staying silent
  double mean = 0.0;         // conditional mean of e over the kept region
  bool degenerate = false;   // mass < kRhoMin
};

/// Keeps whole cells where keep[j] is set.
inline Truncation truncate_normalize(const TabulatedDensity& d, const std::vector<bool>& keep) {
  const Grid& g = d.grid();
  if (keep.size() != g.size()) throw std::invalid_argument("truncate_normalize: mask length must equal grid size");
  std::vector<double> kept(g.size());
  for (std::size_t j = 0; j < kept.size(); ++j) kept[j] = keep[j] ? d[j] : 0.0;
  TabulatedDensity raw(g, std::move(kept));
  const double mass = raw.integral();
  if (mass < kRhoMin) return {TabulatedDensity(g, std::vector<double>(g.size(), 0.0)), mass, 0.0, true};
  const double first = g.mirror_sum([&](std::size_t j) { return g.weight(j) * raw[j] * g.node(j); });
  std::vector<double> v(raw.values());
  for (double& x : v) x /= mass;
  return {TabulatedDensity(g, std::move(v)), mass, first / mass, false};
}

/// Keeps the part of each cell selected by `rule`; the density is taken as
/// uniform inside a cell, so partially kept cells contribute exactly.
inline Truncation truncate_normalize(const TabulatedDensity& d, const KeepRule& rule) {
  const Grid& g = d.grid();
  if (rule.radius.size() != g.size()) throw std::invalid_argument("truncate_normalize: rule must match grid size");
  std::vector<KeptMoments> parts(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) parts[j] = kept_moments(g, rule, j, 0.0);
  const double mass = g.mirror_sum([&](std::size_t j) { return d[j] * parts[j].length; });
  if (mass < kRhoMin) return {TabulatedDensity(g, std::vector<double>(g.size(), 0.0)), mass, 0.0, true};
  const double first = g.mirror_sum([&](std::size_t j) { return d[j] * parts[j].first; });
  std::vector<double> v(g.size());
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = d[j] * parts[j].length / g.weight(j) / mass;
  return {TabulatedDensity(g, std::move(v)), mass, first / mass, false};
}

/// Per-slice record of a density recursion.
struct ConditionalSlice {
  TabulatedDensity density;  // normalized density of e_k on the event, before the stage-k decision
  double mass = 0.0;         // probability of the conditioning event
  double kept = 0.0;         // probability of additionally staying silent at stage k
  bool degenerate = false;
};

/// Slices indexed like AlphaMap: slice_index(k, tau).
struct ConditionalDensitySet {
  int horizon = 0;
  std::vector<ConditionalSlice> slices;

  const ConditionalSlice& at(int k, int tau) const { return slices.at(slice_index(k, tau)); }
};

struct AlphaUpdate {
  AlphaMap alpha;
  // Densities conditioned on entering chain tau; `mass` is the probability
  // of having stayed silent from tau+1 up to k-1 given a transmission at tau.
  ConditionalDensitySet history;
  std::size_t degenerate_count = 0;
};

/// alpha_{k,tau} = E[e_k | tau_k = tau, delta_k = 0] under `policy`. When the
/// silent event is null the untruncated mean is used and the slice flagged.
inline AlphaUpdate update_alpha(const Policy& policy, const Problem& problem, const Exec& exec = {}) {
  const int n = problem.horizon();
  if (policy.horizon() != n || !(policy.grid() == problem.grid()))
    throw std::invalid_argument("update_alpha: policy does not match the problem");
  const Grid& g = problem.grid();
  const TabulatedDensity zero(g, std::vector<double>(g.size(), 0.0));

  std::vector<double> alpha(slice_count(n), 0.0);
  std::vector<ConditionalSlice> slices(slice_count(n), ConditionalSlice{zero});

  // Chain tau starts at stage tau+1 with e = w_tau (or e_0 for tau = -1).
  parallel_for(static_cast<std::size_t>(n), exec, [&](std::size_t chain) {
    const int tau = static_cast<int>(chain) - 1;
    TabulatedDensity current = tau < 0 ? problem.init() : problem.noise();
    double survival = 1.0;
    for (int k = tau + 1; k < n; ++k) {
      const std::size_t s = slice_index(k, tau);
      const Truncation t = truncate_normalize(current, policy.rule(k, tau));
      ConditionalSlice& rec = slices[s];
      rec.density = current;
      rec.mass = survival;
      rec.kept = survival * t.mass;
      rec.degenerate = t.degenerate;
      alpha[s] = t.degenerate ? conditional_mean(current) : t.mean;
      if (k + 1 < n) {
        current = predict(t.degenerate ? current : t.density, problem.kernel()).density;
        survival *= t.mass;
      }
    }
  });

  AlphaUpdate out{AlphaMap(n, std::move(alpha)), ConditionalDensitySet{n, std::move(slices)}, 0};
  for (const auto& s : out.history.slices) out.degenerate_count += s.degenerate ? 1 : 0;
  return out;
}

struct ForwardPass {
  double cost = 0.0;
  std::vector<double> stage_cost;        // expected cost incurred at stage k
  std::vector<double> transmit_prob;     // P(delta_k = 1)
  ConditionalDensitySet joint;           // absolute masses of (e_k, tau_k)
  double max_mass_error = 0.0;           // |total mass - 1| over stages
};

/// Propagates the joint law of (e_k, tau_k) forward under `policy` and
/// accumulates the expected running cost with bias map `alpha`.
inline ForwardPass propagate_forward(const Policy& policy, const AlphaMap& alpha, const Problem& problem) {
  const int n = problem.horizon();
  if (policy.horizon() != n || alpha.horizon() != n || !(policy.grid() == problem.grid()))
    throw std::invalid_argument("propagate_forward: dimensions do not match the problem");
  const Grid& g = problem.grid();
  const std::size_t m = g.size();
  const double lambda = problem.lambda();
  const TabulatedDensity zero(g, std::vector<double>(m, 0.0));

  ForwardPass out;
  out.stage_cost.assign(static_cast<std::size_t>(n), 0.0);
  out.transmit_prob.assign(static_cast<std::size_t>(n), 0.0);
  out.joint = ConditionalDensitySet{n, std::vector<ConditionalSlice>(slice_count(n), ConditionalSlice{zero})};

  // masses[tau + 1] holds node masses of slice (k, tau) at the current stage.
  std::vector<std::vector<double>> masses{problem.init().masses()};
  const std::vector<double> noise_masses = problem.noise().masses();
  CompensatedSum total;

  for (int k = 0; k < n; ++k) {
    double stage = 0.0, transmitted = 0.0, present = 0.0;
    std::vector<std::vector<double>> next;
    next.reserve(masses.size() + 1);
    for (int tau = -1; tau < k; ++tau) {
      const std::vector<double>& q = masses[static_cast<std::size_t>(tau + 1)];
      const KeepRule& rule = policy.rule(k, tau);
      const double a_kt = alpha(k, tau);
      std::vector<double> kept(m);
      double slice_mass = 0.0, slice_kept = 0.0, slice_cost = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        if (q[j] == 0.0) {
          kept[j] = 0.0;
          continue;
        }
        const KeptMoments km = kept_moments(g, rule, j, a_kt);
        const double density = q[j] / g.weight(j);
        kept[j] = density * km.length;
        slice_mass += q[j];
        slice_kept += kept[j];
        slice_cost += density * km.squared_error + lambda * (q[j] - kept[j]);
      }
      stage += slice_cost;
      transmitted += slice_mass - slice_kept;
      present += slice_mass;

      ConditionalSlice& rec = out.joint.slices[slice_index(k, tau)];
      rec.mass = slice_mass;
      rec.kept = slice_kept;
      if (slice_mass > 0.0) rec.density = TabulatedDensity::from_masses(g, q).normalized();

      if (k + 1 < n) {
        auto step = problem.kernel().propagate(kept);
        if (step.offgrid > kMaxOffGridMass * slice_kept)
          throw GridOverflow("propagate_forward: probability mass left the grid");
        next.push_back(std::move(step.masses));
      }
    }
    out.stage_cost[static_cast<std::size_t>(k)] = stage;
    out.transmit_prob[static_cast<std::size_t>(k)] = transmitted;
    out.max_mass_error = std::max(out.max_mass_error, std::abs(present - 1.0));
    total.add(stage);
    if (k + 1 < n) {
      std::vector<double> fresh(m);
      for (std::size_t j = 0; j < m; ++j) fresh[j] = transmitted * noise_masses[j];
      next.push_back(std::move(fresh));
      masses = std::move(next);
    }
  }
  if (out.max_mass_error > kMassTolerance)
    throw NumericalInconsistency("propagate_forward: probability mass not conserved");
  out.cost = total.value();
  return out;
}

/// Expected cost J(f, alpha) by forward propagation.
inline double forward_cost(const Policy& policy, const AlphaMap& alpha, const Problem& problem) {
  return propagate_forward(policy, alpha, problem).cost;
}

}  // namespace evtrig
