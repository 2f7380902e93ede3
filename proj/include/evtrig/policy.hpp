#pragma once

// Decision variables of the co-design: the estimator bias map and the
// trigger policy, both indexed by stage k and last transmission time tau.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "evtrig/model.hpp"

namespace evtrig {

/// Flat index of the pair (k, tau), k = 0..N-1, tau = -1..k-1.
inline std::size_t slice_index(int k, int tau) {
  return static_cast<std::size_t>(k) * static_cast<std::size_t>(k + 1) / 2 + static_cast<std::size_t>(tau + 1);
}
inline std::size_t slice_count(int horizon) {
  return static_cast<std::size_t>(horizon) * static_cast<std::size_t>(horizon + 1) / 2;
}

/// Bias map alpha_{k,tau}: the estimate used for e_k when nothing was sent
/// since tau.
class AlphaMap {
 public:
  explicit AlphaMap(int horizon, double fill = 0.0) : horizon_(horizon) {
    if (horizon < 1) throw std::invalid_argument("AlphaMap: horizon must be >= 1");
    values_.assign(slice_count(horizon), fill);
  }
  AlphaMap(int horizon, std::vector<double> values) : horizon_(horizon), values_(std::move(values)) {
    if (horizon < 1) throw std::invalid_argument("AlphaMap: horizon must be >= 1");
    if (values_.size() != slice_count(horizon)) throw std::invalid_argument("AlphaMap: expected N(N+1)/2 entries");
    for (double v : values_)
      if (!std::isfinite(v)) throw std::invalid_argument("AlphaMap: entries must be finite");
  }

  int horizon() const { return horizon_; }
  std::size_t size() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }

  double operator()(int k, int tau) const { return values_[checked(k, tau)]; }
  double& operator()(int k, int tau) { return values_[checked(k, tau)]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  double sup_norm() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  friend double sup_distance(const AlphaMap& x, const AlphaMap& y) {
    if (x.values_.size() != y.values_.size()) throw std::invalid_argument("sup_distance: horizon mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < x.values_.size(); ++i) m = std::max(m, std::abs(x.values_[i] - y.values_[i]));
    return m;
  }

 private:
  std::size_t checked(int k, int tau) const {
    if (k < 0 || k >= horizon_ || tau < -1 || tau >= k) throw std::out_of_range("AlphaMap: (k, tau) out of range");
    return slice_index(k, tau);
  }

  int horizon_;
  std::vector<double> values_;
};

/// Stay silent at e iff |e - center| <= radius[j], where j is the node whose
/// cell contains e. A negative radius keeps nothing in that cell.
struct KeepRule {
  double center = 0.0;
  std::vector<double> radius;
};

inline constexpr double kKeepNothing = -1.0;
inline constexpr double kKeepEverything = std::numeric_limits<double>::max();

/// The part of cell j that the rule keeps, if it has positive length.
inline std::optional<std::pair<double, double>> kept_part(const Grid& grid, const KeepRule& rule, std::size_t j) {
  const double r = rule.radius[j];
  if (r < 0.0) return std::nullopt;
  const double lo = std::max(grid.cell_lo(j), rule.center - r);
  const double hi = std::min(grid.cell_hi(j), rule.center + r);
  if (!(hi > lo)) return std::nullopt;
  return std::make_pair(lo, hi);
}

/// Integrals over the kept part of cell j of 1, e and (e - alpha)^2.
struct KeptMoments {
  double length = 0.0;
  double first = 0.0;
  double squared_error = 0.0;
};

inline KeptMoments kept_moments(const Grid& grid, const KeepRule& rule, std::size_t j, double alpha) {
  const auto part = kept_part(grid, rule, j);
  if (!part) return {};
  const auto [lo, hi] = *part;
  const double u = hi - alpha, l = lo - alpha;
  const bool whole = lo == grid.cell_lo(j) && hi == grid.cell_hi(j);
  return {whole ? grid.weight(j) : hi - lo, 0.5 * (hi * hi - lo * lo), (u * u * u - l * l * l) / 3.0};
}

/// Trigger policy f_k(e, tau). One KeepRule per (k, tau) slice.
class Policy {
 public:
  Policy(Grid grid, int horizon, std::vector<KeepRule> rules)
      : grid_(grid), horizon_(horizon), rules_(std::move(rules)) {
    if (horizon < 1) throw std::invalid_argument("Policy: horizon must be >= 1");
    if (rules_.size() != slice_count(horizon)) throw std::invalid_argument("Policy: expected N(N+1)/2 slices");
    for (const auto& r : rules_)
      if (r.radius.size() != grid_.size()) throw std::invalid_argument("Policy: radius table must match grid size");
  }

  static Policy uniform(const Grid& grid, int horizon, double radius) {
    std::vector<KeepRule> rules(slice_count(horizon), KeepRule{0.0, std::vector<double>(grid.size(), radius)});
    return Policy(grid, horizon, std::move(rules));
  }
  static Policy always_transmit(const Grid& grid, int horizon) { return uniform(grid, horizon, kKeepNothing); }
  static Policy never_transmit(const Grid& grid, int horizon) { return uniform(grid, horizon, kKeepEverything); }

  /// Whole-cell policy from boolean tables; transmit[slice_index(k, tau)][j].
  static Policy from_transmit_tables(const Grid& grid, int horizon, const std::vector<std::vector<bool>>& transmit) {
    if (transmit.size() != slice_count(horizon)) throw std::invalid_argument("Policy: expected N(N+1)/2 tables");
    std::vector<KeepRule> rules(transmit.size());
    for (std::size_t s = 0; s < transmit.size(); ++s) {
      if (transmit[s].size() != grid.size()) throw std::invalid_argument("Policy: table must match grid size");
      rules[s].radius.resize(grid.size());
      for (std::size_t j = 0; j < grid.size(); ++j) rules[s].radius[j] = transmit[s][j] ? kKeepNothing : kKeepEverything;
    }
    return Policy(grid, horizon, std::move(rules));
  }

  const Grid& grid() const { return grid_; }
  int horizon() const { return horizon_; }
  const std::vector<KeepRule>& rules() const { return rules_; }
  const KeepRule& rule(int k, int tau) const {
    if (k < 0 || k >= horizon_ || tau < -1 || tau >= k) throw std::out_of_range("Policy: (k, tau) out of range");
    return rules_[slice_index(k, tau)];
  }

  /// delta at a grid node; ties keep silent.
  bool transmit(int k, int tau, std::size_t j) const {
    const KeepRule& r = rule(k, tau);
    return !(std::abs(grid_.node(j) - r.center) <= r.radius[j]);
  }

  /// delta at an arbitrary error value, looking up the nearest node's rule.
  bool transmit_at(int k, int tau, double e, bool* clamped = nullptr) const {
    const KeepRule& r = rule(k, tau);
    const std::size_t j = grid_.nearest(e, clamped);
    return !(std::abs(e - r.center) <= r.radius[j]);
  }

  /// Boolean table f_k(e_j, tau) for tau = -1..k-1 (outer index tau + 1).
  std::vector<std::vector<bool>> transmit_table(int k) const {
    std::vector<std::vector<bool>> t(static_cast<std::size_t>(k + 1), std::vector<bool>(grid_.size()));
    for (int tau = -1; tau < k; ++tau)
      for (std::size_t j = 0; j < grid_.size(); ++j) t[static_cast<std::size_t>(tau + 1)][j] = transmit(k, tau, j);
    return t;
  }

  /// Keep region of slice (k, tau) as a sorted union of disjoint intervals.
  std::vector<std::pair<double, double>> keep_intervals(int k, int tau) const {
    const KeepRule& r = rule(k, tau);
    std::vector<std::pair<double, double>> out;
    const double join = 1e-9 * grid_.spacing();
    for (std::size_t j = 0; j < grid_.size(); ++j) {
      const auto part = kept_part(grid_, r, j);
      if (!part) continue;
      if (!out.empty() && part->first - out.back().second <= join)
        out.back().second = part->second;
      else
        out.push_back(*part);
    }
    return out;
  }

  bool is_even() const {
    const std::size_t m = grid_.size();
    for (int k = 0; k < horizon_; ++k)
      for (int tau = -1; tau < k; ++tau)
        for (std::size_t j = 0; j < m / 2; ++j)
          if (transmit(k, tau, j) != transmit(k, tau, m - 1 - j)) return false;
    return true;
  }

  bool is_tau_independent() const {
    for (int k = 0; k < horizon_; ++k)
      for (int tau = 0; tau < k; ++tau)
        for (std::size_t j = 0; j < grid_.size(); ++j)
          if (transmit(k, tau, j) != transmit(k, -1, j)) return false;
    return true;
  }

 private:
  Grid grid_;
  int horizon_;
  std::vector<KeepRule> rules_;
};

}  // namespace evtrig
