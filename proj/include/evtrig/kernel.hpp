#pragma once

// One-step transition e -> a*e + w on the grid, shared by forward density
// propagation and the backward expectation in the Bellman step. The two
// directions are exact adjoints of each other, so that a policy's cost is the
// same whether it is computed backward (value tables) or forward (densities).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "evtrig/errors.hpp"
#include "evtrig/model.hpp"

namespace evtrig {

/// Kernel entries below this fraction of the peak are dropped.
inline constexpr double kKernelTrim = 1e-18;
/// Largest probability mass that may leave the grid in one step.
inline constexpr double kMaxOffGridMass = 1e-6;

class TransitionKernel {
 public:
  TransitionKernel(const Grid& grid, double a, const TabulatedDensity& noise) : grid_(grid), a_(a) {
    if (!(noise.grid() == grid)) throw std::invalid_argument("TransitionKernel: noise must live on the same grid");
    if (a == 0.0 || !std::isfinite(a)) throw std::invalid_argument("TransitionKernel: a must be finite and non-zero");
    const std::size_t m = grid.size();
    const std::size_t c = grid.center();
    noise_ = noise.values();

    double peak = 0.0;
    for (double v : noise_) peak = std::max(peak, v);
    if (!(peak > 0.0)) throw DegenerateGrid("TransitionKernel: noise density is identically zero");
    support_ = 0;
    for (std::size_t d = 0; d <= c; ++d)
      if (noise_[c + d] > kKernelTrim * peak || noise_[c - d] > kKernelTrim * peak) support_ = d;

    column_sum_.resize(m);
    for (std::size_t col = 0; col < m; ++col) {
      column_sum_[col] = correlate(col, [&](std::size_t i) { return grid_.weight(i); });
    }

    landing_.resize(m);
    const double cd = static_cast<double>(c);
    for (std::size_t j = 0; j < m; ++j) {
      // Position of a*e_j in index units relative to the centre; computed on
      // |u| so that mirrored nodes land on mirrored cells.
      const double u = a * (static_cast<double>(j) - cd);
      const double au = std::abs(u);
      const bool negative = u < 0.0;
      Landing& l = landing_[j];
      std::size_t off_lo, off_hi;
      if (au > cd) {
        off_lo = off_hi = c;
        l.theta = 0.0;
        l.clamped = true;
      } else {
        const double fl = std::floor(au);
        off_lo = static_cast<std::size_t>(fl);
        l.theta = au - fl;
        off_hi = l.theta > 0.0 ? off_lo + 1 : off_lo;
        l.clamped = false;
      }
      l.lo = negative ? c - off_lo : c + off_lo;
      l.hi = negative ? c - off_hi : c + off_hi;
    }
  }

  const Grid& grid() const { return grid_; }
  double a() const { return a_; }
  std::size_t support() const { return support_; }

  /// Backward step: returns G_j = E[v(a*e_j + w)] for a function v sampled
  /// at the nodes. Landing points outside [-L, L] take the boundary value.
  std::vector<double> expect(const std::vector<double>& v) const {
    const std::size_t m = grid_.size();
    if (v.size() != m) throw std::invalid_argument("TransitionKernel::expect: size mismatch");
    std::vector<double> h(m);
    for (std::size_t col = 0; col < m; ++col)
      h[col] = correlate(col, [&](std::size_t i) { return grid_.weight(i) * v[i]; }) / column_sum_[col];
    std::vector<double> g(m);
    for (std::size_t j = 0; j < m; ++j) {
      const Landing& l = landing_[j];
      g[j] = l.theta == 0.0 ? h[l.lo] : (1.0 - l.theta) * h[l.lo] + l.theta * h[l.hi];
    }
    return g;
  }

  struct Propagated {
    std::vector<double> masses;
    double offgrid = 0.0;  // mass that left [-L, L] before renormalization
  };

  /// Forward step on node masses; total mass is conserved exactly.
  Propagated propagate(const std::vector<double>& masses) const {
    const std::size_t m = grid_.size();
    if (masses.size() != m) throw std::invalid_argument("TransitionKernel::propagate: size mismatch");
    Propagated out;
    std::vector<double> landed(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      const double q = masses[j];
      if (q == 0.0) continue;
      const Landing& l = landing_[j];
      if (l.clamped) out.offgrid += q;
      if (l.theta == 0.0) {
        landed[l.lo] += q;
      } else {
        landed[l.lo] += (1.0 - l.theta) * q;
        landed[l.hi] += l.theta * q;
      }
    }
    std::vector<double> scaled(m);
    for (std::size_t col = 0; col < m; ++col) {
      scaled[col] = landed[col] / column_sum_[col];
      if (column_sum_[col] < 1.0) out.offgrid += landed[col] * (1.0 - column_sum_[col]);
    }
    out.masses.resize(m);
    const std::size_t c = grid_.center();
    for (std::size_t i = 0; i < m; ++i) {
      // sum over source columns col = i -+ d of scaled[col] * noise(e_i - e_col)
      double acc = scaled[i] * noise_[c];
      for (std::size_t d = 1; d <= support_; ++d) {
        const double left = i >= d ? scaled[i - d] * noise_[c + d] : 0.0;
        const double right = i + d < m ? scaled[i + d] * noise_[c - d] : 0.0;
        acc += left + right;
      }
      out.masses[i] = grid_.weight(i) * acc;
    }
    return out;
  }

 private:
  struct Landing {
    std::size_t lo = 0, hi = 0;
    double theta = 0.0;
    bool clamped = false;
  };

  // sum_i f(i) * noise(e_i - e_col), offsets paired as (+d, -d).
  template <typename F>
  double correlate(std::size_t col, F&& f) const {
    const std::size_t m = grid_.size();
    const std::size_t c = grid_.center();
    double acc = f(col) * noise_[c];
    for (std::size_t d = 1; d <= support_; ++d) {
      const double up = col + d < m ? f(col + d) * noise_[c + d] : 0.0;
      const double down = col >= d ? f(col - d) * noise_[c - d] : 0.0;
      acc += up + down;
    }
    return acc;
  }

  Grid grid_;
  double a_;
  std::vector<double> noise_;
  std::size_t support_ = 0;
  std::vector<double> column_sum_;
  std::vector<Landing> landing_;
};

/// A problem instance bound to a grid: discretized densities plus the
/// transition kernel. Immutable after construction.
class Problem {
 public:
  Problem(ProblemSpec spec, Grid grid)
      : spec_(std::move(spec)),
        grid_(grid),
        noise_(discretize(checked(spec_).noise, grid_)),
        init_(discretize(spec_.init, grid_)),
        kernel_(grid_, spec_.a, noise_) {
    if (std::abs(noise_.mean()) >= kZeroMeanTolerance)
      throw std::invalid_argument("Problem: noise density must have zero mean");
    if (std::abs(init_.mean()) >= kZeroMeanTolerance)
      throw std::invalid_argument("Problem: initial deviation density must have zero mean");
  }

  static Problem with_auto_grid(const ProblemSpec& spec, double k_sigma = kDefaultKSigma,
                                std::size_t points = kDefaultPoints) {
    validate(spec);
    return Problem(spec, auto_grid(spec, k_sigma, points));
  }

  const ProblemSpec& spec() const { return spec_; }
  const Grid& grid() const { return grid_; }
  const TabulatedDensity& noise() const { return noise_; }
  const TabulatedDensity& init() const { return init_; }
  const TransitionKernel& kernel() const { return kernel_; }
  int horizon() const { return spec_.horizon; }
  double a() const { return spec_.a; }
  double lambda() const { return spec_.lambda; }

 private:
  static const ProblemSpec& checked(const ProblemSpec& s) {
    validate(s);
    return s;
  }

  ProblemSpec spec_;
  Grid grid_;
  TabulatedDensity noise_;
  TabulatedDensity init_;
  TransitionKernel kernel_;
};

}  // namespace evtrig
