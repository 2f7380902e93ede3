#pragma once

// Problem instance, density descriptions and their tabulation on a uniform
// symmetric grid.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "evtrig/errors.hpp"

namespace evtrig {

struct GaussianMixture {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> sigmas;
};

/// Piecewise-linear density through (abscissae[i], values[i]), zero outside.
struct TabulatedSpec {
  std::vector<double> abscissae;
  std::vector<double> values;
};

using DensitySpec = std::variant<GaussianMixture, TabulatedSpec>;

namespace detail {

inline double normal_pdf(double x, double mean, double sigma) {
  const double z = (x - mean) / sigma;
  return std::exp(-0.5 * z * z) / (std::sqrt(2.0 * std::numbers::pi) * sigma);
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Trapezoid weights for arbitrary sorted abscissae.
inline std::vector<double> trapezoid_weights(const std::vector<double>& x) {
  std::vector<double> w(x.size(), 0.0);
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double half = 0.5 * (x[i + 1] - x[i]);
    w[i] += half;
    w[i + 1] += half;
  }
  return w;
}

}  // namespace detail

/// Throws std::invalid_argument when the description is not a density.
inline void validate(const DensitySpec& spec) {
  std::visit(
      detail::overloaded{
          [](const GaussianMixture& m) {
            if (m.weights.empty() || m.weights.size() != m.means.size() ||
                m.weights.size() != m.sigmas.size())
              throw std::invalid_argument("gaussian mixture: weights, means and sigmas must have equal non-zero length");
            double total = 0.0;
            for (std::size_t i = 0; i < m.weights.size(); ++i) {
              if (!(m.weights[i] >= 0.0)) throw std::invalid_argument("gaussian mixture: negative weight");
              if (!(m.sigmas[i] > 0.0) || !std::isfinite(m.sigmas[i]))
                throw std::invalid_argument("gaussian mixture: sigmas must be positive");
              if (!std::isfinite(m.means[i])) throw std::invalid_argument("gaussian mixture: non-finite mean");
              total += m.weights[i];
            }
            if (std::abs(total - 1.0) > 1e-12)
              throw std::invalid_argument("gaussian mixture: weights must sum to 1");
          },
          [](const TabulatedSpec& t) {
            if (t.abscissae.size() < 2 || t.abscissae.size() != t.values.size())
              throw std::invalid_argument("tabulated density: need at least two (abscissa, value) pairs");
            for (std::size_t i = 0; i < t.values.size(); ++i) {
              if (!(t.values[i] >= 0.0) || !std::isfinite(t.values[i]))
                throw std::invalid_argument("tabulated density: values must be finite and non-negative");
              if (i > 0 && !(t.abscissae[i] > t.abscissae[i - 1]))
                throw std::invalid_argument("tabulated density: abscissae must be strictly increasing");
            }
            const auto w = detail::trapezoid_weights(t.abscissae);
            double total = 0.0;
            for (std::size_t i = 0; i < w.size(); ++i) total += w[i] * t.values[i];
            if (std::abs(total - 1.0) > 1e-6)
              throw std::invalid_argument("tabulated density: trapezoid integral must be 1 within 1e-6");
          }},
      spec);
}

/// Pointwise density value.
inline double evaluate(const DensitySpec& spec, double x) {
  return std::visit(
      detail::overloaded{
          [x](const GaussianMixture& m) {
            double v = 0.0;
            for (std::size_t i = 0; i < m.weights.size(); ++i)
              v += m.weights[i] * detail::normal_pdf(x, m.means[i], m.sigmas[i]);
            return v;
          },
          [x](const TabulatedSpec& t) {
            const auto& xs = t.abscissae;
            if (x < xs.front() || x > xs.back()) return 0.0;
            auto it = std::upper_bound(xs.begin(), xs.end(), x);
            if (it == xs.end()) return t.values.back();
            const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
            const std::size_t lo = hi - 1;
            const double theta = (x - xs[lo]) / (xs[hi] - xs[lo]);
            if (theta == 0.0) return t.values[lo];
            return (1.0 - theta) * t.values[lo] + theta * t.values[hi];
          }},
      spec);
}

inline double mean_of(const DensitySpec& spec) {
  return std::visit(detail::overloaded{[](const GaussianMixture& m) {
                                         double mu = 0.0;
                                         for (std::size_t i = 0; i < m.weights.size(); ++i) mu += m.weights[i] * m.means[i];
                                         return mu;
                                       },
                                       [](const TabulatedSpec& t) {
                                         const auto w = detail::trapezoid_weights(t.abscissae);
                                         double mass = 0.0, first = 0.0;
                                         for (std::size_t i = 0; i < w.size(); ++i) {
                                           mass += w[i] * t.values[i];
                                           first += w[i] * t.values[i] * t.abscissae[i];
                                         }
                                         return first / mass;
                                       }},
                    spec);
}

inline double variance_of(const DensitySpec& spec) {
  const double mu = mean_of(spec);
  return std::visit(detail::overloaded{[mu](const GaussianMixture& m) {
                                         double second = 0.0;
                                         for (std::size_t i = 0; i < m.weights.size(); ++i)
                                           second += m.weights[i] * (m.sigmas[i] * m.sigmas[i] + m.means[i] * m.means[i]);
                                         return second - mu * mu;
                                       },
                                       [mu](const TabulatedSpec& t) {
                                         const auto w = detail::trapezoid_weights(t.abscissae);
                                         double mass = 0.0, second = 0.0;
                                         for (std::size_t i = 0; i < w.size(); ++i) {
                                           const double d = t.abscissae[i] - mu;
                                           mass += w[i] * t.values[i];
                                           second += w[i] * t.values[i] * d * d;
                                         }
                                         return second / mass;
                                       }},
                    spec);
}

/// Equal-weight two-kernel mixture at +-mu whose variance is exactly one.
inline GaussianMixture make_bimodal_mixture(double mu) {
  if (!(mu >= 0.0 && mu < 1.0)) throw std::domain_error("make_bimodal_mixture: mu must lie in [0, 1)");
  const double sigma = std::sqrt(1.0 - mu * mu);
  return GaussianMixture{{0.5, 0.5}, {mu, -mu}, {sigma, sigma}};
}

/// Uniform grid on [-L, L] with an odd number of nodes, so that e = 0 is a
/// node and node j mirrors node M-1-j exactly.
class Grid {
 public:
  Grid(double half_width, std::size_t points) : half_width_(half_width), points_(points) {
    if (!(half_width > 0.0) || !std::isfinite(half_width)) throw std::invalid_argument("Grid: half width must be positive");
    if (points < 3 || points % 2 == 0) throw std::invalid_argument("Grid: point count must be odd and >= 3");
    spacing_ = 2.0 * half_width / static_cast<double>(points - 1);
  }

  double half_width() const { return half_width_; }
  std::size_t size() const { return points_; }
  double spacing() const { return spacing_; }
  std::size_t center() const { return (points_ - 1) / 2; }

  double node(std::size_t j) const {
    return (static_cast<double>(j) - static_cast<double>(center())) * spacing_;
  }
  // Trapezoid weight, which is also the length of the node's cell.
  double weight(std::size_t j) const { return (j == 0 || j + 1 == points_) ? 0.5 * spacing_ : spacing_; }
  // Cells tile [-L, L]; the two end cells are half cells.
  double cell_lo(std::size_t j) const { return j == 0 ? node(0) : node(j) - 0.5 * spacing_; }
  double cell_hi(std::size_t j) const { return j + 1 == points_ ? node(j) : node(j) + 0.5 * spacing_; }

  /// Nearest node index; sets `clamped` when e lies beyond [-L, L].
  std::size_t nearest(double e, bool* clamped = nullptr) const {
    const double u = std::round(e / spacing_);
    const double c = static_cast<double>(center());
    const bool out = std::abs(e) > half_width_;
    if (clamped) *clamped = out;
    if (u <= -c) return 0;
    if (u >= c) return points_ - 1;
    return static_cast<std::size_t>(u + c);
  }

  /// Sums f(j) over all nodes, pairing j with its mirror image so that the
  /// result is bit-identical for mirrored integrands.
  template <typename F>
  double mirror_sum(F&& f) const {
    const std::size_t c = center();
    double acc = f(c);
    for (std::size_t t = 1; t <= c; ++t) acc += f(c - t) + f(c + t);
    return acc;
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.half_width_ == b.half_width_ && a.points_ == b.points_;
  }

 private:
  double half_width_;
  std::size_t points_;
  double spacing_;
};

/// Density sampled at the grid nodes. Node j stands for its cell
/// [cell_lo(j), cell_hi(j)], carrying mass weight(j) * value(j).
class TabulatedDensity {
 public:
  TabulatedDensity(Grid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size()) throw std::invalid_argument("TabulatedDensity: value count must equal grid size");
    for (double v : values_)
      if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("TabulatedDensity: values must be finite and non-negative");
  }

  const Grid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  double operator[](std::size_t j) const { return values_[j]; }
  std::size_t size() const { return values_.size(); }

  double integral() const {
    return grid_.mirror_sum([&](std::size_t j) { return grid_.weight(j) * values_[j]; });
  }
  double mean() const {
    return grid_.mirror_sum([&](std::size_t j) { return grid_.weight(j) * values_[j] * grid_.node(j); }) / integral();
  }
  double variance() const {
    const double mu = mean();
    return grid_.mirror_sum([&](std::size_t j) {
             const double d = grid_.node(j) - mu;
             return grid_.weight(j) * values_[j] * d * d;
           }) /
           integral();
  }

  /// Probability mass per node (cell), summing to integral().
  std::vector<double> masses() const {
    std::vector<double> m(values_.size());
    for (std::size_t j = 0; j < m.size(); ++j) m[j] = grid_.weight(j) * values_[j];
    return m;
  }

  /// Rescales so that the trapezoid integral is one.
  TabulatedDensity normalized() const {
    const double total = integral();
    if (!(total >= 1e-6)) throw DegenerateGrid("density has (numerically) no mass on the grid");
    std::vector<double> v(values_);
    for (double& x : v) x /= total;
    return TabulatedDensity(grid_, std::move(v));
  }

  static TabulatedDensity from_masses(const Grid& grid, const std::vector<double>& masses) {
    std::vector<double> v(masses.size());
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = masses[j] / grid.weight(j);
    return TabulatedDensity(grid, std::move(v));
  }

  bool is_even() const {
    const std::size_t m = values_.size();
    for (std::size_t j = 0; j < m / 2; ++j)
      if (values_[j] != values_[m - 1 - j]) return false;
    return true;
  }

 private:
  Grid grid_;
  std::vector<double> values_;
};

/// Pointwise evaluation (mixtures) or linear interpolation (tables) at the
/// nodes, renormalized to unit trapezoid mass.
inline TabulatedDensity discretize(const DensitySpec& spec, const Grid& grid) {
  std::vector<double> v(grid.size());
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = evaluate(spec, grid.node(j));
  TabulatedDensity raw(grid, std::move(v));
  if (!(raw.integral() >= 1e-6)) throw DegenerateGrid("discretize: total mass on grid below 1e-6");
  return raw.normalized();
}

/// Tolerance on |mean| of a discretized noise density.
inline constexpr double kZeroMeanTolerance = 1e-8;

struct ProblemSpec {
  double a = 1.0;
  double lambda = 0.5;
  int horizon = 1;
  DensitySpec noise = make_bimodal_mixture(0.0);
  // Density of the deviation x0 - init_mean; must be zero-mean.
  DensitySpec init = make_bimodal_mixture(0.0);
  double init_mean = 0.0;
};

inline void validate(const ProblemSpec& spec) {
  if (spec.a == 0.0 || !std::isfinite(spec.a)) throw std::invalid_argument("ProblemSpec: a must be finite and non-zero");
  if (!(spec.lambda >= 0.0) || !std::isfinite(spec.lambda)) throw std::invalid_argument("ProblemSpec: lambda must be >= 0");
  if (spec.horizon < 1) throw std::invalid_argument("ProblemSpec: horizon must be >= 1");
  if (!std::isfinite(spec.init_mean)) throw std::invalid_argument("ProblemSpec: init_mean must be finite");
  validate(spec.noise);
  validate(spec.init);
}

/// Largest open-loop (never transmit) error variance over the horizon.
inline double open_loop_variance(const ProblemSpec& spec) {
  const double var0 = variance_of(spec.init);
  const double varw = variance_of(spec.noise);
  const double a2 = spec.a * spec.a;
  double var = var0, worst = var0;
  for (int k = 1; k < spec.horizon; ++k) {
    var = a2 * var + varw;
    worst = std::max(worst, var);
  }
  return worst;
}

inline constexpr double kDefaultKSigma = 8.0;
inline constexpr std::size_t kDefaultPoints = 2001;

inline Grid auto_grid(const ProblemSpec& spec, double k_sigma = kDefaultKSigma, std::size_t points = kDefaultPoints) {
  if (!(k_sigma >= 4.0)) throw std::invalid_argument("auto_grid: k_sigma must be >= 4");
  return Grid(k_sigma * std::sqrt(open_loop_variance(spec)), points);
}

}  // namespace evtrig
