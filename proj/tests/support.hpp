#pragma once

#include <cmath>
#include <vector>

#include "evtrig/evtrig.hpp"

namespace evtrig::testing {

inline GaussianMixture standard_normal() { return GaussianMixture{{1.0}, {0.0}, {1.0}}; }

inline ProblemSpec bimodal_spec(double mu, int horizon, double lambda = 0.5, double a = 1.0) {
  ProblemSpec s;
  s.a = a;
  s.lambda = lambda;
  s.horizon = horizon;
  s.noise = make_bimodal_mixture(mu);
  s.init = s.noise;
  return s;
}

inline Problem bimodal_problem(double mu, int horizon, double lambda = 0.5, double a = 1.0,
                               std::size_t points = kDefaultPoints) {
  return Problem::with_auto_grid(bimodal_spec(mu, horizon, lambda, a), kDefaultKSigma, points);
}

// Two narrow Gaussian bumps at +-1 with equal weight, as a tabulated density.
inline TabulatedSpec bernoulli_bumps(double width = 0.02, double half_range = 8.0, std::size_t points = 8001) {
  TabulatedSpec t;
  const double h = 2.0 * half_range / static_cast<double>(points - 1);
  for (std::size_t j = 0; j < points; ++j) {
    const double e = -half_range + static_cast<double>(j) * h;
    t.abscissae.push_back(e);
    t.values.push_back(0.5 * detail::normal_pdf(e, 1.0, width) + 0.5 * detail::normal_pdf(e, -1.0, width));
  }
  double total = 0.0;
  const auto w = detail::trapezoid_weights(t.abscissae);
  for (std::size_t j = 0; j < points; ++j) total += w[j] * t.values[j];
  for (double& v : t.values) v /= total;
  return t;
}

inline double sup_abs_diff(const std::vector<double>& x, const std::vector<double>& y) {
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

inline double mirror_gap(const std::vector<double>& v) {
  double m = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) m = std::max(m, std::abs(v[j] - v[v.size() - 1 - j]));
  return m;
}

}  // namespace evtrig::testing
