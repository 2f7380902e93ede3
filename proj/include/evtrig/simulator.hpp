#pragma once

// Closed-loop Monte Carlo of plant, event-trigger, erasure channel and the
// biased linear-predictor estimator, in the original x coordinates.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "evtrig/errors.hpp"
#include "evtrig/kernel.hpp"
#include "evtrig/model.hpp"
#include "evtrig/parallel.hpp"
#include "evtrig/policy.hpp"

namespace evtrig {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent generator for sample path `path` of a run seeded with `seed`.
inline Rng path_rng(std::uint64_t seed, std::uint64_t path) {
  return Rng(splitmix64(splitmix64(seed) ^ splitmix64(path + 0x632be59bd9b4e019ULL)));
}

/// Draws from a DensitySpec. Tabulated densities are sampled as atoms at
/// their abscissae carrying the trapezoid weights.
class DensitySampler {
 public:
  explicit DensitySampler(DensitySpec spec) : spec_(std::move(spec)) {
    validate(spec_);
    if (const auto* m = std::get_if<GaussianMixture>(&spec_)) {
      atoms_ = m->means;
      cumulative(m->weights);
    } else {
      const auto& t = std::get<TabulatedSpec>(spec_);
      atoms_ = t.abscissae;
      const auto w = detail::trapezoid_weights(t.abscissae);
      std::vector<double> p(w.size());
      for (std::size_t i = 0; i < w.size(); ++i) p[i] = w[i] * t.values[i];
      cumulative(p);
    }
  }

  double operator()(Rng& rng) const {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    std::size_t i = static_cast<std::size_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
    i = std::min(i, cdf_.size() - 1);
    while (i > 0 && cdf_[i] == cdf_[i - 1]) --i;  // skip zero-probability atoms
    if (const auto* m = std::get_if<GaussianMixture>(&spec_))
      return std::normal_distribution<double>(m->means[i], m->sigmas[i])(rng);
    return atoms_[i];
  }

 private:
  void cumulative(const std::vector<double>& p) {
    double total = 0.0;
    for (double x : p) total += x;
    cdf_.resize(p.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      acc += p[i];
      cdf_[i] = acc / total;
    }
    cdf_.back() = 1.0;
  }

  DensitySpec spec_;
  std::vector<double> atoms_;
  std::vector<double> cdf_;
};

inline double sample_density(const DensitySpec& spec, Rng& rng) { return DensitySampler(spec)(rng); }

struct SimConfig {
  std::uint64_t samples = 100000;
  std::uint64_t seed = 1;
};

struct SimReport {
  double mc_cost = 0.0;
  double std_error = 0.0;
  double transmit_rate = 0.0;
  std::vector<double> per_stage_cost;
  double clamp_rate = 0.0;
  // max over paths and stages of | |x_k - xhat_k| - |e_k - ehat_k| |
  double max_identity_gap = 0.0;
  std::uint64_t samples = 0;
};

/// Largest fraction of policy lookups allowed to fall outside the grid.
inline constexpr double kMaxClampRate = 1e-4;

inline SimReport run_closed_loop(const Problem& problem, const Policy& policy, const AlphaMap& alpha,
                                 const SimConfig& cfg, const Exec& exec = {}) {
  const int n = problem.horizon();
  if (policy.horizon() != n || alpha.horizon() != n) throw std::invalid_argument("run_closed_loop: horizon mismatch");
  if (cfg.samples < 1) throw std::invalid_argument("run_closed_loop: samples must be >= 1");
  const auto& spec = problem.spec();
  const DensitySampler noise(spec.noise), init(spec.init);
  const double a = spec.a, lambda = spec.lambda, x_bar = spec.init_mean;

  // Fixed-size blocks keep the reduction order independent of thread count.
  constexpr std::uint64_t kBlock = 4096;
  const std::uint64_t blocks = (cfg.samples + kBlock - 1) / kBlock;
  struct Partial {
    CompensatedSum cost, cost_sq;
    std::vector<CompensatedSum> stage;
    std::uint64_t transmissions = 0, clamps = 0;
    double gap = 0.0;
  };
  std::vector<Partial> partials(blocks);

  parallel_for(static_cast<std::size_t>(blocks), exec, [&](std::size_t b) {
    Partial& part = partials[b];
    part.stage.resize(static_cast<std::size_t>(n));
    const std::uint64_t first = b * kBlock, last = std::min(cfg.samples, first + kBlock);
    for (std::uint64_t path = first; path < last; ++path) {
      Rng rng = path_rng(cfg.seed, path);
      const double deviation = init(rng);
      double x = x_bar + deviation;
      double prediction = x_bar;  // a * xhat^LP_{k-1}, with the convention a*xhat^LP_{-1} = xbar_0
      double e_rec = deviation;   // e_k via e_{k+1} = (1 - delta) a e_k + w_k
      int tau = -1;
      double total = 0.0;
      for (int k = 0; k < n; ++k) {
        const double e = x - prediction;
        bool clamped = false;
        const bool delta = policy.transmit_at(k, tau, e, &clamped);
        if (clamped) ++part.clamps;
        const double a_kt = alpha(k, tau);
        const double x_hat = delta ? x : prediction + a_kt;
        const double err = x - x_hat;
        const double c = err * err + (delta ? lambda : 0.0);
        total += c;
        part.stage[static_cast<std::size_t>(k)].add(c);
        const double e_err = e_rec - (delta ? e_rec : a_kt);
        part.gap = std::max(part.gap, std::abs(std::abs(err) - std::abs(e_err)));
        if (delta) ++part.transmissions;

        const double w = noise(rng);
        const double lp = delta ? x : prediction;
        x = a * x + w;
        prediction = a * lp;
        e_rec = (delta ? 0.0 : a * e_rec) + w;
        if (delta) tau = k;
      }
      part.cost.add(total);
      part.cost_sq.add(total * total);
    }
  });

  CompensatedSum cost, cost_sq;
  std::vector<CompensatedSum> stage(static_cast<std::size_t>(n));
  std::uint64_t transmissions = 0, clamps = 0;
  SimReport rep;
  for (const Partial& p : partials) {
    cost.add(p.cost.value());
    cost_sq.add(p.cost_sq.value());
    for (std::size_t k = 0; k < stage.size(); ++k) stage[k].add(p.stage[k].value());
    transmissions += p.transmissions;
    clamps += p.clamps;
    rep.max_identity_gap = std::max(rep.max_identity_gap, p.gap);
  }
  const double s = static_cast<double>(cfg.samples);
  rep.samples = cfg.samples;
  rep.mc_cost = cost.value() / s;
  const double var = cfg.samples > 1 ? std::max(0.0, (cost_sq.value() - s * rep.mc_cost * rep.mc_cost) / (s - 1.0)) : 0.0;
  rep.std_error = std::sqrt(var / s);
  rep.transmit_rate = static_cast<double>(transmissions) / (s * n);
  rep.per_stage_cost.resize(stage.size());
  for (std::size_t k = 0; k < stage.size(); ++k) rep.per_stage_cost[k] = stage[k].value() / s;
  rep.clamp_rate = static_cast<double>(clamps) / (s * n);
  if (rep.clamp_rate > kMaxClampRate) throw GridOverflow("run_closed_loop: too many error values fell outside the grid");
  return rep;
}

}  // namespace evtrig
