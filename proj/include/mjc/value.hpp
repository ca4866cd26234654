#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mjc/effective.hpp"
#include "mjc/errors.hpp"
#include "mjc/parallel.hpp"
#include "mjc/sde.hpp"
#include "mjc/stats.hpp"

namespace mjc {

struct CostEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n_paths = 0;
  std::string policy;
  double epsilon = 0.0;  // 0 marks the averaged dynamics
  double t0 = 0.0, x0 = 0.0, y0 = 0.0;
};

namespace detail {

// Per-path payoff  -I_t0^T e^{lambda(s-T)} L(X_s, Y_s, v_s) ds
//                  + e^{lambda(t0-T)} g(X_T, Y_T)
// with trapezoidal accumulation along the Euler skeleton. The discount
// weights are exactly the printed cost functional; the PDE solvers use the
// dynamic-programming form, and their mutual consistency is a test target.
inline std::vector<double> slow_fast_payoffs(const ProblemSpec& spec,
                                             double epsilon,
                                             const Policy& policy, double x0,
                                             double y0, double t0,
                                             std::size_t n_paths, double dt,
                                             std::uint64_t seed,
                                             std::uint64_t family) {
  const double T = spec.horizon;
  const double lambda = spec.discount;
  std::vector<double> payoffs(n_paths);
  if (t0 == T) {
    const double g = spec.terminal_g(x0, y0);
    for (auto& p : payoffs) p = g;
    return payoffs;
  }
  parallel_for(n_paths, [&](std::size_t i) {
    PathRng rng(seed, i, family);
    double acc = 0.0, prev_f = 0.0, prev_t = t0;
    bool have_prev = false;
    double xT = x0, yT = y0;
    drive_slow_fast(spec, epsilon, policy, x0, y0, t0, T, dt, rng, true,
                    [&](std::size_t, double t, double x, double y, double v) {
                      const double f =
                          -std::exp(lambda * (t - T)) * spec.cost_L(x, y, v);
                      if (have_prev) acc += 0.5 * (prev_f + f) * (t - prev_t);
                      prev_f = f;
                      prev_t = t;
                      have_prev = true;
                      xT = x;
                      yT = y;
                    });
    payoffs[i] =
        acc + std::exp(lambda * (t0 - T)) * spec.terminal_g(xT, yT);
  });
  return payoffs;
}

inline std::vector<double> averaged_payoffs(const EffectiveProblem& eff,
                                            const Policy& policy, double x0,
                                            double t0, std::size_t n_paths,
                                            double dt, std::uint64_t seed,
                                            std::uint64_t family) {
  const double T = eff.horizon;
  const double lambda = eff.discount;
  std::vector<double> payoffs(n_paths);
  if (t0 == T) {
    const double g = eff.g_bar(x0);
    for (auto& p : payoffs) p = g;
    return payoffs;
  }
  parallel_for(n_paths, [&](std::size_t i) {
    PathRng rng(seed, i, family);
    double acc = 0.0, prev_f = 0.0, prev_t = t0;
    bool have_prev = false;
    double xT = x0;
    drive_averaged(eff, policy, x0, t0, T, dt, rng.slow, true,
                   [&](std::size_t, double t, double x, double v) {
                     const double f =
                         -std::exp(lambda * (t - T)) * eff.L_bar(x, v);
                     if (have_prev) acc += 0.5 * (prev_f + f) * (t - prev_t);
                     prev_f = f;
                     prev_t = t;
                     have_prev = true;
                     xT = x;
                   });
    payoffs[i] = acc + std::exp(lambda * (t0 - T)) * eff.g_bar(xT);
  });
  return payoffs;
}

}  // namespace detail

// Monte Carlo value of the multiscale cost functional under a fixed policy.
inline CostEstimate estimate_cost(const ProblemSpec& spec, double epsilon,
                                  const Policy& policy, double x0, double y0,
                                  double t0, std::size_t n_paths, double dt,
                                  std::uint64_t seed,
                                  std::uint64_t family = 0) {
  spec.validate();
  if (t0 > spec.horizon) throw ParameterError("t0 must be <= horizon");
  const auto payoffs = detail::slow_fast_payoffs(spec, epsilon, policy, x0, y0,
                                                 t0, n_paths, dt, seed, family);
  const auto est = mean_with_stderr(payoffs);
  CostEstimate out;
  out.mean = est.value;
  out.stderr_ = est.stderr_;
  out.n_paths = n_paths;
  out.policy = policy.label();
  out.epsilon = epsilon;
  out.t0 = t0;
  out.x0 = x0;
  out.y0 = y0;
  return out;
}

// Monte Carlo value of the effective cost functional.
inline CostEstimate estimate_effective_cost(const EffectiveProblem& eff,
                                            const Policy& policy, double x0,
                                            double t0, std::size_t n_paths,
                                            double dt, std::uint64_t seed,
                                            std::uint64_t family = 0) {
  if (t0 > eff.horizon) throw ParameterError("t0 must be <= horizon");
  const auto payoffs =
      detail::averaged_payoffs(eff, policy, x0, t0, n_paths, dt, seed, family);
  const auto est = mean_with_stderr(payoffs);
  CostEstimate out;
  out.mean = est.value;
  out.stderr_ = est.stderr_;
  out.n_paths = n_paths;
  out.policy = policy.label();
  out.epsilon = 0.0;
  out.t0 = t0;
  out.x0 = x0;
  out.y0 = 0.0;
  return out;
}

struct CostGapRow {
  double epsilon = 0.0;
  double gap = 0.0;      // |J^eps - J_bar|
  double stderr_ = 0.0;  // paired-difference standard error
  double j_eps = 0.0;
  double j_bar = 0.0;
};

// |J^eps - J_bar| for a decreasing list of scales. All runs share one dt
// (the finest required) and per-path noise substreams, and the averaged run
// replays exactly the slow-noise channel of the multiscale runs, so the gap
// is estimated as a paired difference; J_bar itself is computed once.
inline std::vector<CostGapRow> cost_convergence_table(
    const ProblemSpec& spec, const EffectiveProblem& eff, const Policy& policy,
    const std::vector<double>& eps_list, double x0, double y0, double t0,
    std::size_t n_paths, double dt, std::uint64_t seed) {
  spec.validate();
  if (eps_list.empty()) throw ParameterError("eps list must be nonempty");
  for (std::size_t i = 1; i < eps_list.size(); ++i)
    if (!(eps_list[i] < eps_list[i - 1]))
      throw ParameterError("eps list must be strictly decreasing");
  double dt_common = dt;
  for (double eps : eps_list) dt_common = std::min(dt_common, eps / 10.0);

  const auto bar = detail::averaged_payoffs(eff, policy, x0, t0, n_paths,
                                            dt_common, seed, 0);
  const double j_bar = mean_with_stderr(bar).value;

  std::vector<CostGapRow> rows;
  for (double eps : eps_list) {
    const auto pay = detail::slow_fast_payoffs(spec, eps, policy, x0, y0, t0,
                                               n_paths, dt_common, seed, 0);
    std::vector<double> diff(n_paths);
    for (std::size_t i = 0; i < n_paths; ++i) diff[i] = pay[i] - bar[i];
    const auto d = mean_with_stderr(diff);
    CostGapRow row;
    row.epsilon = eps;
    row.gap = std::fabs(d.value);
    row.stderr_ = d.stderr_;
    row.j_eps = mean_with_stderr(pay).value;
    row.j_bar = j_bar;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace mjc
