#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mjc/errors.hpp"
#include "mjc/model.hpp"
#include "mjc/parallel.hpp"
#include "mjc/stable.hpp"
#include "mjc/stats.hpp"

namespace mjc {

// Declared weak-order self-consistency tolerance of the Euler skeleton:
// halving dt moves E[phi(X_T)] for smooth bounded phi by at most this much
// at benchmark scale.
inline constexpr double kWeakSelfConsistencyTol = 0.05;

// Euler skeleton of a simulated path. times[0] is the start time, the last
// entry the end time; states are finite by construction (the integrators
// throw DivergenceError otherwise).
struct Trajectory {
  std::vector<double> times;
  std::vector<double> states;
  std::string kind;         // "slow", "fast", "frozen", "averaged"
  double epsilon = 0.0;     // 0 for frozen/averaged
  double dt = 0.0;
  std::uint64_t seed = 0;

  double back() const { return states.back(); }
};

struct SlowFastPaths {
  Trajectory x;
  Trajectory y;
};

// Interpolated feedback table on (tau = T - t, x); produced by the HJB
// policy extraction and replayed here.
struct PolicyTable {
  double horizon = 0.0;            // T used to map t -> tau
  std::vector<double> taus;        // ascending
  std::vector<double> xs;          // ascending
  std::vector<std::vector<double>> values;  // values[i_tau][i_x]

  double at(double t, double x) const {
    const double tau = horizon - t;
    const auto bracket = [](const std::vector<double>& g, double s) {
      if (s <= g.front()) return std::make_pair(std::size_t{0}, 0.0);
      if (s >= g.back()) return std::make_pair(g.size() - 2, 1.0);
      std::size_t i = 0;
      while (i + 2 < g.size() && g[i + 1] <= s) ++i;
      return std::make_pair(i, (s - g[i]) / (g[i + 1] - g[i]));
    };
    if (taus.size() == 1 && xs.size() == 1) return values[0][0];
    if (taus.size() == 1) {
      auto [j, wx] = bracket(xs, x);
      return values[0][j] * (1 - wx) + values[0][j + 1] * wx;
    }
    auto [i, wt] = bracket(taus, tau);
    if (xs.size() == 1)
      return values[i][0] * (1 - wt) + values[i + 1][0] * wt;
    auto [j, wx] = bracket(xs, x);
    const double lo = values[i][j] * (1 - wx) + values[i][j + 1] * wx;
    const double hi = values[i + 1][j] * (1 - wx) + values[i + 1][j + 1] * wx;
    return lo * (1 - wt) + hi * wt;
  }
};

// Control law evaluated at the left endpoint of every step; outputs are
// clamped into the model's control set by the integrators.
class Policy {
 public:
  static Policy constant(double v) {
    Policy p;
    p.eval_ = [v](double, double, double) { return v; };
    p.label_ = "const:" + std::to_string(v);
    return p;
  }
  static Policy feedback_tx(std::function<double(double, double)> f,
                            std::string label = "feedback(t,x)") {
    Policy p;
    p.eval_ = [f = std::move(f)](double t, double x, double) { return f(t, x); };
    p.label_ = std::move(label);
    return p;
  }
  static Policy feedback_txy(std::function<double(double, double, double)> f,
                             std::string label = "feedback(t,x,y)") {
    Policy p;
    p.eval_ = std::move(f);
    p.label_ = std::move(label);
    return p;
  }
  static Policy from_table(std::shared_ptr<const PolicyTable> table) {
    Policy p;
    p.eval_ = [table](double t, double x, double) { return table->at(t, x); };
    p.label_ = "hjb-table";
    return p;
  }

  double operator()(double t, double x, double y) const { return eval_(t, x, y); }
  const std::string& label() const { return label_; }

 private:
  std::function<double(double, double, double)> eval_ =
      [](double, double, double) { return 0.0; };
  std::string label_ = "const:0";
};

// Two independent noise channels per path: the averaged dynamics reuses the
// slow channel of the matching path id, which is what makes paired
// multiscale-vs-averaged comparisons low-variance. `family` separates whole
// ensembles (use distinct families when independence is required).
struct PathRng {
  RandomStream slow;
  RandomStream fast;
  PathRng(std::uint64_t seed, std::uint64_t path = 0, std::uint64_t family = 0)
      : slow(seed, path, 2 * family), fast(seed, path, 2 * family + 1) {}
};

namespace detail {

inline void check_state(double value, std::size_t step, const char* which) {
  if (!std::isfinite(value) || std::fabs(value) > 1e12)
    throw DivergenceError(std::string(which) +
                          " diverged at step " + std::to_string(step));
}

inline std::size_t step_count(double t0, double t1, double dt) {
  if (!(dt > 0.0)) throw ParameterError("dt must be > 0");
  if (!(t1 > t0)) throw ParameterError("time window is empty");
  return static_cast<std::size_t>(std::ceil((t1 - t0) / dt - 1e-12));
}

}  // namespace detail

// Euler-Maruyama skeleton of the slow-fast system
//   dX = b(X,Y,v) ds + dL^{a1},  dY = (1/eps) c(X,Y) ds + (ds/eps)^{1/a2} dS.
// Control at the left endpoint. The observer is called at every node k with
// (k, t_k, x_k, y_k, v_k); v at the final node is evaluated but unused by
// the dynamics.
template <class Observer>
void drive_slow_fast(const ProblemSpec& spec, double epsilon,
                     const Policy& policy, double x0, double y0, double t0,
                     double t1, double dt, PathRng& rng, bool noise,
                     Observer&& observe) {
  spec.validate();
  if (!(epsilon > 0.0 && epsilon <= 1.0))
    throw ParameterError("epsilon must lie in (0,1]");
  if (dt > epsilon / 10.0 + 1e-15)
    throw ParameterError("dt must satisfy dt <= epsilon/10 (fast-scale resolution)");
  const std::size_t n = detail::step_count(t0, t1, dt);
  double x = x0, y = y0, t = t0;
  for (std::size_t k = 0; k < n; ++k) {
    const double h = std::min(dt, t1 - t);
    const double v = spec.controls.clamp(policy(t, x, y));
    observe(k, t, x, y, v);
    const double bx = spec.drift_b(x, y, v);
    const double cy = spec.drift_c(x, y);
    double dx = bx * h;
    double dy = cy * h / epsilon;
    if (noise) {
      dx += sample_increment(spec.alpha1, h, rng.slow);
      dy += std::pow(h / epsilon, 1.0 / spec.alpha2) *
            sample_standard(spec.alpha2, rng.fast);
    }
    x += dx;
    y += dy;
    t = (k + 1 == n) ? t1 : t0 + static_cast<double>(k + 1) * dt;
    detail::check_state(x, k + 1, "slow state");
    detail::check_state(y, k + 1, "fast state");
  }
  observe(n, t1, x, y, spec.controls.clamp(policy(t1, x, y)));
}

// Frozen fast equation dY = c(x_frozen, Y) ds + dL^{a2} on [0, horizon].
template <class Observer>
void drive_frozen(const ProblemSpec& spec, double x_frozen, double y0,
                  double horizon, double dt, RandomStream& rng, bool noise,
                  Observer&& observe) {
  spec.validate();
  const std::size_t n = detail::step_count(0.0, horizon, dt);
  double y = y0, t = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double h = std::min(dt, horizon - t);
    observe(k, t, y);
    double dy = spec.drift_c(x_frozen, y) * h;
    if (noise) dy += sample_increment(spec.alpha2, h, rng);
    y += dy;
    t = (k + 1 == n) ? horizon : static_cast<double>(k + 1) * dt;
    detail::check_state(y, k + 1, "frozen state");
  }
  observe(n, horizon, y);
}

// Averaged slow equation dXbar = b_bar(Xbar, v) ds + dL^{a1}. Eff must
// expose b_bar(x,v), controls, alpha1 (satisfied by EffectiveProblem).
template <class Eff, class Observer>
void drive_averaged(const Eff& eff, const Policy& policy, double x0, double t0,
                    double t1, double dt, RandomStream& slow_rng, bool noise,
                    Observer&& observe) {
  const std::size_t n = detail::step_count(t0, t1, dt);
  double x = x0, t = t0;
  for (std::size_t k = 0; k < n; ++k) {
    const double h = std::min(dt, t1 - t);
    const double v = eff.controls.clamp(policy(t, x, 0.0));
    observe(k, t, x, v);
    double dx = eff.b_bar(x, v) * h;
    if (noise) dx += sample_increment(eff.alpha1, h, slow_rng);
    x += dx;
    t = (k + 1 == n) ? t1 : t0 + static_cast<double>(k + 1) * dt;
    detail::check_state(x, k + 1, "averaged state");
  }
  observe(n, t1, x, eff.controls.clamp(policy(t1, x, 0.0)));
}

inline SlowFastPaths simulate_slow_fast(const ProblemSpec& spec, double epsilon,
                                        const Policy& policy, double x0,
                                        double y0, double t0, double dt,
                                        PathRng& rng, bool noise = true) {
  SlowFastPaths out;
  const double T = spec.horizon;
  out.x.kind = "slow";
  out.y.kind = "fast";
  out.x.epsilon = out.y.epsilon = epsilon;
  out.x.dt = out.y.dt = dt;
  drive_slow_fast(spec, epsilon, policy, x0, y0, t0, T, dt, rng, noise,
                  [&](std::size_t, double t, double x, double y, double) {
                    out.x.times.push_back(t);
                    out.x.states.push_back(x);
                    out.y.times.push_back(t);
                    out.y.states.push_back(y);
                  });
  return out;
}

inline Trajectory simulate_frozen(const ProblemSpec& spec, double x_frozen,
                                  double y0, double horizon, double dt,
                                  RandomStream& rng, bool noise = true) {
  Trajectory out;
  out.kind = "frozen";
  out.dt = dt;
  drive_frozen(spec, x_frozen, y0, horizon, dt, rng, noise,
               [&](std::size_t, double t, double y) {
                 out.times.push_back(t);
                 out.states.push_back(y);
               });
  return out;
}

template <class Eff>
Trajectory simulate_averaged(const Eff& eff, const Policy& policy, double x0,
                             double t0, double dt, RandomStream& slow_rng,
                             bool noise = true) {
  Trajectory out;
  out.kind = "averaged";
  out.dt = dt;
  drive_averaged(eff, policy, x0, t0, eff.horizon, dt, slow_rng, noise,
                 [&](std::size_t, double t, double x, double) {
                   out.times.push_back(t);
                   out.states.push_back(x);
                 });
  return out;
}

// Monte Carlo estimate of E[ sup_{0<=s<=T} |X^eps_s|^p ] over the Euler
// skeleton. Requires 1 <= p < alpha1: heavier moments of the stable noise
// are infinite.
inline Estimate estimate_sup_moment(const ProblemSpec& spec, double epsilon,
                                    double p, double x0, double y0,
                                    std::size_t n_paths, double dt,
                                    std::uint64_t seed) {
  spec.validate();
  if (!(p >= 1.0 && p < spec.alpha1))
    throw ParameterError(
        "sup-moment exponent must satisfy 1 <= p < alpha1 = " +
        std::to_string(spec.alpha1) + " (heavier moments are infinite)");
  std::vector<double> sup_p(n_paths, 0.0);
  const Policy zero = Policy::constant(0.0);
  parallel_for(n_paths, [&](std::size_t i) {
    PathRng rng(seed, i);
    double m = std::fabs(x0);
    drive_slow_fast(spec, epsilon, zero, x0, y0, 0.0, spec.horizon, dt, rng,
                    true, [&](std::size_t, double, double x, double, double) {
                      m = std::max(m, std::fabs(x));
                    });
    sup_p[i] = std::pow(m, p);
  });
  return mean_with_stderr(sup_p);
}

// Synchronous coupling of two frozen paths driven by the same noise; the
// additive increments cancel in the difference, so for x1 = x2 the squared
// gap decays deterministically under the dissipativity of c.
inline std::vector<std::pair<double, double>> coupled_frozen_contraction(
    const ProblemSpec& spec, double x1, double y1, double x2, double y2,
    double horizon, double dt, RandomStream& rng, bool noise = true) {
  spec.validate();
  const std::size_t n = detail::step_count(0.0, horizon, dt);
  std::vector<std::pair<double, double>> gap;
  gap.reserve(n + 1);
  double a = y1, b = y2, t = 0.0;
  gap.emplace_back(0.0, (a - b) * (a - b));
  for (std::size_t k = 0; k < n; ++k) {
    const double h = std::min(dt, horizon - t);
    double incr = 0.0;
    if (noise) incr = sample_increment(spec.alpha2, h, rng);
    a += spec.drift_c(x1, a) * h + incr;
    b += spec.drift_c(x2, b) * h + incr;
    t = (k + 1 == n) ? horizon : static_cast<double>(k + 1) * dt;
    detail::check_state(a, k + 1, "coupled state");
    detail::check_state(b, k + 1, "coupled state");
    gap.emplace_back(t, (a - b) * (a - b));
  }
  return gap;
}

}  // namespace mjc
