#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "mjc/effective.hpp"
#include "mjc/errors.hpp"
#include "mjc/fractional.hpp"
#include "mjc/model.hpp"
#include "mjc/parallel.hpp"
#include "mjc/sde.hpp"

namespace mjc {

// Explicit monotone-scheme configuration. The CFL bounds are
//   effective:  dt <= cfl_safety / (Lambda_x + lambda + lf_theta/h_x)
//   two-scale:  dt <= cfl_safety / (Lambda_x + (1/eps)(Lambda_y + max|c|/h_y)
//                                   + lambda + lf_theta/h_x)
// with Lambda the total stencil weight of the fractional Laplacian.
struct SchemeConfig {
  double lf_theta = 0.0;    // artificial viscosity; 0 = auto (max |b| + 1)
  double cfl_safety = 0.9;  // in (0, 1]
  double k_tail = 2.0;      // stencil reach multiplier
  double tolerance = 0.02;  // declared refinement self-consistency tolerance
  int control_resolution = 41;       // v-grid for the two-scale inner sup
  std::size_t node_budget = 200000;  // memory guard for 2-d solves

  void validate() const {
    if (!(cfl_safety > 0.0 && cfl_safety <= 1.0))
      throw ConfigError("cfl_safety must lie in (0,1]");
    if (control_resolution < 2)
      throw ConfigError("control_resolution must be >= 2");
    if (!(tolerance > 0.0)) throw ConfigError("tolerance must be > 0");
  }
};

namespace detail {

inline std::vector<double> checked_taus(const std::vector<double>& taus) {
  if (taus.empty()) throw ConfigError("at least one output level is required");
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (taus[i] < 0.0) throw ConfigError("output levels must be >= 0");
    if (i > 0 && !(taus[i] > taus[i - 1]))
      throw ConfigError("output levels must be strictly increasing");
  }
  return taus;
}

inline std::pair<std::size_t, double> bracket_sorted(
    const std::vector<double>& g, double s) {
  if (g.size() == 1 || s <= g.front()) return {0, 0.0};
  if (s >= g.back()) return {g.size() - 2, 1.0};
  std::size_t i = 0;
  while (i + 2 < g.size() && g[i + 1] <= s) ++i;
  return {i, (s - g[i]) / (g[i + 1] - g[i])};
}

}  // namespace detail

// Value function u(tau, x) on output levels tau = T - t (ascending).
struct ValueFunction1d {
  Axis x;
  std::vector<double> taus;
  std::vector<std::vector<double>> u;  // u[level][ix]

  double at(double tau, double xq) const {
    const auto [lt, wt] = detail::bracket_sorted(taus, tau);
    const auto [ix, wx] =
        detail::bracket_sorted(axis_nodes(), xq);
    const auto val = [&](std::size_t l) {
      if (x.n == 1) return u[l][0];
      return u[l][ix] * (1.0 - wx) + u[l][ix + 1] * wx;
    };
    if (taus.size() == 1) return val(0);
    return val(lt) * (1.0 - wt) + val(lt + 1) * wt;
  }

  const std::vector<double>& axis_nodes() const {
    if (nodes_.empty()) {
      nodes_.resize(static_cast<std::size_t>(x.n));
      for (int i = 0; i < x.n; ++i) nodes_[static_cast<std::size_t>(i)] = x.x(i);
    }
    return nodes_;
  }

 private:
  mutable std::vector<double> nodes_;
};

// Value function u(tau, x, y); values are stored row-major ([iy][ix]).
struct ValueFunction2d {
  Axis x, y;
  std::vector<double> taus;
  std::vector<std::vector<double>> u;  // u[level][iy * nx + ix]

  double value(std::size_t level, int ix, int iy) const {
    return u[level][static_cast<std::size_t>(iy) * static_cast<std::size_t>(x.n) +
                    static_cast<std::size_t>(ix)];
  }

  double at(double tau, double xq, double yq) const {
    const auto [lt, wt] = detail::bracket_sorted(taus, tau);
    const double fx = std::clamp((xq - x.lo()) / x.h(), 0.0, double(x.n - 1));
    const double fy = std::clamp((yq - y.lo()) / y.h(), 0.0, double(y.n - 1));
    const int ix = std::min(static_cast<int>(fx), x.n - 2);
    const int iy = std::min(static_cast<int>(fy), y.n - 2);
    const double wx = fx - ix, wy = fy - iy;
    const auto val = [&](std::size_t l) {
      const double lo = value(l, ix, iy) * (1 - wx) + value(l, ix + 1, iy) * wx;
      const double hi =
          value(l, ix, iy + 1) * (1 - wx) + value(l, ix + 1, iy + 1) * wx;
      return lo * (1 - wy) + hi * wy;
    };
    if (taus.size() == 1) return val(0);
    return val(lt) * (1.0 - wt) + val(lt + 1) * wt;
  }
};

struct EffectiveSolveOptions {
  std::vector<double> taus;  // requested output levels, ascending
  double dt = 0.0;           // 0 = auto from the CFL bound
  Extension extension = Extension::Constant;
  SchemeConfig scheme;
};

namespace detail {

// Auto viscosity coefficient: |dH/dp| is bounded by sup |b|; add a margin.
inline double auto_theta_effective(const EffectiveProblem& eff, const Axis& x) {
  double m = 0.0;
  const std::vector<double> corners = [&] {
    switch (eff.controls.kind) {
      case ControlSet::Kind::Box:
        return std::vector<double>{eff.controls.lo,
                                   0.5 * (eff.controls.lo + eff.controls.hi),
                                   eff.controls.hi};
      case ControlSet::Kind::Finite:
        return eff.controls.points;
      case ControlSet::Kind::Singleton:
        return std::vector<double>{eff.controls.value};
    }
    return std::vector<double>{eff.controls.value};
  }();
  for (int i = 0; i < x.n; ++i)
    for (double v : corners) m = std::max(m, std::fabs(eff.b_bar(x.x(i), v)));
  return m + 1.0;
}

// One explicit step layer guard.
inline void check_bounded(const std::vector<double>& u, double guard,
                          double tau) {
  for (double v : u)
    if (!std::isfinite(v) || std::fabs(v) > guard)
      throw InstabilityError(
          "solution exceeded the a-priori bound at tau = " + std::to_string(tau));
}

// Splits [0, tau_max] into segments ending at each requested level with a
// per-segment uniform dt <= dt_cap.
struct TimeStepper {
  std::vector<double> taus;
  double dt_cap = 0.0;

  template <class Step, class Record>
  void run(Step&& step, Record&& record) const {
    double tau = 0.0;
    std::size_t level = 0;
    if (taus[0] == 0.0) {
      record(level);
      ++level;
    }
    for (; level < taus.size(); ++level) {
      const double target = taus[level];
      const int n = std::max(1, static_cast<int>(std::ceil((target - tau) / dt_cap - 1e-12)));
      const double dt = (target - tau) / n;
      for (int k = 0; k < n; ++k) {
        step(dt, tau);
        tau += dt;
      }
      tau = target;
      record(level);
    }
  }
};

}  // namespace detail

// Explicit monotone solve of the effective equation in time-to-go form
//   d_tau u = L_x u + Hbar(x, u_x) - lambda u,   u(0, x) = g_bar(x),
// with a Lax-Friedrichs numerical Hamiltonian on one-sided differences:
//   Hhat = Hbar(x, (p- + p+)/2) + (theta/2)(p+ - p-).
// The + viscosity sign is what makes the scheme monotone for a Hamiltonian
// entering with + sign (it reduces to upwinding for Hbar = b p).
inline ValueFunction1d solve_effective_hjb(const EffectiveProblem& eff,
                                           const Axis& x,
                                           const EffectiveSolveOptions& opt) {
  opt.scheme.validate();
  const auto taus = detail::checked_taus(opt.taus);
  const double h = x.h();
  const Stencil stencil =
      build_stencil(eff.alpha1, h, stencil_reach(x, opt.scheme.k_tail));
  const double theta = opt.scheme.lf_theta > 0.0
                           ? opt.scheme.lf_theta
                           : detail::auto_theta_effective(eff, x);
  const double lambda = eff.discount;
  const double denom = stencil.row_sum() + lambda + theta / h;
  const double dt_admissible = opt.scheme.cfl_safety / denom;
  double dt_cap = dt_admissible;
  if (opt.dt > 0.0) {
    if (opt.dt > dt_admissible + 1e-15)
      throw ConfigError("CFL violated: admissible dt <= " +
                        std::to_string(dt_admissible) + ", requested " +
                        std::to_string(opt.dt));
    dt_cap = opt.dt;
  }

  const std::size_t nx = static_cast<std::size_t>(x.n);
  std::vector<double> u(nx), unew(nx), hbar_x0(nx);
  for (std::size_t i = 0; i < nx; ++i) {
    u[i] = eff.g_bar(x.x(static_cast<int>(i)));
    hbar_x0[i] = eff.H_bar(x.x(static_cast<int>(i)), 0.0);
  }
  double g_max = 0.0, h_max = 0.0;
  for (std::size_t i = 0; i < nx; ++i) {
    g_max = std::max(g_max, std::fabs(u[i]));
    h_max = std::max(h_max, std::fabs(hbar_x0[i]));
  }
  const double guard = 1e3 * (g_max + (1.0 + taus.back()) * (h_max + 1.0));

  ValueFunction1d out;
  out.x = x;
  out.taus = taus;
  out.u.resize(taus.size());

  const auto step = [&](double dt, double tau) {
    detail::StridedView row{u.data(), x.n, 1, opt.extension};
    for (int i = 0; i < x.n; ++i) {
      const std::size_t k = static_cast<std::size_t>(i);
      const double nonlocal = detail::apply_weights_strided(row, stencil.w, i) +
                              detail::apply_tail_strided(row, stencil, i);
      const double p_minus = (u[k] - row.value(i - 1)) / h;
      const double p_plus = (row.value(i + 1) - u[k]) / h;
      const double hbar = eff.H_bar(x.x(i), 0.5 * (p_minus + p_plus)) +
                          0.5 * theta * (p_plus - p_minus);
      unew[k] = u[k] + dt * (nonlocal + hbar - lambda * u[k]);
    }
    u.swap(unew);
    detail::check_bounded(u, guard, tau);
  };
  detail::TimeStepper{taus, dt_cap}.run(step,
                                        [&](std::size_t level) { out.u[level] = u; });
  return out;
}

struct TwoScaleSolveOptions {
  std::vector<double> taus;
  double dt = 0.0;
  Extension extension = Extension::Constant;
  SchemeConfig scheme;
  // Evaluate the inner sup by golden section at every node and step instead
  // of the per-node control-grid tables (slow; reference route).
  bool exact_hamiltonian = false;
};

// Explicit monotone solve of the two-scale equation in time-to-go form
//   d_tau u = L_x u + (1/eps)[ L_y u + c(x,y) u_y ] + H(x, y, u_x) - lambda u,
//   u(0, x, y) = g(x, y),
// with upwind differencing of the fast transport term and the same
// Lax-Friedrichs Hamiltonian as the effective solver. No ergodic-measure
// input is used anywhere: the solve is the measure-free route to the value
// function.
inline ValueFunction2d solve_two_scale_hjb(const ProblemSpec& spec,
                                           double epsilon, const Axis& x,
                                           const Axis& y,
                                           const TwoScaleSolveOptions& opt) {
  spec.validate();
  opt.scheme.validate();
  if (!(epsilon >= 0.02 && epsilon <= 1.0))
    throw ParameterError(
        "two-scale solve targets epsilon in [0.02, 1] at desk scale");
  const auto taus = detail::checked_taus(opt.taus);
  const std::size_t nx = static_cast<std::size_t>(x.n);
  const std::size_t ny = static_cast<std::size_t>(y.n);
  if (nx * ny > opt.scheme.node_budget)
    throw ConfigError("grid exceeds the configured node budget (" +
                      std::to_string(nx * ny) + " > " +
                      std::to_string(opt.scheme.node_budget) + ")");
  const double hx = x.h(), hy = y.h();
  const Stencil sx =
      build_stencil(spec.alpha1, hx, stencil_reach(x, opt.scheme.k_tail));
  const Stencil sy =
      build_stencil(spec.alpha2, hy, stencil_reach(y, opt.scheme.k_tail));

  // control tables: B[(iy*nx+ix)*nv + k], same layout for the running cost
  const std::vector<double> v_grid =
      control_grid(spec.controls, opt.scheme.control_resolution);
  const std::size_t nv = v_grid.size();
  std::vector<double> bt, lt;
  double b_abs_max = 0.0, c_abs_max = 0.0;
  {
    bt.resize(nx * ny * nv);
    lt.resize(nx * ny * nv);
    for (std::size_t iy = 0; iy < ny; ++iy) {
      const double yv = y.x(static_cast<int>(iy));
      for (std::size_t ix = 0; ix < nx; ++ix) {
        const double xv = x.x(static_cast<int>(ix));
        c_abs_max = std::max(c_abs_max, std::fabs(spec.drift_c(xv, yv)));
        const std::size_t base = (iy * nx + ix) * nv;
        for (std::size_t k = 0; k < nv; ++k) {
          bt[base + k] = spec.drift_b(xv, yv, v_grid[k]);
          lt[base + k] = spec.cost_L(xv, yv, v_grid[k]);
          if (!std::isfinite(bt[base + k]) || !std::isfinite(lt[base + k]))
            throw ModelError("coefficient not finite at (x=" +
                             std::to_string(xv) + ", y=" + std::to_string(yv) +
                             ")");
          b_abs_max = std::max(b_abs_max, std::fabs(bt[base + k]));
        }
      }
    }
  }
  const double theta =
      opt.scheme.lf_theta > 0.0 ? opt.scheme.lf_theta : b_abs_max + 1.0;
  const double lambda = spec.discount;
  const double denom = sx.row_sum() + theta / hx + lambda +
                       (1.0 / epsilon) * (sy.row_sum() + c_abs_max / hy);
  const double dt_admissible = opt.scheme.cfl_safety / denom;
  double dt_cap = dt_admissible;
  if (opt.dt > 0.0) {
    if (opt.dt > dt_admissible + 1e-15)
      throw ConfigError("CFL violated: admissible dt <= " +
                        std::to_string(dt_admissible) + ", requested " +
                        std::to_string(opt.dt));
    dt_cap = opt.dt;
  }

  std::vector<double> u(nx * ny), unew(nx * ny);
  double g_max = 0.0, h_max = 0.0;
  for (std::size_t iy = 0; iy < ny; ++iy)
    for (std::size_t ix = 0; ix < nx; ++ix) {
      const double g = spec.terminal_g(x.x(static_cast<int>(ix)),
                                       y.x(static_cast<int>(iy)));
      if (!std::isfinite(g)) throw ModelError("terminal cost not finite");
      u[iy * nx + ix] = g;
      g_max = std::max(g_max, std::fabs(g));
      const std::size_t base = (iy * nx + ix) * nv;
      for (std::size_t k = 0; k < nv; ++k)
        h_max = std::max(h_max, std::fabs(-lt[base + k]));
    }
  const double guard = 1e3 * (g_max + (1.0 + taus.back()) * (h_max + 1.0));

  ValueFunction2d out;
  out.x = x;
  out.y = y;
  out.taus = taus;
  out.u.resize(taus.size());

  const auto step = [&](double dt, double tau) {
    parallel_for(ny, [&](std::size_t iy) {
      detail::StridedView row{u.data() + iy * nx, x.n, 1, opt.extension};
      const double yv = y.x(static_cast<int>(iy));
      for (std::size_t ix = 0; ix < nx; ++ix) {
        const int i = static_cast<int>(ix);
        const double ui = u[iy * nx + ix];
        const double xv = x.x(i);
        const double nonlocal_x =
            detail::apply_weights_strided(row, sx.w, i) +
            detail::apply_tail_strided(row, sx, i);
        detail::StridedView col{u.data() + ix, y.n, static_cast<long>(nx),
                                opt.extension};
        const int j = static_cast<int>(iy);
        const double nonlocal_y =
            detail::apply_weights_strided(col, sy.w, j) +
            detail::apply_tail_strided(col, sy, j);
        const double cv = spec.drift_c(xv, yv);
        const double dy_up = cv > 0.0 ? (col.value(j + 1) - ui) / hy
                                      : (ui - col.value(j - 1)) / hy;
        const double p_minus = (ui - row.value(i - 1)) / hx;
        const double p_plus = (row.value(i + 1) - ui) / hx;
        const double p_bar = 0.5 * (p_minus + p_plus);
        double hval;
        if (opt.exact_hamiltonian) {
          hval = hamiltonian(spec, xv, yv, p_bar).value;
        } else {
          const std::size_t base = (iy * nx + ix) * nv;
          hval = bt[base] * p_bar - lt[base];
          for (std::size_t k = 1; k < nv; ++k)
            hval = std::max(hval, bt[base + k] * p_bar - lt[base + k]);
        }
        hval += 0.5 * theta * (p_plus - p_minus);
        unew[iy * nx + ix] =
            ui + dt * (nonlocal_x + (nonlocal_y + cv * dy_up) / epsilon +
                       hval - lambda * ui);
      }
    }, /*grain=*/1);
    u.swap(unew);
    detail::check_bounded(u, guard, tau);
  };
  detail::TimeStepper{taus, dt_cap}.run(step,
                                        [&](std::size_t level) { out.u[level] = u; });
  return out;
}

// Feedback policy v*(t,x) = argmax_v [ b_bar(x,v) grad_u(t,x) - L_bar(x,v) ]
// from central differences of a solved value function; ties resolve to the
// smallest control as in the Hamiltonian evaluation.
inline std::shared_ptr<const PolicyTable> extract_policy(
    const EffectiveProblem& eff, const ValueFunction1d& u) {
  auto table = std::make_shared<PolicyTable>();
  table->horizon = eff.horizon;
  table->taus = u.taus;
  table->xs = u.axis_nodes();
  table->values.assign(u.taus.size(),
                       std::vector<double>(static_cast<std::size_t>(u.x.n)));
  const double h = u.x.h();
  for (std::size_t l = 0; l < u.taus.size(); ++l) {
    for (int i = 0; i < u.x.n; ++i) {
      const auto& layer = u.u[l];
      const std::size_t k = static_cast<std::size_t>(i);
      double grad;
      if (i == 0)
        grad = (layer[1] - layer[0]) / h;
      else if (i == u.x.n - 1)
        grad = (layer[k] - layer[k - 1]) / h;
      else
        grad = (layer[k + 1] - layer[k - 1]) / (2.0 * h);
      const double xv = u.x.x(i);
      const auto objective = [&](double v) {
        return eff.b_bar(xv, v) * grad - eff.L_bar(xv, v);
      };
      double best;
      switch (eff.controls.kind) {
        case ControlSet::Kind::Singleton:
          best = eff.controls.value;
          break;
        case ControlSet::Kind::Finite: {
          best = eff.controls.points.front();
          double bf = objective(best);
          for (double v : eff.controls.points) {
            const double fv = objective(v);
            if (fv > bf) {
              bf = fv;
              best = v;
            }
          }
          break;
        }
        case ControlSet::Kind::Box:
          best = detail::box_max(objective, eff.controls.lo, eff.controls.hi,
                                 detail::kControlTol)
                     .argmax;
          break;
        default:
          best = eff.controls.value;
      }
      table->values[l][k] = best;
    }
  }
  return table;
}

}  // namespace mjc
