#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "mjc/ergodic.hpp"
#include "mjc/errors.hpp"
#include "mjc/model.hpp"
#include "mjc/parallel.hpp"
#include "mjc/sde.hpp"
#include "mjc/stats.hpp"

namespace mjc {

struct HamiltonianResult {
  double value = 0.0;
  double argmax = 0.0;
};

namespace detail {

inline constexpr double kHamiltonianGuard = 1e12;
inline constexpr double kControlTol = 1e-6;

template <class F>
HamiltonianResult golden_max(F&& f, double lo, double hi, double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  const double arg = 0.5 * (a + b);
  return {f(arg), arg};
}

// Maximize over a box control set: coarse scan (ties keep the smallest
// control), then golden-section refinement of the bracketing interval.
template <class F>
HamiltonianResult box_max(F&& f, double lo, double hi, double tol) {
  if (hi - lo <= tol) {
    const double v = 0.5 * (lo + hi);
    return {f(v), v};
  }
  constexpr int kScan = 33;
  double best_v = lo, best_f = f(lo);
  for (int k = 1; k < kScan; ++k) {
    const double v = lo + (hi - lo) * k / (kScan - 1);
    const double fv = f(v);
    if (fv > best_f) {
      best_f = fv;
      best_v = v;
    }
  }
  const double step = (hi - lo) / (kScan - 1);
  const double a = std::max(lo, best_v - step);
  const double b = std::min(hi, best_v + step);
  const HamiltonianResult refined = golden_max(f, a, b, tol);
  if (refined.value >= best_f) return refined;
  return {best_f, best_v};
}

}  // namespace detail

// Inner Hamiltonian H(x,y,p) = sup_v [ b(x,y,v) p - L(x,y,v) ] with the
// maximizing control (ties resolve to the smallest control). Box sets are
// maximized to 1e-6 in v; finite sets exactly.
inline HamiltonianResult hamiltonian(const ProblemSpec& spec, double x,
                                     double y, double p) {
  if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(p))
    throw ParameterError("hamiltonian: inputs must be finite");
  const auto objective = [&](double v) {
    const double val = spec.drift_b(x, y, v) * p - spec.cost_L(x, y, v);
    if (!std::isfinite(val))
      throw ModelError("Hamiltonian objective not finite at (x=" +
                       std::to_string(x) + ", y=" + std::to_string(y) +
                       ", v=" + std::to_string(v) + ")");
    if (val > detail::kHamiltonianGuard)
      throw ModelError("Hamiltonian objective exceeds 1e12: control problem "
                       "looks unbounded at x=" + std::to_string(x));
    return val;
  };
  switch (spec.controls.kind) {
    case ControlSet::Kind::Singleton:
      return {objective(spec.controls.value), spec.controls.value};
    case ControlSet::Kind::Finite: {
      double best_v = spec.controls.points.front();
      double best = objective(best_v);
      for (double v : spec.controls.points) {
        const double fv = objective(v);
        if (fv > best) {
          best = fv;
          best_v = v;
        }
      }
      return {best, best_v};
    }
    case ControlSet::Kind::Box:
      return detail::box_max(objective, spec.controls.lo, spec.controls.hi,
                             detail::kControlTol);
  }
  return {objective(spec.controls.value), spec.controls.value};
}

enum class MeasureSource { Simulate, ClosedForm };

// Tabulated averaged coefficients: one empirical measure per slow node,
// b_bar/L_bar on a control grid, g_bar per node, and per-sample control
// tables for on-demand evaluation of the averaged Hamiltonian. The sample
// tables are built lazily per node (thread-safe, logically immutable); a
// sample cap trades accuracy for speed in solver-bound builds.
struct TabulatedEffective {
  ProblemSpec spec;
  std::vector<double> x_nodes;
  std::vector<EmpiricalMeasure> measures;
  std::vector<double> v_grid;
  std::vector<std::vector<double>> b_tab;  // [node][v]
  std::vector<std::vector<double>> L_tab;  // [node][v]
  std::vector<double> g_tab;               // [node]
  std::size_t hbar_sample_cap = 0;         // 0 = use every sample

  std::pair<std::size_t, double> bracket(double x) const {
    if (x_nodes.size() == 1 || x <= x_nodes.front()) return {0, 0.0};
    if (x >= x_nodes.back()) return {x_nodes.size() - 2, 1.0};
    std::size_t i = 0;
    while (i + 2 < x_nodes.size() && x_nodes[i + 1] <= x) ++i;
    return {i, (x - x_nodes[i]) / (x_nodes[i + 1] - x_nodes[i])};
  }

  double lerp_v(const std::vector<double>& row, double v) const {
    if (v_grid.size() == 1 || v <= v_grid.front()) return row.front();
    if (v >= v_grid.back()) return row.back();
    std::size_t k = 0;
    while (k + 2 < v_grid.size() && v_grid[k + 1] <= v) ++k;
    const double w = (v - v_grid[k]) / (v_grid[k + 1] - v_grid[k]);
    return row[k] * (1.0 - w) + row[k + 1] * w;
  }

  // sup-then-average at node i: mean over the retained samples of
  // max_k [ b(x_i, y_s, v_k) p - L(x_i, y_s, v_k) ].
  double node_hamiltonian(std::size_t i, double p) const {
    const NodeTables& nt = node_tables(i);
    const std::size_t nv = v_grid.size();
    double acc = 0.0;
    for (std::size_t s = 0; s < nt.count; ++s) {
      const std::size_t base = s * nv;
      double best = nt.b[base] * p - nt.L[base];
      for (std::size_t k = 1; k < nv; ++k)
        best = std::max(best, nt.b[base + k] * p - nt.L[base + k]);
      acc += best;
    }
    return acc / static_cast<double>(nt.count);
  }

  void init_lazy(std::size_t nodes) {
    node_cache_.resize(nodes);
    node_once_.clear();
    for (std::size_t i = 0; i < nodes; ++i)
      node_once_.push_back(std::make_unique<std::once_flag>());
  }

 private:
  struct NodeTables {
    std::vector<double> b;  // [sample * nv + k]
    std::vector<double> L;
    std::size_t count = 0;
  };

  const NodeTables& node_tables(std::size_t i) const {
    std::call_once(*node_once_[i], [&] {
      const auto& mu = measures[i];
      const std::size_t nv = v_grid.size();
      NodeTables nt;
      nt.count = hbar_sample_cap == 0
                     ? mu.samples.size()
                     : std::min(hbar_sample_cap, mu.samples.size());
      const std::size_t stride = std::max<std::size_t>(1, mu.samples.size() / nt.count);
      nt.b.resize(nt.count * nv);
      nt.L.resize(nt.count * nv);
      for (std::size_t s = 0; s < nt.count; ++s) {
        const double y = mu.samples[(s * stride) % mu.samples.size()];
        for (std::size_t k = 0; k < nv; ++k) {
          nt.b[s * nv + k] = spec.drift_b(x_nodes[i], y, v_grid[k]);
          nt.L[s * nv + k] = spec.cost_L(x_nodes[i], y, v_grid[k]);
        }
      }
      node_cache_[i] = std::move(nt);
    });
    return node_cache_[i];
  }

  mutable std::vector<NodeTables> node_cache_;
  std::vector<std::unique_ptr<std::once_flag>> node_once_;
};

// The averaged control problem: coefficients b_bar, L_bar, g_bar and the
// averaged Hamiltonian H_bar, either in closed form (benchmarks with a
// known stationary law) or tabulated from simulated ergodic measures with
// linear interpolation between slow nodes (H_bar is interpolated in x and
// evaluated directly in p).
struct EffectiveProblem {
  std::string model;
  MeasureSource provenance = MeasureSource::ClosedForm;
  double alpha1 = 1.5;
  double discount = 1.0;
  double horizon = 1.0;
  ControlSet controls;
  std::function<double(double, double)> b_bar;  // (x,v)
  std::function<double(double, double)> L_bar;  // (x,v)
  std::function<double(double)> g_bar;          // x
  std::function<double(double, double)> H_bar;  // (x,p)
  std::shared_ptr<const TabulatedEffective> table;  // null for closed form
};

inline double effective_hamiltonian(const EffectiveProblem& eff, double x,
                                    double p) {
  return eff.H_bar(x, p);
}

// sup_{|v|<=1} (v p - v^2/2): the control part of the benchmark Hamiltonian.
inline double clamped_quadratic_sup(double p) {
  return std::fabs(p) <= 1.0 ? 0.5 * p * p : std::fabs(p) - 0.5;
}

// Closed-form effective problems for the built-in benchmarks. The frozen
// dynamics is a stable Ornstein-Uhlenbeck process with unit dissipativity,
// so its stationary law is symmetric alpha-stable with scale^alpha =
// 1/alpha2 shifted by 0.5 sin x, giving E sin(Y) and E cos(Y) in closed
// form through the characteristic function.
inline EffectiveProblem closed_form_effective(const ProblemSpec& spec) {
  spec.validate();
  EffectiveProblem eff;
  eff.model = spec.name;
  eff.provenance = MeasureSource::ClosedForm;
  eff.alpha1 = spec.alpha1;
  eff.discount = spec.discount;
  eff.horizon = spec.horizon;
  eff.controls = spec.controls;
  const double damp = std::exp(-1.0 / spec.alpha2);  // E cos(Y - location)
  if (spec.name == "BM1") {
    const auto loc = [](double x) { return 0.5 * std::sin(x); };
    const auto b0 = [=](double x) { return -x + damp * std::sin(loc(x)); };
    const auto L0 = [=](double x) {
      return std::sqrt(1.0 + x * x) + 0.25 * damp * std::cos(loc(x));
    };
    eff.b_bar = [=](double x, double v) { return b0(x) + v; };
    eff.L_bar = [=](double x, double v) { return L0(x) + 0.5 * v * v; };
    eff.g_bar = [=](double x) {
      return std::tanh(x) + 0.25 * damp * std::cos(loc(x));
    };
    eff.H_bar = [=](double x, double p) {
      return b0(x) * p + clamped_quadratic_sup(p) - L0(x);
    };
    return eff;
  }
  if (spec.name == "LIN0") {
    eff.b_bar = [](double x, double v) { return -x + v; };
    eff.L_bar = [](double x, double v) {
      return std::sqrt(1.0 + x * x) + 0.5 * v * v;
    };
    eff.g_bar = [](double x) { return std::tanh(x); };
    eff.H_bar = [](double x, double p) {
      return -x * p + clamped_quadratic_sup(p) - std::sqrt(1.0 + x * x);
    };
    return eff;
  }
  throw UsageError("closed-form effective problem is only available for the "
                   "built-in benchmarks (BM1, LIN0); got '" + spec.name + "'");
}

struct EffectiveBuildOptions {
  MeasureOptions measure;
  int v_grid_n = 41;                // control resolution for box sets
  std::size_t hbar_sample_cap = 0;  // H_bar table samples per node; 0 = all
};

inline std::vector<double> control_grid(const ControlSet& u, int n_box) {
  switch (u.kind) {
    case ControlSet::Kind::Singleton:
      return {u.value};
    case ControlSet::Kind::Finite:
      return u.points;
    case ControlSet::Kind::Box: {
      if (u.hi == u.lo) return {u.lo};
      std::vector<double> g(static_cast<std::size_t>(n_box));
      for (int k = 0; k < n_box; ++k)
        g[static_cast<std::size_t>(k)] = u.lo + (u.hi - u.lo) * k / (n_box - 1);
      return g;
    }
  }
  return {u.value};
}

// Tabulates b_bar, L_bar, g_bar over the slow grid by integrating against
// per-node ergodic measures (source = Simulate), or returns the benchmark
// closed form. Off-node values interpolate linearly; H_bar averages the
// inner sup over measure samples, never the sup of averaged coefficients.
inline EffectiveProblem build_effective(const ProblemSpec& spec,
                                        const std::vector<double>& x_grid,
                                        MeasureSource source,
                                        const EffectiveBuildOptions& opt = {}) {
  spec.validate();
  if (source == MeasureSource::ClosedForm) return closed_form_effective(spec);
  if (x_grid.empty()) throw ParameterError("build_effective: empty x grid");
  for (std::size_t i = 1; i < x_grid.size(); ++i)
    if (!(x_grid[i] > x_grid[i - 1]))
      throw ParameterError("build_effective: x grid must be strictly increasing");

  auto tab = std::make_shared<TabulatedEffective>();
  tab->spec = spec;
  tab->x_nodes = x_grid;
  tab->v_grid = control_grid(spec.controls, opt.v_grid_n);
  const std::size_t nodes = x_grid.size();
  const std::size_t nv = tab->v_grid.size();
  tab->measures.resize(nodes);
  tab->b_tab.assign(nodes, std::vector<double>(nv, 0.0));
  tab->L_tab.assign(nodes, std::vector<double>(nv, 0.0));
  tab->g_tab.assign(nodes, 0.0);
  tab->hbar_sample_cap = opt.hbar_sample_cap;
  tab->init_lazy(nodes);

  std::string failure;
  parallel_for(nodes, [&](std::size_t i) {
    MeasureOptions mo = opt.measure;
    mo.stream = i;
    try {
      tab->measures[i] = estimate_invariant_measure(spec, x_grid[i], mo);
      const auto& mu = tab->measures[i];
      for (std::size_t k = 0; k < nv; ++k) {
        const double v = tab->v_grid[k];
        tab->b_tab[i][k] =
            integrate(mu, [&](double y) { return spec.drift_b(x_grid[i], y, v); })
                .value;
        tab->L_tab[i][k] =
            integrate(mu, [&](double y) { return spec.cost_L(x_grid[i], y, v); })
                .value;
      }
      tab->g_tab[i] =
          integrate(mu, [&](double y) { return spec.terminal_g(x_grid[i], y); })
              .value;
    } catch (const std::exception& e) {
      throw ModelError("effective build failed at node x = " +
                       std::to_string(x_grid[i]) + ": " + e.what());
    }
  }, /*grain=*/1);

  EffectiveProblem eff;
  eff.model = spec.name;
  eff.provenance = MeasureSource::Simulate;
  eff.alpha1 = spec.alpha1;
  eff.discount = spec.discount;
  eff.horizon = spec.horizon;
  eff.controls = spec.controls;
  eff.table = tab;
  eff.b_bar = [tab](double x, double v) {
    const auto [i, w] = tab->bracket(x);
    const double lo = tab->lerp_v(tab->b_tab[i], v);
    if (tab->x_nodes.size() == 1) return lo;
    return lo * (1.0 - w) + tab->lerp_v(tab->b_tab[i + 1], v) * w;
  };
  eff.L_bar = [tab](double x, double v) {
    const auto [i, w] = tab->bracket(x);
    const double lo = tab->lerp_v(tab->L_tab[i], v);
    if (tab->x_nodes.size() == 1) return lo;
    return lo * (1.0 - w) + tab->lerp_v(tab->L_tab[i + 1], v) * w;
  };
  eff.g_bar = [tab](double x) {
    const auto [i, w] = tab->bracket(x);
    if (tab->x_nodes.size() == 1) return tab->g_tab[i];
    return tab->g_tab[i] * (1.0 - w) + tab->g_tab[i + 1] * w;
  };
  eff.H_bar = [tab](double x, double p) {
    const auto [i, w] = tab->bracket(x);
    const double lo = tab->node_hamiltonian(i, p);
    if (tab->x_nodes.size() == 1) return lo;
    return lo * (1.0 - w) + tab->node_hamiltonian(i + 1, p) * w;
  };
  return eff;
}

// Approximate corrector of the resolvent cell problem
//   -L2 w_eps + eps_cell w_eps = -H(x_bar, y, p_bar)
// through its stochastic representation
//   w_eps(y) = -E I_0^inf H(x_bar, Y^{x_bar,y}_r, p_bar) e^{-eps_cell r} dr,
// truncated once the discount weight has decayed to e^{-8}.
inline Estimate approximate_corrector(const ProblemSpec& spec, double x_bar,
                                      double p_bar, double eps_cell, double y,
                                      std::size_t n_paths, double horizon,
                                      double dt, std::uint64_t seed) {
  spec.validate();
  if (!(eps_cell > 0.0))
    throw ParameterError("approximate_corrector: eps_cell must be > 0");
  if (horizon < 8.0 / eps_cell - 1e-9)
    throw ParameterError(
        "approximate_corrector: horizon must cover the discounted tail "
        "(horizon >= 8/eps_cell)");
  std::vector<double> integrals(n_paths);
  parallel_for(n_paths, [&](std::size_t i) {
    RandomStream rng(seed, i, 0xce11ULL);
    double acc = 0.0;
    double prev = 0.0;
    bool have_prev = false;
    drive_frozen(spec, x_bar, y, horizon, dt, rng, true,
                 [&](std::size_t, double t, double yt) {
                   const double f =
                       hamiltonian(spec, x_bar, yt, p_bar).value *
                       std::exp(-eps_cell * t);
                   if (have_prev) acc += 0.5 * (prev + f) * dt;
                   prev = f;
                   have_prev = true;
                 });
    integrals[i] = acc;
  });
  auto est = mean_with_stderr(integrals);
  return {-est.value, est.stderr_};
}

// Cauchy cell problem: w_x(r, y) = E g(x, Y^{x,y}_r); its long-run limit is
// the effective terminal data g_bar(x).
inline Estimate cauchy_cell(const ProblemSpec& spec, double x, double r,
                            double y, std::size_t n_paths, double dt,
                            std::uint64_t seed) {
  spec.validate();
  if (r < 0.0) throw ParameterError("cauchy_cell: time must be >= 0");
  if (r == 0.0) {
    const double g = spec.terminal_g(x, y);
    if (!std::isfinite(g)) throw ModelError("terminal cost not finite");
    return {g, 0.0};
  }
  std::vector<double> values(n_paths);
  parallel_for(n_paths, [&](std::size_t i) {
    RandomStream rng(seed, i, 0xca0cULL);
    double last = y;
    drive_frozen(spec, x, y, r, dt, rng, true,
                 [&](std::size_t, double, double yt) { last = yt; });
    values[i] = spec.terminal_g(x, last);
    if (!std::isfinite(values[i]))
      throw ModelError("terminal cost not finite at y = " + std::to_string(last));
  });
  return mean_with_stderr(values);
}

}  // namespace mjc
