#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mjc/errors.hpp"
#include "mjc/fractional.hpp"
#include "mjc/model.hpp"
#include "mjc/parallel.hpp"
#include "mjc/sde.hpp"
#include "mjc/stats.hpp"

namespace mjc {

// Chain parameters for the invariant-measure estimator. Burn-in and
// thinning are expressed in time units and validated against the audited
// dissipativity constant beta_hat, which sets the relaxation scale of the
// frozen dynamics.
struct MeasureOptions {
  double burn_in = 5.0;
  std::size_t n = 10000;
  double thinning = 1.0;
  double dt = 0.005;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;   // substream tag (e.g. grid-node index)
  double beta_hat = 0.0;      // from validate_assumptions; must be > 0

  void validate() const {
    if (!(beta_hat > 0.0))
      throw ParameterError(
          "measure estimation needs a positive dissipativity estimate; run "
          "validate_assumptions first");
    if (burn_in < 5.0 / beta_hat - 1e-12)
      throw ParameterError("burn_in must cover at least five relaxation times "
                           "(>= 5/beta_hat)");
    if (thinning < 1.0 / beta_hat - 1e-12)
      throw ParameterError("thinning must be >= one relaxation time (1/beta_hat)");
    if (!(dt > 0.0)) throw ParameterError("dt must be > 0");
    if (n < 1) throw ParameterError("sample count must be positive");
  }
};

// Weighted-sample representation of the ergodic measure of the frozen
// equation at a slow anchor x; weights are uniform. Immutable after
// construction.
struct EmpiricalMeasure {
  double x_anchor = 0.0;
  std::vector<double> samples;
  MeasureOptions meta;
};

// Single thinned chain of the frozen equation after burn-in.
inline EmpiricalMeasure estimate_invariant_measure(const ProblemSpec& spec,
                                                   double x,
                                                   const MeasureOptions& opt) {
  spec.validate();
  opt.validate();
  EmpiricalMeasure mu;
  mu.x_anchor = x;
  mu.meta = opt;
  mu.samples.reserve(opt.n);
  RandomStream rng(opt.seed, opt.stream, 0x0e59ULL);
  const std::size_t thin_steps =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(opt.thinning / opt.dt)));
  const std::size_t burn_steps =
      static_cast<std::size_t>(std::ceil(opt.burn_in / opt.dt));
  double y = 0.0;
  std::size_t k = 0;
  while (mu.samples.size() < opt.n) {
    y += spec.drift_c(x, y) * opt.dt + sample_increment(spec.alpha2, opt.dt, rng);
    detail::check_state(y, k, "frozen chain");
    ++k;
    if (k > burn_steps && (k - burn_steps) % thin_steps == 0)
      mu.samples.push_back(y);
  }
  return mu;
}

// Measure integral of f with an autocorrelation-aware (batch means) error
// bar.
inline Estimate integrate(const EmpiricalMeasure& mu,
                          const std::function<double(double)>& f) {
  if (mu.samples.empty()) throw UsageError("integrate: empty measure");
  std::vector<double> values(mu.samples.size());
  for (std::size_t i = 0; i < mu.samples.size(); ++i) {
    values[i] = f(mu.samples[i]);
    if (!std::isfinite(values[i]))
      throw ModelError("integrand not finite at y = " +
                       std::to_string(mu.samples[i]));
  }
  if (values.size() >= 40) return batch_means(values, 20);
  return mean_with_stderr(values);
}

struct DecayPoint {
  double s = 0.0;
  double error = 0.0;    // |P_s f(y0) - mu(f)|
  double stderr_ = 0.0;  // combined Monte Carlo error
};

struct DecayCurve {
  std::vector<DecayPoint> points;
  double fitted_rate = 0.0;  // negative slope of log-error regression
  bool resolved = false;     // false if every point sits in the noise floor
  double mu_f = 0.0;
};

// Relaxation of P_s f(y0) = E f(Y^{x,y0}_s) towards mu^x(f). The rate is
// fitted only over abscissae where the error resolves above 5 stderr;
// "unresolved" is reported, never thrown.
inline DecayCurve ergodicity_decay(const ProblemSpec& spec, double x,
                                   const std::function<double(double)>& f,
                                   double y0, const std::vector<double>& times,
                                   std::size_t n_paths, double dt,
                                   std::uint64_t seed,
                                   const MeasureOptions& measure_opt) {
  if (times.empty()) throw ParameterError("ergodicity_decay: empty time list");
  const auto mu = estimate_invariant_measure(spec, x, measure_opt);
  const auto mu_f = integrate(mu, f);

  const double t_max = times.back();
  std::vector<std::vector<double>> snapshots(times.size(),
                                             std::vector<double>(n_paths));
  parallel_for(n_paths, [&](std::size_t i) {
    RandomStream rng(seed, i, 0xdecaULL);
    std::size_t next = 0;
    drive_frozen(spec, x, y0, t_max, dt, rng, true,
                 [&](std::size_t, double t, double y) {
                   while (next < times.size() && t >= times[next] - 1e-12) {
                     snapshots[next][i] = f(y);
                     ++next;
                   }
                 });
  });

  DecayCurve curve;
  curve.mu_f = mu_f.value;
  std::vector<double> xs, ys;
  for (std::size_t j = 0; j < times.size(); ++j) {
    const auto est = mean_with_stderr(snapshots[j]);
    DecayPoint p;
    p.s = times[j];
    p.error = std::fabs(est.value - mu_f.value);
    p.stderr_ = std::sqrt(est.stderr_ * est.stderr_ + mu_f.stderr_ * mu_f.stderr_);
    curve.points.push_back(p);
    if (p.error > 5.0 * p.stderr_ && p.error > 0.0) {
      xs.push_back(p.s);
      ys.push_back(std::log(p.error));
    }
  }
  if (xs.size() >= 2) {
    curve.fitted_rate = -linear_fit(xs, ys).slope;
    curve.resolved = true;
  }
  return curve;
}

struct LyapunovPoint {
  double y = 0.0;
  double value = 0.0;  // -L2 w(y) by quadrature
};

struct LyapunovAudit {
  std::vector<LyapunovPoint> points;
  double certified_radius = 0.0;  // smallest audited radius with both signs >= 0
  bool certified = false;
};

struct LyapunovQuadrature {
  double h = 0.05;
  double z_cut = 400.0;
};

// Evaluates -L2 w(y) = (-Delta)^{a2/2} w(y) - c(x,y) w'(y) for the Lyapunov
// candidate w(y) = sqrt(1+y^2) at y = +-radius. The quadrature must be
// self-consistent: halving the cell size may move the value by at most 1%.
inline LyapunovAudit lyapunov_check(const ProblemSpec& spec, double x,
                                    const std::vector<double>& radii,
                                    const LyapunovQuadrature& quad = {}) {
  spec.validate();
  const auto w = [](double y) { return std::sqrt(1.0 + y * y); };
  const auto value_at = [&](double y, double h) {
    const double wpp = std::pow(1.0 + y * y, -1.5);
    const double generator = frac_laplacian_at_point(
        w, wpp, y, spec.alpha2, h, quad.z_cut, 0.0, 1.0, 0.0, -1.0);
    const double grad_w = y / std::sqrt(1.0 + y * y);  // |grad w| < 1
    return -generator - spec.drift_c(x, y) * grad_w;
  };
  LyapunovAudit audit;
  for (double r : radii) {
    if (!(r > 0.0)) throw ParameterError("lyapunov_check: radii must be > 0");
    for (double y : {r, -r}) {
      const double coarse = value_at(y, quad.h);
      const double fine = value_at(y, quad.h / 2.0);
      if (std::fabs(coarse - fine) > 0.01 * std::max(std::fabs(fine), 1e-8))
        throw ResolutionError(
            "Lyapunov quadrature not converged at y = " + std::to_string(y) +
            " (halving the cell changed the value by more than 1%)");
      audit.points.push_back({y, fine});
    }
  }
  for (double r : radii) {
    double lo = 0, hi = 0;
    for (const auto& p : audit.points) {
      if (p.y == r) hi = p.value;
      if (p.y == -r) lo = p.value;
    }
    if (lo >= 0.0 && hi >= 0.0 && (!audit.certified || r < audit.certified_radius)) {
      audit.certified = true;
      audit.certified_radius = r;
    }
  }
  return audit;
}

// E | I_{t1}^{t2} ( f(x, Y^eps_r) - mu^x(f(x,.)) ) dr | with the slow state
// pinned at x_frozen; the fast component runs at its eps-accelerated clock.
inline Estimate path_average_error(const ProblemSpec& spec, double epsilon,
                                   const std::function<double(double, double)>& f,
                                   double x_frozen, double y0, double t1,
                                   double t2, std::size_t n_paths, double dt,
                                   std::uint64_t seed,
                                   const MeasureOptions& measure_opt) {
  spec.validate();
  if (!(epsilon > 0.0 && epsilon <= 1.0))
    throw ParameterError("epsilon must lie in (0,1]");
  if (!(t1 < t2)) throw ParameterError("window must satisfy t1 < t2");
  if (dt > epsilon / 10.0 + 1e-15)
    throw ParameterError("dt must satisfy dt <= epsilon/10");
  const auto mu = estimate_invariant_measure(spec, x_frozen, measure_opt);
  const double f_bar =
      integrate(mu, [&](double y) { return f(x_frozen, y); }).value;

  std::vector<double> abs_integrals(n_paths);
  parallel_for(n_paths, [&](std::size_t i) {
    RandomStream rng(seed, i, 0xfa57ULL);
    double y = y0, t = 0.0, acc = 0.0;
    const std::size_t n_steps = detail::step_count(0.0, t2, dt);
    for (std::size_t k = 0; k < n_steps; ++k) {
      const double h = std::min(dt, t2 - t);
      if (t >= t1 - 1e-12) acc += (f(x_frozen, y) - f_bar) * h;
      y += spec.drift_c(x_frozen, y) * h / epsilon +
           std::pow(h / epsilon, 1.0 / spec.alpha2) *
               sample_standard(spec.alpha2, rng);
      detail::check_state(y, k, "pinned fast state");
      t += h;
    }
    abs_integrals[i] = std::fabs(acc);
  });
  return mean_with_stderr(abs_integrals);
}

}  // namespace mjc
