#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "mjc/errors.hpp"
#include "mjc/random.hpp"

namespace mjc {

// Admissible control values. Box sets are closed intervals (convex), finite
// sets are kept sorted so ties resolve to the smallest control.
struct ControlSet {
  enum class Kind { Box, Finite, Singleton };

  Kind kind = Kind::Singleton;
  double lo = 0.0, hi = 0.0;     // Box
  std::vector<double> points;    // Finite, sorted ascending
  double value = 0.0;            // Singleton

  static ControlSet box(double lo, double hi) {
    if (!(lo <= hi)) throw ParameterError("control box: requires lo <= hi");
    ControlSet u;
    u.kind = Kind::Box;
    u.lo = lo;
    u.hi = hi;
    return u;
  }
  static ControlSet finite(std::vector<double> pts) {
    if (pts.empty()) throw ParameterError("control set must be nonempty");
    std::sort(pts.begin(), pts.end());
    ControlSet u;
    u.kind = Kind::Finite;
    u.points = std::move(pts);
    return u;
  }
  static ControlSet singleton(double v) {
    ControlSet u;
    u.kind = Kind::Singleton;
    u.value = v;
    return u;
  }

  // Nearest admissible control.
  double clamp(double v) const {
    switch (kind) {
      case Kind::Box:
        return std::min(std::max(v, lo), hi);
      case Kind::Singleton:
        return value;
      case Kind::Finite: {
        double best = points.front();
        double dist = std::fabs(v - best);
        for (double p : points) {
          const double d = std::fabs(v - p);
          if (d < dist) {
            dist = d;
            best = p;
          }
        }
        return best;
      }
    }
    return value;
  }

  double lowest() const {
    switch (kind) {
      case Kind::Box:
        return lo;
      case Kind::Finite:
        return points.front();
      case Kind::Singleton:
        return value;
    }
    return value;
  }
};

// The full control problem: slow/fast drifts, running and terminal costs,
// stability indices, control set, discount and horizon. The reference
// numerics target scalar slow and fast states (slow_dim = fast_dim = 1).
struct ProblemSpec {
  int slow_dim = 1;
  int fast_dim = 1;
  double alpha1 = 1.5;  // slow noise stability index, in (1,2)
  double alpha2 = 1.5;  // fast noise stability index, in (1,2)
  std::function<double(double, double, double)> drift_b;  // (x,y,v)
  std::function<double(double, double)> drift_c;          // (x,y)
  std::function<double(double, double, double)> cost_L;   // (x,y,v)
  std::function<double(double, double)> terminal_g;       // (x,y)
  ControlSet controls;
  double discount = 1.0;  // lambda > 0
  double horizon = 1.0;   // T > 0
  std::string name;

  void validate() const {
    if (slow_dim != 1 || fast_dim != 1)
      throw ParameterError("reference implementation targets slow_dim = fast_dim = 1");
    if (!(alpha1 > 1.0 && alpha1 < 2.0) || !(alpha2 > 1.0 && alpha2 < 2.0))
      throw ParameterError("stability indices must lie in (1,2)");
    if (!(discount > 0.0)) throw ParameterError("discount must be > 0");
    if (!(horizon > 0.0)) throw ParameterError("horizon must be > 0");
    if (!drift_b || !drift_c || !cost_L || !terminal_g)
      throw ParameterError("model coefficients must all be set");
  }
};

struct Witness {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0, v = 0;
};

// Sampled audit of the standing assumptions: dissipativity of the fast
// drift, Lipschitz and growth constants of all coefficients. Verdicts are
// statistical ("pass (sampled)"), not proofs; witnesses make failures
// reproducible.
struct AssumptionReport {
  double beta_hat = 0.0;  // dissipativity constant of drift_c in y
  double lip_b = 0.0, lip_c = 0.0, lip_L = 0.0, lip_g = 0.0;
  double grad_L_y = 0.0;  // y-difference-quotient bound of the running cost
  double growth_b = 0.0;  // sup |b| / (1+|x|)
  double growth_c = 0.0;  // sup |c| / (1+|y|)
  double growth_L = 0.0;  // sup |L| / (1+|x|)
  double growth_g = 0.0;  // sup |g| / (1+|x|)
  bool pass_c = false, pass_b = false, pass_L = false, pass_g = false;
  Witness worst_dissipativity;
  double radius = 0.0;
  int sample_count = 0;
  std::uint64_t seed = 0;

  bool all_pass() const { return pass_c && pass_b && pass_L && pass_g; }
};

namespace detail {

inline double finite_or_throw(double value, const char* what, double x,
                              double y, double v) {
  if (!std::isfinite(value))
    throw ModelError(std::string(what) + " is not finite at (x=" +
                     std::to_string(x) + ", y=" + std::to_string(y) +
                     ", v=" + std::to_string(v) + ")");
  return value;
}

inline double sample_control(const ControlSet& u, RandomStream& rng) {
  switch (u.kind) {
    case ControlSet::Kind::Box:
      return rng.uniform(u.lo, u.hi);
    case ControlSet::Kind::Finite:
      return u.points[static_cast<std::size_t>(rng.uniform01() *
                                               u.points.size()) %
                      u.points.size()];
    case ControlSet::Kind::Singleton:
      return u.value;
  }
  return u.value;
}

}  // namespace detail

// Statistical audit of the model assumptions on the ball |x|,|y| <= radius.
// beta_hat = -max over sampled pairs of <c(x,y1)-c(x,y2), y1-y2>/|y1-y2|^2;
// Lipschitz estimates are max difference quotients. Deterministic given the
// seed. beta_hat <= 0 yields a fail verdict, not an exception.
inline AssumptionReport validate_assumptions(const ProblemSpec& spec,
                                             int sample_count, double radius,
                                             std::uint64_t rng_seed) {
  spec.validate();
  if (sample_count < 1000)
    throw ParameterError("validate_assumptions: sample_count must be >= 1000");
  if (!(radius > 0.0))
    throw ParameterError("validate_assumptions: radius must be > 0");

  RandomStream rng(rng_seed, /*stream=*/0x5eedULL);
  AssumptionReport rep;
  rep.radius = radius;
  rep.sample_count = sample_count;
  rep.seed = rng_seed;

  double worst_q = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < sample_count; ++k) {
    const double x1 = rng.uniform(-radius, radius);
    const double x2 = rng.uniform(-radius, radius);
    const double y1 = rng.uniform(-radius, radius);
    double y2 = rng.uniform(-radius, radius);
    if (y2 == y1) y2 += 1e-8 * radius;
    const double v = detail::sample_control(spec.controls, rng);

    const double c11 = detail::finite_or_throw(spec.drift_c(x1, y1), "drift_c", x1, y1, v);
    const double c12 = detail::finite_or_throw(spec.drift_c(x1, y2), "drift_c", x1, y2, v);
    const double c22 = detail::finite_or_throw(spec.drift_c(x2, y2), "drift_c", x2, y2, v);
    const double b11 = detail::finite_or_throw(spec.drift_b(x1, y1, v), "drift_b", x1, y1, v);
    const double b22 = detail::finite_or_throw(spec.drift_b(x2, y2, v), "drift_b", x2, y2, v);
    const double L11 = detail::finite_or_throw(spec.cost_L(x1, y1, v), "cost_L", x1, y1, v);
    const double L21 = detail::finite_or_throw(spec.cost_L(x2, y1, v), "cost_L", x2, y1, v);
    const double L12 = detail::finite_or_throw(spec.cost_L(x1, y2, v), "cost_L", x1, y2, v);
    const double g11 = detail::finite_or_throw(spec.terminal_g(x1, y1), "terminal_g", x1, y1, v);
    const double g22 = detail::finite_or_throw(spec.terminal_g(x2, y2), "terminal_g", x2, y2, v);

    // Dissipativity quotient at frozen x1.
    const double dy = y1 - y2;
    const double q = (c11 - c12) * dy / (dy * dy);
    if (q > worst_q) {
      worst_q = q;
      rep.worst_dissipativity = {x1, y1, x1, y2, v};
    }

    const double dxy = std::fabs(x1 - x2) + std::fabs(y1 - y2);
    if (dxy > 1e-12) {
      rep.lip_c = std::max(rep.lip_c, std::fabs(c11 - c22) / dxy);
      rep.lip_b = std::max(rep.lip_b, std::fabs(b11 - b22) / dxy);
      rep.lip_g = std::max(rep.lip_g, std::fabs(g11 - g22) / dxy);
    }
    if (std::fabs(x1 - x2) > 1e-12)
      rep.lip_L = std::max(rep.lip_L, std::fabs(L11 - L21) / std::fabs(x1 - x2));
    rep.grad_L_y = std::max(rep.grad_L_y, std::fabs(L11 - L12) / std::fabs(dy));

    rep.growth_b = std::max(rep.growth_b, std::fabs(b11) / (1.0 + std::fabs(x1)));
    rep.growth_c = std::max(rep.growth_c, std::fabs(c11) / (1.0 + std::fabs(y1)));
    rep.growth_L = std::max(rep.growth_L, std::fabs(L11) / (1.0 + std::fabs(x1)));
    rep.growth_g = std::max(rep.growth_g, std::fabs(g11) / (1.0 + std::fabs(x1)));
  }

  rep.beta_hat = -worst_q;
  rep.pass_c = rep.beta_hat > 0.0 && std::isfinite(rep.lip_c) &&
               std::isfinite(rep.growth_c);
  rep.pass_b = std::isfinite(rep.lip_b) && std::isfinite(rep.growth_b);
  rep.pass_L = std::isfinite(rep.lip_L) && std::isfinite(rep.grad_L_y) &&
               std::isfinite(rep.growth_L);
  rep.pass_g = std::isfinite(rep.lip_g) && std::isfinite(rep.growth_g);
  return rep;
}

// Built-in benchmark models. BM1 has a linear dissipative fast drift, so
// its frozen dynamics is a stable Ornstein-Uhlenbeck process with a closed
// form stationary law: every averaged quantity has an analytic value.
// LIN0 shares the fast dynamics but its slow data do not depend on y.
inline ProblemSpec builtin_benchmark(const std::string& name) {
  ProblemSpec spec;
  spec.alpha1 = 1.5;
  spec.alpha2 = 1.5;
  spec.controls = ControlSet::box(-1.0, 1.0);
  spec.discount = 1.0;
  spec.horizon = 1.0;
  spec.drift_c = [](double x, double y) { return -y + 0.5 * std::sin(x); };
  spec.name = name;
  if (name == "BM1") {
    spec.drift_b = [](double x, double y, double v) {
      return -x + std::sin(y) + v;
    };
    spec.cost_L = [](double x, double y, double v) {
      return std::sqrt(1.0 + x * x) + 0.25 * std::cos(y) + 0.5 * v * v;
    };
    spec.terminal_g = [](double x, double y) {
      return std::tanh(x) + 0.25 * std::cos(y);
    };
    return spec;
  }
  if (name == "LIN0") {
    spec.drift_b = [](double x, double, double v) { return -x + v; };
    spec.cost_L = [](double x, double, double v) {
      return std::sqrt(1.0 + x * x) + 0.5 * v * v;
    };
    spec.terminal_g = [](double x, double) { return std::tanh(x); };
    return spec;
  }
  throw UsageError("unknown benchmark '" + name + "'; available: BM1, LIN0");
}

}  // namespace mjc
