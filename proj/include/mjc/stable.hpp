#pragma once

#include <cmath>
#include <vector>

#include "mjc/errors.hpp"
#include "mjc/random.hpp"
#include "mjc/stats.hpp"

namespace mjc {

inline void require_stability_index(double alpha) {
  if (!(alpha > 1.0 && alpha < 2.0))
    throw ParameterError("stability index must lie in (1,2), got " +
                         std::to_string(alpha));
}

// Symmetric alpha-stable law normalized so that the characteristic function
// is exp(i*u*location - scale^alpha * |u|^alpha). With this convention the
// generator of the driving Levy process is the fractional Laplacian with
// Fourier symbol -|xi|^alpha.
struct StableLaw {
  double alpha;
  double scale = 1.0;
  double location = 0.0;

  StableLaw(double a, double s = 1.0, double loc = 0.0)
      : alpha(a), scale(s), location(loc) {
    require_stability_index(alpha);
    if (!(scale > 0.0)) throw ParameterError("stable law: scale must be > 0");
  }

  double char_fn_re(double u) const {
    return std::exp(-std::pow(scale * std::fabs(u), alpha)) *
           std::cos(location * u);
  }
  double char_fn_im(double u) const {
    return std::exp(-std::pow(scale * std::fabs(u), alpha)) *
           std::sin(location * u);
  }
};

// Chambers-Mallows-Stuck transform for the symmetric case. v is uniform on
// (-pi/2, pi/2), w unit-mean exponential; the output is standard
// (scale 1, location 0) with char fn exp(-|u|^alpha). Odd in v.
inline double cms_symmetric(double alpha, double v, double w) {
  const double s = std::sin(alpha * v) / std::pow(std::cos(v), 1.0 / alpha);
  const double t =
      std::pow(std::cos((1.0 - alpha) * v) / w, (1.0 - alpha) / alpha);
  return s * t;
}

inline double sample_standard(double alpha, RandomStream& rng) {
  require_stability_index(alpha);
  const double v = rng.uniform(-1.0, 1.0) * (M_PI / 2.0);
  const double w = rng.exponential();
  return cms_symmetric(alpha, v, w);
}

// Increment of the alpha-stable process over a window dt. Self-similarity:
// exactly dt^{1/alpha} times a standard draw (same rng state => same draw
// scaled, never resampled).
inline double sample_increment(double alpha, double dt, RandomStream& rng) {
  if (!(dt > 0.0)) throw ParameterError("sample_increment: dt must be > 0");
  return std::pow(dt, 1.0 / alpha) * sample_standard(alpha, rng);
}

struct CharFnEstimate {
  double re = 0.0;
  double im = 0.0;
  double re_stderr = 0.0;
  double im_stderr = 0.0;
};

// Empirical characteristic function at frequency u with componentwise
// standard errors; the statistical oracle for the sampling routines.
inline CharFnEstimate empirical_char_fn(const std::vector<double>& samples,
                                        double u) {
  if (samples.empty()) throw UsageError("empirical_char_fn: empty sample");
  const std::size_t n = samples.size();
  double sc = 0.0, ss = 0.0, scc = 0.0, sss = 0.0;
  for (double x : samples) {
    const double c = std::cos(u * x);
    const double s = std::sin(u * x);
    sc += c;
    ss += s;
    scc += c * c;
    sss += s * s;
  }
  CharFnEstimate e;
  const double dn = static_cast<double>(n);
  e.re = sc / dn;
  e.im = ss / dn;
  if (n > 1) {
    const double vc = (scc - dn * e.re * e.re) / (dn - 1.0);
    const double vs = (sss - dn * e.im * e.im) / (dn - 1.0);
    e.re_stderr = std::sqrt(std::max(vc, 0.0) / dn);
    e.im_stderr = std::sqrt(std::max(vs, 0.0) / dn);
  }
  return e;
}

}  // namespace mjc
