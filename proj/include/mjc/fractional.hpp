#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "mjc/errors.hpp"

namespace mjc {

// Uniform symmetric axis with an odd node count.
struct Axis {
  double center = 0.0;
  double half_width = 1.0;
  int n = 3;

  Axis() = default;
  Axis(double c, double r, int nodes) : center(c), half_width(r), n(nodes) {
    if (!(half_width > 0.0)) throw ParameterError("axis half-width must be > 0");
    if (n < 3 || n % 2 == 0) throw ParameterError("axis node count must be odd and >= 3");
  }

  double h() const { return 2.0 * half_width / (n - 1); }
  double lo() const { return center - half_width; }
  double hi() const { return center + half_width; }
  double x(int i) const { return lo() + i * h(); }
  int nearest(double x_query) const {
    int i = static_cast<int>(std::lround((x_query - lo()) / h()));
    return i < 0 ? 0 : (i >= n ? n - 1 : i);
  }
};

// Rule for continuing grid values beyond the truncated domain, used by the
// nonlocal stencil.
enum class Extension { Constant, Linear };

struct GridFunction {
  Axis axis;
  std::vector<double> v;
  Extension ext = Extension::Constant;

  GridFunction() = default;
  explicit GridFunction(Axis a, Extension e = Extension::Constant)
      : axis(a), v(static_cast<std::size_t>(a.n), 0.0), ext(e) {}

  template <class F>
  static GridFunction sample(Axis a, F&& f, Extension e = Extension::Constant) {
    GridFunction g(a, e);
    for (int i = 0; i < a.n; ++i) g.v[static_cast<std::size_t>(i)] = f(a.x(i));
    return g;
  }
};

// Normalization constant of the 1-D fractional Laplacian
//   -(-Delta)^{a/2} u(x) = c_a I [u(x+z)-u(x)-1_{|z|<=1} z u'(x)] |z|^{-1-a} dz
// fixed so that the Fourier symbol is -|xi|^a.
inline double stable_levy_constant(double alpha) {
  return alpha * std::pow(2.0, alpha - 1.0) * std::tgamma((alpha + 1.0) / 2.0) /
         (std::sqrt(M_PI) * std::tgamma(1.0 - alpha / 2.0));
}

namespace detail {

struct CellMoments {
  double mass = 0.0;      // integral of the kernel over the cell
  double first = 0.0;     // integral of (z - z_j) * kernel
  double second = 0.0;    // integral of (z - z_j)^2 * kernel
  double centroid = 0.0;  // kernel-weighted mean abscissa
};

// Kernel moments of c |z|^{-1-alpha} over [a, b] about the node z_j.
inline CellMoments cell_moments(double c, double alpha, double a, double b,
                                double zj) {
  const double i0 = (c / alpha) * (std::pow(a, -alpha) - std::pow(b, -alpha));
  const double i1 =
      (c / (alpha - 1.0)) * (std::pow(a, 1.0 - alpha) - std::pow(b, 1.0 - alpha));
  const double i2 =
      (c / (2.0 - alpha)) * (std::pow(b, 2.0 - alpha) - std::pow(a, 2.0 - alpha));
  CellMoments m;
  m.mass = i0;
  m.first = i1 - zj * i0;
  m.second = i2 - 2.0 * zj * i1 + zj * zj * i0;
  m.centroid = i1 / i0;
  return m;
}

// Number of near cells that receive the quadratic interpolation treatment;
// beyond this the kernel is flat enough for plain midpoint evaluation.
inline constexpr int kQuadraticCells = 8;

}  // namespace detail

// Quadrature weights for the symmetrized form
//   L u(x_i) = sum_j w_j [u_{i+j} + u_{i-j} - 2 u_i] + analytic tail.
// The singular piece (0, h/2] is folded into w_1 through the
// second-difference approximation of u''. Near cells interpolate the second
// difference quadratically against exact kernel moments (the kernel varies
// too fast there for midpoint evaluation); far cells use the node value with
// the exact cell mass. Beyond z_cut the kernel moments are integrated in
// closed form against the extension rule.
struct Stencil {
  double alpha = 1.5;
  double h = 0.0;
  std::vector<double> w;           // w[j-1] multiplies the offset-j difference
  double z_cut = 0.0;              // start of the analytic tail
  double tail_mass = 0.0;          // kernel mass over (z_cut, inf)
  double tail_first_moment = 0.0;  // first kernel moment over (z_cut, inf)

  // Magnitude of the u_i coefficient; the stencil's contribution to the CFL
  // denominator.
  double row_sum() const {
    double s = 0.0;
    for (double wj : w) s += wj;
    return 2.0 * s + 2.0 * tail_mass;
  }
};

namespace detail {

// Adds the contribution of cells [j_begin, j_end] to the weight table.
// Offsets are 1-based: w[off-1] multiplies the offset-off difference. The
// table must hold j_end + 1 entries (quadratic cells touch the j+1 slot;
// the j-1 slot of the first cell multiplies the zero difference and drops).
inline void accumulate_cells(double c, double alpha, double h, int j_begin,
                             int j_end, std::vector<double>& w) {
  for (int j = j_begin; j <= j_end; ++j) {
    const double zj = j * h;
    const CellMoments m = cell_moments(c, alpha, zj - 0.5 * h, zj + 0.5 * h, zj);
    if (j <= kQuadraticCells) {
      const double wm = (m.second - h * m.first) / (2.0 * h * h);
      const double w0 = m.mass - m.second / (h * h);
      const double wp = (m.second + h * m.first) / (2.0 * h * h);
      if (j >= 2) w[static_cast<std::size_t>(j - 2)] += wm;
      w[static_cast<std::size_t>(j - 1)] += w0;
      w[static_cast<std::size_t>(j)] += wp;
    } else {
      w[static_cast<std::size_t>(j - 1)] += m.mass;
    }
  }
}

inline double singular_coeff(double c, double alpha, double h) {
  return c * std::pow(h / 2.0, 2.0 - alpha) / ((2.0 - alpha) * h * h);
}

}  // namespace detail

inline Stencil build_stencil(double alpha, double h, double reach) {
  if (!(alpha > 1.0 && alpha < 2.0))
    throw ParameterError("stencil: alpha must lie in (1,2)");
  if (!(h > 0.0) || !(reach > h)) throw ParameterError("stencil: bad h or reach");
  const double c = stable_levy_constant(alpha);
  Stencil s;
  s.alpha = alpha;
  s.h = h;
  const int J = static_cast<int>(std::lround(reach / h));
  s.w.assign(static_cast<std::size_t>(J + 1), 0.0);
  s.w[0] += detail::singular_coeff(c, alpha, h);
  detail::accumulate_cells(c, alpha, h, 1, J, s.w);
  if (s.w.back() == 0.0) s.w.pop_back();
  s.z_cut = (J + 0.5) * h;
  s.tail_mass = (c / alpha) * std::pow(s.z_cut, -alpha);
  s.tail_first_moment = (c / (alpha - 1.0)) * std::pow(s.z_cut, 1.0 - alpha);
  return s;
}

namespace detail {

// Strided line of a (possibly 2-d) array with an extension rule; the hot
// path of the solvers, so no copies.
struct StridedView {
  const double* v = nullptr;
  int n = 0;
  long stride = 1;
  Extension ext = Extension::Constant;

  double at(int i) const { return v[static_cast<long>(i) * stride]; }

  double value(int i) const {
    if (i >= 0 && i < n) return at(i);
    if (ext == Extension::Constant) return i < 0 ? at(0) : at(n - 1);
    if (i < 0) return at(0) + (at(1) - at(0)) * i;
    return at(n - 1) + (at(n - 1) - at(n - 2)) * (i - (n - 1));
  }
};

inline double apply_weights_strided(const StridedView& f,
                                    const std::vector<double>& w, int i) {
  const double ui = f.at(i);
  double acc = 0.0;
  const int inner_lo = static_cast<int>(w.size()) < i ? static_cast<int>(w.size()) : i;
  const int inner_hi = static_cast<int>(w.size()) < f.n - 1 - i
                           ? static_cast<int>(w.size())
                           : f.n - 1 - i;
  const int inner = inner_lo < inner_hi ? inner_lo : inner_hi;
  // in-range offsets need no extension branch
  for (int off = 1; off <= inner; ++off)
    acc += w[static_cast<std::size_t>(off - 1)] *
           (f.at(i + off) + f.at(i - off) - 2.0 * ui);
  for (int off = inner + 1; off <= static_cast<int>(w.size()); ++off)
    acc += w[static_cast<std::size_t>(off - 1)] *
           (f.value(i + off) + f.value(i - off) - 2.0 * ui);
  return acc;
}

// Analytic tail against the extension rule, in index units: beyond the cut
// the right extension is a_r + s_r z and the left one a_l - s_l z with z in
// grid spacings times h.
inline double apply_tail_strided(const StridedView& f, const Stencil& s, int i) {
  const double ui = f.at(i);
  double a_r, s_r, a_l, s_l;
  if (f.ext == Extension::Constant) {
    a_r = f.at(f.n - 1);
    a_l = f.at(0);
    s_r = s_l = 0.0;
  } else {
    const double h = s.h;
    s_r = (f.at(f.n - 1) - f.at(f.n - 2)) / h;
    s_l = (f.at(1) - f.at(0)) / h;
    a_r = f.at(f.n - 1) + s_r * h * (i - (f.n - 1));
    a_l = f.at(0) + s_l * h * i;
  }
  return (a_r + a_l - 2.0 * ui) * s.tail_mass +
         (s_r - s_l) * s.tail_first_moment;
}

// Value of the grid function at a possibly out-of-range index.
inline double extended_value(const GridFunction& f, int i) {
  const int n = f.axis.n;
  if (i >= 0 && i < n) return f.v[static_cast<std::size_t>(i)];
  if (f.ext == Extension::Constant) return i < 0 ? f.v.front() : f.v.back();
  const double h = f.axis.h();
  if (i < 0) {
    const double slope = (f.v[1] - f.v[0]) / h;
    return f.v.front() + slope * h * i;
  }
  const double slope = (f.v[n - 1] - f.v[n - 2]) / h;
  return f.v.back() + slope * h * (i - (n - 1));
}

struct TailAffine {
  double a_r = 0, s_r = 0, a_l = 0, s_l = 0;
};

// Affine description of the extension beyond z_cut as seen from node i:
// right side f(x_i + z) = a_r + s_r z, left side f(x_i - z) = a_l - s_l z.
inline TailAffine tail_affine(const GridFunction& f, int i) {
  TailAffine t;
  const int n = f.axis.n;
  if (f.ext == Extension::Constant) {
    t.a_r = f.v.back();
    t.a_l = f.v.front();
    return t;
  }
  const double h = f.axis.h();
  t.s_r = (f.v[n - 1] - f.v[n - 2]) / h;
  t.s_l = (f.v[1] - f.v[0]) / h;
  t.a_r = f.v.back() + t.s_r * (f.axis.x(i) - f.axis.x(n - 1));
  t.a_l = f.v.front() + t.s_l * (f.axis.x(i) - f.axis.x(0));
  return t;
}

inline double apply_weights(const GridFunction& f, const std::vector<double>& w,
                            int i) {
  const double ui = f.v[static_cast<std::size_t>(i)];
  double acc = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    const int off = static_cast<int>(k) + 1;
    acc += w[k] * (extended_value(f, i + off) + extended_value(f, i - off) -
                   2.0 * ui);
  }
  return acc;
}

inline double apply_tail(const GridFunction& f, const Stencil& s, int i) {
  const TailAffine t = tail_affine(f, i);
  const double ui = f.v[static_cast<std::size_t>(i)];
  return (t.a_r + t.a_l - 2.0 * ui) * s.tail_mass +
         (t.s_r - t.s_l) * s.tail_first_moment;
}

}  // namespace detail

// Effective reach of the stencil: at least the full domain width, so every
// explicitly summed cell sees a grid value or the extension and the
// analytic tail starts outside the domain as seen from every node.
inline double stencil_reach(const Axis& axis, double k_tail) {
  const double r = std::max(k_tail, 2.0) * axis.half_width;
  return std::max(r, 2.0 * axis.half_width + axis.h());
}

// Fractional Laplacian with symbol -|xi|^alpha applied to a grid function.
inline GridFunction frac_laplacian_apply(const GridFunction& f, double alpha,
                                         double k_tail = 2.0) {
  const Stencil s =
      build_stencil(alpha, f.axis.h(), stencil_reach(f.axis, k_tail));
  GridFunction out(f.axis, f.ext);
  for (int i = 0; i < f.axis.n; ++i)
    out.v[static_cast<std::size_t>(i)] =
        detail::apply_weights(f, s.w, i) + detail::apply_tail(f, s, i);
  return out;
}

// Splits the operator at radius delta: the near part keeps the compensated
// (second-difference) form, the far part the uncompensated one. For the
// symmetric kernel the compensators cancel, so the two parts add back to the
// full operator exactly (the split partitions the cell contributions). The
// gradient argument exists for interface parity with the general
// Levy-measure form, whose far part carries a p-compensator; it drops out
// here by symmetry.
inline std::pair<GridFunction, GridFunction> localized_operators(
    const GridFunction& f, double alpha, double delta,
    [[maybe_unused]] double p = 0.0, double k_tail = 2.0) {
  const double h = f.axis.h();
  if (!(delta >= 2.0 * h - 1e-12))
    throw ResolutionError(
        "localized operators need delta >= 2h (two cells inside the ball)");
  const double c = stable_levy_constant(alpha);
  const double reach = stencil_reach(f.axis, k_tail);
  const int J = static_cast<int>(std::lround(reach / h));
  const int m = std::min(static_cast<int>(std::floor(delta / h + 1e-12)), J);
  Stencil far;
  far.alpha = alpha;
  far.h = h;
  far.z_cut = (J + 0.5) * h;
  far.tail_mass = (c / alpha) * std::pow(far.z_cut, -alpha);
  far.tail_first_moment = (c / (alpha - 1.0)) * std::pow(far.z_cut, 1.0 - alpha);
  std::vector<double> near_w(static_cast<std::size_t>(m + 1), 0.0);
  far.w.assign(static_cast<std::size_t>(J + 1), 0.0);
  near_w[0] += detail::singular_coeff(c, alpha, h);
  detail::accumulate_cells(c, alpha, h, 1, m, near_w);
  if (m < J) detail::accumulate_cells(c, alpha, h, m + 1, J, far.w);
  GridFunction near_part(f.axis, f.ext), far_part(f.axis, f.ext);
  for (int i = 0; i < f.axis.n; ++i) {
    near_part.v[static_cast<std::size_t>(i)] =
        detail::apply_weights(f, near_w, i);
    far_part.v[static_cast<std::size_t>(i)] =
        detail::apply_weights(f, far.w, i) + detail::apply_tail(f, far, i);
  }
  return {near_part, far_part};
}

// Pointwise quadrature of the generator for an analytic function with known
// second derivative and affine behavior at infinity:
//   f(u) ~ a_plus + s_plus * u (u -> +inf),  a_minus + s_minus * u (u -> -inf).
// Second differences are evaluated at kernel centroids, so no grid is
// involved; used for Lyapunov audits where the function outgrows any
// truncated grid.
template <class F>
double frac_laplacian_at_point(F&& f, double fpp, double y, double alpha,
                               double h, double z_cut, double a_plus,
                               double s_plus, double a_minus, double s_minus) {
  if (!(alpha > 1.0 && alpha < 2.0))
    throw ParameterError("point quadrature: alpha must lie in (1,2)");
  if (!(h > 0.0) || !(z_cut > 2.0 * h))
    throw ParameterError("point quadrature: bad h or z_cut");
  const double c = stable_levy_constant(alpha);
  const int J = static_cast<int>(std::lround(z_cut / h));
  const double fy = f(y);
  double acc = c * std::pow(h / 2.0, 2.0 - alpha) / (2.0 - alpha) * fpp;
  for (int j = 1; j <= J; ++j) {
    const double zj = j * h;
    const detail::CellMoments m =
        detail::cell_moments(c, alpha, zj - 0.5 * h, zj + 0.5 * h, zj);
    acc += m.mass * (f(y + m.centroid) + f(y - m.centroid) - 2.0 * fy);
  }
  const double zc = (J + 0.5) * h;
  const double tail_mass = (c / alpha) * std::pow(zc, -alpha);
  const double tail_first = (c / (alpha - 1.0)) * std::pow(zc, 1.0 - alpha);
  // Beyond the cut: f(y+z)+f(y-z)-2f(y)
  //   ~ (a_plus + a_minus + (s_plus+s_minus) y - 2 f(y)) + (s_plus-s_minus) z.
  acc += (a_plus + a_minus + (s_plus + s_minus) * y - 2.0 * fy) * tail_mass +
         (s_plus - s_minus) * tail_first;
  return acc;
}

}  // namespace mjc
