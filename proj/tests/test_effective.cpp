#include <array>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "mjc/effective.hpp"

using namespace mjc;

namespace {

MeasureOptions node_measure(std::size_t n, std::uint64_t seed) {
  MeasureOptions opt;
  opt.beta_hat = 1.0;
  opt.burn_in = 5.0;
  opt.thinning = 1.0;
  opt.dt = 0.005;
  opt.n = n;
  opt.seed = seed;
  return opt;
}

constexpr double kStationaryCos = 0.51341712;       // exp(-2/3)
constexpr double kGBarZero = 0.25 * kStationaryCos; // BM1 g_bar(0)
constexpr double kHBarZero = -1.0 - kGBarZero;      // BM1 H_bar(0,0)

}  // namespace

TEST_SUITE_BEGIN("effective");

TEST_CASE("inner Hamiltonian closed-form cases on BM1") {
  const auto spec = builtin_benchmark("BM1");
  // p = 0.5: control part sup |v|<=1 of 0.5 v - v^2/2 = 0.125 at v = 0.5
  auto r = hamiltonian(spec, 0.0, 0.0, 0.5);
  CHECK(r.value == doctest::Approx(-1.125).epsilon(1e-9));
  CHECK(r.argmax == doctest::Approx(0.5).epsilon(1e-4));
  // p = 3: clamped argmax
  r = hamiltonian(spec, 0.0, 0.0, 3.0);
  CHECK(r.argmax == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(r.value == doctest::Approx(3.0 - 0.5 - 1.0 - 0.25).epsilon(1e-9));
}

TEST_CASE("inner Hamiltonian matches the closed form across a sample grid") {
  const auto spec = builtin_benchmark("BM1");
  for (double x : {-2.0, -0.5, 0.0, 1.0, 2.5}) {
    for (double y : {-3.0, 0.0, 0.7, 2.0}) {
      for (double p : {-3.0, -1.0, -0.4, 0.0, 0.6, 1.0, 2.0}) {
        const double closed = (-x + std::sin(y)) * p + clamped_quadratic_sup(p) -
                              std::sqrt(1.0 + x * x) - 0.25 * std::cos(y);
        CHECK(hamiltonian(spec, x, y, p).value ==
              doctest::Approx(closed).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("singleton control sets skip the optimization") {
  auto spec = builtin_benchmark("BM1");
  spec.controls = ControlSet::singleton(0.3);
  const auto r = hamiltonian(spec, 0.2, -0.4, 1.5);
  const double direct = spec.drift_b(0.2, -0.4, 0.3) * 1.5 - spec.cost_L(0.2, -0.4, 0.3);
  CHECK(r.value == direct);
  CHECK(r.argmax == 0.3);
}

TEST_CASE("finite-set ties resolve to the smallest control") {
  auto spec = builtin_benchmark("BM1");
  spec.controls = ControlSet::finite({0.5, -0.5});
  spec.drift_b = [](double, double, double v) { return v * v; };
  spec.cost_L = [](double, double, double) { return 0.0; };
  const auto r = hamiltonian(spec, 0.0, 0.0, 1.0);
  CHECK(r.argmax == -0.5);
  CHECK(r.value == doctest::Approx(0.25));
}

TEST_CASE("unbounded objectives are flagged") {
  auto spec = builtin_benchmark("BM1");
  spec.cost_L = [](double, double, double) { return -2e13; };
  CHECK_THROWS_AS(hamiltonian(spec, 0.0, 0.0, 0.0), ModelError);
  spec.cost_L = [](double, double, double) {
    return std::numeric_limits<double>::quiet_NaN();
  };
  CHECK_THROWS_AS(hamiltonian(spec, 0.0, 0.0, 0.0), ModelError);
}

TEST_CASE("closed-form effective problem: BM1 values") {
  const auto eff = closed_form_effective(builtin_benchmark("BM1"));
  CHECK(eff.b_bar(0.0, 0.4) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(eff.g_bar(0.0) == doctest::Approx(kGBarZero).epsilon(1e-7));
  CHECK(effective_hamiltonian(eff, 0.0, 0.0) ==
        doctest::Approx(kHBarZero).epsilon(1e-7));
  CHECK_THROWS_AS(closed_form_effective(ProblemSpec{}), ParameterError);
  auto other = builtin_benchmark("BM1");
  other.name = "custom";
  CHECK_THROWS_AS(closed_form_effective(other), UsageError);
}

TEST_CASE("closed-form effective problem: LIN0 equals the y-free data") {
  const auto eff = closed_form_effective(builtin_benchmark("LIN0"));
  CHECK(eff.b_bar(0.7, -0.2) == doctest::Approx(-0.9));
  CHECK(eff.g_bar(0.7) == doctest::Approx(std::tanh(0.7)));
  CHECK(eff.L_bar(0.7, 0.5) ==
        doctest::Approx(std::sqrt(1.49) + 0.125));
}

TEST_CASE("tabulated LIN0 reproduces the closed form exactly in b and g") {
  const auto spec = builtin_benchmark("LIN0");
  EffectiveBuildOptions opt;
  opt.measure = node_measure(4000, 41);
  const auto eff = build_effective(spec, {-2.0, -1.0, 0.0, 1.0, 2.0},
                                   MeasureSource::Simulate, opt);
  // b and g are y-free, so the measure average is exact and interpolation
  // of affine data is exact too
  CHECK(eff.b_bar(0.35, 0.2) == doctest::Approx(-0.15).epsilon(1e-12));
  CHECK(eff.g_bar(1.0) == doctest::Approx(std::tanh(1.0)).epsilon(1e-12));
}

TEST_CASE("tabulated BM1 matches the closed form within the error bar") {
  const auto spec = builtin_benchmark("BM1");
  EffectiveBuildOptions opt;
  opt.measure = node_measure(30000, 42);
  const auto eff =
      build_effective(spec, {-1.0, 0.0, 1.0}, MeasureSource::Simulate, opt);
  const auto& tab = *eff.table;
  const auto& mu0 = tab.measures[1];  // node at x = 0
  const auto sin_est = integrate(mu0, [](double y) { return std::sin(y); });
  CHECK(std::fabs(eff.b_bar(0.0, 0.4) - 0.4) <= 4.0 * sin_est.stderr_ + 2e-3);
  const auto cos_est = integrate(mu0, [](double y) { return std::cos(y); });
  CHECK(std::fabs(eff.g_bar(0.0) - kGBarZero) <=
        4.0 * 0.25 * cos_est.stderr_ + 2e-3);
  // averaged Hamiltonian at the node
  CHECK(std::fabs(effective_hamiltonian(eff, 0.0, 0.0) - kHBarZero) <=
        4.0 * 0.25 * cos_est.stderr_ + 3e-3);
}

TEST_CASE("effective Hamiltonian without controls reduces to b_bar p - L_bar") {
  auto spec = builtin_benchmark("BM1");
  spec.controls = ControlSet::singleton(0.0);
  spec.name = "custom-singleton";
  EffectiveBuildOptions opt;
  opt.measure = node_measure(5000, 43);
  const auto eff = build_effective(spec, {0.0}, MeasureSource::Simulate, opt);
  for (double p : {-1.0, 0.0, 2.0}) {
    CHECK(effective_hamiltonian(eff, 0.0, p) ==
          doctest::Approx(eff.b_bar(0.0, 0.0) * p - eff.L_bar(0.0, 0.0))
              .epsilon(1e-9));
  }
}

TEST_CASE("effective Hamiltonian is convex in p") {
  const auto closed = closed_form_effective(builtin_benchmark("BM1"));
  EffectiveBuildOptions opt;
  opt.measure = node_measure(4000, 44);
  const auto tab = build_effective(builtin_benchmark("BM1"), {-1.0, 0.0, 1.0},
                                   MeasureSource::Simulate, opt);
  for (const auto* eff : {&closed, &tab}) {
    for (double p1 = -2.0; p1 <= 2.0; p1 += 0.5) {
      for (double p2 = p1 + 0.5; p2 <= 2.0; p2 += 0.5) {
        const double mid = eff->H_bar(0.0, 0.5 * (p1 + p2));
        const double chord = 0.5 * (eff->H_bar(0.0, p1) + eff->H_bar(0.0, p2));
        CHECK(mid <= chord + 1e-9);
      }
    }
  }
}

TEST_CASE("Lipschitz audit of the averaged Hamiltonian and terminal data") {
  EffectiveBuildOptions small;
  small.measure = node_measure(6000, 45);
  EffectiveBuildOptions big;
  big.measure = node_measure(12000, 46);
  const std::vector<double> nodes = {-3.0, -1.5, 0.0, 1.5, 3.0};
  const auto a = build_effective(builtin_benchmark("BM1"), nodes,
                                 MeasureSource::Simulate, small);
  const auto b = build_effective(builtin_benchmark("BM1"), nodes,
                                 MeasureSource::Simulate, big);
  auto max_quotients = [](const EffectiveProblem& eff) {
    double lip_x = 0.0, lip_p = 0.0, lip_g = 0.0;
    for (double x = -3.0; x < 3.0; x += 0.5) {
      for (double p = -3.0; p <= 3.0; p += 0.5) {
        lip_x = std::max(lip_x, std::fabs(eff.H_bar(x + 0.5, p) - eff.H_bar(x, p)) / 0.5);
        if (p + 0.5 <= 3.0)
          lip_p = std::max(lip_p, std::fabs(eff.H_bar(x, p + 0.5) - eff.H_bar(x, p)) / 0.5);
      }
      lip_g = std::max(lip_g, std::fabs(eff.g_bar(x + 0.5) - eff.g_bar(x)) / 0.5);
    }
    return std::array<double, 3>{lip_x, lip_p, lip_g};
  };
  const auto qa = max_quotients(a);
  const auto qb = max_quotients(b);
  for (int i = 0; i < 3; ++i) {
    CHECK(std::isfinite(qa[i]));
    CHECK(qa[i] < 50.0);
    CHECK(std::fabs(qa[i] - qb[i]) <= 0.2 * std::max(qa[i], qb[i]) + 1e-6);
  }
  CHECK(qa[2] <= 1.5);  // g_bar inherits the Lipschitz bound of tanh + smooth
}

TEST_CASE("corrector with a constant source integrates the discount exactly") {
  auto spec = builtin_benchmark("BM1");
  spec.controls = ControlSet::singleton(0.0);
  spec.drift_b = [](double, double, double) { return 0.0; };
  spec.cost_L = [](double, double, double) { return 2.5; };  // h = -2.5
  const double eps_cell = 0.2;
  const auto w = approximate_corrector(spec, 0.0, 0.0, eps_cell, 1.0, 2, 40.0,
                                       0.01, 7);
  CHECK(w.stderr_ == 0.0);
  CHECK(std::fabs(w.value - 2.5 / eps_cell) <= 0.01);
}

TEST_CASE("corrector horizon precondition") {
  const auto spec = builtin_benchmark("BM1");
  CHECK_THROWS_AS(
      approximate_corrector(spec, 0.0, 0.0, 0.05, 0.0, 10, 100.0, 0.01, 1),
      ParameterError);
}

TEST_CASE("scaled corrector approaches the averaged Hamiltonian") {
  const auto spec = builtin_benchmark("BM1");
  const std::size_t n_paths = 3000;
  const double dt = 0.05;
  const auto w_20 =
      approximate_corrector(spec, 0.0, 0.0, 0.2, 0.0, n_paths, 40.0, dt, 8);
  const auto w_05 =
      approximate_corrector(spec, 0.0, 0.0, 0.05, 0.0, n_paths, 160.0, dt, 9);
  const double gap_20 = std::fabs(-0.2 * w_20.value - kHBarZero);
  const double gap_05 = std::fabs(-0.05 * w_05.value - kHBarZero);
  CHECK(gap_05 <= 0.05 + 2.0 * 0.05 * w_05.stderr_);
  CHECK(gap_05 <= gap_20 + 2.0 * (0.05 * w_05.stderr_ + 0.2 * w_20.stderr_));

  const auto w_05_far =
      approximate_corrector(spec, 0.0, 0.0, 0.05, 3.0, n_paths, 160.0, dt, 10);
  const double combined =
      0.05 * std::sqrt(w_05.stderr_ * w_05.stderr_ +
                       w_05_far.stderr_ * w_05_far.stderr_);
  CHECK(std::fabs(0.05 * w_05.value - 0.05 * w_05_far.value) <=
        2.0 * combined + 0.05);
}

TEST_CASE("the two averaged-Hamiltonian routes agree on a (x,p) grid") {
  const auto spec = builtin_benchmark("BM1");
  EffectiveBuildOptions opt;
  opt.measure = node_measure(20000, 47);
  const auto eff = build_effective(spec, {-1.0, 0.0, 1.0},
                                   MeasureSource::Simulate, opt);
  const double eps_cell = 0.05, dt = 0.08;
  const std::size_t n_paths = 800;
  std::uint64_t seed = 100;
  for (double x : {-1.0, 0.0, 1.0}) {
    for (double p : {-1.0, 0.0, 1.0}) {
      const auto w = approximate_corrector(spec, x, p, eps_cell, 0.0, n_paths,
                                           160.0, dt, seed++);
      const double via_cell = -eps_cell * w.value;
      const double via_measure = effective_hamiltonian(eff, x, p);
      CHECK(std::fabs(via_cell - via_measure) <=
            2.0 * eps_cell * w.stderr_ + 0.05);
    }
  }
}

TEST_CASE("Cauchy cell problem: exact start, ergodic limit") {
  const auto spec = builtin_benchmark("BM1");
  const auto start = cauchy_cell(spec, 0.3, 0.0, -1.2, 10, 0.01, 3);
  CHECK(start.value == spec.terminal_g(0.3, -1.2));
  CHECK(start.stderr_ == 0.0);

  for (double y0 : {0.0, 3.0}) {
    const auto w = cauchy_cell(spec, 0.0, 8.0, y0, 4000, 0.01, 5);
    CHECK(std::fabs(w.value - kGBarZero) <= 0.02 + 4.0 * w.stderr_);
  }

  // y-independent terminal data short-circuits to g(x) at every horizon
  const auto lin = builtin_benchmark("LIN0");
  const auto wl = cauchy_cell(lin, 0.4, 2.0, 1.7, 500, 0.01, 6);
  CHECK(wl.value == doctest::Approx(std::tanh(0.4)).epsilon(1e-12));
  CHECK(wl.stderr_ <= 1e-12);
  CHECK_THROWS_AS(cauchy_cell(lin, 0.0, -1.0, 0.0, 10, 0.01, 1), ParameterError);
}

TEST_SUITE_END();
