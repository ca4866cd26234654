#include <cmath>
#include <vector>

#include "doctest.h"
#include "mjc/sde.hpp"

using namespace mjc;

namespace {

ProblemSpec custom(std::function<double(double, double, double)> b,
                   std::function<double(double, double)> c) {
  ProblemSpec spec = builtin_benchmark("BM1");
  spec.drift_b = std::move(b);
  spec.drift_c = std::move(c);
  spec.name = "custom";
  return spec;
}

}  // namespace

TEST_SUITE_BEGIN("sde");

TEST_CASE("zero slow drift with noise off keeps X constant") {
  auto spec = custom([](double, double, double) { return 0.0; },
                     [](double, double y) { return -y; });
  PathRng rng(1, 0);
  const auto paths = simulate_slow_fast(spec, 0.5, Policy::constant(0.0), 1.3,
                                        0.7, 0.0, 0.01, rng, /*noise=*/false);
  for (double x : paths.x.states) CHECK(x == 1.3);
  CHECK(paths.x.times.front() == 0.0);
  CHECK(paths.x.times.back() == spec.horizon);
}

TEST_CASE("linear fast drift with noise off relaxes like exp(-t/eps)") {
  auto spec = custom([](double, double, double) { return 0.0; },
                     [](double, double y) { return -y; });
  const double eps = 0.1, dt = 0.005;
  PathRng rng(1, 0);
  const auto paths = simulate_slow_fast(spec, eps, Policy::constant(0.0), 0.0,
                                        1.0, 0.0, dt, rng, false);
  double worst = 0.0;
  for (std::size_t k = 0; k < paths.y.times.size(); ++k) {
    const double exact = std::exp(-paths.y.times[k] / eps);
    worst = std::max(worst, std::fabs(paths.y.states[k] - exact));
  }
  CHECK(worst <= 0.5 * dt / eps);
}

TEST_CASE("stiffness guard rejects dt > eps/10") {
  auto spec = builtin_benchmark("BM1");
  PathRng rng(1, 0);
  CHECK_THROWS_AS(simulate_slow_fast(spec, 0.05, Policy::constant(0.0), 0, 0,
                                     0.0, 0.02, rng),
                  ParameterError);
}

TEST_CASE("frozen equation: constant and linear closed forms") {
  auto spec = custom([](double, double, double) { return 0.0; },
                     [](double, double) { return 0.0; });
  RandomStream rng(3, 1);
  const auto still = simulate_frozen(spec, 0.4, 2.2, 1.0, 0.01, rng, false);
  for (double y : still.states) CHECK(y == 2.2);

  auto bm1 = builtin_benchmark("BM1");
  const double x_frozen = 1.1;
  const double a = 0.5 * std::sin(x_frozen);
  RandomStream rng2(3, 2);
  const auto relax = simulate_frozen(bm1, x_frozen, 2.0, 4.0, 0.002, rng2, false);
  double worst = 0.0;
  for (std::size_t k = 0; k < relax.times.size(); ++k) {
    const double exact = a + (2.0 - a) * std::exp(-relax.times[k]);
    worst = std::max(worst, std::fabs(relax.states[k] - exact));
  }
  CHECK(worst <= 0.01);
}

TEST_CASE("averaged equation with noise off integrates the linear ODE") {
  struct Eff {
    ControlSet controls = ControlSet::singleton(0.0);
    double alpha1 = 1.5;
    double horizon = 1.0;
    double b_bar(double x, double) const { return -x; }
  } eff;
  RandomStream rng(5, 0);
  const double dt = 0.005;
  const auto path = simulate_averaged(eff, Policy::constant(0.0), 2.0, 0.0, dt,
                                      rng, false);
  CHECK(std::fabs(path.states.back() - 2.0 * std::exp(-1.0)) <= 3.0 * dt);
}

TEST_CASE("divergent drift reports the step index") {
  auto spec = custom([](double x, double, double) { return x * x * x; },
                     [](double, double y) { return -y; });
  PathRng rng(1, 0);
  CHECK_THROWS_WITH_AS(
      simulate_slow_fast(spec, 1.0, Policy::constant(0.0), 2.0, 0.0, 0.0, 0.1,
                         rng, false),
      doctest::Contains("step"), DivergenceError);
}

TEST_CASE("sup-moment estimate: deterministic baseline and parameter guard") {
  auto spec = custom([](double, double, double) { return 0.0; },
                     [](double, double y) { return -y; });
  // With the noise hook off there is no randomness; emulate by p-moment of
  // the constant path via a single path with noise disabled.
  PathRng rng(0, 0);
  double sup = 0.0;
  drive_slow_fast(spec, 0.5, Policy::constant(0.0), 1.0, 0.5, 0.0, 1.0, 0.01,
                  rng, false,
                  [&](std::size_t, double, double x, double, double) {
                    sup = std::max(sup, std::fabs(x));
                  });
  CHECK(std::pow(sup, 1.2) == doctest::Approx(1.0));

  CHECK_THROWS_AS(
      estimate_sup_moment(builtin_benchmark("BM1"), 0.5, 1.6, 1, 0, 10, 0.01, 1),
      ParameterError);
  CHECK_THROWS_AS(
      estimate_sup_moment(builtin_benchmark("BM1"), 0.5, 0.5, 1, 0, 10, 0.01, 1),
      ParameterError);
}

TEST_CASE("sup-moment is uniformly bounded in eps (desk-scale scan)") {
  const auto spec = builtin_benchmark("BM1");
  std::vector<double> values;
  for (double eps : {0.5, 0.1, 0.02}) {
    const double dt = std::min(eps / 10.0, 0.01);
    values.push_back(
        estimate_sup_moment(spec, eps, 1.2, 1.0, 0.0, 1500, dt, 2024).value);
  }
  for (double v : values) {
    CHECK(v <= 2.0 * values.front());
    CHECK(v >= 0.5 * values.front());
  }
}

TEST_CASE("synchronous coupling contracts pathwise (Euler-exact rate)") {
  const auto spec = builtin_benchmark("BM1");
  const double dt = 0.01;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    RandomStream rng(seed, 9);
    const auto gap =
        coupled_frozen_contraction(spec, 0.3, 1.5, 0.3, -0.5, 4.0, dt, rng);
    for (std::size_t k = 1; k < gap.size(); ++k)
      CHECK(gap[k].second <= gap[k - 1].second + 1e-15);
    for (const auto& [s, g2] : gap) {
      const double exact = 2.0 * std::exp(-s);
      CHECK(std::fabs(std::sqrt(g2) - exact) <= 0.05 * exact + 1e-12);
    }
  }
}

TEST_CASE("coupled paths with split x-anchors stay within a fitted bound") {
  const auto spec = builtin_benchmark("BM1");
  const double dt = 0.01, horizon = 6.0;
  auto sup_gap2 = [&](double x1, double x2, std::uint64_t seed) {
    RandomStream rng(seed, 21);
    double m = 0.0;
    for (const auto& [s, g2] :
         coupled_frozen_contraction(spec, x1, 0.8, x2, 0.8, horizon, dt, rng))
      m = std::max(m, g2);
    return m;
  };
  const double c_fit = sup_gap2(0.0, 1.0, 5) / 1.0;
  struct Pair { double x1, x2; };
  for (const Pair& p : {Pair{0.0, 2.0}, Pair{-1.0, 1.0}, Pair{0.5, 2.5}}) {
    const double dx2 = (p.x1 - p.x2) * (p.x1 - p.x2);
    CHECK(sup_gap2(p.x1, p.x2, 6) <= 1.5 * c_fit * dx2 + 1e-9);
  }
}

TEST_CASE("identical seeds give bit-identical trajectories") {
  const auto spec = builtin_benchmark("BM1");
  PathRng a(123, 4), b(123, 4);
  const auto pa = simulate_slow_fast(spec, 0.2, Policy::constant(0.3), 0.1,
                                     -0.2, 0.0, 0.01, a);
  const auto pb = simulate_slow_fast(spec, 0.2, Policy::constant(0.3), 0.1,
                                     -0.2, 0.0, 0.01, b);
  CHECK(pa.x.states == pb.x.states);
  CHECK(pa.y.states == pb.y.states);
}

TEST_CASE("halving dt moves smooth statistics within the declared tolerance") {
  const auto spec = builtin_benchmark("BM1");
  auto mean_tanh = [&](double dt) {
    const std::size_t n = 3000;
    std::vector<double> phis(n);
    parallel_for(n, [&](std::size_t i) {
      PathRng rng(51, i);
      double last = 0.0;
      drive_slow_fast(spec, 0.2, Policy::constant(0.0), 0.5, 0.0, 0.0,
                      spec.horizon, dt, rng, true,
                      [&](std::size_t, double, double x, double, double) {
                        last = x;
                      });
      phis[i] = std::tanh(last);
    });
    return mean_with_stderr(phis);
  };
  const auto coarse = mean_tanh(0.02);
  const auto fine = mean_tanh(0.01);
  CHECK(std::fabs(coarse.value - fine.value) <= kWeakSelfConsistencyTol);
}

TEST_CASE("fast component time-averages to the stationary stable-OU law") {
  // BM1 at eps = 0.05 with v = 0: over [0.5, 1] the window-average of
  // sin(Y_s) tracks exp(-2/3) sin(0.5 sin X_s) for the slowly varying slow
  // component.
  const auto spec = builtin_benchmark("BM1");
  const double eps = 0.05, dt = 0.005;
  const std::size_t n_paths = 200;
  std::vector<double> diffs(n_paths);
  parallel_for(n_paths, [&](std::size_t i) {
    PathRng rng(909, i);
    double acc_sin = 0.0, acc_pred = 0.0;
    std::size_t count = 0;
    drive_slow_fast(spec, eps, Policy::constant(0.0), 0.3, 0.0, 0.0,
                    spec.horizon, dt, rng, true,
                    [&](std::size_t, double t, double x, double y, double) {
                      if (t < 0.5) return;
                      acc_sin += std::sin(y);
                      acc_pred += std::exp(-2.0 / 3.0) *
                                  std::sin(0.5 * std::sin(x));
                      ++count;
                    });
    diffs[i] = (acc_sin - acc_pred) / static_cast<double>(count);
  });
  const auto est = mean_with_stderr(diffs);
  CHECK(std::fabs(est.value) <= 4.0 * est.stderr_ + 0.02);
}

TEST_SUITE_END();
