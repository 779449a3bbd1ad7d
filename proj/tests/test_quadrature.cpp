#include <doctest.h>

#include <cmath>
#include <numbers>

#include "wgmr/quadrature.hpp"

using wgmr::integrate;

TEST_CASE("polynomials are exact") {
  // GK15 integrates degree <= 22 exactly on one panel.
  const auto r = integrate<double>([](double x) { return 7 * std::pow(x, 6) - x; }, -1.0, 2.0,
                                   0.0, 1e-12);
  CHECK(r.value == doctest::Approx(128.0 + 1.0 - 1.5));
  CHECK(r.intervals == 1);
}

TEST_CASE("smooth and kinked integrands") {
  CHECK(integrate<double>([](double x) { return std::sin(x); }, 0.0, std::numbers::pi, 1e-14)
            .value == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(integrate<double>([](double x) { return std::exp(-std::abs(x)); }, -20.0, 20.0, 1e-13,
                          0.0, {0.0})
            .value == doctest::Approx(2 * (1 - std::exp(-20.0))).epsilon(1e-12));
  // Same kink without the breakpoint still converges, with more panels.
  const auto blind = integrate<double>([](double x) { return std::exp(-std::abs(x - 0.3)); },
                                       -20.0, 20.0, 1e-12);
  CHECK(blind.value ==
        doctest::Approx(2 - std::exp(-20.3) - std::exp(-19.7)).epsilon(1e-10));
  CHECK(blind.intervals > 1);
}

TEST_CASE("relative tolerance on tiny scales") {
  const double tau = 50e-9;
  const auto r = integrate<double>([&](double t) { return std::exp(-t / tau) / tau; }, 0.0,
                                   40 * tau, 0.0, 1e-12);
  CHECK(r.value == doctest::Approx(1 - std::exp(-40.0)).epsilon(1e-11));
}

TEST_CASE("deterministic") {
  auto f = [](double x) { return 1 / (1 + 25 * x * x); };
  const auto a = integrate<double>(f, -1.0, 1.0, 1e-13);
  const auto b = integrate<double>(f, -1.0, 1.0, 1e-13);
  CHECK(a.value == b.value);
  CHECK(a.value == doctest::Approx(0.4 * std::atan(5.0)).epsilon(1e-12));
}
