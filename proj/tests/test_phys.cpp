#include <doctest.h>

#include <cmath>
#include <limits>

#include "wgmr/phys.hpp"
#include "wgmr/quadrature.hpp"

using namespace wgmr;
using phys::WavepacketModel;

namespace {

// Overlap integral by adaptive quadrature of the amplitude envelopes.
double overlap_by_quadrature(const WavepacketModel& a, const WavepacketModel& b,
                             double delta) {
  auto amp = [](const WavepacketModel& w, double t) {
    return std::sqrt(phys::conditional_delay_pdf(w, t));
  };
  const double reach = 80 * std::max(a.tau_max(), b.tau_max()) + std::abs(delta);
  return integrate<double>([&](double t) { return amp(a, t) * amp(b, t - delta); },
                           -reach, reach, 1e-14, 1e-12, {0.0, delta})
      .value;
}

}  // namespace

TEST_CASE("conditional delay pdf is normalized and two-sided") {
  const WavepacketModel w;
  const auto r = integrate<double>(
      [&](double t) { return phys::conditional_delay_pdf(w, t); }, -5e-6, 5e-6, 1e-14,
      1e-12, {0.0});
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(phys::envelope(w, 0.0) == 1.0);
  CHECK(phys::envelope(w, -47e-9) == doctest::Approx(std::exp(-1.0)));
  CHECK(phys::envelope(w, 66e-9) == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("temporal overlap matches quadrature") {
  const WavepacketModel nominal;
  const WavepacketModel other{30e-9, 90e-9};
  for (double d : {-300e-9, -120e-9, -47e-9, -5e-9, 0.0, 1e-9, 25e-9, 66e-9, 200e-9, 700e-9}) {
    CAPTURE(d);
    CHECK(phys::temporal_overlap(nominal, nominal, d) ==
          doctest::Approx(overlap_by_quadrature(nominal, nominal, d)).epsilon(1e-9));
    CHECK(phys::temporal_overlap(nominal, other, d) ==
          doctest::Approx(overlap_by_quadrature(nominal, other, d)).epsilon(1e-9));
  }
}

TEST_CASE("temporal overlap properties") {
  const WavepacketModel w;
  CHECK(phys::temporal_overlap(w, w, 0.0) == doctest::Approx(1.0).epsilon(1e-14));
  double previous = 1.0;
  for (int k = 0; k <= 100; ++k) {
    const double d = k * 5e-9;
    const double o = phys::temporal_overlap(w, w, d);
    CHECK(o == doctest::Approx(phys::temporal_overlap(w, w, -d)).epsilon(1e-13));
    CHECK(o <= previous + 1e-15);
    CHECK(o >= 0.0);
    previous = o;
  }
}

TEST_CASE("one-sided exponential limit") {
  // Lead side collapsed: intensity decays with tau, amplitude with 2 tau.
  const double tau = 66e-9;
  const WavepacketModel w{1e-18, tau};
  CHECK(phys::temporal_overlap(w, w, tau) == doctest::Approx(std::exp(-0.5)).epsilon(1e-6));
  CHECK(overlap_by_quadrature(w, w, tau) == doctest::Approx(std::exp(-0.5)).epsilon(1e-6));
}

TEST_CASE("g2 model and rate target") {
  phys::G2Model m;
  CHECK(phys::g2_model_eval(m, 0.0) == 35.0);
  CHECK(phys::g2_model_eval(m, 1.0) == doctest::Approx(1.0));
  m.peak_offset = 10e-9;
  CHECK(phys::g2_model_eval(m, 10e-9) == 35.0);

  const WavepacketModel w;
  const double rate = phys::rate_for_g2_target(w, 35.0);
  CHECK(rate == doctest::Approx(1.0 / (34 * 113e-9)));
  // Poisson pairs: excess at zero delay is pdf(0) / rate.
  CHECK(1 + phys::conditional_delay_pdf(w, 0.0) / rate == doctest::Approx(35.0));
  CHECK_THROWS_AS(phys::rate_for_g2_target(w, 1.0), std::invalid_argument);
}

TEST_CASE("lorentzian dip") {
  phys::ResonanceDipModel d;
  d.center = 5e6;
  CHECK(phys::lorentzian_dip_eval(d, 5e6) == doctest::Approx(0.75));
  CHECK(phys::lorentzian_dip_eval(d, 5e6 + 19e6) == doctest::Approx(1 - 0.125));
  CHECK(phys::lorentzian_dip_eval(d, 5e6 - 19e6) == doctest::Approx(1 - 0.125));
  d.coupling = 0.5;
  CHECK(phys::lorentzian_dip_eval(d, 5e6) == doctest::Approx(0.5));
}

TEST_CASE("zero delay visibility") {
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(phys::zero_delay_visibility(0.86, inf) == doctest::Approx(0.86 * 0.86));
  CHECK(phys::zero_delay_visibility(1.0, 1e9) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(phys::zero_delay_visibility(0.0, 35.0) == 0.0);
  double previous = 0;
  for (double g2 : {1.5, 3.0, 5.0, 10.0, 35.0, 100.0, 1e3, 1e5}) {
    const double v = phys::zero_delay_visibility(0.86, g2);
    CHECK(v > previous);
    CHECK(v < 0.86 * 0.86);
    previous = v;
  }
  CHECK_THROWS_AS(phys::zero_delay_visibility(1.2, 35.0), std::invalid_argument);
  CHECK_THROWS_AS(phys::zero_delay_visibility(0.5, 0.9), std::invalid_argument);
}

TEST_CASE("predicted HOM dip") {
  const WavepacketModel w;
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(phys::predict_hom_dip(w, 1.0, inf, 0.0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(phys::predict_hom_dip(w, 0.0, 35.0, 0.0) == 1.0);
  CHECK(phys::predict_hom_dip(w, 0.86, 35.0, 5e-6) == doctest::Approx(1.0).epsilon(1e-12));
  const double floor = phys::predict_hom_dip(w, 0.86, 35.0, 0.0);
  CHECK(floor == doctest::Approx(1 - phys::zero_delay_visibility(0.86, 35.0)));
  for (double d : {10e-9, 50e-9, 150e-9})
    CHECK(phys::predict_hom_dip(w, 0.86, 35.0, d) ==
          doctest::Approx(phys::predict_hom_dip(w, 0.86, 35.0, -d)));
}

TEST_CASE("invalid models are rejected") {
  CHECK_THROWS_AS(phys::validate(WavepacketModel{0.0, 66e-9}), std::invalid_argument);
  CHECK_THROWS_AS(phys::validate(WavepacketModel{47e-9, -1.0}), std::invalid_argument);
  phys::ResonanceDipModel d;
  d.fwhm = 0;
  CHECK_THROWS_AS(phys::validate(d), std::invalid_argument);
  CHECK_NOTHROW(phys::validate(phys::G2Model{}));
}

TEST_CASE("models work in long double") {
  const phys::BasicWavepacket<long double> w;
  CHECK(double(phys::temporal_overlap(w, w, 20e-9L)) ==
        doctest::Approx(phys::temporal_overlap(WavepacketModel{}, WavepacketModel{}, 20e-9))
            .epsilon(1e-13));
}
