// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances are fixed here, not tuned per run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "wgmr/coinc.hpp"
#include "wgmr/csv.hpp"
#include "wgmr/fitting.hpp"
#include "wgmr/source_sim.hpp"
#include "wgmr/tag_file.hpp"

using namespace wgmr;

namespace {

// Criterion tolerances.
constexpr double kVisibilityLo = 0.66, kVisibilityHi = 0.82;
constexpr double kG2Peak = 35, kG2PeakTol = 0.10;
constexpr double kTauLead = 47e-9, kTauTail = 66e-9, kTauTol = 0.05;
constexpr double kMinSimilarity = 0.999;
constexpr double kTrendSigmas = 3;
constexpr double kLosslessVisibility = 0.99;
constexpr double kControlSigmas = 3;
constexpr int kOracleStreams = 120;
constexpr std::size_t kOracleMaxTags = 200;
constexpr double kRoundTripTol = 1e-6, kJacobianTol = 1e-4;
constexpr std::size_t kThroughputTags = 10'000'000;
constexpr double kThroughputSeconds = 5.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

coinc::NormalizedHistogram g2_of(const ChannelTimes& t, Channel a, Channel b,
                                 unsigned workers = 1) {
  const auto h = coinc::cross_correlate(t, a, b, 1e-9, -400e-9, 400e-9, workers);
  return coinc::normalize_g2(h, coinc::singles_rate(t, a), coinc::singles_rate(t, b),
                             double(t.duration_ps) * 1e-12);
}

coinc::HomProfile profile_of(const ChannelTimes& t, const coinc::FourfoldConfig& cfg) {
  const auto events = coinc::find_fourfold(t, cfg);
  return coinc::hom_profile(events, cfg, 2.5 * cfg.signal_window_tail);
}

void set_efficiency(sim::ExperimentConfig& c, double eta) {
  for (auto* s : {&c.cw, &c.ccw}) s->eta_signal = s->eta_idler = eta;
}

// The nominal configuration, analysed once and shared by several criteria.
struct ReferenceRun {
  std::size_t tags = 0;
  double sim_seconds = 0;
  coinc::NormalizedHistogram g2_cw, g2_ccw;
  coinc::HomProfile profile;
  coinc::VisibilityEstimate v;
};

ReferenceRun reference_run() {
  const auto config = sim::reference_config(35, 0.86, 300, 1);
  ReferenceRun r;
  const auto t0 = std::chrono::steady_clock::now();
  ChannelTimes times;
  {
    const auto stream = sim::simulate_run(config);
    r.tags = stream.tags.size();
    times = ChannelTimes::from_stream(stream);
  }
  r.sim_seconds = seconds_since(t0);
  r.g2_cw = g2_of(times, Channel::I_CW, Channel::S1);
  r.g2_ccw = g2_of(times, Channel::I_CCW, Channel::S2);
  r.profile = profile_of(times, coinc::FourfoldConfig::from_wavepacket(config.cw.wavepacket));
  r.v = coinc::visibility(r.profile);
  return r;
}

// Single-direction run of the nominal config, the other pump switched off.
fit::FitResult calibration_fit(sim::Direction dir, double g2 = 35, double eta = 0.25,
                               double duration = 300) {
  auto config = sim::reference_config(g2, 0.86, duration, 2);
  set_efficiency(config, eta);
  (dir == sim::Direction::CW ? config.ccw : config.cw).pair_rate = 0;
  const auto times = ChannelTimes::from_stream(sim::simulate_run(config));
  return dir == sim::Direction::CW ? fit::fit_g2_double_exp(g2_of(times, Channel::I_CW, Channel::S1))
                                   : fit::fit_g2_double_exp(g2_of(times, Channel::I_CCW, Channel::S2));
}

Outcome criterion1(const ReferenceRun& run) {
  const bool pass = run.v.value >= kVisibilityLo && run.v.value <= kVisibilityHi;
  return {pass, fmt("V=%.3f+-%.3f (want [%.2f, %.2f]); %zu tags simulated in %.1f s", run.v.value,
                    run.v.sigma, kVisibilityLo, kVisibilityHi, run.tags, run.sim_seconds)};
}

Outcome criterion2(const ReferenceRun& run, fit::FitResult& cw_cal) {
  std::string detail;
  bool pass = true;
  for (auto dir : {sim::Direction::CW, sim::Direction::CCW}) {
    const auto f = calibration_fit(dir);
    if (dir == sim::Direction::CW) cw_cal = f;
    const double peak = f.value("A") + f.value("baseline");
    const double lead = f.value("tau_lead"), tail = f.value("tau_tail");
    const bool ok = f.ok() && std::abs(peak / kG2Peak - 1) <= kG2PeakTol &&
                    std::abs(lead / kTauLead - 1) <= kTauTol &&
                    std::abs(tail / kTauTail - 1) <= kTauTol;
    pass = pass && ok;
    detail += fmt("%s g2(0)=%.2f tau_lead=%.2f ns tau_tail=%.2f ns; ",
                  dir == sim::Direction::CW ? "CW" : "CCW", peak, lead * 1e9, tail * 1e9);
  }
  // Through the beamsplitter each signal detector also sees the other
  // source, so the heralded peak there is about (35 - 1) / 2 + 1.
  const auto through = fit::fit_g2_double_exp(run.g2_cw);
  detail += fmt("info: I_CW/S1 after the beamsplitter g2(0)=%.2f tau=%.2f/%.2f ns",
                through.value("A") + through.value("baseline"), through.value("tau_lead") * 1e9,
                through.value("tau_tail") * 1e9);
  return {pass, detail};
}

Outcome criterion3(const ReferenceRun& run, const fit::FitResult& cw_cal) {
  const auto fa = fit::fit_g2_double_exp(run.g2_cw);
  const auto fb = fit::fit_g2_double_exp(run.g2_ccw);
  const auto ma = fit::g2_model_from_fit(fa), mb = fit::g2_model_from_fit(fb);
  const double s_dirs = fit::similarity(ma, mb);
  // A second, distinct source: different brightness and detection.
  const auto other = calibration_fit(sim::Direction::CW, 10, 0.8, 20);
  const double s_configs =
      fit::similarity(fit::g2_model_from_fit(cw_cal), fit::g2_model_from_fit(other));
  const double s_self = fit::similarity(ma, ma);
  const bool pass = fa.ok() && fb.ok() && other.ok() && s_dirs >= kMinSimilarity &&
                    s_configs >= kMinSimilarity && s_self == 1.0;
  return {pass, fmt("S(CW,CCW)=%.6f S(g2=35,g2=10)=%.6f S(f,f)=%.17g", s_dirs, s_configs, s_self)};
}

Outcome criterion4() {
  struct Point {
    double g2, duration;
  };
  const std::vector<Point> points{{5, 2}, {10, 5}, {35, 20}, {100, 120}};
  std::vector<coinc::VisibilityEstimate> v;
  std::string detail;
  for (const auto& p : points) {
    auto config = sim::reference_config(p.g2, 0.86, p.duration, 4);
    set_efficiency(config, 0.8);
    const auto times = ChannelTimes::from_stream(sim::simulate_run(config));
    v.push_back(coinc::visibility(
        profile_of(times, coinc::FourfoldConfig::from_wavepacket(config.cw.wavepacket))));
    detail += fmt("V(%g)=%.3f+-%.3f ", p.g2, v.back().value, v.back().sigma);
  }
  bool pass = true;
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double gap = v[i].value - v[i - 1].value;
    const double sigma = std::hypot(v[i].sigma, v[i - 1].sigma);
    pass = pass && gap > kTrendSigmas * sigma;
  }

  // Lossless limit: m = 1, ideal detectors, g2 = 5000. Independent runs are
  // pooled to keep memory bounded; 5 ns bins resolve the dip bottom.
  auto config = sim::reference_config(5000, 1.0, 5000, 0);
  set_efficiency(config, 1.0);
  for (auto* s : {&config.cw, &config.ccw}) {
    s->dark_rate_signal = s->dark_rate_idler = 0;
    s->jitter_sigma = 0;
  }
  const auto cfg = coinc::FourfoldConfig::from_wavepacket(config.cw.wavepacket, 400e-9, 5e-9);
  std::vector<coinc::FourfoldEvent> events;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    config.rng_seed = seed;
    const auto found =
        coinc::find_fourfold(ChannelTimes::from_stream(sim::simulate_run(config)), cfg);
    events.insert(events.end(), found.begin(), found.end());
  }
  const auto limit =
      coinc::visibility(coinc::hom_profile(events, cfg, 2.5 * cfg.signal_window_tail));
  pass = pass && limit.value >= kLosslessVisibility;
  detail += fmt("lossless V=%.4f+-%.4f from %zu four-folds", limit.value, limit.sigma,
                events.size());
  return {pass, detail};
}

Outcome criterion5() {
  auto config = sim::reference_config(35, 0.0, 20, 5);
  set_efficiency(config, 0.8);
  const auto times = ChannelTimes::from_stream(sim::simulate_run(config));
  const auto v = coinc::visibility(
      profile_of(times, coinc::FourfoldConfig::from_wavepacket(config.cw.wavepacket)));
  return {std::abs(v.value) <= kControlSigmas * v.sigma, fmt("m=0: V=%.3f+-%.3f", v.value, v.sigma)};
}

ChannelTimes random_times(std::mt19937_64& rng) {
  ChannelTimes t;
  t.duration_ps = 3'000'000;
  std::uniform_int_distribution<std::size_t> count(0, kOracleMaxTags / kChannelCount);
  std::uniform_int_distribution<std::int64_t> when(0, 3000);
  for (auto& v : t.times) {
    v.resize(count(rng));
    for (auto& x : v) x = when(rng) * 1000;
    std::sort(v.begin(), v.end());
  }
  return t;
}

Outcome criterion6() {
  std::mt19937_64 rng(606);
  coinc::FourfoldConfig cfg;
  cfg.idler_window = 300e-9;
  cfg.signal_window_lead = 60e-9;
  cfg.signal_window_tail = 90e-9;
  const std::int64_t lo = -300'000, width = 7000;
  int mismatches = 0;
  std::size_t pairs_seen = 0, events_seen = 0;
  for (int trial = 0; trial < kOracleStreams; ++trial) {
    const auto t = random_times(rng);
    // All pairs.
    const auto h = coinc::cross_correlate(t, Channel::I_CW, Channel::S2, 7e-9, -300e-9, 350e-9);
    std::vector<std::uint64_t> expect(h.size(), 0);
    for (auto a : t[Channel::I_CW])
      for (auto b : t[Channel::S2]) {
        const auto d = b - a;
        if (d >= lo && d < lo + width * std::int64_t(h.size())) ++expect[std::size_t((d - lo) / width)];
      }
    if (expect != h.counts()) ++mismatches;
    pairs_seen += h.total();

    // All quadruples.
    const auto lead = to_picoseconds(cfg.signal_window_lead);
    const auto tail = to_picoseconds(cfg.signal_window_tail);
    auto in = [&](std::int64_t s, std::int64_t i) { return s >= i - lead && s <= i + tail; };
    std::vector<coinc::FourfoldEvent> brute;
    for (auto c : t[Channel::I_CW])
      for (auto x : t[Channel::I_CCW]) {
        if (std::abs(c - x) > to_picoseconds(cfg.idler_window)) continue;
        const std::int64_t none = std::numeric_limits<std::int64_t>::max();
        std::int64_t d1 = none, d2 = none, w1 = none, w2 = none;
        for (auto s1 : t[Channel::S1])
          for (auto s2 : t[Channel::S2]) {
            if (in(s1, c) && in(s2, x)) d1 = std::min(d1, s1), d2 = std::min(d2, s2);
            if (in(s1, x) && in(s2, c)) w1 = std::min(w1, s1), w2 = std::min(w2, s2);
          }
        if (d1 != none) brute.push_back({c - x, c, x, d1, d2, false});
        else if (w1 != none) brute.push_back({c - x, c, x, w1, w2, true});
      }
    if (coinc::find_fourfold(t, cfg) != brute) ++mismatches;
    events_seen += brute.size();
  }
  return {mismatches == 0 && events_seen > 0,
          fmt("%d streams, %d mismatches (%zu pairs, %zu four-folds compared)", kOracleStreams,
              mismatches, pairs_seen, events_seen)};
}

template <int N, typename F, typename G>
double worst_jacobian_error(F model, G gradient, const Eigen::Matrix<double, N, 1>& p,
                            const Eigen::VectorXd& xs) {
  double worst = 0;
  for (double x : xs) {
    const auto g = gradient(p, x);
    for (int k = 0; k < N; ++k) {
      const double h = 1e-6 * (p(k) != 0 ? std::abs(p(k)) : 1.0);
      auto up = p, down = p;
      up(k) += h;
      down(k) -= h;
      const double numeric = (model(up, x) - model(down, x)) / (2 * h);
      worst = std::max(worst, std::abs(g(k) - numeric) / std::max(std::abs(numeric), 1e-6));
    }
  }
  return worst;
}

template <int N, typename F>
fit::CurveData noiseless(F model, const Eigen::Matrix<double, N, 1>& p, double x0, double x1,
                         int n, double sigma) {
  fit::CurveData d;
  d.x = Eigen::VectorXd::LinSpaced(n, x0, x1);
  d.y = d.x.unaryExpr([&](double x) { return model(p, x); });
  if (sigma > 0) d.sigma = Eigen::VectorXd::Constant(n, sigma);
  return d;
}

double worst_relative(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
  return ((got - want).cwiseAbs().array() / want.cwiseAbs().array()).maxCoeff();
}

Outcome criterion7() {
  auto g2f = [](const fit::G2Params& p, double x) { return fit::g2_curve<double>(p, x); };
  auto dipf = [](const fit::DipParams& p, double x) { return fit::dip_curve<double>(p, x); };
  auto frf = [](const fit::FringeParams& p, double x) { return fit::fringe_curve<double>(p, x); };
  fit::G2Params g;
  g << 34, 47e-9, 66e-9, 1.0, 2e-9;
  fit::DipParams d;
  d << 1.5e6, 38e6, 0.25, 0.8;
  fit::FringeParams f;
  f << 2.0, 0.86, 1.7e-3, -1.1;

  const auto rg = fit::fit_g2_double_exp(noiseless<5>(g2f, g, -400e-9, 399e-9, 800, 0.1));
  const auto rd = fit::fit_lorentzian_dip(noiseless<4>(dipf, d, -150e6, 150e6, 301, 0.01));
  const auto rf = fit::fit_fringe(noiseless<4>(frf, f, 0.0, 10e-3, 400, 0.0));
  const double eg = worst_relative(rg.params, g), ed = worst_relative(rd.params, d),
               ef = worst_relative(rf.params, f);

  const double jg = worst_jacobian_error<5>(g2f, fit::g2_curve_gradient, g,
                                            Eigen::VectorXd::LinSpaced(37, -390e-9, 390e-9));
  const double jd = worst_jacobian_error<4>(dipf, fit::dip_curve_gradient, d,
                                            Eigen::VectorXd::LinSpaced(41, -140e6, 140e6));
  const double jf = worst_jacobian_error<4>(frf, fit::fringe_curve_gradient, f,
                                            Eigen::VectorXd::LinSpaced(41, 0.0, 9e-3));
  const bool pass = rg.ok() && rd.ok() && rf.ok() && std::max({eg, ed, ef}) <= kRoundTripTol &&
                    std::max({jg, jd, jf}) <= kJacobianTol;
  return {pass, fmt("round trip g2 %.1e dip %.1e fringe %.1e; jacobian g2 %.1e dip %.1e fringe %.1e",
                    eg, ed, ef, jg, jd, jf)};
}

Outcome criterion8(const ReferenceRun& run) {
  std::size_t checked = 0, bad = 0;
  auto expect_eq = [&](double got, double want) {
    ++checked;
    if (std::abs(got - want) > 1e-12 * std::max(1.0, std::abs(want))) ++bad;
  };
  for (const auto* g : {&run.g2_cw, &run.g2_ccw}) {
    const auto& h = g->raw;
    for (std::size_t k = 0; k < h.size(); ++k) {
      const double c = double(h.counts()[k]);
      expect_eq(h.error(k), std::sqrt(c));
      expect_eq(g->values[k], c / g->expectation);
      expect_eq(g->errors[k], std::sqrt(c) / g->expectation);
    }
  }
  const auto& p = run.profile;
  double far = 0;
  for (std::size_t k = 0; k < p.histogram.size(); ++k)
    if (std::abs(p.histogram.bin_center(k)) >= 2.5 * 132e-9) far += double(p.histogram.counts()[k]);
  const double n = double(p.plateau_bins);
  expect_eq(p.plateau, far / n);
  expect_eq(p.plateau_error, std::sqrt(far) / n);
  for (std::size_t k = 0; k < p.histogram.size(); ++k) {
    const double c = double(p.histogram.counts()[k]);
    expect_eq(p.histogram.error(k), std::sqrt(c));
    // N / P with Poisson errors on N and on the plateau sum.
    expect_eq(p.normalized_errors[k], c > 0 ? (c / p.plateau) * std::sqrt(1 / c + 1 / far) : 0.0);
  }
  return {bad == 0, fmt("%zu identities checked, %zu violated", checked, bad)};
}

std::string csv_of(const coinc::NormalizedHistogram& g) {
  std::ostringstream s;
  io::write_histogram_csv(s, io::table_of(g));
  return s.str();
}

std::string csv_of(const coinc::HomProfile& p) {
  std::ostringstream s;
  io::write_histogram_csv(s, io::table_of(p));
  return s.str();
}

Outcome criterion9() {
  const auto config = sim::reference_config(35, 0.86, 3, 9);
  std::string ref_tags, ref_g2, ref_profile;
  bool pass = true;
  for (unsigned workers : {1u, 2u, 8u}) {
    const auto stream = sim::simulate_run(config, workers);
    std::ostringstream bytes(std::ios::binary);
    io::write_tags(stream, bytes);
    const auto times = ChannelTimes::from_stream(stream);
    const auto g2 = csv_of(g2_of(times, Channel::I_CW, Channel::S1, workers));
    const auto cfg = coinc::FourfoldConfig::from_wavepacket(config.cw.wavepacket);
    const auto profile = csv_of(profile_of(times, cfg));
    if (workers == 1) {
      ref_tags = bytes.str();
      ref_g2 = g2;
      ref_profile = profile;
    } else {
      pass = pass && bytes.str() == ref_tags && g2 == ref_g2 && profile == ref_profile;
    }
  }
  return {pass, fmt("tag file %zu bytes; g2 and profile CSVs compared across 1, 2, 8 workers",
                    ref_tags.size())};
}

Outcome criterion10() {
  auto config = sim::reference_config(35, 0.86, 42, 10);
  const auto path = std::filesystem::path("throughput.tags");
  std::size_t tags = 0;
  {
    const auto stream = sim::simulate_run(config);
    tags = stream.tags.size();
    io::write_tags(stream, path);
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto times = io::read_channel_times(path);
  const auto h = coinc::cross_correlate(times, Channel::I_CW, Channel::S1, 1e-9, -400e-9, 400e-9, 1);
  const double elapsed = seconds_since(t0);
  std::filesystem::remove(path);
  return {tags >= kThroughputTags && elapsed <= kThroughputSeconds,
          fmt("%zu tags read and correlated in %.2f s (%llu pairs)", tags, elapsed,
              static_cast<unsigned long long>(h.total()))};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int n, const std::function<Outcome()>& run) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("criterion %2d: %s  %s  [%.1f s]\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  };

  ReferenceRun run;
  fit::FitResult cw_cal;
  report(1, [&] {
    run = reference_run();
    return criterion1(run);
  });
  report(2, [&] { return criterion2(run, cw_cal); });
  report(3, [&] { return criterion3(run, cw_cal); });
  report(4, criterion4);
  report(5, criterion5);
  report(6, criterion6);
  report(7, criterion7);
  report(8, [&] { return criterion8(run); });
  report(9, criterion9);
  report(10, criterion10);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
