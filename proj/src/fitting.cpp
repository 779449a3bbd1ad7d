#include "wgmr/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

#include "wgmr/quadrature.hpp"

namespace wgmr::fit {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Curve fit in internally rescaled parameters q = p / scale so that the
// normal equations are well conditioned whatever the physical units.
template <int N, typename Model, typename Gradient>
struct CurveProblem {
  const CurveData& data;
  Eigen::Matrix<double, N, 1> scale;
  Model model;
  Gradient gradient;

  Eigen::Matrix<double, N, 1> physical(const VectorXd& q) const {
    return q.cwiseProduct(scale);
  }
  double weight(Eigen::Index i) const {
    return data.sigma.size() == 0 ? 1.0 : 1.0 / data.sigma(i);
  }
  VectorXd residuals(const VectorXd& q) const {
    const auto p = physical(q);
    VectorXd r(data.size());
    for (Eigen::Index i = 0; i < data.size(); ++i)
      r(i) = (model(p, data.x(i)) - data.y(i)) * weight(i);
    return r;
  }
  MatrixXd jacobian(const VectorXd& q) const {
    const auto p = physical(q);
    MatrixXd j(data.size(), N);
    for (Eigen::Index i = 0; i < data.size(); ++i)
      j.row(i) = gradient(p, data.x(i)).cwiseProduct(scale.transpose()) * weight(i);
    return j;
  }
};

template <int N, typename Model, typename Gradient>
FitResult run_fit(const CurveData& data, const Eigen::Matrix<double, N, 1>& seed,
                  Eigen::Matrix<double, N, 1> scale, Model model,
                  Gradient gradient, std::vector<std::string> names,
                  std::vector<std::string> units, LmOptions options) {
  for (int k = 0; k < N; ++k)
    if (!(scale(k) > 0) || !std::isfinite(scale(k))) scale(k) = 1;
  CurveProblem<N, Model, Gradient> problem{data, scale, model, gradient};

  VectorXd weighted_y(data.size());
  for (Eigen::Index i = 0; i < data.size(); ++i)
    weighted_y(i) = data.y(i) * problem.weight(i);
  options.residual_tolerance =
      std::max(options.residual_tolerance, 1e-11 * weighted_y.norm());

  const VectorXd q0 = seed.cwiseQuotient(scale);
  const LmSummary s = levenberg_marquardt(problem, q0, options);

  FitResult out;
  out.names = std::move(names);
  out.units = std::move(units);
  out.params = problem.physical(s.params);
  MatrixXd cov = s.covariance;
  const Eigen::Index dof = data.size() - N;
  if (data.sigma.size() == 0)
    cov *= dof > 0 ? s.residual_norm * s.residual_norm / double(dof) : 0.0;
  out.sigmas = cov.diagonal().cwiseMax(0.0).cwiseSqrt().cwiseProduct(VectorXd(scale));
  out.residual_norm = s.residual_norm;
  out.gradient_measure = s.gradient_measure;
  out.iterations = s.iterations;
  out.converged = s.converged && out.params.allFinite();
  out.identifiable = s.full_rank;
  return out;
}

void check_data(const CurveData& data, Eigen::Index min_points, const char* what) {
  if (data.x.size() != data.y.size() ||
      (data.sigma.size() != 0 && data.sigma.size() != data.x.size()))
    throw std::invalid_argument(std::string(what) + ": sample vectors differ in length");
  if (data.size() < min_points)
    throw std::invalid_argument(std::string(what) + ": needs at least " +
                                std::to_string(min_points) + " samples");
  if (!data.x.allFinite() || !data.y.allFinite())
    throw std::invalid_argument(std::string(what) + ": non-finite sample");
  for (Eigen::Index i = 1; i < data.size(); ++i)
    if (!(data.x(i) > data.x(i - 1)))
      throw std::invalid_argument(std::string(what) + ": abscissa must increase");
  if (data.sigma.size() != 0)
    for (Eigen::Index i = 0; i < data.size(); ++i)
      if (!(data.sigma(i) > 0) || !std::isfinite(data.sigma(i)))
        throw std::invalid_argument(std::string(what) + ": sigma must be positive");
}

double mean_of(const VectorXd& v, Eigen::Index from, Eigen::Index to) {
  double s = 0;
  for (Eigen::Index i = from; i < to; ++i) s += v(i);
  return to > from ? s / double(to - from) : 0.0;
}

Eigen::Index argmax(const VectorXd& v) {
  Eigen::Index k = 0;
  v.maxCoeff(&k);
  return k;
}

// Slope of ln(excess) against |x - x_peak| on one side of the peak, using the
// bins whose excess is above e^-3 of the peak.
double one_sided_decay(const CurveData& d, Eigen::Index peak, double base,
                       double amp, int direction) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (Eigen::Index i = peak; i >= 0 && i < d.size(); i += direction) {
    const double excess = d.y(i) - base;
    if (!(excess > amp * std::exp(-3.0))) break;
    const double u = std::abs(d.x(i) - d.x(peak));
    const double l = std::log(excess);
    sx += u;
    sy += l;
    sxx += u * u;
    sxy += u * l;
    ++n;
  }
  const double step = std::abs(d.x(d.size() - 1) - d.x(0)) / double(d.size() - 1);
  if (n < 2) return step;
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  if (!(slope < 0) || !std::isfinite(slope)) return step;
  return std::max(-1.0 / slope, 0.5 * step);
}

bool significant(const FitResult& r, Eigen::Index k) {
  return std::abs(r.params(k)) > 3 * r.sigmas(k);
}

}  // namespace

CurveData from_normalized(const coinc::NormalizedHistogram& hist) {
  const std::size_t n = hist.values.size();
  CurveData d;
  d.x.resize(Eigen::Index(n));
  d.y.resize(Eigen::Index(n));
  d.sigma.resize(Eigen::Index(n));
  // Empty bins carry zero Poisson error; give them the one-count error.
  const double floor = hist.expectation > 0 ? 1.0 / hist.expectation : 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    d.x(Eigen::Index(k)) = hist.raw.bin_center(k);
    d.y(Eigen::Index(k)) = hist.values[k];
    d.sigma(Eigen::Index(k)) = hist.errors[k] > 0 ? hist.errors[k] : floor;
  }
  return d;
}

CurveData from_samples(std::span<const std::pair<double, double>> samples) {
  CurveData d;
  d.x.resize(Eigen::Index(samples.size()));
  d.y.resize(Eigen::Index(samples.size()));
  for (std::size_t k = 0; k < samples.size(); ++k) {
    d.x(Eigen::Index(k)) = samples[k].first;
    d.y(Eigen::Index(k)) = samples[k].second;
  }
  return d;
}

double FitResult::value(std::string_view name) const {
  for (std::size_t k = 0; k < names.size(); ++k)
    if (names[k] == name) return params(Eigen::Index(k));
  throw std::out_of_range("no fit parameter named " + std::string(name));
}

double FitResult::sigma(std::string_view name) const {
  for (std::size_t k = 0; k < names.size(); ++k)
    if (names[k] == name) return sigmas(Eigen::Index(k));
  throw std::out_of_range("no fit parameter named " + std::string(name));
}

Eigen::Matrix<double, 1, 5> g2_curve_gradient(const G2Params& p, double x) {
  const double u = x - p(4);
  Eigen::Matrix<double, 1, 5> g;
  if (u < 0) {
    const double e = std::exp(u / p(1));
    g << e, -p(0) * e * u / (p(1) * p(1)), 0.0, 1.0, -p(0) * e / p(1);
  } else {
    const double e = std::exp(-u / p(2));
    g << e, 0.0, p(0) * e * u / (p(2) * p(2)), 1.0, p(0) * e / p(2);
  }
  return g;
}

Eigen::Matrix<double, 1, 4> dip_curve_gradient(const DipParams& p, double x) {
  const double z = 2 * (x - p(0)) / p(1);
  const double den = 1 + z * z;
  const double dz = p(3) * 2 * p(2) * z / (den * den);  // d f / d z
  Eigen::Matrix<double, 1, 4> g;
  g << dz * (-2 / p(1)), dz * (-z / p(1)), -p(3) / den, 1 - p(2) / den;
  return g;
}

Eigen::Matrix<double, 1, 4> fringe_curve_gradient(const FringeParams& p, double x) {
  const double w = 2 * std::numbers::pi * x / p(2);
  const double c = std::cos(w + p(3));
  const double s = std::sin(w + p(3));
  Eigen::Matrix<double, 1, 4> g;
  g << 1 + p(1) * c, p(0) * c, p(0) * p(1) * s * w / p(2), -p(0) * p(1) * s;
  return g;
}

FitResult fit_g2_double_exp(const CurveData& data, const LmOptions& options) {
  check_data(data, 20, "fit_g2_double_exp");
  const Eigen::Index n = data.size();
  const Eigen::Index far = std::max<Eigen::Index>(1, n / 5);
  const double base = 0.5 * (mean_of(data.y, 0, far) + mean_of(data.y, n - far, n));
  const Eigen::Index peak = argmax(data.y);
  const double amp = data.y(peak) - base;
  const double step = (data.x(n - 1) - data.x(0)) / double(n - 1);

  G2Params seed;
  seed << amp, one_sided_decay(data, peak, base, amp, -1),
      one_sided_decay(data, peak, base, amp, +1), base, data.x(peak);
  G2Params scale;
  scale << std::max(std::abs(amp), 1e-3 * std::max(std::abs(base), 1.0)), seed(1),
      seed(2), std::max(std::abs(base), 1e-3 * std::abs(amp)),
      std::max(seed(1), step);

  FitResult r = run_fit<5>(
      data, seed, scale,
      [](const G2Params& p, double x) { return g2_curve<double>(p, x); },
      g2_curve_gradient, {"A", "tau_lead", "tau_tail", "baseline", "t_peak"},
      {"1", "s", "s", "1", "s"}, options);
  // A peak that is not resolved from zero leaves the decay times undefined.
  r.identifiable = r.identifiable && r.params(0) > 0 && significant(r, 0);
  return r;
}

FitResult fit_g2_double_exp(const coinc::NormalizedHistogram& hist,
                            const LmOptions& options) {
  return fit_g2_double_exp(from_normalized(hist), options);
}

phys::G2Model g2_model_from_fit(const FitResult& fit) {
  phys::G2Model m;
  m.amplitude = fit.value("A");
  m.wavepacket.tau_lead = fit.value("tau_lead");
  m.wavepacket.tau_tail = fit.value("tau_tail");
  m.baseline = fit.value("baseline");
  m.peak_offset = fit.value("t_peak");
  return m;
}

std::pair<double, double> coherence_time(const FitResult& fit) {
  if (!fit.converged)
    throw std::domain_error("coherence_time: the g2 fit did not converge");
  if (!(fit.value("A") > 0))
    throw std::domain_error("coherence_time: fitted amplitude is not positive");
  return {phys::kCoherenceWindowMultiple * fit.value("tau_lead"),
          phys::kCoherenceWindowMultiple * fit.value("tau_tail")};
}

Interval coherence_union(const phys::G2Model& f, const phys::G2Model& g) {
  const double k = phys::kCoherenceWindowMultiple;
  return {std::min(f.peak_offset - k * f.wavepacket.tau_lead,
                   g.peak_offset - k * g.wavepacket.tau_lead),
          std::max(f.peak_offset + k * f.wavepacket.tau_tail,
                   g.peak_offset + k * g.wavepacket.tau_tail)};
}

double similarity(const phys::G2Model& f, const phys::G2Model& g,
                  const Interval& tc) {
  phys::validate(f.wavepacket);
  phys::validate(g.wavepacket);
  if (!(tc.hi > tc.lo) || !std::isfinite(tc.lo) || !std::isfinite(tc.hi))
    throw std::invalid_argument("similarity: empty integration interval");

  auto excess = [](const phys::G2Model& m) {
    return [&m](double t) {
      return m.amplitude * phys::envelope(m.wavepacket, t - m.peak_offset);
    };
  };
  const auto ef = excess(f);
  const auto eg = excess(g);
  std::vector<double> cuts;
  for (double c : {f.peak_offset, g.peak_offset})
    if (c > tc.lo && c < tc.hi) cuts.push_back(c);

  auto integral = [&](auto&& fn) {
    const double rel = 1e-10;
    return integrate<double>(fn, tc.lo, tc.hi, 0.0, rel, cuts).value;
  };
  const double ff = integral([&](double t) { return ef(t) * ef(t); });
  const double gg = integral([&](double t) { return eg(t) * eg(t); });
  if (!(ff > 0) || !(gg > 0))
    throw std::invalid_argument("similarity: correlation excess has zero norm");
  const double fg = integral([&](double t) { return ef(t) * eg(t); });
  return std::min(fg / std::sqrt(ff * gg), 1.0);
}

double similarity(const phys::G2Model& f, const phys::G2Model& g) {
  return similarity(f, g, coherence_union(f, g));
}

FitResult fit_fringe(const CurveData& data, const LmOptions& options) {
  check_data(data, 8, "fit_fringe");
  const Eigen::Index n = data.size();
  const double mean = data.y.mean();
  const double span = data.x(n - 1) - data.x(0);

  // Discrete Fourier scan, coarse then refined around the peak.
  auto spectrum = [&](double freq) {
    std::complex<double> acc = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      acc += (data.y(i) - mean) *
             std::polar(1.0, -2 * std::numbers::pi * freq * data.x(i));
    return acc;
  };
  double best_freq = 1 / span;
  double best_mag = -1;
  const int max_k = std::max<int>(1, int(n / 2));
  for (int k = 1; k <= max_k; ++k) {
    const double mag = std::abs(spectrum(k / span));
    if (mag > best_mag) best_mag = mag, best_freq = k / span;
  }
  const double coarse = best_freq;
  for (int j = -10; j <= 10; ++j) {
    const double freq = coarse + j * 0.1 / span;
    if (freq <= 0) continue;
    const double mag = std::abs(spectrum(freq));
    if (mag > best_mag) best_mag = mag, best_freq = freq;
  }
  const auto peak = spectrum(best_freq);

  FringeParams seed;
  seed << mean, mean != 0 ? 2 * std::abs(peak) / (double(n) * mean) : 0.0,
      1 / best_freq, std::arg(peak);
  FringeParams scale;
  scale << std::max(std::abs(mean), 1e-300), 1.0, 1 / best_freq, 1.0;

  FitResult r = run_fit<4>(
      data, seed, scale,
      [](const FringeParams& p, double x) { return fringe_curve<double>(p, x); },
      fringe_curve_gradient, {"mean_intensity", "visibility", "period", "phase"},
      {"1", "1", "x", "rad"}, options);
  if (r.params(1) < 0) {
    r.params(1) = -r.params(1);
    r.params(3) += std::numbers::pi;
  }
  r.params(3) = std::remainder(r.params(3), 2 * std::numbers::pi);
  r.identifiable = r.identifiable && significant(r, 1);
  return r;
}

FringeModel fringe_model_from_fit(const FitResult& fit) {
  return {fit.value("mean_intensity"), fit.value("visibility"), fit.value("period"),
          fit.value("phase")};
}

FitResult fit_lorentzian_dip(const CurveData& data, const LmOptions& options) {
  check_data(data, 8, "fit_lorentzian_dip");
  const Eigen::Index n = data.size();
  const Eigen::Index edge = std::max<Eigen::Index>(1, n / 10);
  const double off = 0.5 * (mean_of(data.y, 0, edge) + mean_of(data.y, n - edge, n));
  Eigen::Index lo = 0;
  data.y.minCoeff(&lo);
  const double coupling = off != 0 ? 1 - data.y(lo) / off : 0.0;
  const double half = 0.5 * (off + data.y(lo));
  Eigen::Index l = lo, r = lo;
  while (l > 0 && data.y(l) < half) --l;
  while (r < n - 1 && data.y(r) < half) ++r;
  const double span = data.x(n - 1) - data.x(0);
  double width = data.x(r) - data.x(l);
  if (!(width > 0) || width >= span) width = span / 10;

  DipParams seed;
  seed << data.x(lo), width, coupling, off;
  DipParams scale;
  scale << width, width, 1.0, std::max(std::abs(off), 1e-300);

  FitResult res = run_fit<4>(
      data, seed, scale,
      [](const DipParams& p, double x) { return dip_curve<double>(p, x); },
      dip_curve_gradient, {"center", "fwhm", "coupling", "off_resonant_level"},
      {"Hz", "Hz", "1", "1"}, options);
  res.params(1) = std::abs(res.params(1));  // the model is even in the width
  res.identifiable = res.identifiable && significant(res, 2);
  return res;
}

phys::ResonanceDipModel dip_model_from_fit(const FitResult& fit) {
  phys::ResonanceDipModel m;
  m.center = fit.value("center");
  m.fwhm = fit.value("fwhm");
  m.coupling = fit.value("coupling");
  m.off_resonant_level = fit.value("off_resonant_level");
  return m;
}

}  // namespace wgmr::fit
