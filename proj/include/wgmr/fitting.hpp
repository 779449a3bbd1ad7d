#pragma once

// Least-squares estimation for the measured curves (cross-correlation peak,
// reflected pump dip, classical fringe) and the temporal-mode similarity.

#include <Eigen/Dense>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wgmr/coinc.hpp"
#include "wgmr/lm.hpp"
#include "wgmr/phys.hpp"

namespace wgmr::fit {

/// Abscissa, ordinate and one-sigma error per sample.
struct CurveData {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  Eigen::VectorXd sigma;  // empty means unweighted

  Eigen::Index size() const { return x.size(); }
};

CurveData from_normalized(const coinc::NormalizedHistogram& hist);
CurveData from_samples(std::span<const std::pair<double, double>> samples);

struct FitResult {
  std::vector<std::string> names;
  std::vector<std::string> units;
  Eigen::VectorXd params;
  Eigen::VectorXd sigmas;
  double residual_norm = 0;
  double gradient_measure = 0;
  int iterations = 0;
  bool converged = false;
  bool identifiable = true;

  bool ok() const { return converged && identifiable; }
  double value(std::string_view name) const;
  double sigma(std::string_view name) const;
};

// Parameter layouts. Gradients are with respect to these, in SI units.
using G2Params = Eigen::Matrix<double, 5, 1>;    // A, tau_lead, tau_tail, baseline, t_peak
using DipParams = Eigen::Matrix<double, 4, 1>;   // center, fwhm, coupling, off_resonant_level
using FringeParams = Eigen::Matrix<double, 4, 1>;  // mean_intensity, visibility, period, phase

template <typename Scalar>
Scalar g2_curve(const Eigen::Matrix<Scalar, 5, 1>& p, Scalar x) {
  const Scalar u = x - p(4);
  const Scalar e = u < 0 ? std::exp(u / p(1)) : std::exp(-u / p(2));
  return p(3) + p(0) * e;
}

template <typename Scalar>
Scalar dip_curve(const Eigen::Matrix<Scalar, 4, 1>& p, Scalar x) {
  const Scalar z = 2 * (x - p(0)) / p(1);
  return p(3) * (1 - p(2) / (1 + z * z));
}

template <typename Scalar>
Scalar fringe_curve(const Eigen::Matrix<Scalar, 4, 1>& p, Scalar x) {
  const Scalar two_pi = Scalar(2 * 3.14159265358979323846);
  return p(0) * (1 + p(1) * std::cos(two_pi * x / p(2) + p(3)));
}

Eigen::Matrix<double, 1, 5> g2_curve_gradient(const G2Params& p, double x);
Eigen::Matrix<double, 1, 4> dip_curve_gradient(const DipParams& p, double x);
Eigen::Matrix<double, 1, 4> fringe_curve_gradient(const FringeParams& p, double x);

/// Weighted fit of the two-sided exponential cross-correlation peak with a
/// free peak position. Seeds come from the data; never throws on
/// non-convergence, the result is flagged instead.
FitResult fit_g2_double_exp(const CurveData& data, const LmOptions& options = {});
FitResult fit_g2_double_exp(const coinc::NormalizedHistogram& hist,
                            const LmOptions& options = {});

/// Model rebuilt from a g2 fit (peak_offset = t_peak).
phys::G2Model g2_model_from_fit(const FitResult& fit);

/// Delays (lead, tail) at which the correlation excess has decayed by e^-2.
std::pair<double, double> coherence_time(const FitResult& fit);

struct Interval {
  double lo = 0;
  double hi = 0;
};

/// Union of the two models' [peak - 2 tau_lead, peak + 2 tau_tail] intervals.
Interval coherence_union(const phys::G2Model& f, const phys::G2Model& g);

/// Normalized overlap of the baseline-subtracted correlation excesses over
/// `tc`. Exactly 1 for identical models.
double similarity(const phys::G2Model& f, const phys::G2Model& g,
                  const Interval& tc);
double similarity(const phys::G2Model& f, const phys::G2Model& g);

struct FringeModel {
  double mean_intensity = 0;
  double visibility = 0;
  double period = 0;
  double phase = 0;
};

FitResult fit_fringe(const CurveData& data, const LmOptions& options = {});
FringeModel fringe_model_from_fit(const FitResult& fit);

FitResult fit_lorentzian_dip(const CurveData& data, const LmOptions& options = {});
phys::ResonanceDipModel dip_model_from_fit(const FitResult& fit);

}  // namespace wgmr::fit
