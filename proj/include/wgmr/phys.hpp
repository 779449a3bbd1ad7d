#pragma once

// Temporal models of a heralded photon pair source: the two-sided exponential
// signal-given-idler envelope, the cross-correlation model built on it, the
// reflected-pump resonance dip, and the heralded two-photon interference
// prediction. Everything here is a pure function of its arguments.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace wgmr::phys {

/// Conditional signal-given-idler envelope. Negative delays (signal before
/// idler) decay with `tau_lead`, positive delays with `tau_tail`. The lead
/// side is governed by the idler linewidth, the tail side by the signal's.
template <typename Scalar>
struct BasicWavepacket {
  Scalar tau_lead = Scalar(47e-9);
  Scalar tau_tail = Scalar(66e-9);

  Scalar tau_sum() const { return tau_lead + tau_tail; }
  Scalar tau_max() const { return tau_lead > tau_tail ? tau_lead : tau_tail; }
  friend bool operator==(const BasicWavepacket&,
                         const BasicWavepacket&) = default;
  bool valid() const {
    return std::isfinite(tau_lead) && std::isfinite(tau_tail) && tau_lead > 0 &&
           tau_tail > 0;
  }
};

/// Normalized signal-idler cross-correlation:
/// baseline + amplitude * envelope(delta - peak_offset).
template <typename Scalar>
struct BasicG2Model {
  Scalar amplitude = 34;
  Scalar baseline = 1;
  BasicWavepacket<Scalar> wavepacket{};
  Scalar peak_offset = 0;

  Scalar peak() const { return baseline + amplitude; }
  friend bool operator==(const BasicG2Model&, const BasicG2Model&) = default;
  bool valid() const {
    return wavepacket.valid() && amplitude >= 0 && baseline > 0 &&
           std::isfinite(peak_offset);
  }
};

/// Reflected pump power around a resonance: a unit-peak Lorentzian dip of
/// depth `coupling` on an off-resonant level.
template <typename Scalar>
struct BasicResonanceDip {
  Scalar center = 0;
  Scalar fwhm = Scalar(38e6);
  Scalar coupling = Scalar(0.25);
  Scalar off_resonant_level = 1;

  friend bool operator==(const BasicResonanceDip&,
                         const BasicResonanceDip&) = default;
  bool valid() const {
    return fwhm > 0 && coupling >= 0 && coupling <= 1 && std::isfinite(center);
  }
};

using WavepacketModel = BasicWavepacket<double>;
using G2Model = BasicG2Model<double>;
using ResonanceDipModel = BasicResonanceDip<double>;

template <typename Scalar>
void validate(const BasicWavepacket<Scalar>& model) {
  if (!(model.tau_lead > 0) || !std::isfinite(model.tau_lead))
    throw std::invalid_argument("wavepacket: tau_lead must be positive");
  if (!(model.tau_tail > 0) || !std::isfinite(model.tau_tail))
    throw std::invalid_argument("wavepacket: tau_tail must be positive");
}

template <typename Scalar>
void validate(const BasicG2Model<Scalar>& model) {
  validate(model.wavepacket);
  if (!(model.amplitude >= 0))
    throw std::invalid_argument("g2 model: amplitude must be non-negative");
  if (!(model.baseline > 0))
    throw std::invalid_argument("g2 model: baseline must be positive");
}

template <typename Scalar>
void validate(const BasicResonanceDip<Scalar>& model) {
  if (!(model.fwhm > 0))
    throw std::invalid_argument("resonance dip: fwhm must be positive");
  if (!(model.coupling >= 0 && model.coupling <= 1))
    throw std::invalid_argument("resonance dip: coupling must lie in [0, 1]");
}

/// Unit-area excess shape exp(delta/tau_lead) | exp(-delta/tau_tail), peak 1.
template <typename Scalar>
Scalar envelope(const BasicWavepacket<Scalar>& model, Scalar delta) {
  return delta < 0 ? std::exp(delta / model.tau_lead)
                   : std::exp(-delta / model.tau_tail);
}

/// Probability density of the signal-minus-idler delay, in 1/seconds.
template <typename Scalar>
Scalar conditional_delay_pdf(const BasicWavepacket<Scalar>& model,
                             Scalar delta) {
  return envelope(model, delta) / model.tau_sum();
}

template <typename Scalar>
Scalar g2_model_eval(const BasicG2Model<Scalar>& model, Scalar delta) {
  return model.baseline +
         model.amplitude * envelope(model.wavepacket, delta - model.peak_offset);
}

template <typename Scalar>
Scalar lorentzian_dip_eval(const BasicResonanceDip<Scalar>& model, Scalar freq) {
  const Scalar x = (freq - model.center) / (model.fwhm / 2);
  return model.off_resonant_level * (1 - model.coupling / (1 + x * x));
}

namespace detail {

// Integral over [0, span] of exp(-lo*t - hi*(span - t)) in a form that stays
// finite for large spans.
template <typename Scalar>
Scalar exp_bridge(Scalar alpha, Scalar beta, Scalar span) {
  const Scalar lo = alpha < beta ? alpha : beta;
  const Scalar hi = alpha < beta ? beta : alpha;
  const Scalar gap = hi - lo;
  if (gap * span < Scalar(1e-12)) return span * std::exp(-lo * span);
  return std::exp(-lo * span) * (-std::expm1(-gap * span)) / gap;
}

// Overlap for delta >= 0, closed form over the three pieces split at 0, delta.
template <typename Scalar>
Scalar overlap_nonnegative(const BasicWavepacket<Scalar>& a,
                           const BasicWavepacket<Scalar>& b, Scalar delta) {
  const Scalar lead_a = 1 / (2 * a.tau_lead), tail_a = 1 / (2 * a.tau_tail);
  const Scalar lead_b = 1 / (2 * b.tau_lead), tail_b = 1 / (2 * b.tau_tail);
  const Scalar before = std::exp(-delta * lead_b) / (lead_a + lead_b);
  const Scalar between = exp_bridge(tail_a, lead_b, delta);
  const Scalar after = std::exp(-delta * tail_a) / (tail_a + tail_b);
  return (before + between + after) / std::sqrt(a.tau_sum() * b.tau_sum());
}

}  // namespace detail

/// Amplitude overlap |<psi_a(t) | psi_b(t - delta)>| of two heralded
/// wavepackets whose intensity envelopes are their conditional delay pdfs.
template <typename Scalar>
Scalar temporal_overlap(const BasicWavepacket<Scalar>& model_a,
                        const BasicWavepacket<Scalar>& model_b, Scalar delta) {
  const Scalar value =
      delta >= 0 ? detail::overlap_nonnegative(model_a, model_b, delta)
                 : detail::overlap_nonnegative(model_b, model_a, -delta);
  return value < 0 ? Scalar(0) : (value > 1 ? Scalar(1) : value);
}

/// Signal window extent, in units of the matching time constant, used by the
/// four-fold search: [-2 tau_lead, +2 tau_tail] around each idler click.
inline constexpr double kCoherenceWindowMultiple = 2.0;

/// Fraction of heralded signal photons landing inside their own window.
template <typename Scalar>
Scalar window_capture_fraction() {
  return 1 - std::exp(Scalar(-kCoherenceWindowMultiple));
}

/// Pair rate of a Poisson pair process whose normalized cross-correlation
/// peaks at `g2_peak`.
template <typename Scalar>
Scalar rate_for_g2_target(const BasicWavepacket<Scalar>& wavepacket,
                          Scalar g2_peak) {
  validate(wavepacket);
  if (!(g2_peak > 1))
    throw std::invalid_argument("g2 target must exceed 1");
  return 1 / ((g2_peak - 1) * wavepacket.tau_sum());
}

/// Zero-delay four-fold visibility in the low-gain, low-efficiency limit.
///
/// Each herald window of width 2(tau_lead + tau_tail) captures its own signal
/// with probability q = eta (1 - e^-2) and an uncorrelated signal click on a
/// given output detector with probability a = eta R 2 tau_sum = 2 eta/(g2-1).
/// To first order in eta both the dip floor and the plateau carry the same
/// 2 q a accidental term, which dilutes the m^2 interference contrast by
/// 1 / (1 + 4 a / q). Detection efficiency cancels.
template <typename Scalar>
Scalar zero_delay_visibility(Scalar m, Scalar g2_peak) {
  if (!(m >= 0 && m <= 1))
    throw std::invalid_argument("mode overlap m must lie in [0, 1]");
  if (!(g2_peak > 1))
    throw std::invalid_argument("g2 peak must exceed 1 for a HOM prediction");
  if (std::isinf(g2_peak)) return m * m;
  const Scalar accidental_per_true =
      Scalar(kCoherenceWindowMultiple) /
      ((g2_peak - 1) * window_capture_fraction<Scalar>());
  return m * m / (1 + 4 * accidental_per_true);
}

/// Four-fold rate at idler-idler delay `delta`, normalized to its plateau.
template <typename Scalar>
Scalar predict_hom_dip(const BasicWavepacket<Scalar>& wavepacket, Scalar m,
                       Scalar g2_peak, Scalar delta) {
  validate(wavepacket);
  const Scalar overlap = temporal_overlap(wavepacket, wavepacket, delta);
  return 1 - zero_delay_visibility(m, g2_peak) * overlap * overlap;
}

}  // namespace wgmr::phys
