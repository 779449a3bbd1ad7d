#include "wgmr/coinc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>

namespace wgmr::coinc {
namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

void require_sorted(const std::vector<std::int64_t>& v, Channel ch) {
  if (!std::is_sorted(v.begin(), v.end()))
    throw std::invalid_argument("clicks on channel " +
                                std::string(channel_name(ch)) + " are not sorted");
}

void require_channel(Channel ch) {
  if (index_of(ch) >= kChannelCount)
    throw std::invalid_argument("unknown channel id " +
                                std::to_string(index_of(ch)));
}

// Two-pointer sweep of a[first, last) against the whole b list.
void sweep(const std::vector<std::int64_t>& a, std::size_t first,
           std::size_t last, const std::vector<std::int64_t>& b, Histogram& h) {
  if (first >= last) return;
  const std::int64_t lo = h.t_min_ps();
  const std::int64_t hi = lo + std::int64_t(h.size()) * h.bin_width_ps();
  const std::int64_t width = h.bin_width_ps();
  auto j = static_cast<std::size_t>(
      std::lower_bound(b.begin(), b.end(), a[first] + lo) - b.begin());
  for (std::size_t i = first; i < last; ++i) {
    const std::int64_t start = a[i] + lo;
    const std::int64_t stop = a[i] + hi;
    while (j < b.size() && b[j] < start) ++j;
    for (std::size_t k = j; k < b.size() && b[k] < stop; ++k)
      h.add_to_bin(static_cast<std::size_t>((b[k] - start) / width));
  }
}

struct WindowHit {
  bool s1 = false, s2 = false;
  std::int64_t first_s1 = 0, first_s2 = 0;
};

// Earliest click of `signals` inside [t - lead, t + tail] for every idler t.
void mark_windows(const std::vector<std::int64_t>& idlers,
                  const std::vector<std::int64_t>& signals, std::int64_t lead,
                  std::int64_t tail, bool WindowHit::*flag,
                  std::int64_t WindowHit::*first, std::vector<WindowHit>& out) {
  std::size_t j = 0;
  for (std::size_t i = 0; i < idlers.size(); ++i) {
    const std::int64_t lo = idlers[i] - lead;
    while (j < signals.size() && signals[j] < lo) ++j;
    if (j < signals.size() && signals[j] <= idlers[i] + tail) {
      out[i].*flag = true;
      out[i].*first = signals[j];
    }
  }
}

std::vector<WindowHit> window_hits(const std::vector<std::int64_t>& idlers,
                                   const ChannelTimes& times, std::int64_t lead,
                                   std::int64_t tail) {
  std::vector<WindowHit> hits(idlers.size());
  mark_windows(idlers, times[Channel::S1], lead, tail, &WindowHit::s1,
               &WindowHit::first_s1, hits);
  mark_windows(idlers, times[Channel::S2], lead, tail, &WindowHit::s2,
               &WindowHit::first_s2, hits);
  return hits;
}

}  // namespace

Histogram::Histogram(double bin_width, double t_min, double t_max) {
  if (!(bin_width > 0) || !std::isfinite(bin_width))
    throw std::invalid_argument("histogram bin width must be positive");
  if (!(t_min < t_max) || !std::isfinite(t_min) || !std::isfinite(t_max))
    throw std::invalid_argument("histogram range must satisfy t_min < t_max");
  bin_width_ps_ = to_picoseconds(bin_width);
  if (bin_width_ps_ < 1)
    throw std::invalid_argument("histogram bin width below 1 ps");
  t_min_ps_ = to_picoseconds(t_min);
  const std::int64_t span = to_picoseconds(t_max) - t_min_ps_;
  const std::int64_t n = (span + bin_width_ps_ - 1) / bin_width_ps_;
  if (n > 100'000'000)
    throw std::invalid_argument("histogram would need more than 1e8 bins");
  counts_.assign(static_cast<std::size_t>(std::max<std::int64_t>(n, 1)), 0);
}

std::optional<std::size_t> Histogram::bin_of(std::int64_t delta_ps) const {
  const std::int64_t k = floor_div(delta_ps - t_min_ps_, bin_width_ps_);
  if (k < 0 || k >= std::int64_t(counts_.size())) return std::nullopt;
  return static_cast<std::size_t>(k);
}

void Histogram::add(std::int64_t delta_ps) {
  if (auto k = bin_of(delta_ps)) ++counts_[*k];
}

Histogram& Histogram::operator+=(const Histogram& other) {
  if (other.bin_width_ps_ != bin_width_ps_ || other.t_min_ps_ != t_min_ps_ ||
      other.counts_.size() != counts_.size())
    throw std::invalid_argument("cannot merge histograms with different binning");
  for (std::size_t k = 0; k < counts_.size(); ++k) counts_[k] += other.counts_[k];
  return *this;
}

std::uint64_t Histogram::total() const {
  std::uint64_t sum = 0;
  for (auto c : counts_) sum += c;
  return sum;
}

double Histogram::error(std::size_t k) const {
  return std::sqrt(static_cast<double>(counts_[k]));
}

std::vector<double> Histogram::errors() const {
  std::vector<double> out(counts_.size());
  for (std::size_t k = 0; k < counts_.size(); ++k) out[k] = error(k);
  return out;
}

Histogram cross_correlate(const ChannelTimes& times, Channel ch_a, Channel ch_b,
                          double bin_width, double t_min, double t_max,
                          unsigned workers) {
  require_channel(ch_a);
  require_channel(ch_b);
  if (ch_a == ch_b)
    throw std::invalid_argument("cross_correlate needs two distinct channels");
  const auto& a = times[ch_a];
  const auto& b = times[ch_b];
  require_sorted(a, ch_a);
  require_sorted(b, ch_b);

  Histogram total(bin_width, t_min, t_max);
  workers = std::max(1u, workers);
  const std::size_t chunk = (a.size() + workers - 1) / workers;
  if (workers == 1 || a.size() < 4096) {
    sweep(a, 0, a.size(), b, total);
    return total;
  }
  std::vector<Histogram> partial(workers, total);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t first = std::min(a.size(), w * chunk);
    const std::size_t last = std::min(a.size(), first + chunk);
    pool.emplace_back([&, w, first, last] { sweep(a, first, last, b, partial[w]); });
  }
  for (auto& th : pool) th.join();
  for (const auto& h : partial) total += h;
  return total;
}

Histogram cross_correlate(const TagStream& stream, Channel ch_a, Channel ch_b,
                          double bin_width, double t_min, double t_max,
                          unsigned workers) {
  return cross_correlate(ChannelTimes::from_stream(stream), ch_a, ch_b,
                         bin_width, t_min, t_max, workers);
}

CrossCorrelator::CrossCorrelator(Channel ch_a, Channel ch_b, double bin_width,
                                 double t_min, double t_max)
    : a_(ch_a), b_(ch_b), hist_(bin_width, t_min, t_max) {
  require_channel(ch_a);
  require_channel(ch_b);
  if (ch_a == ch_b)
    throw std::invalid_argument("cross_correlate needs two distinct channels");
  lo_ps_ = hist_.t_min_ps();
  hi_ps_ = lo_ps_ + std::int64_t(hist_.size()) * hist_.bin_width_ps();
}

void CrossCorrelator::push(std::span<const TimeTag> chunk) {
  for (const TimeTag& tag : chunk) {
    if (last_ && tag_before(tag, *last_))
      throw std::invalid_argument("tag stream is not sorted at t=" +
                                  std::to_string(tag.time) + " ps");
    last_ = tag;
    require_channel(tag.channel);
    ++singles_[index_of(tag.channel)];
    // Each pair is counted once, when its later member (in stream order)
    // arrives; buffers only keep clicks that can still pair.
    while (!recent_a_.empty() && tag.time - recent_a_.front() >= hi_ps_)
      recent_a_.pop_front();
    while (!recent_b_.empty() && recent_b_.front() - tag.time < lo_ps_)
      recent_b_.pop_front();
    if (tag.channel == b_) {
      for (auto it = recent_a_.rbegin(); it != recent_a_.rend(); ++it) {
        const std::int64_t d = tag.time - *it;
        if (d >= hi_ps_) break;
        if (d >= lo_ps_) hist_.add(d);
      }
      recent_b_.push_back(tag.time);
    } else if (tag.channel == a_) {
      for (auto it = recent_b_.rbegin(); it != recent_b_.rend(); ++it) {
        const std::int64_t d = *it - tag.time;
        if (d < lo_ps_) break;
        if (d < hi_ps_) hist_.add(d);
      }
      recent_a_.push_back(tag.time);
    }
  }
}

NormalizedHistogram normalize_g2(const Histogram& hist, double rate_a,
                                 double rate_b, double duration) {
  if (!(rate_a > 0) || !(rate_b > 0))
    throw std::invalid_argument("normalize_g2: singles rates must be positive");
  if (!(duration > 0))
    throw std::invalid_argument("normalize_g2: duration must be positive");
  NormalizedHistogram out;
  out.raw = hist;
  out.expectation = rate_a * rate_b * duration * hist.bin_width();
  out.values.resize(hist.size());
  out.errors.resize(hist.size());
  for (std::size_t k = 0; k < hist.size(); ++k) {
    out.values[k] = double(hist.counts()[k]) / out.expectation;
    out.errors[k] = hist.error(k) / out.expectation;
    if (hist.counts()[k] == 0) out.degenerate_bins.push_back(k);
  }
  return out;
}

double singles_rate(const ChannelTimes& times, Channel ch) {
  if (times.duration_ps <= 0)
    throw std::invalid_argument("singles_rate: stream duration must be positive");
  return double(times[ch].size()) / (double(times.duration_ps) * 1e-12);
}

FourfoldConfig FourfoldConfig::from_wavepacket(const phys::WavepacketModel& wp,
                                               double idler_window,
                                               double bin_width) {
  phys::validate(wp);
  return {idler_window, phys::kCoherenceWindowMultiple * wp.tau_lead,
          phys::kCoherenceWindowMultiple * wp.tau_tail, bin_width};
}

void validate(const FourfoldConfig& cfg) {
  auto positive = [](double x) { return x > 0 && std::isfinite(x); };
  if (!positive(cfg.idler_window))
    throw std::invalid_argument("fourfold: idler_window must be positive");
  if (!positive(cfg.signal_window_lead))
    throw std::invalid_argument("fourfold: signal_window_lead must be positive");
  if (!positive(cfg.signal_window_tail))
    throw std::invalid_argument("fourfold: signal_window_tail must be positive");
  if (!positive(cfg.bin_width))
    throw std::invalid_argument("fourfold: bin_width must be positive");
}

std::vector<FourfoldEvent> find_fourfold(const ChannelTimes& times,
                                         const FourfoldConfig& cfg) {
  validate(cfg);
  for (Channel ch : kAllChannels) require_sorted(times[ch], ch);
  const std::int64_t window = to_picoseconds(cfg.idler_window);
  const std::int64_t lead = to_picoseconds(cfg.signal_window_lead);
  const std::int64_t tail = to_picoseconds(cfg.signal_window_tail);

  const auto& cw = times[Channel::I_CW];
  const auto& ccw = times[Channel::I_CCW];
  const auto cw_hits = window_hits(cw, times, lead, tail);
  const auto ccw_hits = window_hits(ccw, times, lead, tail);

  std::vector<FourfoldEvent> events;
  std::size_t j0 = 0;
  for (std::size_t i = 0; i < cw.size(); ++i) {
    const WindowHit& hc = cw_hits[i];
    if (!hc.s1 && !hc.s2) continue;
    while (j0 < ccw.size() && ccw[j0] < cw[i] - window) ++j0;
    for (std::size_t j = j0; j < ccw.size() && ccw[j] <= cw[i] + window; ++j) {
      const WindowHit& hx = ccw_hits[j];
      const bool direct = hc.s1 && hx.s2;
      const bool swapped = hc.s2 && hx.s1;
      if (!direct && !swapped) continue;
      FourfoldEvent e;
      e.delta_ps = cw[i] - ccw[j];
      e.t_idler_cw = cw[i];
      e.t_idler_ccw = ccw[j];
      e.swapped = !direct;
      e.t_s1 = direct ? hc.first_s1 : hx.first_s1;
      e.t_s2 = direct ? hx.first_s2 : hc.first_s2;
      events.push_back(e);
    }
  }
  return events;
}

std::vector<FourfoldEvent> find_fourfold(const TagStream& stream,
                                         const FourfoldConfig& cfg) {
  return find_fourfold(ChannelTimes::from_stream(stream), cfg);
}

HomProfile hom_profile(std::span<const FourfoldEvent> events,
                       const FourfoldConfig& cfg, double plateau_threshold) {
  validate(cfg);
  HomProfile p;
  p.histogram = Histogram(cfg.bin_width, -cfg.idler_window, cfg.idler_window);
  for (const auto& e : events) p.histogram.add(e.delta_ps);

  std::uint64_t far_counts = 0;
  for (std::size_t k = 0; k < p.histogram.size(); ++k) {
    if (std::abs(p.histogram.bin_center(k)) >= plateau_threshold) {
      far_counts += p.histogram.counts()[k];
      ++p.plateau_bins;
    }
  }
  if (p.plateau_bins < kMinPlateauBins)
    throw std::invalid_argument(
        "hom_profile: plateau region holds " + std::to_string(p.plateau_bins) +
        " bins, need at least " + std::to_string(kMinPlateauBins));
  p.plateau = double(far_counts) / double(p.plateau_bins);
  p.plateau_error = std::sqrt(double(far_counts)) / double(p.plateau_bins);
  if (!(p.plateau > 0))
    throw std::domain_error("hom_profile: plateau estimate is zero");

  p.normalized.resize(p.histogram.size());
  p.normalized_errors.resize(p.histogram.size());
  for (std::size_t k = 0; k < p.histogram.size(); ++k) {
    const double c = double(p.histogram.counts()[k]);
    const double rel_count = p.histogram.error(k) / p.plateau;
    const double rel_plateau = c * p.plateau_error / (p.plateau * p.plateau);
    p.normalized[k] = c / p.plateau;
    p.normalized_errors[k] = std::hypot(rel_count, rel_plateau);
  }
  return p;
}

VisibilityEstimate visibility(const HomProfile& profile) {
  const auto k = profile.histogram.bin_of(0);
  if (!k) throw std::domain_error("visibility: profile does not cover delta = 0");
  return {1 - profile.normalized[*k], profile.normalized_errors[*k]};
}

VisibilityEstimate visibility(std::span<const double> bin_centers,
                              std::span<const double> normalized,
                              std::span<const double> normalized_errors) {
  const std::size_t n = bin_centers.size();
  if (n == 0 || normalized.size() != n || normalized_errors.size() != n)
    throw std::invalid_argument("visibility: inconsistent profile columns");
  const double width = n > 1 ? (bin_centers[1] - bin_centers[0]) : 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double lo = bin_centers[k] - width / 2;
    // Half-open [lo, lo + width), with a tolerance for text round-off.
    const double eps = 1e-6 * std::abs(width);
    if (n == 1 || (lo <= eps && 0 < lo + width - eps))
      return {1 - normalized[k], normalized_errors[k]};
  }
  throw std::domain_error("visibility: profile does not cover delta = 0");
}

}  // namespace wgmr::coinc
