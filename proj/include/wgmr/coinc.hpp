#pragma once

// Coincidence analysis over sorted time-tag streams: cross-correlation
// histograms, the heralded four-fold search and the HOM dip profile.

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "wgmr/phys.hpp"
#include "wgmr/tags.hpp"

namespace wgmr::coinc {

/// Uniform bins over [t_min, t_max) on an integer picosecond grid.
class Histogram {
 public:
  Histogram() = default;
  /// t_max is rounded up to a whole number of bins.
  Histogram(double bin_width, double t_min, double t_max);

  double bin_width() const { return double(bin_width_ps_) * 1e-12; }
  double t_min() const { return double(t_min_ps_) * 1e-12; }
  double t_max() const { return t_min() + double(size()) * bin_width(); }
  std::int64_t bin_width_ps() const { return bin_width_ps_; }
  std::int64_t t_min_ps() const { return t_min_ps_; }
  std::size_t size() const { return counts_.size(); }
  double bin_center(std::size_t k) const {
    return (double(t_min_ps_) + (double(k) + 0.5) * double(bin_width_ps_)) * 1e-12;
  }

  /// Bin holding `delta_ps`, if inside the range.
  std::optional<std::size_t> bin_of(std::int64_t delta_ps) const;
  void add(std::int64_t delta_ps);
  void add_to_bin(std::size_t k, std::uint64_t n = 1) { counts_[k] += n; }
  Histogram& operator+=(const Histogram& other);

  const std::vector<std::uint64_t>& counts() const { return counts_; }
  std::uint64_t total() const;
  /// Poisson error sqrt(counts[k]).
  double error(std::size_t k) const;
  std::vector<double> errors() const;

  friend bool operator==(const Histogram&, const Histogram&) = default;

 private:
  std::int64_t bin_width_ps_ = 1;
  std::int64_t t_min_ps_ = 0;
  std::vector<std::uint64_t> counts_;
};

/// Histogram of t_b - t_a over all (a, b) click pairs, by two-pointer sweep.
/// The channels must differ. Throws on unsorted input.
Histogram cross_correlate(const ChannelTimes& times, Channel ch_a, Channel ch_b,
                          double bin_width, double t_min, double t_max,
                          unsigned workers = 1);
Histogram cross_correlate(const TagStream& stream, Channel ch_a, Channel ch_b,
                          double bin_width, double t_min, double t_max,
                          unsigned workers = 1);

/// Incremental cross-correlation over a stream delivered in sorted chunks;
/// the result is independent of how the stream is cut.
class CrossCorrelator {
 public:
  CrossCorrelator(Channel ch_a, Channel ch_b, double bin_width, double t_min,
                  double t_max);
  void push(std::span<const TimeTag> chunk);
  const Histogram& histogram() const { return hist_; }
  std::uint64_t singles(Channel ch) const { return singles_[index_of(ch)]; }

 private:
  Channel a_, b_;
  Histogram hist_;
  std::int64_t lo_ps_, hi_ps_;  // accepted delays [lo, hi)
  std::deque<std::int64_t> recent_a_, recent_b_;
  std::optional<TimeTag> last_;
  std::array<std::uint64_t, kChannelCount> singles_{};
};

/// Counts divided by the accidental expectation rate_a * rate_b * T * bin.
struct NormalizedHistogram {
  Histogram raw;
  double expectation = 0;
  std::vector<double> values;
  std::vector<double> errors;
  /// Bins with zero counts carry error 0 and are flagged here.
  std::vector<std::size_t> degenerate_bins;
};

NormalizedHistogram normalize_g2(const Histogram& hist, double rate_a,
                                 double rate_b, double duration);

/// Singles rate of a channel, counts per second over the stream duration.
double singles_rate(const ChannelTimes& times, Channel ch);

struct FourfoldConfig {
  double idler_window = 400e-9;
  double signal_window_lead = 94e-9;
  double signal_window_tail = 132e-9;
  double bin_width = 25e-9;

  /// Signal windows [-2 tau_lead, +2 tau_tail] from a (fitted) wavepacket.
  static FourfoldConfig from_wavepacket(const phys::WavepacketModel& wp,
                                        double idler_window = 400e-9,
                                        double bin_width = 25e-9);
};

void validate(const FourfoldConfig& cfg);

struct FourfoldEvent {
  std::int64_t delta_ps = 0;  // t_I_CW - t_I_CCW
  std::int64_t t_idler_cw = 0;
  std::int64_t t_idler_ccw = 0;
  std::int64_t t_s1 = 0;      // earliest qualifying S1 click
  std::int64_t t_s2 = 0;      // earliest qualifying S2 click
  bool swapped = false;       // true when S1 is assigned to the CCW idler

  friend bool operator==(const FourfoldEvent&, const FourfoldEvent&) = default;
};

/// Every I_CW/I_CCW pair within the idler window for which S1 and S2 clicks
/// can be assigned one-to-one to the two idlers, each inside its idler's
/// window [t_i - lead, t_i + tail]. Ordered by CW idler, then CCW idler.
/// The direct assignment (S1 with CW) is recorded when both are possible.
std::vector<FourfoldEvent> find_fourfold(const ChannelTimes& times,
                                         const FourfoldConfig& cfg);
std::vector<FourfoldEvent> find_fourfold(const TagStream& stream,
                                         const FourfoldConfig& cfg);

struct HomProfile {
  Histogram histogram;
  double plateau = 0;
  double plateau_error = 0;
  std::size_t plateau_bins = 0;
  std::vector<double> normalized;
  std::vector<double> normalized_errors;
};

inline constexpr std::size_t kMinPlateauBins = 5;

/// Four-folds binned by idler delay over [-idler_window, idler_window) and
/// normalized to the mean of bins whose centre satisfies |delta| >= threshold.
HomProfile hom_profile(std::span<const FourfoldEvent> events,
                       const FourfoldConfig& cfg, double plateau_threshold);

struct VisibilityEstimate {
  double value = 0;
  double sigma = 0;
};

/// V = 1 - normalized(bin containing delta = 0); not clamped.
VisibilityEstimate visibility(const HomProfile& profile);

/// Same, from a plain normalized series (bin centres and values).
VisibilityEstimate visibility(std::span<const double> bin_centers,
                              std::span<const double> normalized,
                              std::span<const double> normalized_errors);

}  // namespace wgmr::coinc
