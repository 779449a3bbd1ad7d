#include "wgmr/source_sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <queue>
#include <thread>
#include <tuple>

#include "wgmr/config.hpp"

namespace wgmr::sim {
namespace {

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field + " " + what);
}

bool unit_interval(double x) { return x >= 0 && x <= 1; }

// Independent random stream ids inside one block.
enum class Stream : std::uint64_t {
  GenerateCw = 1,
  GenerateCcw = 2,
  Route = 3,
  DetectS1 = 4,
  DetectS2 = 5,
  DetectIdlerCw = 6,
  DetectIdlerCcw = 7,
};

Rng block_rng(std::uint64_t seed, std::uint64_t block, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(block),
                    static_cast<std::uint32_t>(block >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

double sample_delay(const phys::WavepacketModel& wp, Rng& rng) {
  std::uniform_real_distribution<double> side(0.0, wp.tau_sum());
  std::exponential_distribution<double> unit(1.0);
  if (side(rng) < wp.tau_lead) return -wp.tau_lead * unit(rng);
  return wp.tau_tail * unit(rng);
}

// Poisson pair emission with idler times in [t0, t1).
void emit_pairs(const SourceConfig& config, double t0, double t1, Rng& rng,
                std::vector<PhotonPair>& out) {
  if (config.pair_rate <= 0) return;
  std::exponential_distribution<double> gap(config.pair_rate);
  for (double t = t0 + gap(rng); t < t1; t += gap(rng))
    out.push_back({t, t + sample_delay(config.wavepacket, rng),
                   config.direction});
}

std::int64_t quantize(double t, std::int64_t resolution_ps,
                      std::int64_t duration_ps) {
  const double ticks = std::nearbyint(t * 1e12 / double(resolution_ps));
  auto ps = static_cast<std::int64_t>(ticks) * resolution_ps;
  return std::clamp<std::int64_t>(ps, 0, duration_ps);
}

// Detector response on the clicks attributed to one block; dark counts are
// drawn over [t0, t1).
void detect_block(std::span<const double> clicks, const DetectorModel& det,
                  double t0, double t1, std::int64_t resolution_ps,
                  std::int64_t duration_ps, Rng& rng,
                  std::vector<std::int64_t>& out) {
  std::bernoulli_distribution keep(std::clamp(det.efficiency, 0.0, 1.0));
  std::normal_distribution<double> jitter(0.0, 1.0);
  const auto start = out.size();
  auto record = [&](double t) {
    if (det.jitter_sigma > 0) t += det.jitter_sigma * jitter(rng);
    out.push_back(quantize(t, resolution_ps, duration_ps));
  };
  for (double t : clicks)
    if (keep(rng)) record(t);
  if (det.dark_rate > 0) {
    std::exponential_distribution<double> gap(det.dark_rate);
    for (double t = t0 + gap(rng); t < t1; t += gap(rng)) record(t);
  }
  std::sort(out.begin() + static_cast<std::ptrdiff_t>(start), out.end());
}

struct Photon {
  SignalPhoton signal;
  Direction direction;
};

// Streaming beamsplitter. Photons are collected into clusters whose
// consecutive herald gaps are below the match window; no pair can span two
// clusters, so each cluster is matched on its own once it is closed. A cluster
// may straddle pushes (and simulation blocks).
class Beamsplitter {
 public:
  Beamsplitter(double m, const phys::WavepacketModel& cw,
               const phys::WavepacketModel& ccw, double transmittance)
      : m_(m), cw_(cw), ccw_(ccw), transmittance_(transmittance),
        window_(kMatchWindowTaus * std::max(cw.tau_tail, ccw.tau_tail)) {}

  void push(const Photon& p, Rng& rng, RoutedSignals& out) {
    if (!cluster_.empty() &&
        !(p.signal.herald - cluster_.back().signal.herald < window_))
      flush(rng, out);
    cluster_.push_back(p);
  }

  void flush(Rng& rng, RoutedSignals& out) {
    if (cluster_.size() == 1)
      route_single(cluster_.front(), rng, out);
    else if (!cluster_.empty())
      route_cluster(rng, out);
    cluster_.clear();
  }

 private:
  // Greedy matching, nearest cross-direction pair first. The closest cross
  // pair is always adjacent among the photons still unmatched, so a heap of
  // adjacent gaps over a linked list suffices. Ties go to the earlier pair.
  void route_cluster(Rng& rng, RoutedSignals& out) {
    const auto n = cluster_.size();
    std::vector<std::size_t> prev(n), next(n);
    std::vector<char> alive(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
      prev[i] = i - 1;  // wraps for i == 0, never read as valid
      next[i] = i + 1;
    }
    using Candidate = std::tuple<double, std::size_t, std::size_t>;
    std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> heap;
    auto consider = [&](std::size_t a, std::size_t b) {
      if (b >= n || cluster_[a].direction == cluster_[b].direction) return;
      const double gap = cluster_[b].signal.herald - cluster_[a].signal.herald;
      if (gap < window_) heap.emplace(gap, a, b);
    };
    for (std::size_t i = 0; i + 1 < n; ++i) consider(i, i + 1);

    std::vector<std::pair<std::size_t, std::size_t>> matches;
    while (!heap.empty()) {
      const auto [gap, a, b] = heap.top();
      heap.pop();
      if (!alive[a] || !alive[b] || next[a] != b) continue;
      alive[a] = alive[b] = 0;
      matches.emplace_back(a, b);
      const std::size_t before = a == 0 ? n : prev[a];
      const std::size_t after = next[b];
      if (before < n) next[before] = after;
      if (after < n) prev[after] = before;
      if (before < n && after < n) consider(before, after);
    }
    // Route in herald order of the earlier member so the random draws do not
    // depend on heap internals.
    std::sort(matches.begin(), matches.end());
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (k < matches.size() && matches[k].first == i) {
        route_pair(cluster_[i], cluster_[matches[k].second], rng, out);
        ++k;
      } else if (alive[i]) {
        route_single(cluster_[i], rng, out);
      }
    }
  }

  void route_single(const Photon& p, Rng& rng, RoutedSignals& out) const {
    std::bernoulli_distribution transmitted(transmittance_);
    const bool t = transmitted(rng);
    // CW transmits into S1, CCW transmits into S2.
    const bool to_s1 = (p.direction == Direction::CW) == t;
    (to_s1 ? out.s1 : out.s2).push_back(p.signal.arrival);
  }

  void route_pair(const Photon& first, const Photon& second, Rng& rng,
                  RoutedSignals& out) const {
    const Photon& cw = first.direction == Direction::CW ? first : second;
    const Photon& ccw = first.direction == Direction::CW ? second : first;
    const double overlap = phys::temporal_overlap(
        cw_, ccw_, ccw.signal.herald - cw.signal.herald);
    const double t = transmittance_, r = 1 - transmittance_;
    const double p_same = same_port_probability(m_, overlap, transmittance_);
    // Split the coincidence outcomes in proportion to T^2 : R^2.
    const double p_direct =
        t * t + r * r > 0 ? (1 - p_same) * t * t / (t * t + r * r) : 0;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double x = u(rng);
    if (x < p_same / 2) {
      out.s1.push_back(cw.signal.arrival);
      out.s1.push_back(ccw.signal.arrival);
    } else if (x < p_same) {
      out.s2.push_back(cw.signal.arrival);
      out.s2.push_back(ccw.signal.arrival);
    } else if (x < p_same + p_direct) {
      out.s1.push_back(cw.signal.arrival);
      out.s2.push_back(ccw.signal.arrival);
    } else {
      out.s2.push_back(cw.signal.arrival);
      out.s1.push_back(ccw.signal.arrival);
    }
  }

  double m_;
  phys::WavepacketModel cw_, ccw_;
  double transmittance_;
  double window_;
  std::vector<Photon> cluster_;
};

// Merges the two direction-sorted inputs by herald time (CW first on ties).
template <typename Visit>
void merge_by_herald(std::span<const SignalPhoton> cw,
                     std::span<const SignalPhoton> ccw, Visit&& visit) {
  std::size_t i = 0, j = 0;
  while (i < cw.size() || j < ccw.size()) {
    if (j == ccw.size() || (i < cw.size() && cw[i].herald <= ccw[j].herald))
      visit(Photon{cw[i++], Direction::CW});
    else
      visit(Photon{ccw[j++], Direction::CCW});
  }
}

void sort_outputs(RoutedSignals& out) {
  std::sort(out.s1.begin(), out.s1.end());
  std::sort(out.s2.begin(), out.s2.end());
}

struct BlockProducts {
  std::vector<SignalPhoton> cw_signals, ccw_signals;
  std::vector<double> cw_idlers, ccw_idlers;
  RoutedSignals routed;
  std::vector<TimeTag> tags;
};

template <typename Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, unsigned(count)));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  for (auto& th : pool) th.join();
}

// Restores global (time, channel) order after concatenating individually
// sorted blocks whose contents spill slightly across block boundaries.
void repair_block_seams(std::vector<TimeTag>& tags,
                        const std::vector<std::size_t>& seams) {
  for (std::size_t seam : seams) {
    if (seam == 0 || seam >= tags.size()) continue;
    const auto begin = tags.begin();
    const TimeTag last_left = tags[seam - 1];
    const TimeTag first_right = tags[seam];
    if (!tag_before(first_right, last_left)) continue;
    auto lo = std::upper_bound(begin, begin + std::ptrdiff_t(seam), first_right,
                               tag_before);
    auto hi = std::upper_bound(begin + std::ptrdiff_t(seam), tags.end(),
                               last_left, tag_before);
    std::sort(lo, hi, tag_before);
  }
}

}  // namespace

void validate(const SourceConfig& c, const std::string& prefix) {
  require(std::isfinite(c.pair_rate) && c.pair_rate >= 0, prefix + ".pair_rate",
          "must be a non-negative rate");
  require(c.wavepacket.tau_lead > 0 && std::isfinite(c.wavepacket.tau_lead),
          prefix + ".tau_lead", "must be positive");
  require(c.wavepacket.tau_tail > 0 && std::isfinite(c.wavepacket.tau_tail),
          prefix + ".tau_tail", "must be positive");
  require(unit_interval(c.eta_signal), prefix + ".eta_signal",
          "must lie in [0, 1]");
  require(unit_interval(c.eta_idler), prefix + ".eta_idler",
          "must lie in [0, 1]");
  require(std::isfinite(c.dark_rate_signal) && c.dark_rate_signal >= 0,
          prefix + ".dark_rate_signal", "must be non-negative");
  require(std::isfinite(c.dark_rate_idler) && c.dark_rate_idler >= 0,
          prefix + ".dark_rate_idler", "must be non-negative");
  require(std::isfinite(c.jitter_sigma) && c.jitter_sigma >= 0,
          prefix + ".jitter_sigma", "must be non-negative");
}

void validate(const ExperimentConfig& c) {
  validate(c.cw, "cw");
  validate(c.ccw, "ccw");
  require(c.cw.direction == Direction::CW, "cw.direction", "must be CW");
  require(c.ccw.direction == Direction::CCW, "ccw.direction", "must be CCW");
  require(unit_interval(c.mode_overlap_m), "experiment.mode_overlap",
          "must lie in [0, 1]");
  require(unit_interval(c.bs_transmittance), "experiment.bs_transmittance",
          "must lie in [0, 1]");
  require(std::isfinite(c.duration) && c.duration > 0, "experiment.duration",
          "must be positive");
  require(c.duration * 1e12 < 9e18, "experiment.duration",
          "overflows the picosecond clock");
  require(std::isfinite(c.timestamp_resolution) &&
              c.timestamp_resolution * 1e12 >= 0.5,
          "experiment.resolution", "must be at least 1 ps");
}

ExperimentConfig reference_config(double g2_target, double m, double duration,
                                   std::uint64_t seed) {
  ExperimentConfig config;
  const double rate = phys::rate_for_g2_target(config.cw.wavepacket, g2_target);
  config.cw.pair_rate = rate;
  config.ccw.pair_rate = rate;
  config.mode_overlap_m = m;
  config.duration = duration;
  config.rng_seed = seed;
  return config;
}

std::vector<PhotonPair> generate_pairs(const SourceConfig& config,
                                       double duration, Rng& rng) {
  validate(config);
  std::vector<PhotonPair> pairs;
  if (config.pair_rate > 0 && duration > 0)
    pairs.reserve(static_cast<std::size_t>(config.pair_rate * duration * 1.01) +
                  16);
  emit_pairs(config, 0.0, duration, rng, pairs);
  return pairs;
}

double same_port_probability(double m, double overlap, double transmittance) {
  const double t = transmittance, r = 1 - transmittance;
  const double v = m * m * overlap * overlap;
  // Distinguishable part bunches with 2TR, indistinguishable part with
  // 1 - (T - R)^2 = 4TR.
  return (1 - v) * 2 * t * r + v * 4 * t * r;
}

RoutedSignals route_beamsplitter(std::span<const SignalPhoton> cw_signals,
                                 std::span<const SignalPhoton> ccw_signals,
                                 double m,
                                 const phys::WavepacketModel& cw_wavepacket,
                                 const phys::WavepacketModel& ccw_wavepacket,
                                 Rng& rng, double transmittance) {
  if (!unit_interval(m))
    throw std::invalid_argument("route_beamsplitter: m must lie in [0, 1]");
  phys::validate(cw_wavepacket);
  phys::validate(ccw_wavepacket);
  RoutedSignals out;
  Beamsplitter bs(m, cw_wavepacket, ccw_wavepacket, transmittance);
  merge_by_herald(cw_signals, ccw_signals,
                  [&](const Photon& p) { bs.push(p, rng, out); });
  bs.flush(rng, out);
  sort_outputs(out);
  return out;
}

std::vector<std::int64_t> apply_detection(std::span<const double> clicks,
                                          const DetectorModel& detector,
                                          double duration, double resolution,
                                          Rng& rng) {
  if (!unit_interval(detector.efficiency))
    throw std::invalid_argument("apply_detection: efficiency must lie in [0, 1]");
  std::vector<std::int64_t> out;
  const auto resolution_ps =
      std::max<std::int64_t>(1, to_picoseconds(resolution));
  detect_block(clicks, detector, 0.0, duration, resolution_ps,
               to_picoseconds(duration), rng, out);
  return out;
}

TagStream simulate_run(const ExperimentConfig& config, unsigned workers) {
  validate(config);

  TagStream stream;
  stream.header.duration_ps = to_picoseconds(config.duration);
  stream.header.resolution_ps =
      std::max<std::int64_t>(1, to_picoseconds(config.timestamp_resolution));
  stream.header.seed = config.rng_seed;
  stream.header.config_digest = config_digest(config);

  const double duration = config.duration;
  const auto block_count =
      static_cast<std::size_t>(std::ceil(duration / kBlockSeconds));
  const std::uint64_t seed = config.rng_seed;

  const double expected_tags =
      duration * (config.cw.pair_rate * (config.cw.eta_signal + config.cw.eta_idler) +
                  config.ccw.pair_rate *
                      (config.ccw.eta_signal + config.ccw.eta_idler) +
                  2 * config.cw.dark_rate_signal + config.cw.dark_rate_idler +
                  config.ccw.dark_rate_idler);
  stream.tags.reserve(static_cast<std::size_t>(expected_tags * 1.01) + 64);

  // The two signal detectors sit behind the beamsplitter and see both
  // directions; their efficiency is the mean of the two path efficiencies.
  const DetectorModel s1_det{0.5 * (config.cw.eta_signal + config.ccw.eta_signal),
                             config.cw.dark_rate_signal, config.cw.jitter_sigma};
  const DetectorModel s2_det{0.5 * (config.cw.eta_signal + config.ccw.eta_signal),
                             config.ccw.dark_rate_signal, config.ccw.jitter_sigma};
  const DetectorModel icw_det{config.cw.eta_idler, config.cw.dark_rate_idler,
                              config.cw.jitter_sigma};
  const DetectorModel iccw_det{config.ccw.eta_idler, config.ccw.dark_rate_idler,
                               config.ccw.jitter_sigma};
  const std::int64_t duration_ps = stream.header.duration_ps;
  const std::int64_t resolution_ps = stream.header.resolution_ps;

  Beamsplitter bs(config.mode_overlap_m, config.cw.wavepacket,
                  config.ccw.wavepacket, config.bs_transmittance);

  constexpr std::size_t kBatch = 8;
  std::vector<std::size_t> seams;
  std::vector<BlockProducts> batch(kBatch);
  for (std::size_t first = 0; first < block_count; first += kBatch) {
    const std::size_t n = std::min(kBatch, block_count - first);
    auto bounds = [&](std::size_t k) {
      return std::pair{double(k) * kBlockSeconds,
                       std::min(duration, double(k + 1) * kBlockSeconds)};
    };

    parallel_for(n, workers, [&](std::size_t i) {
      const std::size_t k = first + i;
      auto [t0, t1] = bounds(k);
      BlockProducts& b = batch[i];
      b = BlockProducts{};
      std::vector<PhotonPair> pairs;
      auto rng_cw = block_rng(seed, k, Stream::GenerateCw);
      emit_pairs(config.cw, t0, t1, rng_cw, pairs);
      auto rng_ccw = block_rng(seed, k, Stream::GenerateCcw);
      emit_pairs(config.ccw, t0, t1, rng_ccw, pairs);
      for (const auto& p : pairs) {
        auto& signals = p.direction == Direction::CW ? b.cw_signals : b.ccw_signals;
        auto& idlers = p.direction == Direction::CW ? b.cw_idlers : b.ccw_idlers;
        signals.push_back({p.idler_time, p.signal_time});
        idlers.push_back(p.idler_time);
      }
    });

    // Pairing is sequential: a photon may pair across a block boundary.
    for (std::size_t i = 0; i < n; ++i) {
      BlockProducts& b = batch[i];
      auto rng = block_rng(seed, first + i, Stream::Route);
      merge_by_herald(b.cw_signals, b.ccw_signals,
                      [&](const Photon& p) { bs.push(p, rng, b.routed); });
      if (first + i + 1 == block_count) bs.flush(rng, b.routed);
      sort_outputs(b.routed);
      b.cw_signals = {};
      b.ccw_signals = {};
    }

    parallel_for(n, workers, [&](std::size_t i) {
      const std::size_t k = first + i;
      auto [t0, t1] = bounds(k);
      BlockProducts& b = batch[i];
      std::array<std::vector<std::int64_t>, kChannelCount> per_channel;
      auto run = [&](Channel ch, std::span<const double> clicks,
                     const DetectorModel& det, Stream stream_id) {
        auto rng = block_rng(seed, k, stream_id);
        detect_block(clicks, det, t0, t1, resolution_ps, duration_ps, rng,
                     per_channel[index_of(ch)]);
      };
      run(Channel::S1, b.routed.s1, s1_det, Stream::DetectS1);
      run(Channel::S2, b.routed.s2, s2_det, Stream::DetectS2);
      run(Channel::I_CW, b.cw_idlers, icw_det, Stream::DetectIdlerCw);
      run(Channel::I_CCW, b.ccw_idlers, iccw_det, Stream::DetectIdlerCcw);
      b.routed = {};
      b.cw_idlers = {};
      b.ccw_idlers = {};

      std::size_t total = 0;
      for (const auto& v : per_channel) total += v.size();
      b.tags.reserve(total);
      for (Channel ch : kAllChannels)
        for (std::int64_t t : per_channel[index_of(ch)])
          b.tags.push_back({t, ch});
      std::sort(b.tags.begin(), b.tags.end(), tag_before);
    });

    for (std::size_t i = 0; i < n; ++i) {
      seams.push_back(stream.tags.size());
      stream.tags.insert(stream.tags.end(), batch[i].tags.begin(),
                         batch[i].tags.end());
      batch[i].tags = {};
    }
  }
  repair_block_seams(stream.tags, seams);
  return stream;
}

}  // namespace wgmr::sim
