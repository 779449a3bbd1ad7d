#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "wgmr/phys.hpp"
#include "wgmr/tags.hpp"

namespace wgmr::sim {

using Rng = std::mt19937_64;

enum class Direction : std::uint8_t { CW = 0, CCW = 1 };

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// One propagation direction of the resonator. All times in seconds,
/// rates in 1/seconds.
struct SourceConfig {
  Direction direction = Direction::CW;
  double pair_rate = 0;
  phys::WavepacketModel wavepacket{};
  double eta_signal = 0.25;
  double eta_idler = 0.25;
  double dark_rate_signal = 100;
  double dark_rate_idler = 100;
  double jitter_sigma = 50e-12;

  friend bool operator==(const SourceConfig&, const SourceConfig&) = default;
};

struct ExperimentConfig {
  SourceConfig cw{Direction::CW};
  SourceConfig ccw{Direction::CCW};
  double mode_overlap_m = 0.86;
  double bs_transmittance = 0.5;
  double duration = 300;
  double timestamp_resolution = 1e-12;
  std::uint64_t rng_seed = 1;

  friend bool operator==(const ExperimentConfig&,
                         const ExperimentConfig&) = default;
};

/// Throws ConfigError naming the first offending field.
void validate(const SourceConfig& config, const std::string& prefix = "source");
void validate(const ExperimentConfig& config);

/// A config with both directions at the pair rate that yields `g2_target`.
ExperimentConfig reference_config(double g2_target = 35, double m = 0.86,
                                   double duration = 300,
                                   std::uint64_t seed = 1);

struct PhotonPair {
  double idler_time = 0;
  double signal_time = 0;
  Direction direction = Direction::CW;
};

/// Poisson pair emission on [0, duration), ordered by idler time. Each signal
/// trails (or leads) its idler by a delay drawn from the conditional pdf.
std::vector<PhotonPair> generate_pairs(const SourceConfig& config,
                                       double duration, Rng& rng);

/// A signal photon entering the beamsplitter. `herald` is the emission time of
/// its idler partner, which fixes the centre of the photon's wavepacket.
struct SignalPhoton {
  double herald = 0;
  double arrival = 0;
};

struct RoutedSignals {
  std::vector<double> s1;
  std::vector<double> s2;
};

/// Probability that a matched cross-direction pair leaves by the same port.
double same_port_probability(double m, double overlap,
                             double transmittance = 0.5);

/// Matching window for beamsplitter pairing, in units of tau_tail.
inline constexpr double kMatchWindowTaus = 10.0;

/// Hong-Ou-Mandel beamsplitter acting on the two signal beams. Inputs must be
/// sorted by herald time. Cross-direction photons closer than
/// kMatchWindowTaus * tau_tail are paired greedily, nearest first; pairs bunch according
/// to same_port_probability(m, overlap(herald separation)), everything else
/// picks a port independently. Photon number is conserved; outputs are
/// sorted by arrival time.
RoutedSignals route_beamsplitter(std::span<const SignalPhoton> cw_signals,
                                 std::span<const SignalPhoton> ccw_signals,
                                 double m,
                                 const phys::WavepacketModel& cw_wavepacket,
                                 const phys::WavepacketModel& ccw_wavepacket,
                                 Rng& rng, double transmittance = 0.5);

inline RoutedSignals route_beamsplitter(
    std::span<const SignalPhoton> cw_signals,
    std::span<const SignalPhoton> ccw_signals, double m,
    const phys::WavepacketModel& wavepacket, Rng& rng) {
  return route_beamsplitter(cw_signals, ccw_signals, m, wavepacket, wavepacket,
                            rng);
}

struct DetectorModel {
  double efficiency = 1;
  double dark_rate = 0;
  double jitter_sigma = 0;
};

/// Detector response: Bernoulli thinning, Poisson dark counts, Gaussian
/// jitter, quantization to `resolution` and clamping to [0, duration].
/// Returns sorted picosecond timestamps.
std::vector<std::int64_t> apply_detection(std::span<const double> clicks,
                                          const DetectorModel& detector,
                                          double duration, double resolution,
                                          Rng& rng);

/// Length of the independently seeded time blocks the simulation is cut into.
inline constexpr double kBlockSeconds = 0.25;

/// Full four-detector run. Randomness is drawn per (seed, block, stream), so
/// the output does not depend on `workers`.
TagStream simulate_run(const ExperimentConfig& config, unsigned workers = 1);

}  // namespace wgmr::sim
