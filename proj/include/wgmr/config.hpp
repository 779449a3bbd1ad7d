#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "wgmr/source_sim.hpp"
#include "wgmr/tags.hpp"

namespace wgmr::sim {

/// Parses a sectioned key = value document:
///
///     [experiment]
///     duration = 300 s
///     mode_overlap = 0.86
///     seed = 42
///     [cw]
///     g2_target = 35          # or: pair_rate = 2.6e5 /s
///     tau_lead = 47 ns
///     tau_tail = 66 ns
///     [ccw]
///     ...
///
/// Quantities accept unit suffixes (ps, ns, us, ms, s, Hz, kHz, MHz, GHz, /s).
/// Keys absent from the document keep the ExperimentConfig defaults. Unknown
/// sections or keys are rejected with ConfigError.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical text form: fixed section and key order, SI values in shortest
/// round-trip notation. parse_config(canonical_config_text(c)) == c.
std::string canonical_config_text(const ExperimentConfig& config);

ConfigDigest config_digest(const ExperimentConfig& config);

enum class Dimension { Time, Frequency, Rate, Dimensionless };

/// "400ns" -> 4e-7, "38 MHz" -> 3.8e7. Throws ConfigError on bad input.
double parse_quantity(std::string_view text, Dimension dimension);

/// Shortest round-trip decimal form, locale independent.
std::string format_double(double value);

}  // namespace wgmr::sim
