#include "wgmr/config.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace wgmr::sim {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

struct UnitScale {
  std::string_view suffix;
  Dimension dimension;
  double scale;
};

constexpr std::array<UnitScale, 13> kUnits = {{
    {"ps", Dimension::Time, 1e-12},
    {"ns", Dimension::Time, 1e-9},
    {"us", Dimension::Time, 1e-6},
    {"ms", Dimension::Time, 1e-3},
    {"s", Dimension::Time, 1.0},
    {"Hz", Dimension::Frequency, 1.0},
    {"kHz", Dimension::Frequency, 1e3},
    {"MHz", Dimension::Frequency, 1e6},
    {"GHz", Dimension::Frequency, 1e9},
    {"/s", Dimension::Rate, 1.0},
    {"Hz", Dimension::Rate, 1.0},
    {"kHz", Dimension::Rate, 1e3},
    {"MHz", Dimension::Rate, 1e6},
}};

std::uint64_t parse_seed(std::string_view text, const std::string& field) {
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigError(field + " must be an unsigned 64-bit integer");
  return value;
}

struct SectionDraft {
  SourceConfig source;
  std::optional<double> g2_target;
  bool has_rate = false;
};

void set_source_key(SectionDraft& draft, const std::string& section,
                    std::string_view key, std::string_view value) {
  const std::string field = section + "." + std::string(key);
  auto q = [&](Dimension d) {
    try {
      return parse_quantity(value, d);
    } catch (const ConfigError& e) {
      throw ConfigError(field + ": " + e.what());
    }
  };
  SourceConfig& s = draft.source;
  if (key == "pair_rate") {
    s.pair_rate = q(Dimension::Rate);
    draft.has_rate = true;
  } else if (key == "g2_target") {
    draft.g2_target = q(Dimension::Dimensionless);
  } else if (key == "tau_lead") {
    s.wavepacket.tau_lead = q(Dimension::Time);
  } else if (key == "tau_tail") {
    s.wavepacket.tau_tail = q(Dimension::Time);
  } else if (key == "eta_signal") {
    s.eta_signal = q(Dimension::Dimensionless);
  } else if (key == "eta_idler") {
    s.eta_idler = q(Dimension::Dimensionless);
  } else if (key == "dark_rate_signal") {
    s.dark_rate_signal = q(Dimension::Rate);
  } else if (key == "dark_rate_idler") {
    s.dark_rate_idler = q(Dimension::Rate);
  } else if (key == "jitter_sigma") {
    s.jitter_sigma = q(Dimension::Time);
  } else {
    throw ConfigError("unknown key " + field);
  }
}

void set_experiment_key(ExperimentConfig& c, std::string_view key,
                        std::string_view value) {
  const std::string field = "experiment." + std::string(key);
  auto q = [&](Dimension d) {
    try {
      return parse_quantity(value, d);
    } catch (const ConfigError& e) {
      throw ConfigError(field + ": " + e.what());
    }
  };
  if (key == "duration") {
    c.duration = q(Dimension::Time);
  } else if (key == "mode_overlap") {
    c.mode_overlap_m = q(Dimension::Dimensionless);
  } else if (key == "bs_transmittance") {
    c.bs_transmittance = q(Dimension::Dimensionless);
  } else if (key == "resolution") {
    c.timestamp_resolution = q(Dimension::Time);
  } else if (key == "seed") {
    c.rng_seed = parse_seed(value, field);
  } else {
    throw ConfigError("unknown key " + field);
  }
}

SourceConfig resolve(const SectionDraft& draft, const std::string& section) {
  SourceConfig s = draft.source;
  if (draft.g2_target) {
    if (draft.has_rate)
      throw ConfigError(section + ": give either pair_rate or g2_target, not both");
    if (!(*draft.g2_target > 1))
      throw ConfigError(section + ".g2_target must exceed 1");
    if (!s.wavepacket.valid())
      throw ConfigError(section + ": tau_lead and tau_tail must be positive");
    s.pair_rate = phys::rate_for_g2_target(s.wavepacket, *draft.g2_target);
  }
  return s;
}

void append_source(std::ostringstream& out, const char* name,
                   const SourceConfig& s) {
  out << '[' << name << "]\n"
      << "pair_rate = " << format_double(s.pair_rate) << " /s\n"
      << "tau_lead = " << format_double(s.wavepacket.tau_lead) << " s\n"
      << "tau_tail = " << format_double(s.wavepacket.tau_tail) << " s\n"
      << "eta_signal = " << format_double(s.eta_signal) << '\n'
      << "eta_idler = " << format_double(s.eta_idler) << '\n'
      << "dark_rate_signal = " << format_double(s.dark_rate_signal) << " /s\n"
      << "dark_rate_idler = " << format_double(s.dark_rate_idler) << " /s\n"
      << "jitter_sigma = " << format_double(s.jitter_sigma) << " s\n";
}

}  // namespace

std::string format_double(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) return "nan";
  return std::string(buf.data(), ptr);
}

double parse_quantity(std::string_view text, Dimension dimension) {
  text = trim(text);
  if (text.empty()) throw ConfigError("empty quantity");
  if (text.front() == '+') text.remove_prefix(1);
  double number = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), number);
  if (ec != std::errc())
    throw ConfigError("not a number: '" + std::string(text) + "'");
  const std::string_view suffix = trim(text.substr(ptr - text.data()));
  if (suffix.empty()) return number;
  for (const auto& unit : kUnits)
    if (unit.dimension == dimension && unit.suffix == suffix)
      return number * unit.scale;
  throw ConfigError("unit '" + std::string(suffix) + "' does not fit quantity '" +
                    std::string(text) + "'");
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig config;
  std::map<std::string, SectionDraft> drafts;
  drafts["cw"].source = config.cw;
  drafts["ccw"].source = config.ccw;

  std::string section;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(line_no) + ": malformed section");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section != "experiment" && section != "cw" && section != "ccw")
        throw ConfigError("line " + std::to_string(line_no) +
                          ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    if (section.empty())
      throw ConfigError("line " + std::to_string(line_no) +
                        ": key outside of any section");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (section == "experiment")
      set_experiment_key(config, key, value);
    else
      set_source_key(drafts[section], section, key, value);
  }
  config.cw = resolve(drafts["cw"], "cw");
  config.ccw = resolve(drafts["ccw"], "ccw");
  config.cw.direction = Direction::CW;
  config.ccw.direction = Direction::CCW;
  validate(config);
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string canonical_config_text(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "[experiment]\n"
      << "duration = " << format_double(c.duration) << " s\n"
      << "mode_overlap = " << format_double(c.mode_overlap_m) << '\n'
      << "bs_transmittance = " << format_double(c.bs_transmittance) << '\n'
      << "resolution = " << format_double(c.timestamp_resolution) << " s\n"
      << "seed = " << c.rng_seed << '\n';
  append_source(out, "cw", c.cw);
  append_source(out, "ccw", c.ccw);
  return out.str();
}

ConfigDigest config_digest(const ExperimentConfig& config) {
  const std::string text = canonical_config_text(config);
  ConfigDigest digest{};
  unsigned int length = 0;
  if (EVP_Digest(text.data(), text.size(), digest.data(), &length, EVP_sha256(),
                 nullptr) != 1 ||
      length != digest.size())
    throw std::runtime_error("SHA-256 digest failed");
  return digest;
}

}  // namespace wgmr::sim
