#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wgmr {

/// Detector channels. The numeric order is the tie-break order of the stream.
enum class Channel : std::uint8_t { S1 = 0, S2 = 1, I_CW = 2, I_CCW = 3 };

inline constexpr std::size_t kChannelCount = 4;
inline constexpr std::array<Channel, kChannelCount> kAllChannels = {
    Channel::S1, Channel::S2, Channel::I_CW, Channel::I_CCW};

std::string_view channel_name(Channel ch);
std::optional<Channel> parse_channel(std::string_view name);

constexpr std::size_t index_of(Channel ch) {
  return static_cast<std::size_t>(ch);
}

/// One detector click; `time` is in picoseconds from the start of the run.
struct TimeTag {
  std::int64_t time = 0;
  Channel channel = Channel::S1;

  friend bool operator==(const TimeTag&, const TimeTag&) = default;
};

constexpr bool tag_before(const TimeTag& a, const TimeTag& b) {
  return a.time != b.time ? a.time < b.time : a.channel < b.channel;
}

/// Digest of the canonical experiment configuration text (SHA-256).
using ConfigDigest = std::array<std::uint8_t, 32>;

struct TagStreamHeader {
  std::int64_t duration_ps = 0;
  std::int64_t resolution_ps = 1;
  std::uint8_t channel_count = static_cast<std::uint8_t>(kChannelCount);
  std::uint64_t seed = 0;
  ConfigDigest config_digest{};

  double duration_seconds() const { return double(duration_ps) * 1e-12; }
  friend bool operator==(const TagStreamHeader&, const TagStreamHeader&) =
      default;
};

struct TagStream {
  TagStreamHeader header;
  std::vector<TimeTag> tags;

  friend bool operator==(const TagStream&, const TagStream&) = default;
};

/// Index of the first tag violating the (time, channel) order, if any.
std::optional<std::size_t> first_unsorted(std::span<const TimeTag> tags);

/// Per-channel sorted click times; the analysis engines work on these.
struct ChannelTimes {
  std::array<std::vector<std::int64_t>, kChannelCount> times;
  std::int64_t duration_ps = 0;

  const std::vector<std::int64_t>& operator[](Channel ch) const {
    return times[index_of(ch)];
  }
  std::vector<std::int64_t>& operator[](Channel ch) {
    return times[index_of(ch)];
  }

  static ChannelTimes from_stream(const TagStream& stream);
  void append(std::span<const TimeTag> tags);
};

inline constexpr std::int64_t kPicosecondsPerSecond = 1'000'000'000'000;

inline std::int64_t to_picoseconds(double seconds) {
  return static_cast<std::int64_t>(std::llround(seconds * 1e12));
}

}  // namespace wgmr
