#include "wgmr/tags.hpp"

#include <stdexcept>

namespace wgmr {

std::string_view channel_name(Channel ch) {
  switch (ch) {
    case Channel::S1: return "S1";
    case Channel::S2: return "S2";
    case Channel::I_CW: return "I_CW";
    case Channel::I_CCW: return "I_CCW";
  }
  return "?";
}

std::optional<Channel> parse_channel(std::string_view name) {
  for (Channel ch : kAllChannels)
    if (channel_name(ch) == name) return ch;
  return std::nullopt;
}

std::optional<std::size_t> first_unsorted(std::span<const TimeTag> tags) {
  for (std::size_t i = 1; i < tags.size(); ++i)
    if (tag_before(tags[i], tags[i - 1])) return i;
  return std::nullopt;
}

ChannelTimes ChannelTimes::from_stream(const TagStream& stream) {
  if (auto bad = first_unsorted(stream.tags))
    throw std::invalid_argument("tag stream is not sorted at index " +
                                std::to_string(*bad));
  ChannelTimes out;
  out.duration_ps = stream.header.duration_ps;
  out.append(stream.tags);
  return out;
}

void ChannelTimes::append(std::span<const TimeTag> tags) {
  for (const TimeTag& tag : tags) {
    const auto idx = index_of(tag.channel);
    if (idx >= kChannelCount)
      throw std::invalid_argument("unknown channel id " + std::to_string(idx));
    times[idx].push_back(tag.time);
  }
}

}  // namespace wgmr
