#include "wgmr/tag_file.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace wgmr::io {
namespace {

template <typename T>
void put_le(unsigned char* dst, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    dst[i] = static_cast<unsigned char>(std::uint64_t(value) >> (8 * i));
}

template <typename T>
T get_le(const unsigned char* src) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= std::uint64_t(src[i]) << (8 * i);
  return static_cast<T>(v);
}

std::array<unsigned char, kTagHeaderSize> encode_header(const TagStreamHeader& h) {
  std::array<unsigned char, kTagHeaderSize> b{};
  std::memcpy(b.data(), kTagMagic, 8);
  put_le<std::uint16_t>(b.data() + 8, kTagFormatVersion);
  put_le<std::uint64_t>(b.data() + 10, std::uint64_t(h.resolution_ps));
  b[18] = h.channel_count;
  put_le<std::uint64_t>(b.data() + 19, std::uint64_t(h.duration_ps / h.resolution_ps));
  put_le<std::uint64_t>(b.data() + 27, h.seed);
  std::memcpy(b.data() + 35, h.config_digest.data(), 32);
  return b;
}

TagStreamHeader decode_header(const unsigned char* b) {
  if (std::memcmp(b, kTagMagic, 8) != 0)
    throw FormatError("not a tag file (bad magic)");
  const auto version = get_le<std::uint16_t>(b + 8);
  if (version != kTagFormatVersion)
    throw FormatError("unsupported tag file version " + std::to_string(version));
  TagStreamHeader h;
  const auto resolution = get_le<std::uint64_t>(b + 10);
  if (resolution == 0 || resolution > std::uint64_t(kPicosecondsPerSecond))
    throw FormatError("tag file resolution out of range");
  h.resolution_ps = std::int64_t(resolution);
  h.channel_count = b[18];
  if (h.channel_count == 0 || h.channel_count > kChannelCount)
    throw FormatError("tag file declares " + std::to_string(h.channel_count) +
                      " channels, at most " + std::to_string(kChannelCount) +
                      " are known");
  const auto duration_ticks = get_le<std::uint64_t>(b + 19);
  if (duration_ticks > std::uint64_t(std::numeric_limits<std::int64_t>::max()) / resolution)
    throw FormatError("tag file duration overflows the picosecond clock");
  h.duration_ps = std::int64_t(duration_ticks * resolution);
  h.seed = get_le<std::uint64_t>(b + 27);
  std::memcpy(h.config_digest.data(), b + 35, 32);
  return h;
}

}  // namespace

std::uint64_t write_tags(const TagStream& stream, std::ostream& out) {
  const auto& h = stream.header;
  if (h.resolution_ps <= 0) throw std::invalid_argument("write_tags: resolution must be positive");
  if (h.duration_ps < 0 || h.duration_ps % h.resolution_ps != 0)
    throw std::invalid_argument("write_tags: duration is not a whole number of ticks");
  if (auto bad = first_unsorted(stream.tags))
    throw std::invalid_argument("write_tags: stream is unsorted at tag " +
                                std::to_string(*bad));

  const auto header = encode_header(h);
  out.write(reinterpret_cast<const char*>(header.data()), header.size());

  constexpr std::size_t kChunk = 1 << 16;
  std::vector<unsigned char> buf(kChunk * kTagRecordSize);
  for (std::size_t first = 0; first < stream.tags.size(); first += kChunk) {
    const std::size_t n = std::min(kChunk, stream.tags.size() - first);
    for (std::size_t i = 0; i < n; ++i) {
      const TimeTag& t = stream.tags[first + i];
      if (t.time < 0 || t.time % h.resolution_ps != 0)
        throw std::invalid_argument("write_tags: tag " + std::to_string(first + i) +
                                    " is not on the tick grid");
      if (index_of(t.channel) >= h.channel_count)
        throw std::invalid_argument("write_tags: tag " + std::to_string(first + i) +
                                    " uses an undeclared channel");
      unsigned char* rec = buf.data() + i * kTagRecordSize;
      rec[0] = static_cast<unsigned char>(t.channel);
      put_le<std::uint64_t>(rec + 1, std::uint64_t(t.time / h.resolution_ps));
    }
    out.write(reinterpret_cast<const char*>(buf.data()),
              std::streamsize(n * kTagRecordSize));
  }
  out.flush();
  if (!out) throw std::runtime_error("write_tags: write failed");
  return kTagHeaderSize + stream.tags.size() * kTagRecordSize;
}

std::uint64_t write_tags(const TagStream& stream, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  try {
    return write_tags(stream, out);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

TagReader::TagReader(std::istream& in) : in_(in) {
  std::array<unsigned char, kTagHeaderSize> b{};
  in_.read(reinterpret_cast<char*>(b.data()), b.size());
  if (in_.gcount() < 8) throw FormatError("not a tag file (bad magic)");
  if (std::size_t(in_.gcount()) != b.size()) {
    decode_header(b.data());  // reports bad magic first when applicable
    throw FormatError("tag file header is truncated");
  }
  header_ = decode_header(b.data());
}

bool TagReader::next(std::vector<TimeTag>& out, std::size_t max_tags) {
  out.clear();
  if (max_tags == 0) max_tags = 1;
  buffer_.resize(max_tags * kTagRecordSize);
  in_.read(reinterpret_cast<char*>(buffer_.data()), std::streamsize(buffer_.size()));
  const auto got = std::size_t(in_.gcount());
  const std::size_t whole = got / kTagRecordSize;
  out.reserve(whole);
  const auto max_ticks =
      std::uint64_t(std::numeric_limits<std::int64_t>::max() / header_.resolution_ps);
  for (std::size_t i = 0; i < whole; ++i) {
    const unsigned char* rec = buffer_.data() + i * kTagRecordSize;
    const std::uint64_t at = offset_ + i * kTagRecordSize;
    if (rec[0] >= header_.channel_count)
      throw CorruptionError("record names channel " + std::to_string(rec[0]), at);
    const auto ticks = get_le<std::uint64_t>(rec + 1);
    if (ticks > max_ticks) throw CorruptionError("record time overflows", at);
    const TimeTag tag{std::int64_t(ticks) * header_.resolution_ps, Channel(rec[0])};
    if (last_ && tag_before(tag, *last_))
      throw CorruptionError("records out of order", at);
    last_ = tag;
    out.push_back(tag);
  }
  offset_ += whole * kTagRecordSize;
  if (got % kTagRecordSize != 0)
    throw CorruptionError("truncated record", offset_);
  return !out.empty();
}

TagStream read_tags(std::istream& in) {
  TagReader reader(in);
  TagStream stream;
  stream.header = reader.header();
  std::vector<TimeTag> chunk;
  while (reader.next(chunk))
    stream.tags.insert(stream.tags.end(), chunk.begin(), chunk.end());
  return stream;
}

namespace {

std::ifstream open_for_reading(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

}  // namespace

TagStream read_tags(const std::filesystem::path& path) {
  auto in = open_for_reading(path);
  TagReader reader(in);
  TagStream stream;
  stream.header = reader.header();
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (!ec && size > kTagHeaderSize)
    stream.tags.reserve((size - kTagHeaderSize) / kTagRecordSize);
  std::vector<TimeTag> chunk;
  while (reader.next(chunk))
    stream.tags.insert(stream.tags.end(), chunk.begin(), chunk.end());
  return stream;
}

ChannelTimes read_channel_times(const std::filesystem::path& path,
                                TagStreamHeader* header) {
  auto in = open_for_reading(path);
  TagReader reader(in);
  ChannelTimes times;
  times.duration_ps = reader.header().duration_ps;
  if (header) *header = reader.header();
  std::vector<TimeTag> chunk;
  while (reader.next(chunk)) times.append(chunk);
  return times;
}

}  // namespace wgmr::io
