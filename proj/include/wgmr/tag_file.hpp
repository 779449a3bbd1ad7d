#pragma once

// Binary tag file: a 67-byte little-endian header followed by 9-byte records
// (channel u8, time_ticks u64).
//
//   offset size field
//        0    8 magic "WGMRTAG1"
//        8    2 version
//       10    8 resolution, picoseconds per tick
//       18    1 channel_count
//       19    8 duration_ticks
//       27    8 seed
//       35   32 config digest

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wgmr/tags.hpp"

namespace wgmr::io {

inline constexpr char kTagMagic[8] = {'W', 'G', 'M', 'R', 'T', 'A', 'G', '1'};
inline constexpr std::uint16_t kTagFormatVersion = 1;
inline constexpr std::size_t kTagHeaderSize = 67;
inline constexpr std::size_t kTagRecordSize = 9;

/// Wrong magic, unsupported version or an inconsistent header.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Damaged record data; `offset` is the byte position of the bad record.
class CorruptionError : public std::runtime_error {
 public:
  CorruptionError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " at byte offset " + std::to_string(offset)),
        offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Writes header and records; returns the number of bytes written. The
/// stream must be sorted and every time a multiple of the resolution.
std::uint64_t write_tags(const TagStream& stream, std::ostream& out);
std::uint64_t write_tags(const TagStream& stream, const std::filesystem::path& path);

/// Sequential reader; validates the header on construction and record order
/// while reading.
class TagReader {
 public:
  explicit TagReader(std::istream& in);

  const TagStreamHeader& header() const { return header_; }

  /// Replaces `out` with up to `max_tags` further tags; false once exhausted.
  bool next(std::vector<TimeTag>& out, std::size_t max_tags = 1 << 20);

 private:
  std::istream& in_;
  TagStreamHeader header_;
  std::uint64_t offset_ = kTagHeaderSize;
  std::optional<TimeTag> last_;
  std::vector<unsigned char> buffer_;
};

TagStream read_tags(std::istream& in);
TagStream read_tags(const std::filesystem::path& path);

/// Reads straight into per-channel vectors without materializing the stream.
ChannelTimes read_channel_times(const std::filesystem::path& path,
                                TagStreamHeader* header = nullptr);

}  // namespace wgmr::io
