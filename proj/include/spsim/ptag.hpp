#pragma once
// PTAG time-tag files.
//
//   offset  size  field
//   0       4     magic "PTAG"
//   4       2     format version, u16 LE (1)
//   6       8     resolution in ps, u64 LE
//   14      1     channel count
//   15      5     reserved, zero
//   20      9*n   records: channel u8, time_ps u64 LE
//
// The header carries no duration; a reader sets it to one past the last timestamp.

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "spsim/error.hpp"
#include "spsim/timetag.hpp"

namespace spsim::ptag {

inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 20;
inline constexpr std::size_t kRecordSize = 9;

namespace detail {

inline void put_le(std::vector<char>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_le(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace detail

inline std::vector<char> encode(const TimeTagStream& s) {
  std::vector<char> out;
  out.reserve(kHeaderSize + kRecordSize * s.tags.size());
  out.insert(out.end(), {'P', 'T', 'A', 'G'});
  detail::put_le(out, kVersion, 2);
  detail::put_le(out, s.resolution_ps, 8);
  out.push_back(static_cast<char>(s.channel_count));
  out.insert(out.end(), 5, '\0');
  for (const auto& t : s.tags) {
    out.push_back(static_cast<char>(t.channel));
    detail::put_le(out, t.time_ps, 8);
  }
  return out;
}

/// Validates while decoding; errors carry the byte offset of the offending header field
/// or record.
inline TimeTagStream decode(const std::vector<char>& bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < kHeaderSize) throw FormatError("truncated header", bytes.size());
  if (std::memcmp(p, "PTAG", 4) != 0) throw FormatError("bad magic", 0);
  if (detail::get_le(p + 4, 2) != kVersion) throw FormatError("unsupported format version", 4);
  TimeTagStream s;
  s.resolution_ps = detail::get_le(p + 6, 8);
  if (s.resolution_ps == 0) throw FormatError("zero resolution", 6);
  s.channel_count = p[14];
  const std::size_t body = bytes.size() - kHeaderSize;
  const std::size_t n = body / kRecordSize;
  s.tags.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t off = kHeaderSize + i * kRecordSize;
    const TimeTag t{detail::get_le(p + off + 1, 8), p[off]};
    if (t.channel >= s.channel_count) throw FormatError("channel out of range", off);
    if (!s.tags.empty() && tag_less(t, s.tags.back())) throw FormatError("records not sorted", off);
    s.tags.push_back(t);
  }
  if (body % kRecordSize != 0) throw FormatError("truncated record", kHeaderSize + n * kRecordSize);
  s.duration_ps = s.tags.empty() ? 0 : s.tags.back().time_ps + 1;
  return s;
}

inline void write(const std::string& path, const TimeTagStream& s) {
  const auto bytes = encode(s);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InputError("cannot open '" + path + "' for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw InputError("write to '" + path + "' failed");
}

inline std::vector<char> read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline TimeTagStream read(const std::string& path) { return decode(read_bytes(path)); }

}  // namespace spsim::ptag
