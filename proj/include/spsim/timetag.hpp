#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "spsim/error.hpp"

namespace spsim {

struct TimeTag {
  std::uint64_t time_ps;
  std::uint8_t channel;

  friend bool operator==(const TimeTag&, const TimeTag&) = default;
};

/// Stream order: by time, ties broken by channel.
inline bool tag_less(const TimeTag& a, const TimeTag& b) noexcept {
  return a.time_ps != b.time_ps ? a.time_ps < b.time_ps : a.channel < b.channel;
}

struct TimeTagStream {
  std::uint64_t resolution_ps = 1;
  std::uint64_t duration_ps = 0;
  std::uint8_t channel_count = 0;
  std::vector<TimeTag> tags;

  /// Throws InputError naming the first record that breaks an invariant.
  void validate() const {
    for (std::size_t k = 0; k < tags.size(); ++k) {
      if (tags[k].channel >= channel_count)
        throw InputError("tag " + std::to_string(k) + ": channel out of range");
      if (duration_ps && tags[k].time_ps >= duration_ps)
        throw InputError("tag " + std::to_string(k) + ": time beyond stream duration");
      if (k && tag_less(tags[k], tags[k - 1]))
        throw InputError("tag " + std::to_string(k) + ": stream not sorted");
    }
  }

  std::size_t count(std::uint8_t channel) const {
    return static_cast<std::size_t>(std::count_if(
        tags.begin(), tags.end(), [channel](const TimeTag& t) { return t.channel == channel; }));
  }

  /// Signed timestamps of one channel, in stream order.
  std::vector<std::int64_t> channel_times(std::uint8_t channel) const {
    std::vector<std::int64_t> out;
    for (const auto& t : tags)
      if (t.channel == channel) out.push_back(static_cast<std::int64_t>(t.time_ps));
    return out;
  }
};

}  // namespace spsim
