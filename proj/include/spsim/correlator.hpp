#pragma once
// Coincidence histogramming of time-tag streams.
//
// Bin convention: a delay d falls in bin floor((d - min_delay) / bin_width); the
// histogram covers [min_delay, max_delay) and every pair with a delay in that range is
// counted exactly once.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "spsim/error.hpp"
#include "spsim/parallel.hpp"
#include "spsim/timetag.hpp"

namespace spsim::correlator {

struct CorrelationHistogram {
  std::int64_t bin_width_ps = 1;
  std::int64_t min_delay_ps = 0;
  std::int64_t max_delay_ps = 0;
  std::vector<std::uint64_t> counts;
  std::uint64_t n_ref_events = 0;
  std::uint64_t acquisition_duration_ps = 0;

  std::size_t size() const { return counts.size(); }
  double bin_center(std::size_t k) const {
    return static_cast<double>(min_delay_ps) + (static_cast<double>(k) + 0.5) * static_cast<double>(bin_width_ps);
  }
  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (auto c : counts) s += c;
    return s;
  }
};

inline void check_range(std::int64_t bin_width, std::int64_t min_delay, std::int64_t max_delay) {
  if (bin_width <= 0) throw InputError("bin width must be positive");
  if (max_delay <= min_delay) throw InputError("empty delay range");
  if ((max_delay - min_delay) % bin_width != 0) throw InputError("delay range must be a multiple of the bin width");
}

inline void check_channel(const TimeTagStream& s, std::uint8_t ch) {
  if (ch >= s.channel_count) throw InputError("channel " + std::to_string(ch) + " not present in stream");
}

/// Delay range [min, max) in ps.
struct DelayRange {
  std::int64_t min;
  std::int64_t max;
};

/// counts[k] = #{(i, j): tag_i on a, tag_j on b, t_j - t_i in bin k}. One forward sweep over
/// channel a with a sliding window over channel b; work is O(N + pairs). Chunks of channel a
/// may run on separate threads; integer bins make the merge exact.
inline CorrelationHistogram cross_correlate(const TimeTagStream& stream, std::uint8_t ch_a, std::uint8_t ch_b,
                                            std::int64_t bin_width_ps, DelayRange range, unsigned threads = 1) {
  const std::int64_t min_delay_ps = range.min, max_delay_ps = range.max;
  check_range(bin_width_ps, min_delay_ps, max_delay_ps);
  check_channel(stream, ch_a);
  check_channel(stream, ch_b);
  const auto ta = stream.channel_times(ch_a);
  const auto tb = stream.channel_times(ch_b);
  const auto n_bins = static_cast<std::size_t>((max_delay_ps - min_delay_ps) / bin_width_ps);

  CorrelationHistogram h{bin_width_ps, min_delay_ps, max_delay_ps, std::vector<std::uint64_t>(n_bins, 0),
                         ta.size(), stream.duration_ps};
  if (ta.empty() || tb.empty()) return h;

  const std::size_t chunk = std::max<std::size_t>(1 << 16, ta.size() / (4 * resolve_threads(threads)) + 1);
  const std::size_t n_chunks = (ta.size() + chunk - 1) / chunk;
  std::vector<std::vector<std::uint64_t>> partial(n_chunks);

  parallel_for(n_chunks, threads, [&](std::size_t c) {
    auto& local = partial[c];
    local.assign(n_bins, 0);
    const std::size_t begin = c * chunk;
    const std::size_t end = std::min(ta.size(), begin + chunk);
    auto lo = std::lower_bound(tb.begin(), tb.end(), ta[begin] + min_delay_ps) - tb.begin();
    const auto nb = static_cast<std::ptrdiff_t>(tb.size());
    for (std::size_t i = begin; i < end; ++i) {
      const std::int64_t start = ta[i] + min_delay_ps;
      const std::int64_t stop = ta[i] + max_delay_ps;
      while (lo < nb && tb[static_cast<std::size_t>(lo)] < start) ++lo;
      for (auto j = lo; j < nb && tb[static_cast<std::size_t>(j)] < stop; ++j)
        ++local[static_cast<std::size_t>((tb[static_cast<std::size_t>(j)] - start) / bin_width_ps)];
    }
  });
  for (const auto& p : partial)
    for (std::size_t k = 0; k < n_bins; ++k) h.counts[k] += p[k];
  return h;
}

/// Symmetric range [-max_delay, max_delay).
inline CorrelationHistogram cross_correlate(const TimeTagStream& stream, std::uint8_t ch_a, std::uint8_t ch_b,
                                            std::int64_t bin_width_ps, std::int64_t max_delay_ps,
                                            unsigned threads = 1) {
  return cross_correlate(stream, ch_a, ch_b, bin_width_ps, {-max_delay_ps, max_delay_ps}, threads);
}

/// Delay of each signal tag to the most recent sync tag at or before it, on [0, range).
/// Signal tags before the first sync and delays beyond the range are not counted.
inline CorrelationHistogram start_stop(const TimeTagStream& stream, std::uint8_t sync_ch, std::uint8_t signal_ch,
                                       std::int64_t bin_width_ps, std::int64_t range_ps) {
  check_range(bin_width_ps, 0, range_ps);
  if (sync_ch >= stream.channel_count || stream.count(sync_ch) == 0)
    throw InputError("sync channel " + std::to_string(sync_ch) + " missing from stream");
  check_channel(stream, signal_ch);
  const auto n_bins = static_cast<std::size_t>(range_ps / bin_width_ps);
  CorrelationHistogram h{bin_width_ps, 0, range_ps, std::vector<std::uint64_t>(n_bins, 0), 0, stream.duration_ps};
  const auto syncs = stream.channel_times(sync_ch);
  const auto signals = stream.channel_times(signal_ch);
  h.n_ref_events = syncs.size();
  std::size_t p = 0;
  for (const std::int64_t t : signals) {
    if (t < syncs.front()) continue;
    while (p + 1 < syncs.size() && syncs[p + 1] <= t) ++p;
    const std::int64_t d = t - syncs[p];
    if (d < range_ps) ++h.counts[static_cast<std::size_t>(d / bin_width_ps)];
  }
  return h;
}

struct PeakIntegral {
  int index;          ///< peak number m, center = offset + m * period
  double center_ps;
  double window_ps;
  double area;
  double area_error;  ///< sqrt(area), Poisson
  bool complete;      ///< whole window lies inside the histogram range
};

/// Sums bins whose centers lie in [c - window/2, c + window/2) around every expected peak
/// center c = offset + m * period inside the histogram range.
inline std::vector<PeakIntegral> integrate_peaks(const CorrelationHistogram& h, double period_ps, double window_ps,
                                                 double offset_ps = 0.0) {
  if (!(period_ps > 0.0) || !(window_ps > 0.0)) throw InputError("period and window must be positive");
  if (window_ps > period_ps * (1.0 + 1e-12)) throw InputError("integration window exceeds the peak period: windows overlap");
  const double lo = static_cast<double>(h.min_delay_ps);
  const double hi = static_cast<double>(h.max_delay_ps);
  const int m_lo = static_cast<int>(std::ceil((lo - offset_ps) / period_ps));
  const int m_hi = static_cast<int>(std::floor((hi - offset_ps) / period_ps));
  std::vector<PeakIntegral> out;
  const double w = static_cast<double>(h.bin_width_ps);
  for (int m = m_lo; m <= m_hi; ++m) {
    const double c = offset_ps + m * period_ps;
    if (c < lo || c >= hi) continue;
    const double a = c - window_ps / 2.0;
    const double b = c + window_ps / 2.0;
    // Bin k has center lo + (k + 0.5) w; include centers in [a, b).
    const double k_first = std::ceil((a - lo) / w - 0.5);
    const double k_last = std::ceil((b - lo) / w - 0.5);  // exclusive
    const auto k0 = static_cast<std::int64_t>(std::max(0.0, k_first));
    const auto k1 = static_cast<std::int64_t>(std::min<double>(static_cast<double>(h.size()), k_last));
    double area = 0.0;
    for (auto k = k0; k < k1; ++k) area += static_cast<double>(h.counts[static_cast<std::size_t>(k)]);
    out.push_back({m, c, window_ps, area, std::sqrt(area), a >= lo && b <= hi});
  }
  return out;
}

/// Two-column CSV: header "bin_center_ps,counts", LF line endings.
inline void write_histogram_csv(std::ostream& os, const CorrelationHistogram& h) {
  os << "bin_center_ps,counts\n";
  char buf[64];
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double c = h.bin_center(k);
    if (c == std::floor(c))
      std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(c));
    else
      std::snprintf(buf, sizeof buf, "%.1f", c);
    os << buf << ',' << h.counts[k] << '\n';
  }
}

}  // namespace spsim::correlator
