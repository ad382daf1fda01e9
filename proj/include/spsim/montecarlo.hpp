#pragma once
// Monte Carlo generation of time-tag streams for a pulsed two-level emitter routed
// through start-stop, HBT and unbalanced Mach-Zehnder (HOM) set-ups, followed by a
// detector chain with loss, timing jitter, dead time and dark counts.
//
// Every random decision is drawn from a KeyedRng keyed by the pulse (or event, or
// dark-count slot) it belongs to, so streams are bit-identical for any thread count.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spsim/error.hpp"
#include "spsim/parallel.hpp"
#include "spsim/random.hpp"
#include "spsim/timetag.hpp"

namespace spsim::montecarlo {

inline constexpr double kFwhmToSigma = 1.0 / 2.354820045030949;

struct EmitterModel {
  double energy_ev = 1.5707;
  double t1_ns = 1.725;
  double t2_ps = 45.0;
  double p_exc = 1.0;     ///< excitation probability per pulse
  double p_multi = 0.0;   ///< probability that an excited pulse yields one extra, uncorrelated photon
  double dop = 1.0;       ///< degree of linear polarization
  double pol_angle_deg = 0.0;

  void validate() const {
    if (!(t1_ns > 0.0)) throw InputError("T1 must be positive");
    if (!(t2_ps > 0.0)) throw InputError("T2 must be positive");
    if (t2_ps > 2.0 * t1_ns * 1e3 * (1.0 + 1e-12)) throw InputError("unphysical coherence: T2 > 2 T1");
    auto prob = [](double p, const char* name) {
      if (!(p >= 0.0 && p <= 1.0)) throw InputError(std::string(name) + " must lie in [0,1]");
    };
    prob(p_exc, "p_exc");
    prob(p_multi, "p_multi");
    prob(dop, "dop");
  }

  /// Pure dephasing rate 1/T2 - 1/(2 T1), per ps.
  double pure_dephasing_per_ps() const {
    return std::max(0.0, 1.0 / t2_ps - 1.0 / (2.0 * t1_ns * 1e3));
  }
};

struct InstrumentChain {
  double eta_first_lens = 1.0;
  double eta_setup = 1.0;
  double jitter_fwhm_ps = 0.0;
  double dead_time_ns = 0.0;
  double dark_rate_hz = 0.0;

  void validate() const {
    if (!(eta_first_lens >= 0.0 && eta_first_lens <= 1.0) || !(eta_setup >= 0.0 && eta_setup <= 1.0))
      throw InputError("efficiencies must lie in [0,1]");
    if (jitter_fwhm_ps < 0.0 || dead_time_ns < 0.0 || dark_rate_hz < 0.0)
      throw InputError("jitter, dead time and dark rate must be non-negative");
  }
  double total_efficiency() const { return eta_first_lens * eta_setup; }
};

struct PulseTrain {
  double rep_rate_khz = 76227.93;
  std::uint64_t n_pulses = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(rep_rate_khz > 0.0)) throw InputError("repetition rate must be positive");
    if (n_pulses < 1) throw InputError("need at least one pulse");
  }
  double period_ps() const { return 1e9 / rep_rate_khz; }
};

enum class Polarization { HH, HV };

struct MZIConfig {
  double arm_delay_ns = 13.0;
  Polarization polarization = Polarization::HH;
  double first_bs_ratio = 0.5;   ///< probability of taking the short arm
  double second_bs_ratio = 0.5;  ///< probability that an unpaired photon exits towards detector 0
  double residual_offset_ns = 0.0;

  void validate() const {
    if (!(first_bs_ratio > 0.0 && first_bs_ratio < 1.0) || !(second_bs_ratio > 0.0 && second_bs_ratio < 1.0))
      throw InputError("beam splitter ratios must lie in (0,1)");
    if (arm_delay_ns < 0.0) throw InputError("arm delay must be non-negative");
  }
};

/// A photon before detection. `key` identifies the photon's random substream.
struct IdealEvent {
  double time_ps;
  std::uint8_t channel;
  std::uint64_t key;
};

struct StreamLayout {
  std::uint64_t duration_ps = 0;
  std::uint8_t channel_count = 2;
  std::uint32_t detector_mask = 0x3;  ///< bit c set: channel c is a detector

  bool is_detector(std::uint8_t c) const { return c < 32 && ((detector_mask >> c) & 1U); }
};

struct SimulationResult {
  TimeTagStream stream;
  std::vector<std::string> warnings;
};

struct RunOptions {
  unsigned threads = 1;
  std::uint64_t chunk_pulses = 1ULL << 16;
};

/// First pulse fires here so negative jitter never produces negative timestamps.
inline constexpr double kStartOffsetPs = 100'000.0;
inline constexpr std::uint64_t kDarkSlotPs = 1ULL << 20;

inline std::uint64_t photon_key(std::uint64_t pulse, std::uint64_t slot) { return (pulse << 6) | (slot & 63U); }

// ---------------------------------------------------------------------------
// Detector chain stages

namespace detail {

/// Loss and jitter of detector events; non-detector channels pass through untouched.
inline void detect(std::span<const IdealEvent> events, const InstrumentChain& chain, std::uint64_t seed,
                   const StreamLayout& layout, std::vector<TimeTag>& out) {
  const double sigma = chain.jitter_fwhm_ps * kFwhmToSigma;
  for (const auto& e : events) {
    double t = e.time_ps;
    if (layout.is_detector(e.channel)) {
      KeyedRng rng(seed, Stage::detection, e.key);
      if (!rng.bernoulli(chain.eta_setup)) continue;
      if (sigma > 0.0) t += sigma * rng.normal();
    }
    const double r = std::nearbyint(t);
    if (r < 0.0 || r >= static_cast<double>(layout.duration_ps)) continue;
    out.push_back({static_cast<std::uint64_t>(r), e.channel});
  }
}

/// Homogeneous Poisson dark counts on every detector channel for dark-count slots [first, last).
inline void dark_counts(const InstrumentChain& chain, std::uint64_t seed, const StreamLayout& layout,
                        std::uint64_t first_slot, std::uint64_t last_slot, std::vector<TimeTag>& out) {
  if (chain.dark_rate_hz <= 0.0) return;
  const double mean = chain.dark_rate_hz * 1e-12 * static_cast<double>(kDarkSlotPs);
  for (std::uint8_t c = 0; c < layout.channel_count; ++c) {
    if (!layout.is_detector(c)) continue;
    for (std::uint64_t s = first_slot; s < last_slot; ++s) {
      KeyedRng rng(seed, Stage::darks, (static_cast<std::uint64_t>(c) << 48) | s);
      const std::uint64_t n = rng.poisson(mean);
      for (std::uint64_t k = 0; k < n; ++k) {
        const auto t = s * kDarkSlotPs +
                       static_cast<std::uint64_t>(rng.uniform() * static_cast<double>(kDarkSlotPs));
        if (t < layout.duration_ps) out.push_back({t, c});
      }
    }
  }
}

inline std::uint64_t dark_slot_count(const StreamLayout& layout) {
  return (layout.duration_ps + kDarkSlotPs - 1) / kDarkSlotPs;
}

/// Sort, then drop detector events inside the dead time of the previous accepted event.
inline void finalize(std::vector<TimeTag>& tags, const InstrumentChain& chain, const StreamLayout& layout) {
  std::sort(tags.begin(), tags.end(), tag_less);
  const auto dead = static_cast<std::uint64_t>(std::llround(chain.dead_time_ns * 1e3));
  if (dead == 0) return;
  std::array<std::uint64_t, 256> last{};
  std::array<bool, 256> seen{};
  std::size_t w = 0;
  for (std::size_t r = 0; r < tags.size(); ++r) {
    const auto& t = tags[r];
    if (layout.is_detector(t.channel)) {
      if (seen[t.channel] && t.time_ps - last[t.channel] < dead) continue;
      seen[t.channel] = true;
      last[t.channel] = t.time_ps;
    }
    tags[w++] = t;
  }
  tags.resize(w);
}

/// Shared driver: generate(pulse_begin, pulse_end, ideal_out) per chunk, then the chain.
template <class Generate>
TimeTagStream run_chunked(const PulseTrain& train, const InstrumentChain& chain, const StreamLayout& layout,
                          const RunOptions& opt, Generate&& generate) {
  const std::uint64_t chunk = std::max<std::uint64_t>(1, opt.chunk_pulses);
  const std::uint64_t n_chunks = (train.n_pulses + chunk - 1) / chunk;
  const std::uint64_t n_slots = dark_slot_count(layout);
  const std::uint64_t slot_chunk = 1ULL << 14;
  const std::uint64_t n_dark_chunks = chain.dark_rate_hz > 0.0 ? (n_slots + slot_chunk - 1) / slot_chunk : 0;

  std::vector<std::vector<TimeTag>> parts(n_chunks + n_dark_chunks);
  parallel_for(parts.size(), opt.threads, [&](std::size_t i) {
    if (i < n_chunks) {
      const std::uint64_t begin = i * chunk;
      const std::uint64_t end = std::min(train.n_pulses, begin + chunk);
      std::vector<IdealEvent> ideal;
      generate(begin, end, ideal);
      detect(ideal, chain, train.seed, layout, parts[i]);
    } else {
      const std::uint64_t k = i - n_chunks;
      dark_counts(chain, train.seed, layout, k * slot_chunk, std::min(n_slots, (k + 1) * slot_chunk), parts[i]);
    }
  });

  TimeTagStream s;
  s.duration_ps = layout.duration_ps;
  s.channel_count = layout.channel_count;
  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  s.tags.reserve(total);
  for (auto& p : parts) {
    s.tags.insert(s.tags.end(), p.begin(), p.end());
    std::vector<TimeTag>().swap(p);
  }
  finalize(s.tags, chain, layout);
  return s;
}

inline std::uint64_t stream_duration(const PulseTrain& train, double t1_ns, const InstrumentChain& chain,
                                     double extra_delay_ps = 0.0) {
  const double tail = std::max(train.period_ps(), 30.0 * t1_ns * 1e3) + extra_delay_ps +
                      10.0 * chain.jitter_fwhm_ps;
  return static_cast<std::uint64_t>(
      std::ceil(kStartOffsetPs + static_cast<double>(train.n_pulses) * train.period_ps() + tail));
}

inline double pulse_time(const PulseTrain& train, std::uint64_t i) {
  return kStartOffsetPs + static_cast<double>(i) * train.period_ps();
}

}  // namespace detail

/// Detector chain applied to an arbitrary ideal event list: per-event loss at eta_setup,
/// Gaussian jitter (sigma = FWHM / 2.3548), dark counts, then per-channel dead time.
inline TimeTagStream apply_instrument(std::span<const IdealEvent> events, const InstrumentChain& chain,
                                      std::uint64_t seed, const StreamLayout& layout) {
  chain.validate();
  std::vector<TimeTag> tags;
  tags.reserve(events.size());
  detail::detect(events, chain, seed, layout, tags);
  detail::dark_counts(chain, seed, layout, 0, detail::dark_slot_count(layout), tags);
  detail::finalize(tags, chain, layout);
  TimeTagStream s;
  s.duration_ps = layout.duration_ps;
  s.channel_count = layout.channel_count;
  s.tags = std::move(tags);
  return s;
}

// ---------------------------------------------------------------------------
// Lifetime (start-stop) set-up: channel 0 = laser sync, channel 1 = detector.

inline SimulationResult simulate_decay(const EmitterModel& emitter, const InstrumentChain& chain,
                                       const PulseTrain& train, const RunOptions& opt = {}) {
  emitter.validate();
  chain.validate();
  train.validate();
  SimulationResult result;
  if (train.period_ps() < 5.0 * emitter.t1_ns * 1e3)
    result.warnings.push_back("repetition period shorter than 5 T1: decay tails overlap the next pulse");

  const StreamLayout layout{detail::stream_duration(train, emitter.t1_ns, chain), 2, 0x2};
  const double t1 = emitter.t1_ns * 1e3;
  result.stream = detail::run_chunked(train, chain, layout, opt, [&](std::uint64_t b, std::uint64_t e, auto& out) {
    for (std::uint64_t i = b; i < e; ++i) {
      const double tp = detail::pulse_time(train, i);
      out.push_back({tp, 0, photon_key(i, 63)});
      KeyedRng rng(train.seed, Stage::emission, i);
      if (!rng.bernoulli(emitter.p_exc)) continue;
      const double ts = tp + rng.exponential(t1);
      if (rng.bernoulli(chain.eta_first_lens)) out.push_back({ts, 1, photon_key(i, 0)});
      if (rng.bernoulli(emitter.p_multi)) {
        const double tb = tp + rng.exponential(t1);
        if (rng.bernoulli(chain.eta_first_lens)) out.push_back({tb, 1, photon_key(i, 1)});
      }
    }
  });
  return result;
}

// ---------------------------------------------------------------------------
// HBT set-up: channels 0 and 1 are the two detectors behind a 50:50 splitter.

/// Extra-photon probability giving g2(0) = 2 p_multi / (p_exc (1 + p_multi)^2), the ratio of the
/// zero-delay to the side-peak coincidence area when the extra photon shares the signal's
/// exponential emission profile.
inline double solve_p_multi(double g2_target, double p_exc) {
  if (!(g2_target >= 0.0 && g2_target <= 1.0)) throw InputError("g2 target must lie in [0,1]");
  if (!(p_exc > 0.0 && p_exc <= 1.0)) throw InputError("p_exc must lie in (0,1]");
  if (g2_target == 0.0) return 0.0;
  const double a = g2_target * p_exc;
  if (a > 0.5) throw InputError("g2 target not reachable with at most one extra photon per pulse");
  // Smaller root of a x^2 + (2a - 2) x + a = 0.
  return ((1.0 - a) - std::sqrt(1.0 - 2.0 * a)) / a;
}

/// g2(0) produced by a given extra-photon probability (inverse of solve_p_multi).
inline double g2_from_p_multi(double p_multi, double p_exc) {
  return 2.0 * p_multi / (p_exc * (1.0 + p_multi) * (1.0 + p_multi));
}

inline SimulationResult simulate_hbt(EmitterModel emitter, const InstrumentChain& chain, const PulseTrain& train,
                                     double g2_target, const RunOptions& opt = {}) {
  emitter.p_multi = solve_p_multi(g2_target, emitter.p_exc);
  emitter.validate();
  chain.validate();
  train.validate();
  SimulationResult result;
  const StreamLayout layout{detail::stream_duration(train, emitter.t1_ns, chain), 2, 0x3};
  const double t1 = emitter.t1_ns * 1e3;
  result.stream = detail::run_chunked(train, chain, layout, opt, [&](std::uint64_t b, std::uint64_t e, auto& out) {
    for (std::uint64_t i = b; i < e; ++i) {
      KeyedRng rng(train.seed, Stage::emission, i);
      if (!rng.bernoulli(emitter.p_exc)) continue;
      const double tp = detail::pulse_time(train, i);
      const int n_photons = 1 + (rng.bernoulli(emitter.p_multi) ? 1 : 0);
      for (int k = 0; k < n_photons; ++k) {
        const double t = tp + rng.exponential(t1);
        const bool collected = rng.bernoulli(chain.eta_first_lens);
        const std::uint8_t ch = rng.bernoulli(0.5) ? 0 : 1;
        if (collected) out.push_back({t, ch, photon_key(i, static_cast<std::uint64_t>(k))});
      }
    }
  });
  return result;
}

/// Coherent-state surrogate: every pulse emits Poisson(mean_photons) independent photons,
/// each with an exponential delay of mean T1. Its g2(0) is exactly 1.
inline SimulationResult simulate_poissonian_hbt(double mean_photons, double t1_ns, const InstrumentChain& chain,
                                                const PulseTrain& train, const RunOptions& opt = {}) {
  if (!(mean_photons > 0.0) || !(t1_ns > 0.0)) throw InputError("mean photon number and T1 must be positive");
  chain.validate();
  train.validate();
  SimulationResult result;
  const StreamLayout layout{detail::stream_duration(train, t1_ns, chain), 2, 0x3};
  const double t1 = t1_ns * 1e3;
  result.stream = detail::run_chunked(train, chain, layout, opt, [&](std::uint64_t b, std::uint64_t e, auto& out) {
    for (std::uint64_t i = b; i < e; ++i) {
      KeyedRng rng(train.seed, Stage::emission, i);
      const std::uint64_t n = std::min<std::uint64_t>(rng.poisson(mean_photons), 63);
      const double tp = detail::pulse_time(train, i);
      for (std::uint64_t k = 0; k < n; ++k) {
        const double t = tp + rng.exponential(t1);
        const bool collected = rng.bernoulli(chain.eta_first_lens);
        const std::uint8_t ch = rng.bernoulli(0.5) ? 0 : 1;
        if (collected) out.push_back({t, ch, photon_key(i, k)});
      }
    }
  });
  return result;
}

// ---------------------------------------------------------------------------
// HOM set-up: path-unbalanced Mach-Zehnder, channels 0 and 1 at the output ports.

namespace detail {

struct HomPhoton {
  bool present = false;
  double delay_ps = 0.0;  ///< emission delay after the pulse
  bool long_arm = false;
};

struct HomPulse {
  HomPhoton signal;
  HomPhoton extra;
};

inline HomPulse hom_pulse(const EmitterModel& em, const InstrumentChain& chain, const MZIConfig& mzi,
                          std::uint64_t seed, std::uint64_t i) {
  HomPulse p;
  KeyedRng rng(seed, Stage::emission, i);
  if (!rng.bernoulli(em.p_exc)) return p;
  const double t1 = em.t1_ns * 1e3;
  auto draw = [&](HomPhoton& ph) {
    ph.delay_ps = rng.exponential(t1);
    ph.present = rng.bernoulli(chain.eta_first_lens);
    ph.long_arm = !rng.bernoulli(mzi.first_bs_ratio);
  };
  draw(p.signal);
  if (rng.bernoulli(em.p_multi)) draw(p.extra);
  return p;
}

/// Output ports of an interfering pair: the long-arm photon of pulse j and the short-arm
/// photon of pulse j+1. Returns {port of first, port of second}.
inline std::pair<std::uint8_t, std::uint8_t> hom_pair_ports(const EmitterModel& em, const MZIConfig& mzi,
                                                            std::uint64_t seed, std::uint64_t j,
                                                            double delay_first_ps, double delay_second_ps) {
  const double m = mzi.polarization == Polarization::HH ? 1.0 : 0.0;
  const double gamma1 = 1.0 / (em.t1_ns * 1e3);
  const double dt = delay_first_ps - delay_second_ps;
  const double overlap = std::exp(-2.0 * em.pure_dephasing_per_ps() * std::abs(dt)) *
                         std::exp(-gamma1 * std::abs(mzi.residual_offset_ns * 1e3));
  const double p_cross = 0.5 * (1.0 - m * overlap);
  KeyedRng rng(seed, Stage::interference, j);
  const bool cross = rng.bernoulli(p_cross);
  const std::uint8_t a = rng.bernoulli(0.5) ? 0 : 1;
  return cross ? std::pair<std::uint8_t, std::uint8_t>{a, static_cast<std::uint8_t>(1 - a)}
               : std::pair<std::uint8_t, std::uint8_t>{a, a};
}

}  // namespace detail

inline SimulationResult simulate_hom(const EmitterModel& emitter, const InstrumentChain& chain,
                                     const PulseTrain& train, const MZIConfig& mzi, const RunOptions& opt = {}) {
  emitter.validate();
  chain.validate();
  train.validate();
  mzi.validate();
  SimulationResult result;
  const double arm_delay = mzi.arm_delay_ns * 1e3;
  if (std::abs(arm_delay - train.period_ps()) > 0.5 * train.period_ps())
    result.warnings.push_back("arm delay far from one repetition period: successive photons do not overlap");
  const StreamLayout layout{detail::stream_duration(train, emitter.t1_ns, chain, arm_delay), 2, 0x3};
  const std::uint64_t n = train.n_pulses;
  const std::uint64_t seed = train.seed;

  result.stream = detail::run_chunked(train, chain, layout, opt, [&](std::uint64_t b, std::uint64_t e, auto& out) {
    // Pulses b-1 and e are regenerated so pairs straddling chunk borders resolve identically.
    detail::HomPulse prev = b > 0 ? detail::hom_pulse(emitter, chain, mzi, seed, b - 1) : detail::HomPulse{};
    detail::HomPulse cur = detail::hom_pulse(emitter, chain, mzi, seed, b);
    for (std::uint64_t j = b; j < e; ++j) {
      const detail::HomPulse next =
          j + 1 < n ? detail::hom_pulse(emitter, chain, mzi, seed, j + 1) : detail::HomPulse{};
      const double tp = detail::pulse_time(train, j);
      auto emit = [&](const detail::HomPhoton& ph, std::uint8_t port, std::uint64_t slot) {
        out.push_back({tp + ph.delay_ps + (ph.long_arm ? arm_delay : 0.0), port, photon_key(j, slot)});
      };
      auto free_port = [&](std::uint64_t slot) -> std::uint8_t {
        KeyedRng rng(seed, Stage::routing, photon_key(j, slot));
        return rng.bernoulli(mzi.second_bs_ratio) ? 0 : 1;
      };

      const auto& s = cur.signal;
      if (s.present) {
        std::uint8_t port;
        if (s.long_arm && next.signal.present && !next.signal.long_arm) {
          port = detail::hom_pair_ports(emitter, mzi, seed, j, s.delay_ps, next.signal.delay_ps).first;
        } else if (!s.long_arm && prev.signal.present && prev.signal.long_arm) {
          port = detail::hom_pair_ports(emitter, mzi, seed, j - 1, prev.signal.delay_ps, s.delay_ps).second;
        } else {
          port = free_port(0);
        }
        emit(s, port, 0);
      }
      if (cur.extra.present) emit(cur.extra, free_port(1), 1);
      prev = cur;
      cur = next;
    }
  });
  return result;
}

// ---------------------------------------------------------------------------
// Synthetic spectra for the polarization and linewidth estimators.

struct PolarizationSample {
  double angle_deg;
  double counts;
};

/// Counts behind a rotating linear analyzer: each pulse is detected with probability
/// p_exc * eta_total * (1 + dop cos 2(theta - theta_pol)) / 2, plus dark counts over the dwell.
inline std::vector<PolarizationSample> simulate_polarization(const EmitterModel& emitter,
                                                             const InstrumentChain& chain,
                                                             const PulseTrain& train,
                                                             std::span<const double> angles_deg) {
  emitter.validate();
  chain.validate();
  train.validate();
  std::vector<PolarizationSample> out;
  const double dwell_s = static_cast<double>(train.n_pulses) / (train.rep_rate_khz * 1e3);
  for (std::size_t a = 0; a < angles_deg.size(); ++a) {
    const double th = (angles_deg[a] - emitter.pol_angle_deg) * std::numbers::pi / 180.0;
    const double p = emitter.p_exc * chain.total_efficiency() * 0.5 * (1.0 + emitter.dop * std::cos(2.0 * th));
    KeyedRng rng(train.seed, Stage::synthetic, a);
    std::uint64_t n = rng.poisson(chain.dark_rate_hz * dwell_s);
    for (std::uint64_t i = 0; i < train.n_pulses; ++i) n += rng.bernoulli(p) ? 1 : 0;
    out.push_back({angles_deg[a], static_cast<double>(n)});
  }
  return out;
}

struct SpectrumSample {
  double energy_ev;
  double counts;
};

/// Histogram of n_photons Lorentzian-distributed photon energies on a uniform grid.
inline std::vector<SpectrumSample> simulate_spectrum(double center_ev, double fwhm_uev, std::uint64_t n_photons,
                                                     double bin_uev, double half_range_uev, std::uint64_t seed) {
  if (!(fwhm_uev > 0.0) || !(bin_uev > 0.0) || !(half_range_uev > bin_uev))
    throw InputError("invalid spectrum parameters");
  const auto n_bins = static_cast<std::size_t>(std::llround(2.0 * half_range_uev / bin_uev));
  std::vector<double> counts(n_bins, 0.0);
  const double lo = -half_range_uev;
  for (std::uint64_t i = 0; i < n_photons; ++i) {
    KeyedRng rng(seed, Stage::synthetic, i);
    const double e = 0.5 * fwhm_uev * std::tan(std::numbers::pi * (rng.uniform() - 0.5));
    const double idx = std::floor((e - lo) / bin_uev);
    if (idx >= 0.0 && idx < static_cast<double>(n_bins)) counts[static_cast<std::size_t>(idx)] += 1.0;
  }
  std::vector<SpectrumSample> out(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k)
    out[k] = {center_ev + (lo + (static_cast<double>(k) + 0.5) * bin_uev) * 1e-6, counts[k]};
  return out;
}

}  // namespace spsim::montecarlo
