#pragma once
// Measurements built from the correlator and the fit engine: pulsed g2(0), HOM
// visibility versus post-selection window, lifetimes and their detuning dependence,
// degree of linear polarization, linewidth and the first-lens brightness budget.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spsim/correlator.hpp"
#include "spsim/error.hpp"
#include "spsim/fitkit.hpp"
#include "spsim/optics.hpp"
#include "spsim/timetag.hpp"

namespace spsim::analysis {

using correlator::CorrelationHistogram;
using fitkit::FitResult;

namespace detail {

inline std::vector<double> centers(const CorrelationHistogram& h) {
  std::vector<double> x(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) x[k] = h.bin_center(k);
  return x;
}

inline std::vector<double> as_double(const CorrelationHistogram& h) {
  return {h.counts.begin(), h.counts.end()};
}

/// Symmetric delay range covering n_side peaks on each side plus half a period.
inline std::int64_t train_half_range(double period_ps, int n_side, std::int64_t bin_width) {
  const double half = (n_side + 0.5) * period_ps;
  return static_cast<std::int64_t>(std::ceil(half / static_cast<double>(bin_width))) * bin_width;
}

/// Starting point for an exp_train fit: heights from window sums, tau from the mean
/// absolute delay inside the windows (for e^{-|t|/tau} that mean is tau).
inline std::vector<double> train_initial(const fitkit::ExpTrain& m, const CorrelationHistogram& h, double period_ps) {
  const double w = static_cast<double>(h.bin_width_ps);
  std::vector<double> area(m.n_peaks(), 0.0);
  double moment = 0.0, weight = 0.0, floor_level = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double t = h.bin_center(k);
    const double y = static_cast<double>(h.counts[k]);
    const auto idx = static_cast<int>(std::lround(t / period_ps));
    if (idx < m.k_min() || idx > m.k_max()) continue;
    const double d = t - idx * period_ps;
    area[static_cast<std::size_t>(idx - m.k_min())] += y;
    if (idx != 0) {
      moment += y * std::abs(d);
      weight += y;
    }
    if (std::abs(std::abs(d) - 0.5 * period_ps) < w) floor_level = std::min(floor_level, y);
  }
  double tau = weight > 0.0 ? moment / weight : 0.1 * period_ps;
  tau = std::clamp(tau, w, 0.4 * period_ps);
  std::vector<double> p(fitkit::ExpTrain::first_height + m.n_peaks());
  p[fitkit::ExpTrain::c] = std::isfinite(floor_level) ? floor_level : 0.0;
  p[fitkit::ExpTrain::tau] = tau;
  p[fitkit::ExpTrain::t0] = 0.0;
  p[fitkit::ExpTrain::period] = period_ps;
  for (int k = m.k_min(); k <= m.k_max(); ++k)
    p[m.height_index(k)] = std::max(0.0, area[static_cast<std::size_t>(k - m.k_min())] * w / (2.0 * tau));
  return p;
}

inline void require_converged(const FitResult& r, const std::string& what) {
  if (!r.converged)
    throw EstimationError(what + ": fit did not converge after " + std::to_string(r.n_iterations) +
                          " iterations (reduced chi2 " + std::to_string(r.reduced_chi2) + ")");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// HBT

struct HBTResult {
  double g2_zero = 0.0;
  double g2_error = 0.0;
  double tau_fit_ns = 0.0;
  double period_fit_ps = 0.0;
  FitResult fit;
  CorrelationHistogram histogram;
};

/// Cross-correlates channels 0 and 1, fits a train of two-sided exponentials convolved
/// with the coincidence response plus a constant, and reports g2(0) = h_0 / mean(h_k, k != 0)
/// with a first-order (delta-method) error from the fit covariance. The peaks at
/// +-(n_side_peaks + 1) sit outside the range but their tails do not, so they are fitted as
/// nuisance terms; leaving them out pushes their tails into the constant.
inline HBTResult hbt_g2(const TimeTagStream& stream, const fitkit::IRFHistogram& irf, double period_ps,
                        int n_side_peaks, std::int64_t bin_width_ps = 100, unsigned threads = 1) {
  if (n_side_peaks < 4) throw InputError("hbt_g2 needs at least 4 side peaks per side");
  if (!(period_ps > 0.0)) throw InputError("period must be positive");
  if (std::abs(irf.bin_width_ps - static_cast<double>(bin_width_ps)) > 1e-9)
    throw InputError("IRF bin width differs from the histogram bin width");

  const std::int64_t half = detail::train_half_range(period_ps, n_side_peaks, bin_width_ps);
  HBTResult out;
  out.histogram = correlator::cross_correlate(stream, 0, 1, bin_width_ps, {-half, half}, threads);

  const int outer = n_side_peaks + 1;
  const fitkit::ExpTrain train(-outer, outer);
  const fitkit::Convolved model(train, irf);
  auto init = detail::train_initial(train, out.histogram, period_ps);
  double inner = 0.0;
  for (int k = 1; k <= n_side_peaks; ++k) inner += init[train.height_index(k)] + init[train.height_index(-k)];
  init[train.height_index(outer)] = init[train.height_index(-outer)] = inner / (2.0 * n_side_peaks);
  out.fit = fitkit::lm_fit_poisson(model, detail::centers(out.histogram), detail::as_double(out.histogram), init);
  detail::require_converged(out.fit, "g2 fit");

  const auto& p = out.fit.params;
  const std::size_t i0 = train.height_index(0);
  double side = 0.0;
  for (int k = -n_side_peaks; k <= n_side_peaks; ++k)
    if (k != 0) side += p[train.height_index(k)];
  const double n_side = 2.0 * n_side_peaks;
  const double mean = side / n_side;
  if (!(mean > 0.0)) throw EstimationError("side peaks have no fitted height");

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.size()));
  grad(static_cast<Eigen::Index>(i0)) = 1.0 / mean;
  for (int k = -n_side_peaks; k <= n_side_peaks; ++k)
    if (k != 0) grad(static_cast<Eigen::Index>(train.height_index(k))) = -p[i0] / (mean * mean * n_side);
  out.g2_zero = std::max(0.0, p[i0] / mean);
  out.g2_error = std::sqrt(std::max(0.0, grad.dot(out.fit.covariance * grad)));
  out.tau_fit_ns = p[fitkit::ExpTrain::tau] * 1e-3;
  out.period_fit_ps = p[fitkit::ExpTrain::period];
  return out;
}

// ---------------------------------------------------------------------------
// HOM

struct HOMWindow {
  double window_ns;
  double area_hh;
  double area_hv;
  double g2_hh;
  double g2_hv;
  double visibility;
  double visibility_error;
  double ci_low;
  double ci_high;
};

struct HOMResult {
  std::vector<HOMWindow> windows;
  double t0_hh_ps = 0.0, t0_hv_ps = 0.0;
  double period_hh_ps = 0.0, period_hv_ps = 0.0;
  CorrelationHistogram histogram_hh, histogram_hv;
};

/// Visibility 1 - g2_hh / g2_hv and its 1-sigma Poisson error; exact at the identities
/// (equal ratios give 0, an empty HH center gives 1).
struct VisibilityEstimate {
  double value;
  double error;
};

struct PeakRatio {
  double central;
  double far_sum;
  int n_far;

  double g2() const { return central / (far_sum / n_far); }
  /// Poisson variance of g2, counting an empty window as one count.
  double variance() const {
    const double m = far_sum / n_far;
    return (std::max(central, 1.0) + central * central * std::max(far_sum, 1.0) / (far_sum * far_sum)) / (m * m);
  }
};

inline VisibilityEstimate visibility(const PeakRatio& hh, const PeakRatio& hv) {
  if (!(hv.central > 0.0)) throw EstimationError("HV central peak is empty: visibility undefined");
  const double ghh = hh.g2();
  const double ghv = hv.g2();
  const double v = (ghv - ghh) / ghv;
  const double var = hh.variance() / (ghv * ghv) + ghh * ghh * hv.variance() / (ghv * ghv * ghv * ghv);
  return {v, std::sqrt(var)};
}

namespace detail {

struct PeakFrame {
  double t0;
  double period;
};

/// Peak positions of a correlation train from an exp_train fit on a coarse histogram.
inline PeakFrame fit_peak_frame(const TimeTagStream& s, double period_ps, int n_side, unsigned threads) {
  constexpr std::int64_t coarse = 100;
  const std::int64_t half = train_half_range(period_ps, n_side, coarse);
  const auto h = correlator::cross_correlate(s, 0, 1, coarse, {-half, half}, threads);
  const fitkit::ExpTrain train(-n_side, n_side);
  const auto init = train_initial(train, h, period_ps);
  const auto r = fitkit::lm_fit_poisson(train, centers(h), as_double(h), init);
  require_converged(r, "peak position fit");
  return {r.params[fitkit::ExpTrain::t0], r.params[fitkit::ExpTrain::period]};
}

inline PeakRatio peak_ratio(const CorrelationHistogram& h, const PeakFrame& f, double window_ps) {
  const auto peaks = correlator::integrate_peaks(h, f.period, window_ps, f.t0);
  PeakRatio r{0.0, 0.0, 0};
  bool have_center = false;
  for (const auto& p : peaks) {
    if (!p.complete) continue;
    if (p.index == 0) {
      r.central = p.area;
      have_center = true;
    } else if (std::abs(p.index) >= 2) {
      r.far_sum += p.area;
      ++r.n_far;
    }
  }
  if (!have_center || r.n_far < 2) throw EstimationError("histogram range too short for HOM peak analysis");
  if (!(r.far_sum > 0.0)) throw EstimationError("side peaks are empty");
  return r;
}

}  // namespace detail

/// Central peak versus the mean of the side peaks with |k| >= 2 (the +-1 peaks of an
/// unbalanced interferometer carry extra same-pulse coincidences), per window, for both
/// polarization settings. Windows are centered on fitted peak positions.
inline HOMResult hom_visibility(const TimeTagStream& stream_hh, const TimeTagStream& stream_hv, double period_ps,
                                std::span<const double> windows_ns, std::int64_t bin_width_ps = 10,
                                int n_side_peaks = 5, unsigned threads = 1) {
  if (windows_ns.empty()) throw InputError("no post-selection windows given");
  if (n_side_peaks < 3) throw InputError("HOM analysis needs at least 3 side peaks per side");
  HOMResult out;
  const auto f_hh = detail::fit_peak_frame(stream_hh, period_ps, n_side_peaks, threads);
  const auto f_hv = detail::fit_peak_frame(stream_hv, period_ps, n_side_peaks, threads);
  out.t0_hh_ps = f_hh.t0;
  out.t0_hv_ps = f_hv.t0;
  out.period_hh_ps = f_hh.period;
  out.period_hv_ps = f_hv.period;
  const std::int64_t half = detail::train_half_range(period_ps, n_side_peaks, bin_width_ps);
  out.histogram_hh = correlator::cross_correlate(stream_hh, 0, 1, bin_width_ps, {-half, half}, threads);
  out.histogram_hv = correlator::cross_correlate(stream_hv, 0, 1, bin_width_ps, {-half, half}, threads);
  for (double w : windows_ns) {
    if (!(w > 0.0)) throw InputError("window must be positive");
    const auto hh = detail::peak_ratio(out.histogram_hh, f_hh, w * 1e3);
    const auto hv = detail::peak_ratio(out.histogram_hv, f_hv, w * 1e3);
    const auto v = visibility(hh, hv);
    out.windows.push_back({w, hh.central, hv.central, hh.g2(), hv.g2(), v.value, v.error, v.value - v.error,
                           v.value + v.error});
  }
  return out;
}

enum class DephasingMode { lifetime, window };

struct DephasingEstimate {
  double t2_ps;
  DephasingMode mode;
};

/// T2 = 2 * timescale * V, the timescale being T1 or the post-selection window width.
inline DephasingEstimate dephasing_estimate(double v, double timescale_ns, DephasingMode mode) {
  if (!(v > 0.0) || v > 1.0) throw DomainError("visibility must lie in (0, 1]");
  if (!(timescale_ns > 0.0)) throw DomainError("timescale must be positive");
  return {2.0 * timescale_ns * v * 1e3, mode};
}

// ---------------------------------------------------------------------------
// Lifetimes

struct LifetimeResult {
  double tau_ns = 0.0;
  double tau_error_ns = 0.0;
  double t_peak_ps = 0.0;
  FitResult fit;
};

/// Single-exponential fit to the decay tail of a start-stop histogram. The fit starts
/// `skip_ns` after the histogram maximum, clear of the instrument response, and stops
/// `skip_ns` before the end of the range, where early photons of the next pulse pile up.
/// Decay tails wrapping into later periods keep the same exponential shape.
inline LifetimeResult fit_lifetime(const CorrelationHistogram& h, double skip_ns = 1.0) {
  if (h.total() == 0) throw EstimationError("empty lifetime histogram");
  const auto kmax = static_cast<std::size_t>(std::max_element(h.counts.begin(), h.counts.end()) - h.counts.begin());
  LifetimeResult out;
  out.t_peak_ps = h.bin_center(kmax);
  const double t_begin = out.t_peak_ps + skip_ns * 1e3;
  const double t_end = static_cast<double>(h.max_delay_ps) - skip_ns * 1e3;
  std::vector<double> x, y;
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double t = h.bin_center(k);
    if (t >= t_begin && t < t_end) {
      x.push_back(t);
      y.push_back(static_cast<double>(h.counts[k]));
    }
  }
  if (x.size() < 10) throw EstimationError("lifetime fit range holds fewer than 10 bins");

  // Start values: tail level from the last tenth, slope from the first and middle thirds.
  const std::size_t n = x.size();
  auto mean_of = [&](std::size_t a, std::size_t b) {
    return std::accumulate(y.begin() + static_cast<std::ptrdiff_t>(a), y.begin() + static_cast<std::ptrdiff_t>(b), 0.0) /
           static_cast<double>(b - a);
  };
  const double c0 = 0.5 * mean_of(n - std::max<std::size_t>(n / 10, 1), n);
  const double y1 = std::max(mean_of(0, n / 6 + 1) - c0, 1.0);
  const double y2 = std::max(mean_of(n / 3, n / 3 + n / 6 + 1) - c0, 0.5);
  const double dt = x[n / 3 + n / 12] - x[n / 12];
  double tau0 = y1 > y2 ? dt / std::log(y1 / y2) : 0.25 * (x.back() - x.front());
  tau0 = std::clamp(tau0, 10.0 * static_cast<double>(h.bin_width_ps), 10.0 * (x.back() - x.front()));

  fitkit::ExpDecay model;
  std::vector<double> init(4);
  init[fitkit::ExpDecay::A] = std::max(y.front() - c0, 1.0);
  init[fitkit::ExpDecay::tau] = tau0;
  init[fitkit::ExpDecay::t0] = x.front();
  init[fitkit::ExpDecay::c] = c0;
  fitkit::FitOptions opt;
  opt.fixed = {false, false, true, false};
  out.fit = fitkit::lm_fit_poisson(model, std::move(x), std::move(y), init, opt);
  detail::require_converged(out.fit, "lifetime fit");
  out.tau_ns = out.fit.value("tau") * 1e-3;
  out.tau_error_ns = out.fit.error("tau") * 1e-3;
  return out;
}

/// Start-stop histogram over one repetition period followed by fit_lifetime.
inline LifetimeResult lifetime_from_stream(const TimeTagStream& stream, double period_ps, std::uint8_t sync_ch = 0,
                                           std::uint8_t signal_ch = 1, std::int64_t bin_width_ps = 16,
                                           CorrelationHistogram* histogram = nullptr) {
  const auto range = static_cast<std::int64_t>(std::floor(period_ps / static_cast<double>(bin_width_ps))) * bin_width_ps;
  auto h = correlator::start_stop(stream, sync_ch, signal_ch, bin_width_ps, range);
  auto r = fit_lifetime(h);
  if (histogram) *histogram = std::move(h);
  return r;
}

struct DetuningPoint {
  double detuning_mev;
  double lifetime_ns;
  double lifetime_error_ns;
};

using DetuningSeries = std::vector<DetuningPoint>;

/// tau(delta) = 1 / (gamma_free [F_inh + (F_res - F_inh) kappa^2 / (kappa^2 + 4 delta^2)]),
/// parameters (F_res, F_inh, kappa), gamma_free held fixed.
class DetunedLifetime : public fitkit::PointwiseModel<DetunedLifetime> {
 public:
  enum : std::size_t { f_res, f_inh, kappa };
  explicit DetunedLifetime(double gamma_free) : gamma_free_(gamma_free) {}

  std::vector<std::string> names() const { return {"F_res", "F_inh", "kappa"}; }
  std::vector<fitkit::Transform> default_transforms() const {
    return std::vector<fitkit::Transform>(3, fitkit::Transform::log);
  }
  double value(double d, std::span<const double> p) const {
    const double k2 = p[kappa] * p[kappa];
    const double l = k2 / (k2 + 4.0 * d * d);
    return 1.0 / (gamma_free_ * (p[f_inh] + (p[f_res] - p[f_inh]) * l));
  }
  void gradient(double d, std::span<const double> p, std::span<double> g) const {
    const double k2 = p[kappa] * p[kappa];
    const double den = k2 + 4.0 * d * d;
    const double l = k2 / den;
    const double tau = value(d, p);
    const double s = -tau * tau * gamma_free_;
    g[f_res] = s * l;
    g[f_inh] = s * (1.0 - l);
    g[kappa] = s * (p[f_res] - p[f_inh]) * 8.0 * p[kappa] * d * d / (den * den);
  }

 private:
  double gamma_free_;
};

struct DetuningFit {
  optics::DetunedDecayModel model{};
  double f_res_error = 0.0;
  double f_inh_error = 0.0;
  double kappa_error_mev = 0.0;
  double ratio = 0.0;  ///< F_res / F_inh
  double ratio_error = 0.0;
  bool ill_conditioned = false;
  std::vector<std::string> warnings;
  FitResult fit;
};

inline DetuningFit lifetime_vs_detuning(const DetuningSeries& series, double gamma_free_per_ns) {
  if (series.size() < 4) throw InputError("need at least 4 detuning points");
  if (!(gamma_free_per_ns > 0.0)) throw InputError("free-space decay rate must be positive");
  fitkit::FitData data;
  bool below = false, above = false;
  for (const auto& p : series) {
    if (!(p.lifetime_ns > 0.0) || !(p.lifetime_error_ns > 0.0))
      throw InputError("lifetimes and their errors must be positive");
    data.x.push_back(p.detuning_mev);
    data.y.push_back(p.lifetime_ns);
    data.w.push_back(1.0 / (p.lifetime_error_ns * p.lifetime_error_ns));
    below |= p.detuning_mev < 0.0;
    above |= p.detuning_mev > 0.0;
  }
  DetuningFit out;
  if (!(below && above)) {
    out.ill_conditioned = true;
    out.warnings.push_back("all detunings lie on one side of resonance: kappa and F_res are poorly constrained");
  }

  auto by_abs = series;
  std::sort(by_abs.begin(), by_abs.end(),
            [](const auto& a, const auto& b) { return std::abs(a.detuning_mev) < std::abs(b.detuning_mev); });
  const double fr0 = 1.0 / (gamma_free_per_ns * by_abs.front().lifetime_ns);
  const double fi0 = 1.0 / (gamma_free_per_ns * by_abs.back().lifetime_ns);
  std::vector<double> kappas;
  for (const auto& p : series) {
    const double l = (1.0 / (gamma_free_per_ns * p.lifetime_ns) - fi0) / (fr0 - fi0);
    if (l > 0.1 && l < 0.9) kappas.push_back(2.0 * std::abs(p.detuning_mev) * std::sqrt(l / (1.0 - l)));
  }
  double k0 = std::abs(by_abs.back().detuning_mev) / 5.0;
  if (!kappas.empty()) {
    std::nth_element(kappas.begin(), kappas.begin() + static_cast<std::ptrdiff_t>(kappas.size() / 2), kappas.end());
    k0 = kappas[kappas.size() / 2];
  }
  if (!(k0 > 0.0)) k0 = 1.0;

  const DetunedLifetime model(gamma_free_per_ns);
  std::vector<double> init{fr0, fi0, k0};
  try {
    out.fit = fitkit::lm_fit(model, data, init);
  } catch (const RankDeficiencyError& e) {
    out.ill_conditioned = true;
    out.warnings.push_back(std::string("ill-conditioned: ") + e.what() + "; kappa held at its start value");
    fitkit::FitOptions opt;
    opt.fixed = {false, false, true};
    try {
      out.fit = fitkit::lm_fit(model, data, init, opt);
    } catch (const RankDeficiencyError&) {
      // Flat series: F_res and F_inh collapse onto one rate.
      init[DetunedLifetime::f_res] = init[DetunedLifetime::f_inh] = 0.5 * (fr0 + fi0);
      opt.fixed = {false, true, true};
      out.fit = fitkit::lm_fit(model, data, init, opt);
    }
  }
  detail::require_converged(out.fit, "detuning fit");
  const auto& p = out.fit.params;
  out.model = {gamma_free_per_ns, p[0], p[1], p[2]};
  out.f_res_error = out.fit.std_errors[0];
  out.f_inh_error = out.fit.std_errors[1];
  out.kappa_error_mev = out.fit.std_errors[2];
  out.ratio = p[0] / p[1];
  const auto& c = out.fit.covariance;
  const double g0 = 1.0 / p[1], g1 = -p[0] / (p[1] * p[1]);
  out.ratio_error = std::sqrt(std::max(0.0, g0 * g0 * c(0, 0) + 2.0 * g0 * g1 * c(0, 1) + g1 * g1 * c(1, 1)));
  if (!out.ill_conditioned && out.kappa_error_mev > p[2]) {
    out.ill_conditioned = true;
    out.warnings.push_back("kappa uncertainty exceeds its value: series does not resolve the resonance");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Polarization

struct DopResult {
  double rho = 0.0;
  double rho_error = 0.0;
  double theta0_deg = 0.0;  ///< NaN when undefined
  double theta0_error_deg = 0.0;
  bool theta0_defined = true;
  std::optional<FitResult> fit;
};

/// Malus fit I(theta) = I0 (1 + rho cos 2(theta - theta0)) / 2. The background term is not
/// separable from I0 and rho, so it is held at zero; rho is reported as
/// (I_max - I_min)/(I_max + I_min) of the fitted curve, theta0 folded into [0, 180).
inline DopResult dop_fit(std::span<const double> angles_deg, std::span<const double> intensities) {
  if (angles_deg.size() != intensities.size()) throw InputError("angles and intensities differ in length");
  if (angles_deg.size() < 8) throw InputError("need at least 8 analyzer angles");
  const auto [amin, amax] = std::minmax_element(angles_deg.begin(), angles_deg.end());
  if (*amax - *amin < 180.0 - 1e-9 - 180.0 / static_cast<double>(angles_deg.size()))
    throw InputError("analyzer angles must span at least 180 degrees");
  const auto [imin, imax] = std::minmax_element(intensities.begin(), intensities.end());
  DopResult out;
  if (*imax == *imin) {
    out.rho = 0.0;
    out.theta0_deg = std::numeric_limits<double>::quiet_NaN();
    out.theta0_defined = false;
    return out;
  }
  const double i0 = *imax + *imin;
  const std::vector<double> init{i0, (*imax - *imin) / i0,
                                 angles_deg[static_cast<std::size_t>(imax - intensities.begin())], 0.0};
  fitkit::FitOptions opt;
  opt.fixed = {false, false, false, true};
  const fitkit::Malus model;
  auto fit = fitkit::lm_fit_poisson(model, {angles_deg.begin(), angles_deg.end()},
                                    {intensities.begin(), intensities.end()}, init, opt);
  detail::require_converged(fit, "polarization fit");
  double rho = fit.value("rho");
  double theta = fit.value("theta0");
  if (rho < 0.0) {
    rho = -rho;
    theta += 90.0;
  }
  theta = std::fmod(theta, 180.0);
  if (theta < 0.0) theta += 180.0;
  out.rho = rho;
  out.rho_error = fit.error("rho");
  out.theta0_deg = theta;
  out.theta0_error_deg = fit.error("theta0");
  out.fit = std::move(fit);
  return out;
}

// ---------------------------------------------------------------------------
// Brightness budget

struct BudgetEntry {
  std::string label;
  double efficiency;  ///< fraction
  double abs_error;   ///< fraction
};

struct BudgetTable {
  std::vector<BudgetEntry> entries;
  double measured_rate_khz = 0.0;
  double measured_rate_error_khz = 0.0;
  double rep_rate_khz = 0.0;
  double rep_rate_error_khz = 0.0;
};

struct BudgetResult {
  double total_efficiency;
  double total_efficiency_error;
  double corrected_rate_per_pulse;  ///< detected photons per excitation pulse
  double brightness;
  double brightness_error;
};

/// Total efficiency is the product of the entries; relative errors add in quadrature.
/// First-lens brightness = measured rate / (rep rate * total efficiency).
inline BudgetResult brightness_budget(const BudgetTable& b) {
  if (b.entries.empty()) throw InputError("budget has no entries");
  if (!(b.measured_rate_khz > 0.0) || !(b.rep_rate_khz > 0.0)) throw InputError("rates must be positive");
  if (b.measured_rate_error_khz < 0.0 || b.rep_rate_error_khz < 0.0) throw InputError("rate errors must be >= 0");
  double total = 1.0, rel2 = 0.0;
  for (const auto& e : b.entries) {
    if (e.efficiency == 0.0) throw DomainError("budget entry '" + e.label + "' has zero efficiency");
    if (!(e.efficiency > 0.0 && e.efficiency <= 1.0)) throw InputError("budget entry '" + e.label + "' outside (0, 1]");
    if (e.abs_error < 0.0) throw InputError("budget entry '" + e.label + "' has a negative error");
    total *= e.efficiency;
    rel2 += (e.abs_error / e.efficiency) * (e.abs_error / e.efficiency);
  }
  const double per_pulse = b.measured_rate_khz / b.rep_rate_khz;
  const double bright = per_pulse / total;
  const double rr = b.measured_rate_error_khz / b.measured_rate_khz;
  const double rp = b.rep_rate_error_khz / b.rep_rate_khz;
  return {total, total * std::sqrt(rel2), per_pulse, bright, bright * std::sqrt(rel2 + rr * rr + rp * rp)};
}

/// Non-paralyzable dead-time correction R / (1 - R t_d).
inline double deadtime_correct(double measured_rate_khz, double dead_time_ns) {
  if (measured_rate_khz < 0.0 || dead_time_ns < 0.0) throw InputError("rate and dead time must be non-negative");
  const double x = measured_rate_khz * dead_time_ns * 1e-6;
  if (x >= 1.0) throw DomainError("detector saturated: rate times dead time >= 1");
  return measured_rate_khz / (1.0 - x);
}

// ---------------------------------------------------------------------------
// Linewidth

struct LinewidthResult {
  double gamma_uev = 0.0;
  double gamma_error_uev = 0.0;
  double center_ev = 0.0;
  double bin_uev = 0.0;
  bool resolution_limited = false;
  FitResult fit;
};

/// Lorentzian fit on a uniform energy grid (eV). Flags widths below two bins.
inline LinewidthResult linewidth(std::span<const double> energy_ev, std::span<const double> counts) {
  if (energy_ev.size() != counts.size()) throw InputError("energy and counts differ in length");
  if (energy_ev.size() < 8) throw InputError("spectrum needs at least 8 points");
  const double e_ref = energy_ev[energy_ev.size() / 2];
  std::vector<double> x(energy_ev.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = (energy_ev[i] - e_ref) * 1e6;
  const double bin = std::abs(x[1] - x[0]);

  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  if (*hi == *lo) throw EstimationError("flat spectrum: no peak to fit");
  std::vector<double> sorted(counts.begin(), counts.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 4), sorted.end());
  const double c0 = sorted[sorted.size() / 4];
  const std::size_t imax = static_cast<std::size_t>(hi - counts.begin());
  const double a0 = *hi - c0;
  const auto above = std::count_if(counts.begin(), counts.end(), [&](double v) { return v - c0 >= 0.5 * a0; });
  const std::vector<double> init{a0, x[imax], std::max(1.0, static_cast<double>(above)) * bin, c0};

  LinewidthResult out;
  try {
    out.fit = fitkit::lm_fit_poisson(fitkit::Lorentzian{}, x, {counts.begin(), counts.end()}, init);
  } catch (const FitError& e) {
    throw EstimationError(std::string("linewidth fit failed: ") + e.what());
  }
  detail::require_converged(out.fit, "linewidth fit");
  const double a = out.fit.value("A");
  if (!(a > 3.0 * out.fit.error("A"))) throw EstimationError("linewidth fit did not find a significant peak");
  out.gamma_uev = out.fit.value("gamma");
  out.gamma_error_uev = out.fit.error("gamma");
  out.center_ev = e_ref + out.fit.value("E0") * 1e-6;
  out.bin_uev = bin;
  out.resolution_limited = out.gamma_uev < 2.0 * bin;
  return out;
}

}  // namespace spsim::analysis
