#pragma once
// Independent reference computations for the tests. Nothing here calls into the
// library's numerics; each function is a direct transcription of the textbook result.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

#include "spsim/timetag.hpp"

namespace oracle {

/// Quarter-wave stack reflectivity at the design wavelength:
/// R = [(1 - (ns/n0)(nH/nL)^2N) / (1 + (ns/n0)(nH/nL)^2N)]^2.
inline double quarter_wave_reflectivity(double n0, double ns, double nh, double nl, int pairs) {
  const double y = (ns / n0) * std::pow(nh / nl, 2 * pairs);
  const double r = (1.0 - y) / (1.0 + y);
  return r * r;
}

/// Closed-form windowed HOM visibility for coincidences with |tau| <= T.
inline double hom_visibility(double t1_ns, double t2_ps, double window_half_ns) {
  const double g1 = 1.0 / t1_ns;
  const double gs = 1e3 / t2_ps - 0.5 * g1;
  const double T = window_half_ns;
  return g1 / (g1 + 2.0 * gs) * (1.0 - std::exp(-(g1 + 2.0 * gs) * T)) / (1.0 - std::exp(-g1 * T));
}

/// Composite Simpson integral of f over [a, b] with n (even) intervals.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

/// Windowed visibility by direct numerical integration of the pairwise model:
/// the delay difference of two Exp(T1) emissions has density (g1/2) e^{-g1|tau|}, and the
/// pair overlap is e^{-2 g* |tau|}.
inline double hom_visibility_numeric(double t1_ns, double t2_ps, double window_half_ns) {
  const double g1 = 1.0 / t1_ns;
  const double gs = 1e3 / t2_ps - 0.5 * g1;
  const auto pdf = [&](double t) { return 0.5 * g1 * std::exp(-g1 * std::abs(t)); };
  const double num = simpson([&](double t) { return pdf(t) * std::exp(-2.0 * gs * std::abs(t)); }, -window_half_ns,
                             window_half_ns);
  const double den = simpson(pdf, -window_half_ns, window_half_ns);
  return num / den;
}

/// All-pairs coincidence histogram: delay d = t_b - t_a in bin floor((d - min)/w).
inline std::vector<std::uint64_t> brute_force_correlate(const spsim::TimeTagStream& s, std::uint8_t a,
                                                         std::uint8_t b, std::int64_t w, std::int64_t min,
                                                         std::int64_t max) {
  std::vector<std::uint64_t> h(static_cast<std::size_t>((max - min) / w), 0);
  for (const auto& x : s.tags) {
    if (x.channel != a) continue;
    for (const auto& y : s.tags) {
      if (y.channel != b) continue;
      const std::int64_t d = static_cast<std::int64_t>(y.time_ps) - static_cast<std::int64_t>(x.time_ps);
      if (d >= min && d < max) {
        ++h[static_cast<std::size_t>((d - min) / w)];
      }
    }
  }
  return h;
}

/// Two-sided exponential h e^{-|t|/tau} convolved with a unit-area Gaussian of width sigma.
inline double two_sided_exp_gauss(double t, double h, double tau, double sigma) {
  const double a = sigma / tau;
  const double s2 = std::numbers::sqrt2;
  const double pref = 0.5 * h * std::exp(0.5 * a * a);
  return pref * (std::exp(-t / tau) * std::erfc((a - t / sigma) / s2) +
                 std::exp(t / tau) * std::erfc((a + t / sigma) / s2));
}

}  // namespace oracle
