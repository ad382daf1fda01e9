#pragma once
// Passive cavity model: thin-film mirror stacks, plano-concave resonator modes,
// Gaussian mode geometry and the detuning-dependent emitter decay rate.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "spsim/error.hpp"

namespace spsim::optics {

using complex = std::complex<double>;

/// h*c in eV*nm.
inline constexpr double kHcEvNm = 1239.84198;

struct Layer {
  complex index;        ///< n + i k, k >= 0 for absorbing media
  double thickness_nm;
};

/// Layers are ordered from the ambient (incidence) side towards the substrate.
struct LayerStack {
  double ambient_index = 1.0;
  std::vector<Layer> layers;
  double substrate_index = 1.5;

  void validate() const {
    if (!(ambient_index > 0.0) || !(substrate_index > 0.0))
      throw InputError("stack indices must be positive");
    for (const auto& l : layers) {
      if (!(l.thickness_nm > 0.0)) throw InputError("layer thickness must be positive");
      if (l.index.imag() < 0.0) throw InputError("layer index must have Im(n) >= 0");
      if (!(l.index.real() > 0.0)) throw InputError("layer index must have Re(n) > 0");
    }
  }

  /// The same stack seen from the substrate side.
  LayerStack reversed() const {
    LayerStack r{substrate_index, layers, ambient_index};
    std::reverse(r.layers.begin(), r.layers.end());
    return r;
  }
};

struct Reflectance {
  double wavelength_nm;
  complex r;  ///< amplitude reflection coefficient
  double R;   ///< power reflectivity
  double T;   ///< power transmission into the substrate
};

/// Normal-incidence response of a single wavelength via the 2x2 characteristic matrix.
inline Reflectance reflectance_at(const LayerStack& stack, double wavelength_nm) {
  if (!(wavelength_nm > 0.0)) throw InputError("wavelength must be positive");
  // The characteristic-matrix form below uses the N = n - ik convention.
  complex m11{1.0, 0.0}, m12{0.0, 0.0}, m21{0.0, 0.0}, m22{1.0, 0.0};
  const complex i{0.0, 1.0};
  for (const auto& layer : stack.layers) {
    const complex n = std::conj(layer.index);
    const complex delta = 2.0 * std::numbers::pi * n * layer.thickness_nm / wavelength_nm;
    const complex c = std::cos(delta);
    const complex s = std::sin(delta);
    const complex a11 = c, a12 = i * s / n, a21 = i * n * s, a22 = c;
    const complex b11 = m11 * a11 + m12 * a21;
    const complex b12 = m11 * a12 + m12 * a22;
    const complex b21 = m21 * a11 + m22 * a21;
    const complex b22 = m21 * a12 + m22 * a22;
    m11 = b11, m12 = b12, m21 = b21, m22 = b22;
  }
  const double eta0 = stack.ambient_index;
  const double etas = stack.substrate_index;
  const complex B = m11 + m12 * etas;
  const complex C = m21 + m22 * etas;
  const complex denom = eta0 * B + C;
  const complex r = (eta0 * B - C) / denom;
  const double T = 4.0 * eta0 * etas / std::norm(denom);
  return {wavelength_nm, r, std::norm(r), T};
}

inline std::vector<Reflectance> dbr_reflectivity(const LayerStack& stack,
                                                 std::span<const double> wavelengths_nm) {
  stack.validate();
  std::vector<Reflectance> out;
  out.reserve(wavelengths_nm.size());
  for (double wl : wavelengths_nm) out.push_back(reflectance_at(stack, wl));
  return out;
}

/// Evenly spaced wavelength grid, inclusive of both ends.
inline std::vector<double> wavelength_grid(double min_nm, double max_nm, double step_nm) {
  if (!(step_nm > 0.0) || !(max_nm >= min_nm)) throw InputError("invalid wavelength grid");
  const auto n = static_cast<std::size_t>(std::floor((max_nm - min_nm) / step_nm + 1e-9)) + 1;
  std::vector<double> g(n);
  for (std::size_t k = 0; k < n; ++k) g[k] = min_nm + static_cast<double>(k) * step_nm;
  return g;
}

/// (HL)^pairs Bragg mirror, high-index layer facing the ambient medium.
inline LayerStack bragg_stack(complex n_high, double d_high_nm, complex n_low, double d_low_nm,
                              int pairs, double ambient = 1.0, double substrate = 1.5) {
  if (pairs < 0) throw InputError("pair count must be non-negative");
  LayerStack s{ambient, {}, substrate};
  for (int p = 0; p < pairs; ++p) {
    s.layers.push_back({n_high, d_high_nm});
    s.layers.push_back({n_low, d_low_nm});
  }
  return s;
}

/// The bottom mirror of the device: 10 x TiO2(85 nm)/SiO2(131 nm) on glass.
inline LayerStack device_bottom_mirror() {
  return bragg_stack(2.28, 85.0, 1.45, 131.0, 10, 1.0, 1.5);
}

struct StopBand {
  double center_nm;     ///< wavelength of maximal R on the scan grid
  double peak_R;
  double lower_edge_nm; ///< nearest wavelengths where R falls below half of peak_R
  double upper_edge_nm;
};

inline StopBand find_stopband(const LayerStack& stack, double min_nm, double max_nm,
                              double step_nm = 0.05) {
  const auto grid = wavelength_grid(min_nm, max_nm, step_nm);
  const auto spec = dbr_reflectivity(stack, grid);
  std::size_t best = 0;
  for (std::size_t k = 1; k < spec.size(); ++k)
    if (spec[k].R > spec[best].R) best = k;
  std::size_t lo = best, hi = best;
  const double half = 0.5 * spec[best].R;
  while (lo > 0 && spec[lo - 1].R >= half) --lo;
  while (hi + 1 < spec.size() && spec[hi + 1].R >= half) ++hi;
  return {spec[best].wavelength_nm, spec[best].R, spec[lo].wavelength_nm, spec[hi].wavelength_nm};
}

// ---------------------------------------------------------------------------
// Tabulated complex index (gold). Columns: wavelength_nm n k; '#' comments.

class IndexTable {
 public:
  IndexTable() = default;
  explicit IndexTable(std::vector<std::array<double, 3>> rows) : rows_(std::move(rows)) {
    if (rows_.size() < 2) throw InputError("index table needs at least two rows");
    std::sort(rows_.begin(), rows_.end(), [](auto& a, auto& b) { return a[0] < b[0]; });
    for (std::size_t k = 1; k < rows_.size(); ++k)
      if (!(rows_[k][0] > rows_[k - 1][0])) throw InputError("duplicate wavelength in index table");
  }

  static IndexTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open index table: " + path);
    return parse(in, path);
  }

  static IndexTable parse(std::istream& in, const std::string& name = "<stream>") {
    std::vector<std::array<double, 3>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      std::istringstream ls(line);
      std::array<double, 3> row{};
      std::string extra;
      if (!(ls >> row[0] >> row[1] >> row[2]) || (ls >> extra))
        throw ConfigError(name + ": expected 'wavelength_nm n k'", lineno);
      if (!(row[0] > 0.0) || row[2] < 0.0)
        throw ConfigError(name + ": wavelength must be > 0 and k >= 0", lineno);
      rows.push_back(row);
    }
    return IndexTable(std::move(rows));
  }

  double min_nm() const { return rows_.front()[0]; }
  double max_nm() const { return rows_.back()[0]; }

  /// Linear interpolation; outside the tabulated range is an input error.
  complex at(double wavelength_nm) const {
    if (rows_.empty()) throw InputError("empty index table");
    if (wavelength_nm < min_nm() || wavelength_nm > max_nm())
      throw InputError("wavelength " + std::to_string(wavelength_nm) + " nm outside index table");
    auto it = std::lower_bound(rows_.begin(), rows_.end(), wavelength_nm,
                               [](const auto& r, double w) { return r[0] < w; });
    if (it == rows_.begin()) return {(*it)[1], (*it)[2]};
    const auto& b = *it;
    const auto& a = *(it - 1);
    const double f = (wavelength_nm - a[0]) / (b[0] - a[0]);
    return {a[1] + f * (b[1] - a[1]), a[2] + f * (b[2] - a[2])};
  }

 private:
  std::vector<std::array<double, 3>> rows_;
};

// ---------------------------------------------------------------------------
// Plano-concave resonator

struct CavityGeometry {
  double length_um;        ///< mirror separation L
  double radius_um;        ///< top-mirror radius of curvature R (may be +inf)
  double lens_diameter_um;
  double lens_depth_nm;
  double wavelength_ref_nm;

  void validate() const {
    if (!(length_um > 0.0)) throw GeometryError("cavity length must be positive");
    if (!(length_um < radius_um))
      throw GeometryError("unstable resonator: need L < R (L = " + std::to_string(length_um) +
                          " um, R = " + std::to_string(radius_um) + " um)");
    if (lens_diameter_um > 0.0 && !(lens_depth_nm * 1e-3 < lens_diameter_um / 2.0))
      throw GeometryError("lens depth must be below half the lens diameter");
  }
};

/// R = (a^2 + h^2) / 2h with a = diameter/2, for a spherical cap of given depth.
inline double roc_from_spherical_cap(double diameter_um, double depth_nm) {
  const double h = depth_nm * 1e-3;
  const double a = diameter_um / 2.0;
  if (!(h > 0.0) || !(diameter_um > 0.0)) throw GeometryError("cap diameter and depth must be positive");
  if (h > a) throw GeometryError("cap deeper than a hemisphere");
  return (a * a + h * h) / (2.0 * h);
}

inline CavityGeometry cavity_from_cap(double length_um, double diameter_um, double depth_nm,
                                      double wavelength_ref_nm) {
  CavityGeometry g{length_um, roc_from_spherical_cap(diameter_um, depth_nm), diameter_um, depth_nm,
                   wavelength_ref_nm};
  g.validate();
  return g;
}

struct Mode {
  int longitudinal_index;
  int transverse_order;
  double energy_ev;
};

struct ModeSpectrum {
  std::vector<Mode> modes;  ///< sorted by energy
  double longitudinal_spacing_mev;
  double transverse_spacing_mev;
};

/// hc/2L for an air gap.
inline double longitudinal_spacing_mev(double length_um) {
  if (!(length_um > 0.0)) throw GeometryError("cavity length must be positive");
  return 1e3 * kHcEvNm / (2.0 * length_um * 1e3);
}

/// Gouy phase of the plano-concave resonator divided by pi, in (0, 1/2].
inline double gouy_fraction(const CavityGeometry& g) {
  g.validate();
  return std::acos(std::sqrt(1.0 - g.length_um / g.radius_um)) / std::numbers::pi;
}

inline ModeSpectrum cavity_mode_spectrum(const CavityGeometry& g, double e_min_ev, double e_max_ev,
                                         int max_transverse_order = 2) {
  g.validate();
  if (!(e_max_ev > e_min_ev) || !(e_min_ev >= 0.0)) throw InputError("invalid energy window");
  if (max_transverse_order < 0) throw InputError("negative transverse order");
  const double dl = longitudinal_spacing_mev(g.length_um) * 1e-3;
  const double gouy = gouy_fraction(g);
  ModeSpectrum spec{{}, dl * 1e3, dl * gouy * 1e3};
  const int q_lo = std::max(1, static_cast<int>(std::floor(e_min_ev / dl)) - max_transverse_order - 1);
  const int q_hi = static_cast<int>(std::ceil(e_max_ev / dl)) + 1;
  for (int q = q_lo; q <= q_hi; ++q)
    for (int t = 0; t <= max_transverse_order; ++t) {
      const double e = dl * (q + (t + 1) * gouy);
      if (e >= e_min_ev && e <= e_max_ev) spec.modes.push_back({q, t, e});
    }
  std::sort(spec.modes.begin(), spec.modes.end(),
            [](const Mode& a, const Mode& b) { return a.energy_ev < b.energy_ev; });
  return spec;
}

struct GaussianWaist {
  double w0_um;
  double mode_diameter_um;
};

/// w0^2 = (lambda L / pi) sqrt(R/L - 1); infinite for a planar top mirror.
inline GaussianWaist gaussian_waist(const CavityGeometry& g, double wavelength_nm) {
  g.validate();
  if (!(wavelength_nm > 0.0)) throw InputError("wavelength must be positive");
  if (std::isinf(g.radius_um)) {
    const double inf = std::numeric_limits<double>::infinity();
    return {inf, inf};
  }
  const double lambda_um = wavelength_nm * 1e-3;
  const double w0sq = lambda_um * g.length_um / std::numbers::pi * std::sqrt(g.radius_um / g.length_um - 1.0);
  const double w0 = std::sqrt(w0sq);
  return {w0, 2.0 * w0};
}

/// Effective volume of the fundamental standing-wave Gaussian mode, pi w0^2 L / 4.
inline double mode_volume_um3(const CavityGeometry& g, double wavelength_nm) {
  const auto w = gaussian_waist(g, wavelength_nm);
  return std::numbers::pi * w.w0_um * w.w0_um * g.length_um / 4.0;
}

/// Diagnostic Purcell factor xi * (3/4pi^2) (lambda/n)^3 Q / V. The overlap xi in [0,1]
/// accounts for the emitter sitting away from the field antinode.
inline double purcell_from_mode_volume(const CavityGeometry& g, double wavelength_nm, double q_factor,
                                       double overlap_xi, double medium_index = 1.0) {
  if (overlap_xi < 0.0 || overlap_xi > 1.0) throw InputError("overlap factor must lie in [0,1]");
  if (!(q_factor > 0.0)) throw InputError("Q must be positive");
  const double lam = wavelength_nm * 1e-3 / medium_index;
  return overlap_xi * 3.0 / (4.0 * std::numbers::pi * std::numbers::pi) * lam * lam * lam * q_factor /
         mode_volume_um3(g, wavelength_nm);
}

/// Overlap factor that calibrates the diagnostic to a target Purcell factor.
inline double overlap_for_purcell(const CavityGeometry& g, double wavelength_nm, double q_factor,
                                  double target_purcell) {
  const double unit = purcell_from_mode_volume(g, wavelength_nm, q_factor, 1.0);
  return std::min(1.0, target_purcell / unit);
}

// ---------------------------------------------------------------------------
// Linewidth and detuning-dependent decay

/// Cavity linewidth kappa = E/Q, in meV.
inline double q_and_kappa(double resonance_energy_ev, double q_factor) {
  if (!(resonance_energy_ev > 0.0) || !(q_factor > 0.0))
    throw InputError("resonance energy and Q must be positive");
  return 1e3 * resonance_energy_ev / q_factor;
}

inline double q_factor_from_kappa(double resonance_energy_ev, double kappa_mev) {
  if (!(resonance_energy_ev > 0.0) || !(kappa_mev > 0.0))
    throw InputError("resonance energy and kappa must be positive");
  return 1e3 * resonance_energy_ev / kappa_mev;
}

/// gamma(delta) = gamma_free [F_inh + (F_res - F_inh) kappa^2 / (kappa^2 + 4 delta^2)],
/// delta = E_cavity - E_emitter in meV.
struct DetunedDecayModel {
  double gamma_free_per_ns;
  double f_res;
  double f_inh;
  double kappa_mev;

  void validate() const {
    if (!(gamma_free_per_ns > 0.0)) throw InputError("free-space decay rate must be positive");
    if (!(f_inh > 0.0) || !(f_res > f_inh)) throw InputError("need F_res > F_inh > 0");
    if (!(kappa_mev > 0.0)) throw InputError("kappa must be positive");
  }
};

inline double decay_rate(const DetunedDecayModel& m, double detuning_mev) {
  m.validate();
  const double k2 = m.kappa_mev * m.kappa_mev;
  return m.gamma_free_per_ns *
         (m.f_inh + (m.f_res - m.f_inh) * k2 / (k2 + 4.0 * detuning_mev * detuning_mev));
}

inline double lifetime_ns(const DetunedDecayModel& m, double detuning_mev) {
  return 1.0 / decay_rate(m, detuning_mev);
}

}  // namespace spsim::optics
