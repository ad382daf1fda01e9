// Acceptance gate: one PASS/FAIL line per criterion. Exit status is non-zero if any
// criterion fails.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "spsim/analysis.hpp"
#include "spsim/correlator.hpp"
#include "spsim/fitkit.hpp"
#include "spsim/montecarlo.hpp"
#include "spsim/optics.hpp"
#include "spsim/random.hpp"

namespace fs = std::filesystem;
namespace mc = spsim::montecarlo;
namespace an = spsim::analysis;
namespace fk = spsim::fitkit;
using Clock = std::chrono::steady_clock;

namespace {

constexpr std::uint64_t kSeed = 42;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1. Budget exactness -------------------------------------------------------

Outcome budget() {
  an::BudgetTable b;
  b.entries = {{"setup transmission", 0.2287, 0.0005},
               {"fiber coupling", 0.2929, 0.0014},
               {"spectral filtering", 0.504, 0.019},
               {"detector efficiency", 0.643, 0.022}};
  b.measured_rate_khz = 1080.0;
  b.measured_rate_error_khz = 40.0;
  b.rep_rate_khz = 76227.93;
  b.rep_rate_error_khz = 0.18;
  const auto t0 = Clock::now();
  const auto r = an::brightness_budget(b);
  const double ms = seconds_since(t0) * 1e3;
  const double total = r.total_efficiency * 100.0, total_err = r.total_efficiency_error * 100.0;
  const double bright = r.brightness * 100.0, bright_err = r.brightness_error * 100.0;
  const bool ok = std::abs(total - 2.17) < 0.005 && std::abs(total_err - 0.11) < 0.005 &&
                  std::abs(bright - 65.3) <= 0.5 && std::abs(bright_err - 4.1) <= 0.3 && ms < 1.0;
  return {ok, fmt("total %.4f +- %.4f %%, brightness %.2f +- %.2f %%, %.4f ms", total, total_err, bright, bright_err, ms)};
}

// 2. g2 closed loop ---------------------------------------------------------

Outcome g2_closed_loop() {
  const auto t0 = Clock::now();
  mc::EmitterModel em;
  mc::InstrumentChain chain{1.0, 0.0217, 500.0, 45.0, 100.0};
  mc::PulseTrain train{76227.93, 10'000'000, kSeed};
  const auto sim = mc::simulate_hbt(em, chain, train, 0.047);
  const auto irf = fk::make_gaussian_irf(100.0, std::sqrt(2.0) * chain.jitter_fwhm_ps * mc::kFwhmToSigma);
  const auto r = an::hbt_g2(sim.stream, irf, train.period_ps(), 5, 100);
  const double s = seconds_since(t0);
  const bool ok = std::abs(r.g2_zero - 0.047) <= 0.010 && s < 60.0;
  return {ok, fmt("g2(0) = %.4f +- %.4f (target 0.047 +- 0.010), tau %.3f ns, %zu tags, %.1f s", r.g2_zero, r.g2_error,
                  r.tau_fit_ns, sim.stream.tags.size(), s)};
}

// 3. HOM oracle equivalence -------------------------------------------------

Outcome hom_oracle() {
  mc::EmitterModel em;
  em.t1_ns = 1.725;
  em.t2_ps = 45.0;
  const mc::InstrumentChain chain{1.0, 1.0, 0.0, 0.0, 0.0};
  mc::PulseTrain train{76227.93, 10'000'000, kSeed};
  mc::MZIConfig mzi;
  mzi.arm_delay_ns = train.period_ps() * 1e-3;
  mzi.polarization = mc::Polarization::HH;
  const auto hh = mc::simulate_hom(em, chain, train, mzi, {0});
  mzi.polarization = mc::Polarization::HV;
  train.seed = spsim::splitmix64(kSeed);
  const auto hv = mc::simulate_hom(em, chain, train, mzi, {0});
  const std::vector<double> windows{3.0, 2.0, 1.1};
  const auto r = an::hom_visibility(hh.stream, hv.stream, train.period_ps(), windows, 10, 5, 0);

  bool within = true;
  std::string detail;
  for (const auto& w : r.windows) {
    const double expect = oracle::hom_visibility(em.t1_ns, em.t2_ps, 0.5 * w.window_ns);
    const double z = (w.visibility - expect) / w.visibility_error;
    within = within && std::abs(z) <= 3.0;
    detail += fmt("V(%.1f ns) = %.4f +- %.4f vs %.4f (%+.1f sigma); ", w.window_ns, w.visibility, w.visibility_error,
                  expect, z);
  }
  bool monotone = true;
  for (std::size_t k = 1; k < r.windows.size(); ++k) monotone = monotone && r.windows[k].visibility > r.windows[k - 1].visibility;
  const auto t2 = an::dephasing_estimate(r.windows.front().visibility, em.t1_ns, an::DephasingMode::lifetime);
  const bool t2_ok = std::abs(t2.t2_ps - 45.0) <= 4.5;
  detail += fmt("monotone %s; T2 estimate at 3 ns window %.1f ps (need 45 +- 4.5)", monotone ? "yes" : "no", t2.t2_ps);
  return {within && monotone && t2_ok, detail};
}

// 4. Lifetime physics -------------------------------------------------------

Outcome lifetime_physics() {
  const spsim::optics::DetunedDecayModel model{1.0 / 2.3, 1.333, 0.492, spsim::optics::q_and_kappa(1.5707, 600.0)};
  const mc::InstrumentChain chain{1.0, 0.0217, 500.0, 45.0, 100.0};
  auto fitted = [&](double detuning, std::uint64_t seed) {
    mc::EmitterModel em;
    em.t1_ns = spsim::optics::lifetime_ns(model, detuning);
    em.t2_ps = std::min(em.t2_ps, 2e3 * em.t1_ns);
    const mc::PulseTrain train{76227.93, 10'000'000, seed};
    const auto sim = mc::simulate_decay(em, chain, train);
    return an::lifetime_from_stream(sim.stream, train.period_ps());
  };
  const auto on = fitted(0.0, kSeed);
  const auto off = fitted(1000.0 * model.kappa_mev, kSeed + 1);
  const double ratio = off.tau_ns / on.tau_ns;
  const double reduction = 1.0 - on.tau_ns / 2.3;
  const bool ok = std::abs(ratio - 2.71) <= 0.15 && std::abs(reduction - 0.25) <= 0.02;
  return {ok, fmt("tau(0) = %.4f +- %.4f ns, tau(far) = %.4f +- %.4f ns, ratio %.3f (2.71 +- 0.15), reduction %.1f %% "
                  "(25 +- 2)",
                  on.tau_ns, on.tau_error_ns, off.tau_ns, off.tau_error_ns, ratio, reduction * 100.0)};
}

// 5. Cavity spectra ---------------------------------------------------------

Outcome cavity() {
  namespace op = spsim::optics;
  const auto band = op::find_stopband(op::device_bottom_mirror(), 600.0, 950.0);
  const double dl = op::longitudinal_spacing_mev(5.5);
  const double r5 = op::roc_from_spherical_cap(5.0, 300.0);
  const double r4 = op::roc_from_spherical_cap(4.0, 300.0);
  const auto spec = op::cavity_mode_spectrum({5.5, r5, 5.0, 300.0, 789.3}, 1.4, 1.7);
  const double dt = spec.transverse_spacing_mev;
  const bool ok = std::abs(band.center_nm - 755.0) <= 15.0 && band.peak_R > 0.999 && std::abs(dl - 112.7) <= 0.1 &&
                  std::abs(r5 - 10.57) <= 0.01 && std::abs(dt - 26.3) <= 0.15 * 26.3 && std::abs(r4 - 6.82) <= 0.01;
  return {ok, fmt("stopband %.2f nm, peak R %.6f, dE_long %.3f meV, R(5um) %.3f um, dE_t %.2f meV (%.1f %% off 26.3), "
                  "R(4um) %.3f um",
                  band.center_nm, band.peak_R, dl, r5, dt, 100.0 * (dt / 26.3 - 1.0), r4)};
}

// 6. Correlator correctness and speed ---------------------------------------

spsim::TimeTagStream random_stream(std::uint64_t seed, std::size_t n, std::uint64_t span_ps) {
  spsim::TimeTagStream s;
  s.channel_count = 2;
  s.duration_ps = span_ps;
  spsim::KeyedRng rng(seed, spsim::Stage::synthetic, 0);
  for (std::size_t i = 0; i < n; ++i)
    s.tags.push_back({static_cast<std::uint64_t>(rng.uniform() * static_cast<double>(span_ps)),
                      static_cast<std::uint8_t>(rng.bernoulli(0.5) ? 1 : 0)});
  std::sort(s.tags.begin(), s.tags.end(), spsim::tag_less);
  return s;
}

Outcome correlator() {
  namespace co = spsim::correlator;
  int mismatches = 0;
  for (std::uint64_t k = 0; k < 200; ++k) {
    spsim::KeyedRng pick(kSeed, spsim::Stage::synthetic, 1000 + k);
    const auto n = static_cast<std::size_t>(1 + pick.uniform() * 9999.0);
    const auto span = static_cast<std::uint64_t>(n) * (1 + static_cast<std::uint64_t>(pick.uniform() * 2000.0));
    const auto s = random_stream(k, n, span);
    const std::int64_t w = 1 + static_cast<std::int64_t>(pick.uniform() * 50.0);
    const std::int64_t half = w * (1 + static_cast<std::int64_t>(pick.uniform() * 200.0));
    const auto h = co::cross_correlate(s, 0, 1, w, {-half, half});
    if (h.counts != oracle::brute_force_correlate(s, 0, 1, w, -half, half)) ++mismatches;
  }
  // 10^7 tags at a 1 MHz aggregate rate, the order of the measured count rate.
  const auto big = random_stream(kSeed, 10'000'000, 10'000'000'000'000ULL);
  const auto t0 = Clock::now();
  const auto h1 = co::cross_correlate(big, 0, 1, 100, {-100'000, 100'000}, 1);
  const double s = seconds_since(t0);
  const auto h4 = co::cross_correlate(big, 0, 1, 100, {-100'000, 100'000}, 4);
  const auto h8 = co::cross_correlate(big, 0, 1, 100, {-100'000, 100'000}, 8);
  const bool same = h1.counts == h4.counts && h1.counts == h8.counts;
  const bool ok = mismatches == 0 && s <= 5.0 && same;
  return {ok, fmt("%d/200 brute-force mismatches, 1e7 tags in %.2f s single-threaded (%llu pairs), threads 4/8 %s",
                  mismatches, s, static_cast<unsigned long long>(h1.total()), same ? "identical" : "DIFFER")};
}

// 7. Estimator suite --------------------------------------------------------

Outcome estimators() {
  const auto spec = mc::simulate_spectrum(1.5707, 200.0, 100'000, 20.0, 2000.0, kSeed);
  std::vector<double> e, y;
  for (const auto& p : spec) {
    e.push_back(p.energy_ev);
    y.push_back(p.counts);
  }
  const auto lw = an::linewidth(e, y);
  const bool lw_ok = std::abs(lw.gamma_uev / 200.0 - 1.0) <= 0.05;

  // Rotating analyzer at 10 degree steps, about 430 counts at the maximum.
  mc::EmitterModel em;
  em.dop = 0.984;
  em.pol_angle_deg = 37.0;
  const mc::InstrumentChain chain{1.0, 0.0217, 0.0, 0.0, 100.0};
  const mc::PulseTrain train{76227.93, 20'000, kSeed};
  std::vector<double> angles;
  for (int a = 0; a < 360; a += 10) angles.push_back(a);
  std::vector<double> ang, cnt;
  for (const auto& p : mc::simulate_polarization(em, chain, train, angles)) {
    ang.push_back(p.angle_deg);
    cnt.push_back(p.counts);
  }
  const auto dop = an::dop_fit(ang, cnt);
  const bool dop_ok = dop.rho_error <= 0.013 && std::abs(dop.rho - 0.984) <= 0.013;

  double worst = 0.0;
  std::vector<double> x(400);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = -20000.0 + 100.0 * static_cast<double>(i) + 37.0;
  const fk::ExpTrain train_model(-1, 1);
  worst = std::max(worst, fk::jacobian_check(train_model, std::vector<double>{3.0, 1725.0, 120.0, 13118.6, 40.0, 5.0, 42.0}, x));
  std::vector<double> xt(300);
  for (std::size_t i = 0; i < xt.size(); ++i) xt[i] = 30.0 * static_cast<double>(i);
  worst = std::max(worst, fk::jacobian_check(fk::ExpDecay{}, std::vector<double>{1000.0, 2300.0, 500.0, 4.0}, xt));
  std::vector<double> xe(200);
  for (std::size_t i = 0; i < xe.size(); ++i) xe[i] = -2000.0 + 20.0 * static_cast<double>(i);
  worst = std::max(worst, fk::jacobian_check(fk::Lorentzian{}, std::vector<double>{800.0, 30.0, 200.0, 5.0}, xe));
  std::vector<double> xa(36);
  for (std::size_t i = 0; i < xa.size(); ++i) xa[i] = 10.0 * static_cast<double>(i);
  worst = std::max(worst, fk::jacobian_check(fk::Malus{}, std::vector<double>{900.0, 0.984, 37.0, 3.0}, xa));
  const fk::Convolved conv(train_model, fk::make_gaussian_irf(100.0, 300.0));
  std::vector<double> xc(400);
  for (std::size_t i = 0; i < xc.size(); ++i) xc[i] = -20000.0 + 100.0 * static_cast<double>(i);
  worst = std::max(worst, fk::jacobian_check(conv, std::vector<double>{3.0, 1725.0, 120.0, 13118.6, 40.0, 5.0, 42.0}, xc));
  const bool jac_ok = worst < 1e-5;

  return {lw_ok && dop_ok && jac_ok,
          fmt("Gamma %.1f +- %.1f ueV (200 +- 5 %%); rho %.4f +- %.4f (0.984, sigma <= 0.013); max Jacobian deviation %.2e",
              lw.gamma_uev, lw.gamma_error_uev, dop.rho, dop.rho_error, worst)};
}

// 8. Determinism ------------------------------------------------------------

struct RecipeStep {
  std::string command;
  std::string mode;
};

std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream f(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    files[e.path().filename().string()] = ss.str();
  }
  return files;
}

Outcome determinism() {
  const std::map<std::string, std::vector<RecipeStep>> recipes = {
      {"fig2a", {{"simulate", "dop"}, {"analyze", "dop"}}},
      {"fig2b", {{"cavity", ""}}},
      {"fig2c", {{"simulate", "decay"}, {"analyze", "lifetime"}}},
      {"fig3a", {{"simulate", "hbt"}, {"analyze", "g2"}}},
      {"fig3b", {{"analyze", "budget"}}},
      {"fig3c", {{"simulate", "hom"}, {"analyze", "hom"}}},
      {"fig3d", {{"simulate", "hom"}, {"analyze", "hom"}}},
      {"figS4_linewidth", {{"simulate", "spectrum"}, {"analyze", "linewidth"}}},
  };
  const fs::path root = fs::temp_directory_path() / fmt("spsim_acceptance_%d", static_cast<int>(::getpid()));
  fs::remove_all(root);
  int failures = 0;
  std::size_t compared = 0;
  std::string broken;
  for (const auto& [name, steps] : recipes) {
    std::map<std::string, std::string> reference;
    for (unsigned threads : {1U, 4U, 8U}) {
      // Same directory for every thread count: manifests record absolute input paths.
      const fs::path out = root / name;
      fs::remove_all(out);
      for (const auto& st : steps) {
        const std::string cmd = std::string(SPSIM_TOOL_PATH) + " " + st.command + " " + st.mode + " --config " +
                                (fs::path(SPSIM_RECIPE_DIR) / (name + ".ini")).string() + " --out " + out.string() +
                                " --threads " + std::to_string(threads) + " > /dev/null";
        if (std::system(cmd.c_str()) != 0) {
          ++failures;
          broken += name + " (" + st.command + " " + st.mode + " failed) ";
        }
      }
      const auto files = read_tree(out);
      if (threads == 1) {
        reference = files;
      } else if (files != reference) {
        ++failures;
        broken += name + " (threads " + std::to_string(threads) + " differ) ";
      } else {
        compared += files.size();
      }
    }
  }
  fs::remove_all(root);
  return {failures == 0, fmt("%zu recipes x threads {1,4,8}: %zu files byte-identical to the 1-thread run%s%s", recipes.size(), compared,
                             failures ? "; " : "", broken.c_str())};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 budget exactness", budget},      {"2 g2(0) closed loop", g2_closed_loop},
      {"3 HOM oracle equivalence", hom_oracle}, {"4 lifetime physics", lifetime_physics},
      {"5 cavity spectra", cavity},         {"6 correlator correctness & speed", correlator},
      {"7 estimator suite", estimators},    {"8 determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s  criterion %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
