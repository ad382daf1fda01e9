#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "spsim/analysis.hpp"
#include "spsim/montecarlo.hpp"
#include "spsim/random.hpp"

using namespace spsim::analysis;
namespace mc = spsim::montecarlo;

namespace {

std::vector<double> angles(int n, double step) {
  std::vector<double> a(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i)] = step * i;
  return a;
}

std::vector<double> malus(const std::vector<double>& th, double i0, double rho, double theta0) {
  std::vector<double> y;
  for (double t : th) y.push_back(0.5 * i0 * (1.0 + rho * std::cos(2.0 * (t - theta0) * std::numbers::pi / 180.0)));
  return y;
}

BudgetTable reference_budget() {
  BudgetTable b;
  b.entries = {{"setup", 0.2287, 0.0005}, {"fiber", 0.2929, 0.0014}, {"grating", 0.504, 0.019}, {"detector", 0.643, 0.022}};
  b.measured_rate_khz = 1080.0;
  b.measured_rate_error_khz = 40.0;
  b.rep_rate_khz = 76227.93;
  b.rep_rate_error_khz = 0.18;
  return b;
}

DetuningSeries detuning_series(const spsim::optics::DetunedDecayModel& m, double noise, std::uint64_t seed,
                               double lo = -10.0, double hi = 10.0, int n = 13) {
  DetuningSeries s;
  for (int i = 0; i < n; ++i) {
    const double d = lo + (hi - lo) * i / (n - 1);
    const double tau = spsim::optics::lifetime_ns(m, d);
    spsim::KeyedRng rng(seed, spsim::Stage::synthetic, static_cast<std::uint64_t>(i));
    s.push_back({d, tau * (1.0 + noise * rng.normal()), std::max(noise, 0.01) * tau});
  }
  return s;
}

const spsim::optics::DetunedDecayModel kModel{1.0 / 2.3, 1.333, 0.492, 2.62};

}  // namespace

TEST(Visibility, Identities) {
  const PeakRatio r{50.0, 400.0, 4};
  EXPECT_DOUBLE_EQ(visibility(r, r).value, 0.0);
  EXPECT_DOUBLE_EQ(visibility({0.0, 400.0, 4}, r).value, 1.0);
  EXPECT_THROW(visibility(r, {0.0, 400.0, 4}), spsim::EstimationError);
  EXPECT_GT(visibility(r, r).error, 0.0);
}

TEST(Visibility, IdenticalStreamsGiveZero) {
  mc::PulseTrain train{76227.93, 1'000'000, 5};
  mc::MZIConfig mzi;
  mzi.arm_delay_ns = train.period_ps() * 1e-3;
  const auto s = mc::simulate_hom({}, {1.0, 1.0, 0.0, 0.0, 0.0}, train, mzi).stream;
  const std::vector<double> w{3.0, 1.0};
  const auto r = hom_visibility(s, s, train.period_ps(), w);
  for (const auto& x : r.windows) EXPECT_DOUBLE_EQ(x.visibility, 0.0);
}

TEST(Budget, ReferenceValues) {
  const auto r = brightness_budget(reference_budget());
  EXPECT_NEAR(r.total_efficiency * 100.0, 2.17, 0.005);
  EXPECT_NEAR(r.brightness * 100.0, 65.3, 0.5);
  EXPECT_NEAR(r.brightness_error * 100.0, 4.1, 0.3);
}

TEST(Budget, PermutationInvariant) {
  auto b = reference_budget();
  const auto a = brightness_budget(b);
  std::reverse(b.entries.begin(), b.entries.end());
  std::swap(b.entries[0], b.entries[2]);
  const auto c = brightness_budget(b);
  EXPECT_NEAR(a.total_efficiency, c.total_efficiency, 1e-12);
  EXPECT_NEAR(a.total_efficiency_error, c.total_efficiency_error, 1e-12);
  EXPECT_NEAR(a.brightness_error, c.brightness_error, 1e-12);
}

TEST(Budget, SplittingAnEntryKeepsTotals) {
  auto b = reference_budget();
  const auto a = brightness_budget(b);
  const auto e = b.entries[2];
  const double half = std::sqrt(e.efficiency);
  const double rel = e.abs_error / e.efficiency / std::sqrt(2.0);
  b.entries[2] = {"grating a", half, half * rel};
  b.entries.push_back({"grating b", half, half * rel});
  const auto c = brightness_budget(b);
  EXPECT_NEAR(a.total_efficiency, c.total_efficiency, 1e-12);
  EXPECT_NEAR(a.total_efficiency_error, c.total_efficiency_error, 1e-12);
}

TEST(Budget, SingleEntry) {
  BudgetTable b{{{"only", 0.5, 0.01}}, 100.0, 0.0, 1000.0, 0.0};
  const auto r = brightness_budget(b);
  EXPECT_DOUBLE_EQ(r.total_efficiency, 0.5);
  EXPECT_DOUBLE_EQ(r.total_efficiency_error, 0.01);
  EXPECT_DOUBLE_EQ(r.brightness, 0.2);
}

TEST(Budget, InvalidEntries) {
  auto b = reference_budget();
  b.entries[1].efficiency = 0.0;
  EXPECT_THROW(brightness_budget(b), spsim::DomainError);
  b.entries[1].efficiency = 1.2;
  EXPECT_THROW(brightness_budget(b), spsim::InputError);
  EXPECT_THROW(brightness_budget(BudgetTable{}), spsim::InputError);
}

TEST(DeadTime, Correction) {
  EXPECT_NEAR(deadtime_correct(1000.0, 45.0), 1047.1, 0.05);
  EXPECT_DOUBLE_EQ(deadtime_correct(10'000.0, 50.0), 20'000.0);
  EXPECT_DOUBLE_EQ(deadtime_correct(123.0, 0.0), 123.0);
  EXPECT_THROW(deadtime_correct(20'000.0, 50.0), spsim::DomainError);
}

TEST(Dephasing, Examples) {
  EXPECT_NEAR(dephasing_estimate(0.0205, 1.1, DephasingMode::window).t2_ps, 45.1, 0.05);
  EXPECT_NEAR(dephasing_estimate(0.0130, 1.725, DephasingMode::lifetime).t2_ps, 44.9, 0.05);
  EXPECT_DOUBLE_EQ(dephasing_estimate(1.0, 1.725, DephasingMode::lifetime).t2_ps, 3450.0);
  EXPECT_THROW(dephasing_estimate(0.0, 1.0, DephasingMode::lifetime), spsim::DomainError);
  EXPECT_THROW(dephasing_estimate(-0.1, 1.0, DephasingMode::lifetime), spsim::DomainError);
}

TEST(Dop, NoiselessExact) {
  const auto th = angles(36, 10.0);
  const auto r = dop_fit(th, malus(th, 1000.0, 0.7, 30.0));
  EXPECT_NEAR(r.rho, 0.7, 1e-6);
  EXPECT_NEAR(r.theta0_deg, 30.0, 1e-4);
  EXPECT_TRUE(r.theta0_defined);
}

TEST(Dop, QuarterTurnShiftsAngleOnly) {
  const auto th = angles(36, 10.0);
  const auto a = dop_fit(th, malus(th, 1000.0, 0.6, 20.0));
  const auto b = dop_fit(th, malus(th, 1000.0, 0.6, 110.0));
  EXPECT_NEAR(a.rho, b.rho, 1e-8);
  EXPECT_NEAR(std::fmod(b.theta0_deg - a.theta0_deg + 180.0, 180.0), 90.0, 1e-4);
}

TEST(Dop, UnpolarizedConsistentWithZero) {
  const auto th = angles(36, 10.0);
  mc::EmitterModel em;
  em.dop = 0.0;
  const auto s = mc::simulate_polarization(em, {1.0, 0.0217, 0.0, 0.0, 100.0}, {76227.93, 20000, 11}, th);
  std::vector<double> y;
  for (const auto& p : s) y.push_back(p.counts);
  const auto r = dop_fit(th, y);
  EXPECT_LT(r.rho, 3.0 * r.rho_error);
}

TEST(Dop, ConstantIntensityUndefinedAngle) {
  const auto th = angles(36, 10.0);
  const auto r = dop_fit(th, std::vector<double>(36, 500.0));
  EXPECT_EQ(r.rho, 0.0);
  EXPECT_FALSE(r.theta0_defined);
  EXPECT_TRUE(std::isnan(r.theta0_deg));
}

TEST(Dop, InvalidSampling) {
  const auto few = angles(6, 36.0);
  EXPECT_THROW(dop_fit(few, malus(few, 100.0, 0.5, 0.0)), spsim::InputError);
  const auto narrow = angles(12, 5.0);
  EXPECT_THROW(dop_fit(narrow, malus(narrow, 100.0, 0.5, 0.0)), spsim::InputError);
}

TEST(Linewidth, RecoversWidth) {
  const auto s = mc::simulate_spectrum(1.5707, 200.0, 100'000, 20.0, 2000.0, 42);
  std::vector<double> e, c;
  for (const auto& p : s) {
    e.push_back(p.energy_ev);
    c.push_back(p.counts);
  }
  const auto r = linewidth(e, c);
  EXPECT_NEAR(r.gamma_uev / 200.0, 1.0, 0.05);
  EXPECT_NEAR(r.center_ev, 1.5707, 5e-6);
  EXPECT_FALSE(r.resolution_limited);
}

TEST(Linewidth, ResolutionFlagAndFlatSpectrum) {
  const auto s = mc::simulate_spectrum(1.5707, 30.0, 100'000, 20.0, 2000.0, 42);
  std::vector<double> e, c;
  for (const auto& p : s) {
    e.push_back(p.energy_ev);
    c.push_back(p.counts);
  }
  EXPECT_TRUE(linewidth(e, c).resolution_limited);
  EXPECT_THROW(linewidth(e, std::vector<double>(e.size(), 7.0)), spsim::EstimationError);
}

TEST(Detuning, ReferenceRatio) {
  EXPECT_NEAR(spsim::optics::lifetime_ns(kModel, 0.0), 1.725, 0.002);
  EXPECT_NEAR(spsim::optics::lifetime_ns(kModel, 1e4) / spsim::optics::lifetime_ns(kModel, 0.0), 2.71, 0.01);
}

TEST(Detuning, RecoversParametersWithNoise) {
  const auto f = lifetime_vs_detuning(detuning_series(kModel, 0.03, 21), kModel.gamma_free_per_ns);
  EXPECT_FALSE(f.ill_conditioned);
  EXPECT_NEAR(f.model.f_res / kModel.f_res, 1.0, 0.10);
  EXPECT_NEAR(f.model.f_inh / kModel.f_inh, 1.0, 0.10);
  EXPECT_NEAR(f.model.kappa_mev / kModel.kappa_mev, 1.0, 0.10);
  EXPECT_NEAR(f.ratio, kModel.f_res / kModel.f_inh, 3.0 * f.ratio_error);
}

TEST(Detuning, NoiselessExact) {
  const auto f = lifetime_vs_detuning(detuning_series(kModel, 0.0, 1) , kModel.gamma_free_per_ns);
  EXPECT_NEAR(f.model.f_res, kModel.f_res, 1e-6);
  EXPECT_NEAR(f.model.f_inh, kModel.f_inh, 1e-6);
  EXPECT_NEAR(f.model.kappa_mev, kModel.kappa_mev, 1e-6);
}

TEST(Detuning, FlatSeriesIllConditioned) {
  DetuningSeries s;
  for (int i = -6; i <= 6; ++i) s.push_back({static_cast<double>(i), 2.0, 0.05});
  const auto f = lifetime_vs_detuning(s, kModel.gamma_free_per_ns);
  EXPECT_TRUE(f.ill_conditioned);
  EXPECT_FALSE(f.warnings.empty());
}

TEST(Detuning, OneSidedWarns) {
  auto s = detuning_series(kModel, 0.0, 1, 0.5, 10.0, 10);
  const auto f = lifetime_vs_detuning(s, kModel.gamma_free_per_ns);
  EXPECT_TRUE(f.ill_conditioned);
  EXPECT_FALSE(f.warnings.empty());
}

TEST(Detuning, InvalidSeries) {
  DetuningSeries s{{0.0, 1.0, 0.1}, {1.0, 1.0, 0.1}, {2.0, 1.0, 0.1}};
  EXPECT_THROW(lifetime_vs_detuning(s, 0.4), spsim::InputError);
  s.push_back({3.0, -1.0, 0.1});
  EXPECT_THROW(lifetime_vs_detuning(s, 0.4), spsim::InputError);
}

TEST(Hbt, GlobalTimeShiftInvariant) {
  mc::EmitterModel em;
  em.t1_ns = 1.725;
  const mc::PulseTrain train{76227.93, 2'000'000, 8};
  auto s = mc::simulate_hbt(em, {1.0, 0.05, 500.0, 45.0, 100.0}, train, 0.1).stream;
  const auto irf = spsim::fitkit::make_gaussian_irf(100.0, std::sqrt(2.0) * 500.0 * mc::kFwhmToSigma);
  const auto a = hbt_g2(s, irf, train.period_ps(), 5);
  for (auto& t : s.tags) t.time_ps += 777'777;
  s.duration_ps += 777'777;
  const auto b = hbt_g2(s, irf, train.period_ps(), 5);
  EXPECT_EQ(a.histogram.counts, b.histogram.counts);
  EXPECT_DOUBLE_EQ(a.g2_zero, b.g2_zero);
  EXPECT_NEAR(a.tau_fit_ns, 1.725, 0.1);
}

TEST(Hbt, InvalidArguments) {
  const spsim::TimeTagStream s{1, 1000, 2, {}};
  const auto irf = spsim::fitkit::make_gaussian_irf(100.0, 300.0);
  EXPECT_THROW(hbt_g2(s, irf, 13118.6, 3), spsim::InputError);
  EXPECT_THROW(hbt_g2(s, irf, 13118.6, 5, 50), spsim::InputError);
}

TEST(Lifetime, EmptyHistogramThrows) {
  const spsim::TimeTagStream s{1, 100'000, 2, {{10, 0}, {20'000, 0}}};
  EXPECT_THROW(lifetime_from_stream(s, 13118.6), spsim::EstimationError);
}
