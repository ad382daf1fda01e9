#pragma once
// Command implementations behind the spsim executable: simulate, analyze, cavity.
// Each command resolves a Config into model parameters, writes its outputs into the
// output directory and finishes with a JSON manifest listing SHA-256 checksums.

#include <openssl/evp.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "spsim/analysis.hpp"
#include "spsim/config.hpp"
#include "spsim/correlator.hpp"
#include "spsim/error.hpp"
#include "spsim/fitkit.hpp"
#include "spsim/montecarlo.hpp"
#include "spsim/optics.hpp"
#include "spsim/ptag.hpp"

namespace spsim::cli {

inline constexpr const char* kVersion = "0.1.0";

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct Options {
  fs::path config_path;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out_dir;
  unsigned threads = 1;
  std::vector<fs::path> inputs;
  std::string mode;  ///< simulate mode or analyze measurement; empty: from the config
};

// ---------------------------------------------------------------------------
// Provenance helpers

inline std::string sha256_hex(const void* data, std::size_t size) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data, size, md, &len, EVP_sha256(), nullptr) != 1) throw Error("SHA-256 computation failed");
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned i = 0; i < len; ++i) {
    s.push_back(hex[md[i] >> 4]);
    s.push_back(hex[md[i] & 15]);
  }
  return s;
}

inline std::string sha256_file(const fs::path& p) {
  const auto bytes = ptag::read_bytes(p.string());
  return sha256_hex(bytes.data(), bytes.size());
}

/// Files are staged in memory and only written once the command has succeeded, so a
/// failing command leaves no partial result set behind.
class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {}

  void add(const std::string& name, std::string content) { files_.emplace_back(name, std::move(content)); }
  void add(const std::string& name, const std::vector<char>& bytes) { add(name, std::string(bytes.begin(), bytes.end())); }
  void add_json(const std::string& name, const json& j) { add(name, j.dump(2) + "\n"); }

  /// Writes every file (via a temporary name) and returns name -> sha256.
  std::map<std::string, std::string> commit() const {
    fs::create_directories(dir_);
    std::map<std::string, std::string> sums;
    for (const auto& [name, content] : files_) {
      const fs::path target = dir_ / name;
      const fs::path tmp = dir_ / (name + ".tmp");
      {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw InputError("cannot write '" + tmp.string() + "'");
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!f) throw InputError("write to '" + tmp.string() + "' failed");
      }
      fs::rename(tmp, target);
      sums[name] = sha256_hex(content.data(), content.size());
    }
    return sums;
  }

 private:
  fs::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

/// Loads an INI config or the manifest of an earlier run.
inline config::Config load_config(const fs::path& path) {
  if (path.extension() == ".json") {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open manifest '" + path.string() + "'");
    json j;
    try {
      f >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("manifest '" + path.string() + "' is not valid JSON: " + e.what());
    }
    if (!j.contains("config")) throw ConfigError("manifest '" + path.string() + "' has no config object");
    return config::Config::from_json(nlohmann::json::parse(j.at("config").dump()), path.parent_path());
  }
  return config::Config::load(path);
}

// ---------------------------------------------------------------------------
// Parameter resolution (defaults follow the characterized device)

struct Setup {
  config::Config cfg;
  std::uint64_t seed = 0;
  fs::path out_dir;
  unsigned threads = 1;
};

inline Setup make_setup(const Options& opt) {
  Setup s{load_config(opt.config_path)};
  if (opt.seed) s.cfg.set("", "seed", std::to_string(*opt.seed));
  s.seed = s.cfg.uint("", "seed", 0);
  s.out_dir = opt.out_dir ? *opt.out_dir : fs::path(s.cfg.text("", "output_dir", "out"));
  s.threads = opt.threads;
  return s;
}

inline montecarlo::EmitterModel resolve_emitter(config::Config& c) {
  montecarlo::EmitterModel e;
  e.energy_ev = c.real("emitter", "energy_ev", 1.5707);
  e.t1_ns = c.real("emitter", "t1_ns", 1.725);
  e.t2_ps = c.real("emitter", "t2_ps", 45.0);
  e.p_exc = c.real("emitter", "p_exc", 1.0);
  e.p_multi = c.real("emitter", "p_multi", 0.0);
  e.dop = c.real("emitter", "dop", 0.984);
  e.pol_angle_deg = c.real("emitter", "pol_angle_deg", 0.0);
  e.validate();
  return e;
}

inline montecarlo::InstrumentChain resolve_chain(config::Config& c) {
  montecarlo::InstrumentChain ch;
  ch.eta_first_lens = c.real("chain", "eta_first_lens", 1.0);
  ch.eta_setup = c.real("chain", "eta_setup", 0.0217);
  ch.jitter_fwhm_ps = c.real("chain", "jitter_fwhm_ps", 500.0);
  ch.dead_time_ns = c.real("chain", "dead_time_ns", 45.0);
  ch.dark_rate_hz = c.real("chain", "dark_rate_hz", 100.0);
  ch.validate();
  return ch;
}

inline montecarlo::PulseTrain resolve_train(config::Config& c, std::uint64_t seed) {
  montecarlo::PulseTrain t;
  t.rep_rate_khz = c.real("train", "rep_rate_khz", 76227.93);
  t.n_pulses = c.uint("train", "n_pulses", 1'000'000);
  t.seed = seed;
  t.validate();
  return t;
}

inline optics::DetunedDecayModel resolve_decay_model(config::Config& c, double energy_ev) {
  const double q = c.real("cavity", "q_factor", 600.0);
  optics::DetunedDecayModel m{c.real("cavity", "gamma_free_per_ns", 1.0 / 2.3), c.real("cavity", "f_res", 1.333),
                              c.real("cavity", "f_inh", 0.492), optics::q_and_kappa(energy_ev, q)};
  m.validate();
  return m;
}

/// Independent stream seeds derived from the run seed.
inline std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t index) {
  return index == 0 ? seed : splitmix64(seed ^ splitmix64(index));
}

inline std::string csv_number(double v) { return config::Config::format_real(v); }

inline std::string histogram_csv(const correlator::CorrelationHistogram& h) {
  std::ostringstream os;
  correlator::write_histogram_csv(os, h);
  return os.str();
}

inline json fit_json(const fitkit::FitResult& r) {
  json params = json::object(), errors = json::object(), cov = json::array();
  for (std::size_t k = 0; k < r.names.size(); ++k) {
    params[r.names[k]] = r.params[k];
    errors[r.names[k]] = r.std_errors[k];
    json row = json::array();
    for (std::size_t m = 0; m < r.names.size(); ++m)
      row.push_back(r.covariance(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m)));
    cov.push_back(std::move(row));
  }
  json fixed = json::array();
  for (std::size_t k = 0; k < r.names.size(); ++k)
    if (r.fixed[k]) fixed.push_back(r.names[k]);
  return json{{"params", params},         {"errors", errors}, {"covariance", cov},
              {"reduced_chi2", r.reduced_chi2}, {"converged", r.converged}, {"n_iterations", r.n_iterations},
              {"fixed", fixed}};
}

inline std::map<std::string, std::string> finish(const Setup& s, OutputSet& out, const std::string& command,
                                                 const std::string& mode, const std::vector<std::string>& warnings,
                                                 const json& inputs = json::array()) {
  // Manifest last: its presence marks a complete result set.
  OutputSet staged = out;
  auto sums = staged.commit();
  json outputs = json::object();
  for (const auto& [name, sum] : sums) outputs[name] = sum;
  json manifest{{"tool", "spsim"},
                {"version", kVersion},
                {"command", command},
                {"mode", mode},
                {"seed", s.seed},
                {"config", s.cfg.to_json()},
                {"inputs", inputs},
                {"outputs", outputs},
                {"warnings", warnings}};
  OutputSet m(s.out_dir);
  m.add_json("manifest_" + command + (mode.empty() ? "" : "_" + mode) + ".json", manifest);
  m.commit();
  return sums;
}

// ---------------------------------------------------------------------------
// simulate

inline std::map<std::string, std::string> cmd_simulate(const Options& opt) {
  Setup s = make_setup(opt);
  const std::string mode = opt.mode.empty() ? s.cfg.text("", "mode", "hbt") : opt.mode;
  if (mode == "hom") s.cfg.require_section("mzi");
  if (mode != "hbt" && mode != "hom" && mode != "decay" && mode != "dop" && mode != "spectrum")
    throw ConfigError("unknown simulate mode '" + mode + "'");
  s.cfg.set("", "mode", mode);

  const montecarlo::RunOptions run{s.threads};
  OutputSet out(s.out_dir);
  std::vector<std::string> warnings;
  auto keep = [&](montecarlo::SimulationResult r, const std::string& name) {
    warnings.insert(warnings.end(), r.warnings.begin(), r.warnings.end());
    out.add(name, ptag::encode(r.stream));
  };

  if (mode == "hbt") {
    const auto em = resolve_emitter(s.cfg);
    const auto chain = resolve_chain(s.cfg);
    const auto train = resolve_train(s.cfg, s.seed);
    if (s.cfg.has("emitter", "poissonian_mean")) {
      keep(montecarlo::simulate_poissonian_hbt(s.cfg.real("emitter", "poissonian_mean", 1.0), em.t1_ns, chain, train,
                                               run),
           "hbt.ptag");
    } else {
      keep(montecarlo::simulate_hbt(em, chain, train, s.cfg.real("emitter", "g2_target", 0.047), run), "hbt.ptag");
    }
  } else if (mode == "hom") {
    const auto em = resolve_emitter(s.cfg);
    const auto chain = resolve_chain(s.cfg);
    const auto train = resolve_train(s.cfg, s.seed);
    montecarlo::MZIConfig mzi;
    mzi.arm_delay_ns = s.cfg.real("mzi", "arm_delay_ns", train.period_ps() * 1e-3);
    mzi.first_bs_ratio = s.cfg.real("mzi", "first_bs_ratio", 0.5);
    mzi.second_bs_ratio = s.cfg.real("mzi", "second_bs_ratio", 0.5);
    mzi.residual_offset_ns = s.cfg.real("mzi", "residual_offset_ns", 0.0);
    const std::string pol = s.cfg.text("mzi", "polarization", "both");
    if (pol == "HH" || pol == "both") {
      mzi.polarization = montecarlo::Polarization::HH;
      keep(montecarlo::simulate_hom(em, chain, train, mzi, run), "hom_hh.ptag");
    }
    if (pol == "HV" || pol == "both") {
      mzi.polarization = montecarlo::Polarization::HV;
      auto t = train;
      t.seed = derived_seed(s.seed, 1);
      keep(montecarlo::simulate_hom(em, chain, t, mzi, run), "hom_hv.ptag");
    }
  } else if (mode == "decay") {
    auto em = resolve_emitter(s.cfg);
    const auto chain = resolve_chain(s.cfg);
    const auto train = resolve_train(s.cfg, s.seed);
    if (s.cfg.has("emitter", "detunings_mev")) {
      const auto detunings = s.cfg.list("emitter", "detunings_mev", {});
      const auto model = resolve_decay_model(s.cfg, em.energy_ev);
      for (std::size_t i = 0; i < detunings.size(); ++i) {
        em.t1_ns = optics::lifetime_ns(model, detunings[i]);
        em.t2_ps = std::min(em.t2_ps, 2e3 * em.t1_ns);
        auto t = train;
        t.seed = derived_seed(s.seed, i);
        char name[32];
        std::snprintf(name, sizeof name, "decay_%02zu.ptag", i);
        keep(montecarlo::simulate_decay(em, chain, t, run), name);
      }
    } else {
      keep(montecarlo::simulate_decay(em, chain, train, run), "decay.ptag");
    }
  } else if (mode == "dop") {
    const auto em = resolve_emitter(s.cfg);
    const auto chain = resolve_chain(s.cfg);
    const auto train = resolve_train(s.cfg, s.seed);
    std::vector<double> def;
    for (int a = 0; a < 360; a += 10) def.push_back(a);
    const auto angles = s.cfg.list("polarimetry", "angles_deg", def);
    std::string csv = "angle_deg,counts\n";
    for (const auto& p : montecarlo::simulate_polarization(em, chain, train, angles))
      csv += csv_number(p.angle_deg) + "," + csv_number(p.counts) + "\n";
    out.add("dop.csv", std::move(csv));
  } else {
    const auto em = resolve_emitter(s.cfg);
    const auto spec = montecarlo::simulate_spectrum(
        em.energy_ev, s.cfg.real("spectrum", "fwhm_uev", 200.0), s.cfg.uint("spectrum", "n_photons", 100'000),
        s.cfg.real("spectrum", "bin_uev", 20.0), s.cfg.real("spectrum", "half_range_uev", 2000.0), s.seed);
    std::string csv = "energy_ev,counts\n";
    for (const auto& p : spec) csv += csv_number(p.energy_ev) + "," + csv_number(p.counts) + "\n";
    out.add("spectrum.csv", std::move(csv));
  }
  return finish(s, out, "simulate", mode, warnings);
}

// ---------------------------------------------------------------------------
// analyze

/// Two numeric columns after a header line; errors carry the byte offset of the bad line.
inline std::vector<std::pair<double, double>> read_two_column_csv(const fs::path& path) {
  const auto bytes = ptag::read_bytes(path.string());
  const std::string text(bytes.begin(), bytes.end());
  std::vector<std::pair<double, double>> rows;
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (header) {
      header = false;
    } else if (!line.empty()) {
      const auto comma = line.find(',');
      double a, b;
      if (comma == std::string::npos || !config::detail::parse_real(config::detail::trim(line.substr(0, comma)), a) ||
          !config::detail::parse_real(config::detail::trim(line.substr(comma + 1)), b))
        throw FormatError(path.string() + ": expected two numeric columns", pos);
      rows.emplace_back(a, b);
    }
    pos = end + 1;
  }
  if (rows.empty()) throw FormatError(path.string() + ": no data rows", text.size());
  return rows;
}

/// Instrument response from a histogram CSV (bin_center_ps,counts) whose bin centered on
/// zero delay is the response origin.
inline fitkit::IRFHistogram read_irf_csv(const fs::path& path) {
  const auto rows = read_two_column_csv(path);
  if (rows.size() < 2) throw FormatError(path.string() + ": IRF needs at least two bins", 0);
  const double w = rows[1].first - rows[0].first;
  std::vector<double> counts;
  std::size_t center = rows.size();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    counts.push_back(rows[k].second);
    if (std::abs(rows[k].first) < 0.5 * w) center = k;
  }
  if (center == rows.size()) throw InputError(path.string() + ": IRF does not contain zero delay");
  return fitkit::make_irf(w, std::move(counts), center);
}

inline json input_record(const fs::path& p) { return json{{"file", p.string()}, {"sha256", sha256_file(p)}}; }

inline std::vector<fs::path> default_inputs(const Setup& s, const std::string& measurement) {
  if (measurement == "g2") return {s.out_dir / "hbt.ptag"};
  if (measurement == "hom") return {s.out_dir / "hom_hh.ptag", s.out_dir / "hom_hv.ptag"};
  if (measurement == "dop") return {s.out_dir / "dop.csv"};
  if (measurement == "linewidth") return {s.out_dir / "spectrum.csv"};
  if (measurement == "lifetime") {
    std::vector<fs::path> files;
    if (fs::is_directory(s.out_dir))
      for (const auto& e : fs::directory_iterator(s.out_dir)) {
        const auto name = e.path().filename().string();
        if (name.starts_with("decay") && e.path().extension() == ".ptag") files.push_back(e.path());
      }
    std::sort(files.begin(), files.end());
    return files;
  }
  return {};
}

inline analysis::BudgetTable resolve_budget(config::Config& c) {
  c.require_section("budget");
  std::map<int, analysis::BudgetEntry> entries;
  std::map<int, bool> has_value;
  for (const auto& [key, value] : c.section("budget")) {
    std::smatch m;
    if (!std::regex_match(key, m, config::detail::budget_entry_key())) continue;
    const int n = std::stoi(m[1]);
    auto& e = entries[n];
    if (m[2] == "label") {
      e.label = value.text;
    } else {
      double v;
      config::detail::parse_real(value.text, v);
      if (m[2] == "value_pct") {
        e.efficiency = v / 100.0;
        has_value[n] = true;
      } else {
        e.abs_error = v / 100.0;
      }
    }
  }
  analysis::BudgetTable b;
  for (auto& [n, e] : entries) {
    if (!has_value[n]) throw ConfigError("budget entry " + std::to_string(n) + " has no value_pct");
    if (e.label.empty()) e.label = "entry " + std::to_string(n);
    b.entries.push_back(e);
  }
  b.measured_rate_khz = c.real("budget", "measured_rate_khz", 1080.0);
  b.measured_rate_error_khz = c.real("budget", "measured_rate_error_khz", 40.0);
  b.rep_rate_khz = c.real("budget", "rep_rate_khz", 76227.93);
  b.rep_rate_error_khz = c.real("budget", "rep_rate_error_khz", 0.18);
  return b;
}

inline std::map<std::string, std::string> cmd_analyze(const Options& opt) {
  Setup s = make_setup(opt);
  const std::string m = opt.mode.empty() ? s.cfg.text("analysis", "measurement", "g2") : opt.mode;
  if (m != "g2" && m != "hom" && m != "lifetime" && m != "dop" && m != "budget" && m != "linewidth")
    throw ConfigError("unknown measurement '" + m + "'");
  s.cfg.set("analysis", "measurement", m);
  const auto inputs = opt.inputs.empty() ? default_inputs(s, m) : opt.inputs;
  json input_records = json::array();
  for (const auto& p : inputs) {
    if (!fs::is_regular_file(p)) throw InputError("input file '" + p.string() + "' not found");
    input_records.push_back(input_record(p));
  }
  OutputSet out(s.out_dir);
  std::vector<std::string> warnings;
  json result{{"measurement", m}, {"inputs", input_records}};

  if (m == "g2") {
    if (inputs.size() != 1) throw InputError("g2 expects one PTAG input");
    const auto chain = resolve_chain(s.cfg);
    const auto train = resolve_train(s.cfg, s.seed);
    const auto bin = static_cast<std::int64_t>(s.cfg.uint("analysis", "bin_width_ps", 100));
    const auto n_side = static_cast<int>(s.cfg.uint("analysis", "n_side_peaks", 5));
    // Two detectors with independent jitter: the coincidence response is sqrt(2) wider.
    const auto irf = s.cfg.has("analysis", "irf_file")
                         ? read_irf_csv(s.cfg.file("analysis", "irf_file"))
                         : fitkit::make_gaussian_irf(static_cast<double>(bin),
                                                     std::sqrt(2.0) * chain.jitter_fwhm_ps * montecarlo::kFwhmToSigma);
    const auto r = analysis::hbt_g2(ptag::read(inputs[0].string()), irf, train.period_ps(), n_side, bin, s.threads);
    result["g2_zero"] = r.g2_zero;
    result["g2_error"] = r.g2_error;
    result["tau_fit_ns"] = r.tau_fit_ns;
    result["period_fit_ps"] = r.period_fit_ps;
    result["n_side_peaks"] = n_side;
    result["bin_width_ps"] = bin;
    result["fit"] = fit_json(r.fit);
    out.add("g2_histogram.csv", histogram_csv(r.histogram));
  } else if (m == "hom") {
    if (inputs.size() != 2) throw InputError("hom expects two PTAG inputs (HH, HV)");
    const auto em = resolve_emitter(s.cfg);
    const auto train = resolve_train(s.cfg, s.seed);
    const auto windows = s.cfg.list("analysis", "windows_ns", {3.0, 2.0, 1.1});
    const auto bin = static_cast<std::int64_t>(s.cfg.uint("analysis", "bin_width_ps", 10));
    const auto n_side = static_cast<int>(s.cfg.uint("analysis", "n_side_peaks", 5));
    const auto r = analysis::hom_visibility(ptag::read(inputs[0].string()), ptag::read(inputs[1].string()),
                                            train.period_ps(), windows, bin, n_side, s.threads);
    json rows = json::array();
    for (const auto& w : r.windows) {
      json row{{"window_ns", w.window_ns}, {"area_hh", w.area_hh},       {"area_hv", w.area_hv},
               {"g2_hh", w.g2_hh},         {"g2_hv", w.g2_hv},           {"visibility", w.visibility},
               {"visibility_error", w.visibility_error}, {"ci_low", w.ci_low}, {"ci_high", w.ci_high}};
      if (w.visibility > 0.0 && w.visibility <= 1.0) {
        row["t2_ps_lifetime"] = analysis::dephasing_estimate(w.visibility, em.t1_ns, analysis::DephasingMode::lifetime).t2_ps;
        row["t2_ps_window"] = analysis::dephasing_estimate(w.visibility, w.window_ns, analysis::DephasingMode::window).t2_ps;
      }
      rows.push_back(std::move(row));
    }
    result["windows"] = rows;
    result["t0_hh_ps"] = r.t0_hh_ps;
    result["t0_hv_ps"] = r.t0_hv_ps;
    out.add("hom_hh_histogram.csv", histogram_csv(r.histogram_hh));
    out.add("hom_hv_histogram.csv", histogram_csv(r.histogram_hv));
  } else if (m == "lifetime") {
    if (inputs.empty()) throw InputError("lifetime expects at least one PTAG input");
    const auto train = resolve_train(s.cfg, s.seed);
    const auto bin = static_cast<std::int64_t>(s.cfg.uint("analysis", "bin_width_ps", 16));
    json rows = json::array();
    std::vector<analysis::LifetimeResult> fits;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      correlator::CorrelationHistogram h;
      auto r = analysis::lifetime_from_stream(ptag::read(inputs[i].string()), train.period_ps(), 0, 1, bin, &h);
      rows.push_back(json{{"file", inputs[i].filename().string()},
                          {"tau_ns", r.tau_ns},
                          {"tau_error_ns", r.tau_error_ns},
                          {"fit", fit_json(r.fit)}});
      char name[48];
      std::snprintf(name, sizeof name, "lifetime_%02zu_histogram.csv", i);
      out.add(name, histogram_csv(h));
      fits.push_back(std::move(r));
    }
    result["lifetimes"] = rows;
    if (s.cfg.has("emitter", "detunings_mev")) {
      const auto det = s.cfg.list("emitter", "detunings_mev", {});
      if (det.size() != fits.size())
        throw ConfigError("detunings_mev lists " + std::to_string(det.size()) + " values for " +
                              std::to_string(fits.size()) + " inputs",
                          s.cfg.line("emitter", "detunings_mev"));
      analysis::DetuningSeries series;
      for (std::size_t i = 0; i < det.size(); ++i) series.push_back({det[i], fits[i].tau_ns, fits[i].tau_error_ns});
      if (series.size() >= 4) {
        const double gamma_free = s.cfg.real("cavity", "gamma_free_per_ns", 1.0 / 2.3);
        const auto d = analysis::lifetime_vs_detuning(series, gamma_free);
        warnings.insert(warnings.end(), d.warnings.begin(), d.warnings.end());
        result["detuning_fit"] = json{{"gamma_free_per_ns", gamma_free},
                                      {"f_res", d.model.f_res},
                                      {"f_res_error", d.f_res_error},
                                      {"f_inh", d.model.f_inh},
                                      {"f_inh_error", d.f_inh_error},
                                      {"kappa_mev", d.model.kappa_mev},
                                      {"kappa_error_mev", d.kappa_error_mev},
                                      {"rate_ratio", d.ratio},
                                      {"rate_ratio_error", d.ratio_error},
                                      {"ill_conditioned", d.ill_conditioned},
                                      {"fit", fit_json(d.fit)}};
      }
    }
  } else if (m == "dop") {
    if (inputs.size() != 1) throw InputError("dop expects one CSV input");
    std::vector<double> a, y;
    for (const auto& [x, v] : read_two_column_csv(inputs[0])) {
      a.push_back(x);
      y.push_back(v);
    }
    const auto r = analysis::dop_fit(a, y);
    result["rho"] = r.rho;
    result["rho_error"] = r.rho_error;
    result["theta0_deg"] = r.theta0_defined ? json(r.theta0_deg) : json(nullptr);
    result["theta0_error_deg"] = r.theta0_error_deg;
    result["theta0_defined"] = r.theta0_defined;
    if (r.fit) result["fit"] = fit_json(*r.fit);
  } else if (m == "budget") {
    const auto b = resolve_budget(s.cfg);
    const auto r = analysis::brightness_budget(b);
    json entries = json::array();
    for (const auto& e : b.entries)
      entries.push_back(json{{"label", e.label}, {"value_pct", e.efficiency * 100.0}, {"error_pct", e.abs_error * 100.0}});
    result["entries"] = entries;
    result["total_efficiency_pct"] = r.total_efficiency * 100.0;
    result["total_efficiency_error_pct"] = r.total_efficiency_error * 100.0;
    result["corrected_rate_per_pulse"] = r.corrected_rate_per_pulse;
    result["first_lens_brightness_pct"] = r.brightness * 100.0;
    result["first_lens_brightness_error_pct"] = r.brightness_error * 100.0;
  } else {
    if (inputs.size() != 1) throw InputError("linewidth expects one CSV input");
    std::vector<double> e, y;
    for (const auto& [x, v] : read_two_column_csv(inputs[0])) {
      e.push_back(x);
      y.push_back(v);
    }
    const auto r = analysis::linewidth(e, y);
    result["gamma_uev"] = r.gamma_uev;
    result["gamma_error_uev"] = r.gamma_error_uev;
    result["center_ev"] = r.center_ev;
    result["bin_uev"] = r.bin_uev;
    result["resolution_limited"] = r.resolution_limited;
    result["fit"] = fit_json(r.fit);
  }
  out.add_json(m + ".json", result);
  return finish(s, out, "analyze", m, warnings, input_records);
}

// ---------------------------------------------------------------------------
// cavity

inline std::map<std::string, std::string> cmd_cavity(const Options& opt) {
  Setup s = make_setup(opt);
  auto& c = s.cfg;
  const double energy = c.real("emitter", "energy_ev", 1.5707);
  OutputSet out(s.out_dir);
  json report;

  // Bottom mirror.
  const auto stack = optics::bragg_stack(c.real("cavity", "dbr_n_high", 2.28), c.real("cavity", "dbr_d_high_nm", 85.0),
                                         c.real("cavity", "dbr_n_low", 1.45), c.real("cavity", "dbr_d_low_nm", 131.0),
                                         static_cast<int>(c.uint("cavity", "dbr_pairs", 10)),
                                         c.real("cavity", "ambient_index", 1.0), c.real("cavity", "substrate_index", 1.5));
  const double wl_min = c.real("cavity", "wavelength_min_nm", 600.0);
  const double wl_max = c.real("cavity", "wavelength_max_nm", 950.0);
  const auto band = optics::find_stopband(stack, wl_min, wl_max);
  report["stopband"] = json{{"center_nm", band.center_nm},
                            {"peak_reflectivity", band.peak_R},
                            {"lower_edge_nm", band.lower_edge_nm},
                            {"upper_edge_nm", band.upper_edge_nm}};
  {
    const auto grid = optics::wavelength_grid(wl_min, wl_max, c.real("cavity", "wavelength_step_nm", 0.5));
    std::string csv = "wavelength_nm,R,T\n";
    for (const auto& r : optics::dbr_reflectivity(stack, grid))
      csv += csv_number(r.wavelength_nm) + "," + csv_number(r.R) + "," + csv_number(r.T) + "\n";
    out.add("dbr_spectrum.csv", std::move(csv));
  }

  // Resonator.
  const double length = c.real("cavity", "length_um", 5.5);
  const double diameter = c.real("cavity", "lens_diameter_um", 4.0);
  const double depth = c.real("cavity", "lens_depth_nm", 300.0);
  const double wl_ref = c.real("cavity", "wavelength_ref_nm", optics::kHcEvNm / energy);
  const double radius = c.has("cavity", "radius_um") ? c.real("cavity", "radius_um", 0.0)
                                                      : optics::roc_from_spherical_cap(diameter, depth);
  const optics::CavityGeometry g{length, radius, diameter, depth, wl_ref};
  g.validate();
  const auto spec = optics::cavity_mode_spectrum(g, c.real("cavity", "energy_min_ev", energy - 0.15),
                                                 c.real("cavity", "energy_max_ev", energy + 0.15));
  const auto waist = optics::gaussian_waist(g, wl_ref);
  const double q = c.real("cavity", "q_factor", 600.0);
  const auto model = resolve_decay_model(c, energy);
  const double xi = c.has("cavity", "overlap_xi") ? c.real("cavity", "overlap_xi", 1.0)
                                                  : optics::overlap_for_purcell(g, wl_ref, q, 1.5);
  c.set("cavity", "overlap_xi", csv_number(xi));
  report["geometry"] = json{{"length_um", length}, {"radius_um", radius}, {"lens_diameter_um", diameter},
                            {"lens_depth_nm", depth}, {"wavelength_ref_nm", wl_ref}};
  report["modes"] = json{{"longitudinal_spacing_mev", spec.longitudinal_spacing_mev},
                         {"transverse_spacing_mev", spec.transverse_spacing_mev},
                         {"count", spec.modes.size()}};
  report["waist"] = json{{"w0_um", waist.w0_um}, {"mode_diameter_um", waist.mode_diameter_um}};
  report["purcell_diagnostic"] = json{{"mode_volume_um3", optics::mode_volume_um3(g, wl_ref)},
                                      {"q_factor", q},
                                      {"overlap_xi", xi},
                                      {"purcell_factor", optics::purcell_from_mode_volume(g, wl_ref, q, xi)}};
  report["decay_model"] = json{{"gamma_free_per_ns", model.gamma_free_per_ns},
                               {"f_res", model.f_res},
                               {"f_inh", model.f_inh},
                               {"kappa_mev", model.kappa_mev},
                               {"lifetime_on_resonance_ns", optics::lifetime_ns(model, 0.0)},
                               {"rate_ratio", model.f_res / model.f_inh}};
  {
    std::string csv = "longitudinal_index,transverse_order,energy_ev\n";
    for (const auto& mo : spec.modes)
      csv += std::to_string(mo.longitudinal_index) + "," + std::to_string(mo.transverse_order) + "," +
             csv_number(mo.energy_ev) + "\n";
    out.add("modes.csv", std::move(csv));
  }
  {
    const double span = c.real("cavity", "detuning_span_mev", 10.0);
    const double step = c.real("cavity", "detuning_step_mev", 0.1);
    if (!(step > 0.0) || !(span > 0.0)) throw InputError("detuning span and step must be positive");
    std::string csv = "detuning_mev,rate_per_ns,lifetime_ns\n";
    const auto n = static_cast<long>(std::floor(span / step + 1e-9));
    for (long k = -n; k <= n; ++k) {
      const double d = static_cast<double>(k) * step;
      csv += csv_number(d) + "," + csv_number(optics::decay_rate(model, d)) + "," +
             csv_number(optics::lifetime_ns(model, d)) + "\n";
    }
    out.add("decay_curve.csv", std::move(csv));
  }
  if (c.has("cavity", "gold_index_file")) {
    const auto table = optics::IndexTable::load(c.file("cavity", "gold_index_file").string());
    const double t = c.real("cavity", "gold_thickness_nm", 33.0);
    const optics::LayerStack gold{1.0, {{table.at(wl_ref), t}}, c.real("cavity", "substrate_index", 1.5)};
    const auto r = optics::reflectance_at(gold, wl_ref);
    report["gold_film"] = json{{"thickness_nm", t}, {"wavelength_nm", wl_ref}, {"R", r.R}, {"T", r.T}};
  }
  out.add_json("cavity.json", report);
  return finish(s, out, "cavity", "", {});
}

}  // namespace spsim::cli
