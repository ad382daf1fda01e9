#pragma once
// INI-style run configuration.
//
//   # comment
//   seed = 42
//   output_dir = out/fig3a
//   [emitter]
//   t1_ns = 1.725
//
// Keys before the first section header are top-level. Every key is checked against a
// schema at parse time: unknown keys, malformed values and missing files are reported
// with their line number. Relative file paths resolve against the config's directory.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "spsim/error.hpp"

namespace spsim::config {

enum class Kind { real, uint, text, list, file, choice };

struct KeySpec {
  Kind kind;
  std::vector<std::string> choices = {};
};

using SectionSchema = std::map<std::string, KeySpec>;

inline const std::map<std::string, SectionSchema>& schema() {
  static const std::map<std::string, SectionSchema> s = {
      {"",
       {{"seed", {Kind::uint}},
        {"output_dir", {Kind::text}},
        {"mode", {Kind::choice, {"hbt", "hom", "decay", "dop", "spectrum"}}}}},
      {"emitter",
       {{"energy_ev", {Kind::real}},
        {"t1_ns", {Kind::real}},
        {"t2_ps", {Kind::real}},
        {"p_exc", {Kind::real}},
        {"p_multi", {Kind::real}},
        {"g2_target", {Kind::real}},
        {"dop", {Kind::real}},
        {"pol_angle_deg", {Kind::real}},
        {"detunings_mev", {Kind::list}},
        {"poissonian_mean", {Kind::real}}}},
      {"chain",
       {{"eta_first_lens", {Kind::real}},
        {"eta_setup", {Kind::real}},
        {"jitter_fwhm_ps", {Kind::real}},
        {"dead_time_ns", {Kind::real}},
        {"dark_rate_hz", {Kind::real}}}},
      {"train", {{"rep_rate_khz", {Kind::real}}, {"n_pulses", {Kind::uint}}}},
      {"mzi",
       {{"arm_delay_ns", {Kind::real}},
        {"polarization", {Kind::choice, {"HH", "HV", "both"}}},
        {"first_bs_ratio", {Kind::real}},
        {"second_bs_ratio", {Kind::real}},
        {"residual_offset_ns", {Kind::real}}}},
      {"cavity",
       {{"length_um", {Kind::real}},
        {"radius_um", {Kind::real}},
        {"lens_diameter_um", {Kind::real}},
        {"lens_depth_nm", {Kind::real}},
        {"wavelength_ref_nm", {Kind::real}},
        {"energy_min_ev", {Kind::real}},
        {"energy_max_ev", {Kind::real}},
        {"q_factor", {Kind::real}},
        {"gamma_free_per_ns", {Kind::real}},
        {"f_res", {Kind::real}},
        {"f_inh", {Kind::real}},
        {"overlap_xi", {Kind::real}},
        {"detuning_span_mev", {Kind::real}},
        {"detuning_step_mev", {Kind::real}},
        {"dbr_n_high", {Kind::real}},
        {"dbr_d_high_nm", {Kind::real}},
        {"dbr_n_low", {Kind::real}},
        {"dbr_d_low_nm", {Kind::real}},
        {"dbr_pairs", {Kind::uint}},
        {"ambient_index", {Kind::real}},
        {"substrate_index", {Kind::real}},
        {"gold_index_file", {Kind::file}},
        {"gold_thickness_nm", {Kind::real}},
        {"wavelength_min_nm", {Kind::real}},
        {"wavelength_max_nm", {Kind::real}},
        {"wavelength_step_nm", {Kind::real}}}},
      {"budget",
       {{"measured_rate_khz", {Kind::real}},
        {"measured_rate_error_khz", {Kind::real}},
        {"rep_rate_khz", {Kind::real}},
        {"rep_rate_error_khz", {Kind::real}}}},
      {"spectrum",
       {{"fwhm_uev", {Kind::real}},
        {"n_photons", {Kind::uint}},
        {"bin_uev", {Kind::real}},
        {"half_range_uev", {Kind::real}}}},
      {"polarimetry", {{"angles_deg", {Kind::list}}}},
      {"analysis",
       {{"measurement", {Kind::choice, {"g2", "hom", "lifetime", "dop", "budget", "linewidth"}}},
        {"bin_width_ps", {Kind::uint}},
        {"n_side_peaks", {Kind::uint}},
        {"windows_ns", {Kind::list}},
        {"irf_file", {Kind::file}}}},
  };
  return s;
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline bool parse_real(const std::string& s, double& v) {
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, v);
  return r.ec == std::errc() && r.ptr == end;
}

inline bool parse_uint(const std::string& s, std::uint64_t& v) {
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, v);
  return r.ec == std::errc() && r.ptr == end;
}

inline bool parse_list(const std::string& s, std::vector<double>& out) {
  out.clear();
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v;
    if (!parse_real(trim(item), v)) return false;
    out.push_back(v);
  }
  return !out.empty();
}

inline const std::regex& budget_entry_key() {
  static const std::regex re(R"(entry\.(\d+)\.(label|value_pct|error_pct))");
  return re;
}

}  // namespace detail

class Config {
 public:
  struct Value {
    std::string text;
    std::size_t line = 0;
  };

  static Config parse(std::string_view text, const std::filesystem::path& base_dir = ".") {
    Config c;
    c.base_dir_ = base_dir;
    std::string section;
    std::set<std::string> seen_sections;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string raw;
    while (std::getline(in, raw)) {
      ++line_no;
      if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
      const std::string line = detail::trim(raw);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError("malformed section header", line_no);
        section = detail::trim(std::string_view(line).substr(1, line.size() - 2));
        if (!schema().contains(section)) throw ConfigError("unknown section [" + section + "]", line_no);
        if (!seen_sections.insert(section).second) throw ConfigError("duplicate section [" + section + "]", line_no);
        c.values_[section];
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("expected key = value", line_no);
      const std::string key = detail::trim(std::string_view(line).substr(0, eq));
      const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
      if (key.empty()) throw ConfigError("empty key", line_no);
      auto& sec = c.values_[section];
      if (sec.contains(key)) throw ConfigError("duplicate key '" + key + "'", line_no);
      c.check(section, key, value, line_no);
      sec[key] = {value, line_no};
    }
    return c;
  }

  static Config load(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config '" + path.string() + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str(), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
  }

  /// Rebuilds a config from the "config" object of a run manifest.
  static Config from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".") {
    std::ostringstream text;
    if (j.contains("")) {
      for (const auto& [k, v] : j.at("").items()) text << k << " = " << v.get<std::string>() << "\n";
    }
    for (const auto& [section, kv] : j.items()) {
      if (section.empty()) continue;
      text << "[" << section << "]\n";
      for (const auto& [k, v] : kv.items()) text << k << " = " << v.get<std::string>() << "\n";
    }
    return parse(text.str(), base_dir);
  }

  bool has_section(const std::string& s) const { return values_.contains(s); }
  bool has(const std::string& s, const std::string& k) const {
    const auto it = values_.find(s);
    return it != values_.end() && it->second.contains(k);
  }

  void require_section(const std::string& s) const {
    if (!has_section(s)) throw ConfigError("missing required section [" + s + "]");
  }

  /// Sets or overrides a value (command-line overrides).
  void set(const std::string& s, const std::string& k, const std::string& v) {
    check(s, k, v, 0);
    values_[s][k] = {v, 0};
  }

  // Typed getters. A default is recorded into the config so the resolved set of
  // parameters can be echoed into the run manifest.
  double real(const std::string& s, const std::string& k, double def) {
    if (!has(s, k)) record(s, k, format_real(def));
    double v;
    detail::parse_real(values_[s][k].text, v);
    return v;
  }
  std::uint64_t uint(const std::string& s, const std::string& k, std::uint64_t def) {
    if (!has(s, k)) record(s, k, std::to_string(def));
    std::uint64_t v;
    detail::parse_uint(values_[s][k].text, v);
    return v;
  }
  std::string text(const std::string& s, const std::string& k, const std::string& def) {
    if (!has(s, k)) record(s, k, def);
    return values_[s][k].text;
  }
  std::vector<double> list(const std::string& s, const std::string& k, const std::vector<double>& def) {
    if (!has(s, k)) {
      std::string t;
      for (double d : def) t += (t.empty() ? "" : ", ") + format_real(d);
      record(s, k, t);
    }
    std::vector<double> v;
    detail::parse_list(values_[s][k].text, v);
    return v;
  }
  /// Absolute path of a file key, or empty when absent.
  std::filesystem::path file(const std::string& s, const std::string& k) const {
    if (!has(s, k)) return {};
    return resolve(values_.at(s).at(k).text);
  }
  std::size_t line(const std::string& s, const std::string& k) const {
    return has(s, k) ? values_.at(s).at(k).line : 0;
  }
  const std::map<std::string, Value>& section(const std::string& s) const {
    static const std::map<std::string, Value> empty;
    const auto it = values_.find(s);
    return it == values_.end() ? empty : it->second;
  }
  const std::filesystem::path& base_dir() const { return base_dir_; }

  /// Section -> key -> value text; file keys are written as absolute paths.
  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [s, kv] : values_) {
      nlohmann::json sec = nlohmann::json::object();
      for (const auto& [k, v] : kv) {
        const auto* spec = find_spec(s, k);
        sec[k] = spec && spec->kind == Kind::file ? resolve(v.text).string() : v.text;
      }
      j[s] = std::move(sec);
    }
    return j;
  }

  static std::string format_real(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
  }

 private:
  static const KeySpec* find_spec(const std::string& s, const std::string& k) {
    const auto sit = schema().find(s);
    if (sit == schema().end()) return nullptr;
    const auto kit = sit->second.find(k);
    if (kit != sit->second.end()) return &kit->second;
    if (s == "budget") {
      std::smatch m;
      if (std::regex_match(k, m, detail::budget_entry_key())) {
        static const KeySpec label{Kind::text}, number{Kind::real};
        return m[2] == "label" ? &label : &number;
      }
    }
    return nullptr;
  }

  std::filesystem::path resolve(const std::string& p) const {
    const std::filesystem::path path(p);
    return std::filesystem::absolute(path.is_absolute() ? path : base_dir_ / path).lexically_normal();
  }

  void check(const std::string& s, const std::string& k, const std::string& v, std::size_t line) const {
    const auto* spec = find_spec(s, k);
    const std::string where = s.empty() ? "top level" : "[" + s + "]";
    if (!spec) {
      if (!schema().contains(s)) throw ConfigError("unknown section [" + s + "]", line);
      throw ConfigError("unknown key '" + k + "' in " + where, line);
    }
    double d;
    std::uint64_t u;
    std::vector<double> l;
    switch (spec->kind) {
      case Kind::real:
        if (!detail::parse_real(v, d)) throw ConfigError("'" + k + "' expects a number, got '" + v + "'", line);
        break;
      case Kind::uint:
        if (!detail::parse_uint(v, u))
          throw ConfigError("'" + k + "' expects a non-negative integer, got '" + v + "'", line);
        break;
      case Kind::list:
        if (!detail::parse_list(v, l))
          throw ConfigError("'" + k + "' expects a comma-separated list of numbers", line);
        break;
      case Kind::file:
        if (!std::filesystem::is_regular_file(resolve(v)))
          throw ConfigError("'" + k + "': file '" + v + "' does not exist", line);
        break;
      case Kind::choice:
        if (std::find(spec->choices.begin(), spec->choices.end(), v) == spec->choices.end())
          throw ConfigError("'" + k + "' has invalid value '" + v + "'", line);
        break;
      case Kind::text:
        if (v.empty()) throw ConfigError("'" + k + "' is empty", line);
        break;
    }
  }

  void record(const std::string& s, const std::string& k, const std::string& v) { values_[s][k] = {v, 0}; }

  std::map<std::string, std::map<std::string, Value>> values_;
  std::filesystem::path base_dir_{"."};
};

}  // namespace spsim::config
