// spsim: simulate, analyze and cavity commands over INI recipes.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "spsim/cli.hpp"

namespace {

const char* error_kind(const std::exception& e) {
  if (dynamic_cast<const spsim::ConfigError*>(&e)) return "config";
  if (dynamic_cast<const spsim::FormatError*>(&e)) return "format";
  if (dynamic_cast<const spsim::GeometryError*>(&e)) return "geometry";
  if (dynamic_cast<const spsim::DomainError*>(&e)) return "domain";
  if (dynamic_cast<const spsim::EstimationError*>(&e)) return "estimation";
  if (dynamic_cast<const spsim::FitError*>(&e)) return "fit";
  if (dynamic_cast<const spsim::InputError*>(&e)) return "input";
  return "internal";
}

void add_common(CLI::App* cmd, spsim::cli::Options& opt, std::uint64_t& seed) {
  cmd->add_option("--config", opt.config_path, "INI recipe or run manifest (JSON)")->required();
  cmd->add_option("--seed", seed, "random seed, overrides the config");
  cmd->add_option("--out", opt.out_dir, "output directory, overrides output_dir");
  cmd->add_option("--threads", opt.threads, "worker threads (0 = one per core)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"single-photon source simulation and analysis"};
  app.set_version_flag("--version", spsim::cli::kVersion);
  app.require_subcommand(1);

  spsim::cli::Options opt;
  std::uint64_t seed = 0;

  auto* sim = app.add_subcommand("simulate", "generate time tags or synthetic spectra");
  sim->add_option("mode", opt.mode, "hbt | hom | decay | dop | spectrum (default: config 'mode')");
  add_common(sim, opt, seed);

  auto* ana = app.add_subcommand("analyze", "extract a measurement from simulated or recorded data");
  ana->add_option("measurement", opt.mode, "g2 | hom | lifetime | dop | budget | linewidth");
  ana->add_option("--input", opt.inputs, "input files (default: conventional names in the output directory)");
  add_common(ana, opt, seed);

  auto* cav = app.add_subcommand("cavity", "mirror spectrum, mode structure and decay-rate model");
  add_common(cav, opt, seed);

  CLI11_PARSE(app, argc, argv);
  for (auto* cmd : {sim, ana, cav})
    if (cmd->count("--seed")) opt.seed = seed;

  try {
    std::map<std::string, std::string> outputs;
    if (*sim)
      outputs = spsim::cli::cmd_simulate(opt);
    else if (*ana)
      outputs = spsim::cli::cmd_analyze(opt);
    else
      outputs = spsim::cli::cmd_cavity(opt);
    for (const auto& [name, sum] : outputs) std::cout << sum << "  " << name << "\n";
    return 0;
  } catch (const std::exception& e) {
    const nlohmann::json err{{"error", error_kind(e)}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
}
