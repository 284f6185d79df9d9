#include "dexwrite/cli.hpp"

#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "dexwrite/oracles.hpp"
#include "dexwrite/protocol.hpp"

namespace dexw {

namespace {

namespace fs = std::filesystem;

struct CommonFlags {
  std::string config;
  std::string out{"."};
  std::optional<std::uint64_t> seed;
  std::string preset;
  int jobs{1};
};

void add_common(CLI::App* sub, CommonFlags& f, bool writes_output) {
  sub->add_option("--config", f.config, "INI configuration file");
  sub->add_option("--preset", f.preset, "Parameter preset applied before the config file")
      ->check(CLI::IsMember({"ideal", "paper-like"}));
  if (!writes_output) return;
  sub->add_option("--out", f.out, "Output directory");
  sub->add_option("--seed", f.seed, "Seed for photon-count sampling");
  sub->add_option("--jobs", f.jobs, "Parallel scan points")->check(CLI::PositiveNumber);
}

ExperimentConfig load(const CommonFlags& f) {
  ExperimentConfig base = default_config();
  apply_preset(base, parse_preset(f.preset));
  ExperimentConfig cfg = f.config.empty() ? base : parse_config(f.config, base);
  if (f.seed) cfg.run.seed = *f.seed;
  validate_config(cfg);
  return cfg;
}

fs::path prepare_out(const CommonFlags& f) {
  fs::path dir(f.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw RuntimeFailure("cannot create output directory '" + f.out + "': " + ec.message());
  return dir;
}

int cmd_run(const CommonFlags& f, std::ostream& out) {
  const ExperimentConfig cfg = load(f);
  const RunReport r = run_sequence(cfg);
  const fs::path dir = prepare_out(f);
  if (wants_output(cfg, "trace")) write_trace_csv((dir / "trace.csv").string(), r.result.trace);
  if (r.result.trajectory) write_trajectory_csv((dir / "trajectory.csv").string(), *r.result.trajectory);
  write_text((dir / "config.echo.ini").string(), r.config_echo);
  const std::string report = format_report(r);
  write_text((dir / "report.txt").string(), report);
  out << report;
  return kExitOk;
}

int cmd_rabi(const CommonFlags& f, std::ostream& out) {
  ExperimentConfig cfg = load(f);
  cfg.scan.kind = ScanKind::Rabi;
  const RabiScan scan = scan_rabi(cfg, f.jobs);
  const fs::path dir = prepare_out(f);
  write_rabi_csv((dir / "rabi.csv").string(), scan);
  write_text((dir / "config.echo.ini").string(), config_echo(cfg));
  const std::string report = format_rabi_report(cfg, scan);
  write_text((dir / "report.txt").string(), report);
  out << report;
  return kExitOk;
}

int cmd_map(const CommonFlags& f, std::ostream& out) {
  ExperimentConfig cfg = load(f);
  if (cfg.scan.kind == ScanKind::None || cfg.scan.kind == ScanKind::Rabi) cfg.scan.kind = ScanKind::Map;
  const MapScan scan = scan_map(cfg, f.jobs);
  const fs::path dir = prepare_out(f);
  write_map_csv((dir / "map.csv").string(), scan);
  if (wants_output(cfg, "point_traces")) {
    fs::create_directories(dir / "traces");
    for (std::size_t i = 0; i < scan.rows.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "point_%04zu.csv", i);
      write_trace_csv((dir / "traces" / name).string(), scan.rows[i].result.trace);
    }
  }
  write_text((dir / "config.echo.ini").string(), config_echo(cfg));
  const std::string report = format_map_report(cfg, scan);
  write_text((dir / "report.txt").string(), report);
  out << report;
  return kExitOk;
}

int cmd_spectra(const CommonFlags& f, std::ostream& out) {
  const ExperimentConfig cfg = load(f);
  const LevelScheme scheme = build_scheme(cfg.scheme);
  const VectorXd grid = VectorXd::LinSpaced(cfg.spectra.points, cfg.spectra.energy_min_mev, cfg.spectra.energy_max_mev);
  const PleSpectrum s = synthesize_ple_spectrum(scheme, cfg.spectra.line_width_uev * 1e-6, grid);
  const fs::path dir = prepare_out(f);
  write_spectrum_csv((dir / "spectrum.csv").string(), s);
  write_text((dir / "config.echo.ini").string(), config_echo(cfg));
  if (s.no_resonance_in_grid) out << "warning: no resonance inside the energy grid\n";
  out << "wrote " << (dir / "spectrum.csv").string() << " (" << grid.size() << " points)\n";
  return kExitOk;
}

int cmd_validate(const CommonFlags& f, std::ostream& out) {
  const ExperimentConfig cfg = load(f);
  const LevelScheme scheme = build_scheme(cfg.scheme);
  std::vector<DriveTerm> drives = build_drive(scheme, cfg.write, DriveOptions{cfg.run.be_leakage});
  for (const auto& d : build_drive(scheme, cfg.probe)) drives.push_back(d);
  const TimescaleAudit audit = audit_timescales(scheme, drives, channels_from_scheme(scheme));
  out << "config ok\n" << timescale_ladder(cfg, scheme) << "\n";
  out << "implied precession period: " << scheme.precession_period_ns() << " ns\n";
  out << "integrator step: " << audit.step_ns << " ns (limited by " << audit.limiting << ")\n";
  for (const auto& w : pulse_warnings(cfg.write, scheme)) out << "warning: " << w << "\n";
  return kExitOk;
}

int cmd_oracles(std::ostream& out) {
  const auto checks = run_oracles();
  out << format_oracle_table(checks);
  for (const auto& c : checks)
    if (!c.passed) return kExitValidation;
  return kExitOk;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dark-exciton spin writing and readout simulator", "dexwrite"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tool_version());

  CommonFlags flags;
  auto* run = app.add_subcommand("run", "Single deplete-write-probe sequence");
  auto* rabi = app.add_subcommand("rabi", "Write-pulse power scan");
  auto* map = app.add_subcommand("map", "Theta, phi or full polarization map scan");
  auto* spectra = app.add_subcommand("spectra", "Synthetic excitation spectra");
  auto* validate = app.add_subcommand("validate", "Check the configuration and print the timescale audit");
  auto* oracles = app.add_subcommand("oracles", "Closed-form cross-checks");
  for (auto* s : {run, rabi, map, spectra}) add_common(s, flags, true);
  add_common(validate, flags, false);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << tool_version() << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitValidation;
  }

  try {
    if (run->parsed()) return cmd_run(flags, out);
    if (rabi->parsed()) return cmd_rabi(flags, out);
    if (map->parsed()) return cmd_map(flags, out);
    if (spectra->parsed()) return cmd_spectra(flags, out);
    if (validate->parsed()) return cmd_validate(flags, out);
    if (oracles->parsed()) return cmd_oracles(out);
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace dexw
