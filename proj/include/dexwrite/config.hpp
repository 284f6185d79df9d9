#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dexwrite/levels.hpp"
#include "dexwrite/pulse.hpp"
#include "dexwrite/readout.hpp"

namespace dexw {

enum class ReadoutMode { Weak, Coherent };
enum class ScanKind { None, Rabi, Theta, Phi, Map };
enum class Preset { None, Ideal, PaperLike };

std::string_view to_string(ReadoutMode m);
std::string_view to_string(ScanKind k);
Preset parse_preset(const std::string& name);

struct RunSettings {
  double rep_period_ns{105.3};
  ReadoutMode readout{ReadoutMode::Weak};
  bool impulsive_write{false};
  bool be_leakage{false};
  double pulse_resolution{0.02};
  double max_step_ns{0.0};
  // Added to the commanded write phi before it reaches the simulator.
  double phi_offset_rad{0.0};
  double trace_padding_ns{1.5};
  // NaN selects the automatic window.
  double fit_start_ns{std::numeric_limits<double>::quiet_NaN()};
  double fit_end_ns{std::numeric_limits<double>::quiet_NaN()};
  std::uint64_t seed{0};
  // Mean counts in the brightest bin; 0 keeps the noiseless intensities.
  double peak_counts_per_bin{0.0};
  std::vector<std::string> outputs{"trace"};
};

struct ScanSettings {
  ScanKind kind{ScanKind::None};
  int theta_points{24};
  int phi_points{24};
  double theta_rad{constants::pi / 2};
  double phi_rad{3 * constants::pi / 2};
  int rabi_points{61};
  double rabi_max_area_pi{3.0};
};

struct SpectraSettings {
  double line_width_uev{100.0};
  double energy_min_mev{-2.0};
  double energy_max_mev{30.0};
  int points{1601};
};

struct ExperimentConfig {
  SchemeConfig scheme;
  PulseSpec deplete;
  PulseSpec write;
  PulseSpec probe;
  DetectorModel detector;
  RunSettings run;
  ScanSettings scan;
  SpectraSettings spectra;

  ExperimentConfig();
};

ExperimentConfig default_config();
void apply_preset(ExperimentConfig& config, Preset preset);

/// Reads INI text on top of `base`. Unknown sections or keys, malformed
/// values and duplicate keys raise ValidationError carrying "<source>:<line>".
ExperimentConfig parse_config_text(const std::string& text, const std::string& source_name,
                                   const ExperimentConfig& base = default_config());
ExperimentConfig parse_config(const std::string& path, const ExperimentConfig& base = default_config());

/// Protocol invariants (deplete < write < probe, inside the repetition
/// period) plus the scheme, pulse and detector checks.
void validate_config(const ExperimentConfig& config);

/// Every value at full precision; parsing it back yields an identical config.
std::string config_echo(const ExperimentConfig& config);

bool wants_output(const ExperimentConfig& config, const std::string& name);

}  // namespace dexw
