#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dexwrite/config.hpp"
#include "dexwrite/dynamics.hpp"
#include "dexwrite/readout.hpp"

namespace dexw {

struct Physicality {
  double max_trace_error{0.0};
  double min_eigenvalue{0.0};
  double max_hermiticity_correction{0.0};
  bool dcp_in_bounds{true};
};

struct SequenceResult {
  PolarizationState commanded;  // before the phi offset
  double write_area{0.0};
  std::optional<Trajectory> trajectory;
  ProbeSignal raw;
  DcpTrace trace;
  FitWindow window;
  PrecessionFit fit;
  Physicality physicality;
  // Detected counts summed over the trace, both probe runs.
  double total_emission{0.0};
};

/// Time grid of a single sequence: bin-aligned with the write pulse center,
/// padded on both sides for the IRF.
VectorXd sequence_grid(const ExperimentConfig& config);

/// Automatic fit window unless overridden in the config: starts after
/// relaxation and the IRF edge, stops before the probe fall.
FitWindow fit_window(const ExperimentConfig& config, const LevelScheme& scheme);

/// Deplete, write with the given polarization and area, precess, probe (R
/// and L runs), detect, fit. `point_index` offsets the photon-sampling seed.
SequenceResult run_point(const ExperimentConfig& config, const LevelScheme& scheme, const PolarizationState& commanded,
                         double write_area, std::uint64_t point_index, bool keep_trajectory = false);

struct RunReport {
  ExperimentConfig config;
  std::string config_echo;
  TimescaleAudit audit;
  std::vector<std::string> warnings;
  SequenceResult result;
  std::string version;
};

RunReport run_sequence(const ExperimentConfig& config);

struct RabiScan {
  VectorXd sqrt_power;
  VectorXd pl;
  std::optional<RabiFit> fit;
  std::string fit_error;
  Physicality physicality;
};

RabiScan scan_rabi(const ExperimentConfig& config, int jobs = 1);

struct MapRow {
  double theta{0.0};
  double phi{0.0};
  SequenceResult result;
  double fidelity{0.0};
};

struct MapScan {
  std::vector<MapRow> rows;  // theta-major
  FidelitySummary summary;
  // Over the analysis windows; the second value includes the weak bins at
  // the trace edges, where the IRF has not yet averaged the precession.
  double max_abs_dcp{0.0};
  double max_abs_dcp_all_bins{0.0};
  Physicality physicality;
};

/// Grid points of the configured scan: theta scan at fixed phi over [0, 2 pi),
/// phi scan at fixed theta over [0, 2 pi), or the theta x phi map with theta
/// on [0, pi] including both poles.
std::vector<std::pair<double, double>> scan_points(const ExperimentConfig& config);

MapScan scan_map(const ExperimentConfig& config, int jobs = 1);

Physicality merge(const Physicality& a, const Physicality& b);

/// One-line timescale ladder: pulse << relax << period << T2 << lifetime.
std::string timescale_ladder(const ExperimentConfig& config, const LevelScheme& scheme);

std::string tool_version();

// CSV writers.
void write_trace_csv(const std::string& path, const DcpTrace& trace);
void write_trajectory_csv(const std::string& path, const Trajectory& trajectory);
void write_map_csv(const std::string& path, const MapScan& scan);
void write_rabi_csv(const std::string& path, const RabiScan& scan);
void write_spectrum_csv(const std::string& path, const PleSpectrum& spectrum);
void write_text(const std::string& path, const std::string& text);

std::string format_report(const RunReport& report);
std::string format_rabi_report(const ExperimentConfig& config, const RabiScan& scan);
std::string format_map_report(const ExperimentConfig& config, const MapScan& scan);

}  // namespace dexw
