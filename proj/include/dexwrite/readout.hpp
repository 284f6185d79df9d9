#pragma once

#include <limits>
#include <vector>

#include "dexwrite/dynamics.hpp"
#include "dexwrite/levels.hpp"
#include "dexwrite/polarization.hpp"
#include "dexwrite/pulse.hpp"

namespace dexw {

enum class IrfShape { None, Gaussian };

struct DetectorModel {
  IrfShape irf{IrfShape::Gaussian};
  double irf_fwhm_ns{0.400};
  double bin_width_ns{0.05};
  // Multiplies the ideal DCP; absorbs unmodeled readout loss.
  double contrast{1.0};

  double irf_sigma_ns() const;
  /// Closed-form amplitude factor of the IRF on a sinusoid of the given period.
  double irf_attenuation(double period_ns) const;
  void validate() const;

  static DetectorModel ideal();
  static DetectorModel paper_like();
  bool operator==(const DetectorModel&) const = default;
};

/// Two-channel emission: i_r under the R-polarized probe run, i_l under the L run.
struct ProbeSignal {
  VectorXd times;
  VectorXd i_r;
  VectorXd i_l;
};

struct DcpTrace {
  VectorXd times;
  VectorXd i_r;
  VectorXd i_l;
  VectorXd dcp;
  Eigen::Array<bool, Eigen::Dynamic, 1> valid;

  double max_abs_dcp() const;
  double max_abs_dcp(double t_min, double t_max) const;
};

/// Weak-probe readout sampled on the trajectory times: the XX_T transfer rate
/// (|d| Omega(t))^2 / gamma_XX times the addressed DE population, counted at
/// the absorption time.
ProbeSignal weak_probe_readout(const Trajectory& trajectory, const PulseSpec& probe, const LevelScheme& scheme);

/// Full-coherent readout: two evolutions (R and L probe) from `rho_start` at
/// t_grid(0) with the probe drive; reports the XX_T emission flux.
ProbeSignal coherent_probe_readout(const StateMatrix& rho_start, const LevelScheme& scheme,
                                   const std::vector<LindbladChannel>& channels, const PulseSpec& probe,
                                   const VectorXd& t_grid, const EvolveOptions& options = {});

/// Gaussian IRF convolution of both channels; each input bin is spread over
/// the grid with a kernel renormalized at the edges, so total counts are kept.
ProbeSignal convolve_irf(const ProbeSignal& signal, const DetectorModel& detector);

/// Mixes the channels so that the resulting DCP equals contrast * DCP.
ProbeSignal apply_contrast(const ProbeSignal& signal, double contrast);

/// (i_r - i_l) / (i_r + i_l) per bin; bins below floor_fraction * max total are invalid.
DcpTrace dcp_trace(const VectorXd& times, const VectorXd& i_r, const VectorXd& i_l, double floor_fraction = 1e-6);

struct PrecessionFit {
  double visibility{0.0};
  double phase{0.0};  // rad in [0, 2 pi)
  double period{0.0};  // ns
  double decay_time{std::numeric_limits<double>::infinity()};
  double offset{0.0};
  double residual_rms{0.0};
  bool period_reliable{false};
  int points{0};
};

struct FitWindow {
  double t_min{-std::numeric_limits<double>::infinity()};
  double t_max{std::numeric_limits<double>::infinity()};
};

/// Least squares of offset + v exp(-t/tau) cos(2 pi t / T + phase) over the
/// valid bins in the window, started from the dominant periodogram line.
PrecessionFit fit_precession(const DcpTrace& trace, const FitWindow& window = {});

struct RabiFit {
  double k{0.0};
  double amplitude{0.0};
  double damping{0.0};
  double background{0.0};
  double residual_rms{0.0};

  double sqrt_power_pi() const { return constants::pi / k; }
  double sqrt_power_2pi() const { return constants::two_pi / k; }
  double model(double sqrt_power) const;
};

/// Fits A (1 - exp(-g Theta) cos Theta) / 2 + c with Theta = k sqrt(P).
RabiFit fit_rabi(const VectorXd& sqrt_power, const VectorXd& pl);

/// Known linear response between the written DE transverse spin and the
/// measured DCP: phonon relaxation (exponential arrival), IRF and contrast.
struct ResponseModel {
  double relax_rate{0.0};  // 1/ns; 0 disables
  double irf_sigma_ns{0.0};
  double contrast{1.0};

  /// Complex transfer factor at angular frequency w (rad/ns); arg is the phase lag.
  cdouble transfer(double angular_frequency) const;
  static ResponseModel from(const LevelScheme& scheme, const DetectorModel& detector);
};

struct WrittenStateEstimate {
  Bloch bloch{Bloch::Zero()};
  PoincarePoint poincare;
  double visibility{0.0};  // after response deconvolution, capped at 1
  double phase{0.0};
};

/// Rebuilds the written Bloch vector from a precession fit. Circular probes
/// only see the spin transverse to the precession eigenaxis; the sign of the
/// eigenaxis component (the hemisphere of cos theta) must be supplied.
WrittenStateEstimate reconstruct_written_state(const PrecessionFit& fit, const ResponseModel& response,
                                               int eigenaxis_sign, double degenerate_below = 0.01);

struct FidelityInput {
  double theta{0.0};
  double phi{0.0};
  PrecessionFit fit;
};

struct FidelitySummary {
  std::vector<double> fidelity;  // NaN where the fit was excluded
  double min{0.0};
  double mean{0.0};
  int excluded{0};
};

/// Per-point fidelity (1 + b_written . b_target)/2 against target_de_state.
/// Fits with an unreliable period are excluded unless the trace is flat
/// (visibility below 0.02), which is a valid eigenstate observation.
FidelitySummary fidelity_map(const std::vector<FidelityInput>& points, const ResponseModel& response);

}  // namespace dexw
