#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dexwrite/levels.hpp"
#include "dexwrite/polarization.hpp"

namespace dexw {

enum class PulseKind { Write, Probe, Deplete };
enum class EnvelopeShape { Gaussian, FlatTop };

std::string_view to_string(PulseKind k);
std::string_view to_string(EnvelopeShape e);

struct PulseSpec {
  PulseKind kind{PulseKind::Write};
  // Gaussian: center. Flat top: start of the plateau.
  double t0_ns{0.0};
  // Gaussian: FWHM of the Rabi envelope. Flat top: plateau length.
  double duration_ns{0.010};
  EnvelopeShape envelope{EnvelopeShape::Gaussian};
  std::optional<PolarizationState> polarization;  // write
  std::optional<Circular> circular;               // probe
  // Exactly one of area / power is authoritative. For a flat top the area
  // counts the plateau only.
  std::optional<double> area_rad;
  std::optional<double> power;
  double calibration_k{1.0};
  double detuning_ev{0.0};
  double spectral_width_ev{150e-6};
  // Raised-cosine rise/fall of a flat top, outside the plateau.
  double edge_ns{0.5};

  double area() const;
  /// Support of the envelope (outside it the envelope is exactly zero, or
  /// below 1e-14 of the peak for a gaussian).
  double window_start() const;
  double window_end() const;
  double peak_rabi() const;
  double sigma_ns() const;
};

/// Theta = k * sqrt(power).
double area_from_power(double power, double calibration_k);

/// Throws ValidationError on malformed pulses.
void validate_pulse(const PulseSpec& pulse);

/// Non-fatal timescale warnings for a pulse against a scheme.
std::vector<std::string> pulse_warnings(const PulseSpec& pulse, const LevelScheme& scheme);

/// Rabi envelope in rad/ns (real, non-negative).
double envelope_value(const PulseSpec& pulse, double t_ns);

/// One coherent coupling |to><from| of the rotating-frame Hamiltonian. The
/// Hermitian conjugate is implied.
struct DriveTerm {
  Level from{Level::Vac};
  Level to{Level::Vac};
  // Relative dipole times polarization projection; the Rabi rate is
  // weight * envelope(t).
  cdouble weight{0.0};
  // Rotating-frame energy of `to` relative to `from` plus one laser photon, eV.
  double frame_ev{0.0};
  PulseSpec pulse;

  cdouble rabi(double t_ns) const { return weight * envelope_value(pulse, t_ns); }
};

struct DriveOptions {
  // Off-resonant coupling of the write pulse to the excited BE.
  bool be_leakage{false};
};

std::vector<DriveTerm> build_drive(const LevelScheme& scheme, const PulseSpec& pulse, const DriveOptions& options = {});

}  // namespace dexw
