#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "dexwrite/types.hpp"

namespace dexw {

// Truncated 11-state Hilbert space of the quantum dot: vacuum, ground and
// excited dark excitons (DE), ground and excited bright excitons (BE), and
// the spin-blockaded biexcitons XX_T(+-3).
enum class Level : int {
  Vac = 0,
  DeGroundPlus,
  DeGroundMinus,
  DeExcitedPlus,
  DeExcitedMinus,
  BeGroundPlus,
  BeGroundMinus,
  BeExcitedPlus,
  BeExcitedMinus,
  XxPlus,
  XxMinus,
};

inline constexpr int kNumLevels = 11;

inline constexpr std::array<Level, kNumLevels> kAllLevels = {
    Level::Vac,          Level::DeGroundPlus,  Level::DeGroundMinus, Level::DeExcitedPlus,
    Level::DeExcitedMinus, Level::BeGroundPlus, Level::BeGroundMinus, Level::BeExcitedPlus,
    Level::BeExcitedMinus, Level::XxPlus,       Level::XxMinus};

constexpr int index(Level l) { return static_cast<int>(l); }

std::string_view label(Level l);
/// Total angular-momentum projection on the growth axis.
int angular_momentum(Level l);
/// The j_z-negated partner (VAC maps to itself).
Level spin_mirror(Level l);

enum class Circular { R, L };

constexpr Circular opposite(Circular c) { return c == Circular::R ? Circular::L : Circular::R; }
constexpr int handedness_sign(Circular c) { return c == Circular::R ? +1 : -1; }

struct BasisState {
  Level level{Level::Vac};
  double energy_ev{0};
  int jz{0};

  bool operator==(const BasisState&) const = default;
};

/// Excited-DE wavefunction: alpha (spin parallel), beta (electron-flipped
/// bright admixture, couples with the DE's own handedness), gamma
/// (hole-flipped bright admixture, couples with the opposite handedness).
struct MixingCoefficients {
  cdouble alpha{1.0};
  cdouble beta{0.0};
  cdouble gamma{0.0};

  bool operator==(const MixingCoefficients&) const = default;
};

struct TransitionDipole {
  Level from{Level::Vac};
  Level to{Level::Vac};
  Circular pol{Circular::R};
  cdouble amplitude{0.0};
  // j_z carried by the optically active component of the transition; equals
  // j_z(to) - j_z(from) for plain bright transitions, and the admixed bright
  // component for the mixed excited-DE resonance.
  int bright_jz{0};
  bool emission{false};

  bool operator==(const TransitionDipole&) const = default;
};

/// Rates in 1/ns.
struct RateSet {
  double de_rad{1.0 / 1000.0};
  double de_deph{1.0 / 100.0};
  double relax{1.0 / 0.1};
  double be_rad{1.0 / 0.8};
  double xx_rad{1.0 / 0.8};

  bool operator==(const RateSet&) const = default;
};

struct StrengthRatios {
  double be_excited_over_de_excited{6.0};
  double be_ground_over_be_excited{35.0};
  // Used by the PLE synthesis only.
  double de_excited_over_de_ground{10.0};
  double de_second_over_de_excited{1.0};

  double implied_be_ground_over_de_excited() const {
    return be_excited_over_de_excited * be_ground_over_be_excited;
  }
  bool operator==(const StrengthRatios&) const = default;
};

/// User-facing parameters of the level scheme. Energies on the PLE
/// excitation-scan axis are relative to `scan_origin_ev`; the origin itself
/// is not calibrated against anything.
struct SchemeConfig {
  double scan_origin_ev{1.3};
  double de_ground_mev{-0.3};
  double de_excited_mev{15.0};
  double de_second_mev{22.0};
  double be_offset_uev{300.0};
  double xx_offset_mev{0.0};
  double delta_uev{1.5};

  double de_lifetime_ns{1000.0};
  double de_coherence_ns{100.0};
  double relax_time_ns{0.1};
  double be_lifetime_ns{0.8};
  double xx_lifetime_ns{0.8};

  // Left unset, |beta| follows from the BE/DE excited strength ratio with gamma = 0.
  std::optional<double> beta_abs;
  std::optional<double> gamma_abs;
  double beta_phase_rad{0.0};
  double gamma_phase_rad{0.0};

  // Unset means 6 unless the mixing magnitudes are given.
  std::optional<double> be_excited_over_de_excited;
  double be_ground_over_be_excited{35.0};
  double de_excited_over_de_ground{10.0};
  double de_second_over_de_excited{1.0};

  bool operator==(const SchemeConfig&) const = default;
};

class LevelScheme {
 public:
  const std::vector<BasisState>& states() const { return states_; }
  const BasisState& state(Level l) const { return states_[index(l)]; }
  const std::vector<TransitionDipole>& dipoles() const { return dipoles_; }
  const MixingCoefficients& mixing() const { return mixing_; }
  const RateSet& rates() const { return rates_; }
  const StrengthRatios& ratios() const { return ratios_; }
  /// DE ground doublet splitting, eV.
  double delta_ev() const { return delta_ev_; }
  double precession_period_ns() const { return period_from_splitting(delta_ev_); }
  /// No bright admixture: the excited DE cannot be written optically.
  bool optically_dark() const { return optically_dark_; }
  /// Radiative rate of the excited DE, scaled from the ground BE by oscillator strength.
  double de_excited_rad() const;
  /// Resonance energies on the excitation-scan axis, meV.
  double scan_energy_mev(Level l) const;
  const SchemeConfig& source() const { return source_; }

  int dim() const { return kNumLevels; }

  bool operator==(const LevelScheme&) const = default;

 private:
  friend LevelScheme build_scheme(const SchemeConfig&);
  std::vector<BasisState> states_;
  std::vector<TransitionDipole> dipoles_;
  MixingCoefficients mixing_;
  RateSet rates_;
  StrengthRatios ratios_;
  double delta_ev_{0};
  bool optically_dark_{false};
  SchemeConfig source_;
};

LevelScheme build_scheme(const SchemeConfig& config = {});

/// Fully explicit config that rebuilds an identical scheme.
SchemeConfig extract_config(const LevelScheme& scheme);

/// Amplitude for the pair in either orientation; 0 when no allowed transition exists.
cdouble transition_dipole(const LevelScheme& scheme, Level from, Level to, Circular pol);

/// Oscillator strength summed over both circular polarizations.
double transition_strength(const LevelScheme& scheme, Level from, Level to);

struct PleSpectrum {
  VectorXd energy_mev;
  // Rectilinear channels of the DE-monitored and BE-monitored spectra.
  VectorXd de_h, de_v, be_h, be_v;
  bool no_resonance_in_grid{false};
};

/// Lorentzian absorption spectra weighted by oscillator strength. The DE
/// ground resonance appears in the H channel only; excited resonances are
/// unpolarized and split equally between H and V.
PleSpectrum synthesize_ple_spectrum(const LevelScheme& scheme, double line_width_ev, const VectorXd& energy_grid_mev);

}  // namespace dexw
