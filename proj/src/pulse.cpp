#include "dexwrite/pulse.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dexw {

namespace {
constexpr double kFwhmToSigma = 0.42466090014400953;  // 1 / (2 sqrt(2 ln 2))
constexpr double kGaussianHalfWindow = 8.0;            // in sigma
}  // namespace

std::string_view to_string(PulseKind k) {
  switch (k) {
    case PulseKind::Write: return "write";
    case PulseKind::Probe: return "probe";
    case PulseKind::Deplete: return "deplete";
  }
  return "?";
}

std::string_view to_string(EnvelopeShape e) { return e == EnvelopeShape::Gaussian ? "gaussian" : "flat_top"; }

double area_from_power(double power, double calibration_k) {
  if (!(power >= 0) || !std::isfinite(power)) throw ValidationError("area_from_power: power must be >= 0");
  if (!(calibration_k > 0) || !std::isfinite(calibration_k))
    throw ValidationError("area_from_power: calibration k must be > 0");
  return calibration_k * std::sqrt(power);
}

double PulseSpec::area() const {
  if (area_rad) return *area_rad;
  if (power) return area_from_power(*power, calibration_k);
  return 0.0;
}

double PulseSpec::sigma_ns() const { return duration_ns * kFwhmToSigma; }

double PulseSpec::window_start() const {
  if (kind == PulseKind::Deplete) return t0_ns;
  if (envelope == EnvelopeShape::Gaussian) return t0_ns - kGaussianHalfWindow * sigma_ns();
  return t0_ns - edge_ns;
}

double PulseSpec::window_end() const {
  if (kind == PulseKind::Deplete) return t0_ns;
  if (envelope == EnvelopeShape::Gaussian) return t0_ns + kGaussianHalfWindow * sigma_ns();
  return t0_ns + duration_ns + edge_ns;
}

double PulseSpec::peak_rabi() const {
  if (kind == PulseKind::Deplete) return 0.0;
  if (envelope == EnvelopeShape::Gaussian) return std::abs(area()) / (sigma_ns() * std::sqrt(constants::two_pi));
  return std::abs(area()) / duration_ns;
}

void validate_pulse(const PulseSpec& p) {
  const std::string who = std::string(to_string(p.kind)) + " pulse: ";
  if (!std::isfinite(p.t0_ns)) throw ValidationError(who + "t0 must be finite");
  if (p.kind == PulseKind::Deplete) return;
  if (!(p.duration_ns > 0) || !std::isfinite(p.duration_ns)) throw ValidationError(who + "duration must be > 0");
  if (p.area_rad.has_value() == p.power.has_value())
    throw ValidationError(who + "exactly one of area and power must be given");
  if (p.area_rad && !std::isfinite(*p.area_rad)) throw ValidationError(who + "area must be finite");
  if (p.power) area_from_power(*p.power, p.calibration_k);
  if (!std::isfinite(p.detuning_ev)) throw ValidationError(who + "detuning must be finite");
  if (p.envelope == EnvelopeShape::FlatTop && !(p.edge_ns > 0))
    throw ValidationError(who + "flat-top edge must be > 0");
  if (p.kind == PulseKind::Write && !p.polarization) throw ValidationError(who + "polarization missing");
  if (p.kind == PulseKind::Probe && !p.circular) throw ValidationError(who + "circular polarization missing");
}

std::vector<std::string> pulse_warnings(const PulseSpec& p, const LevelScheme& scheme) {
  std::vector<std::string> out;
  if (p.kind != PulseKind::Write) return out;
  const double relax_time = 1.0 / scheme.rates().relax;
  const double period = scheme.precession_period_ns();
  if (p.duration_ns > 0.2 * relax_time) {
    std::ostringstream os;
    os << "write pulse (" << p.duration_ns << " ns) is not short against relaxation (" << relax_time << " ns)";
    out.push_back(os.str());
  }
  if (p.duration_ns > 0.05 * period) {
    std::ostringstream os;
    os << "write pulse (" << p.duration_ns << " ns) is not short against the precession period (" << period
       << " ns)";
    out.push_back(os.str());
  }
  return out;
}

double envelope_value(const PulseSpec& p, double t) {
  if (p.kind == PulseKind::Deplete) return 0.0;
  if (p.envelope == EnvelopeShape::Gaussian) {
    const double s = p.sigma_ns();
    const double x = (t - p.t0_ns) / s;
    if (std::abs(x) > kGaussianHalfWindow) return 0.0;
    return p.peak_rabi() * std::exp(-0.5 * x * x);
  }
  const double plateau = p.peak_rabi();
  const double rise_start = p.t0_ns - p.edge_ns;
  const double fall_start = p.t0_ns + p.duration_ns;
  if (t < rise_start || t > fall_start + p.edge_ns) return 0.0;
  if (t < p.t0_ns) return plateau * 0.5 * (1.0 - std::cos(constants::pi * (t - rise_start) / p.edge_ns));
  if (t <= fall_start) return plateau;
  return plateau * 0.5 * (1.0 + std::cos(constants::pi * (t - fall_start) / p.edge_ns));
}

std::vector<DriveTerm> build_drive(const LevelScheme& scheme, const PulseSpec& pulse, const DriveOptions& options) {
  validate_pulse(pulse);
  std::vector<DriveTerm> terms;
  switch (pulse.kind) {
    case PulseKind::Deplete: return terms;

    case PulseKind::Write: {
      if (scheme.optically_dark()) throw ValidationError("write pulse: excited DE resonance is optically dark");
      const CVector2<double> circ = pulse.polarization->circular();
      const cdouble a_r = circ(0), a_l = circ(1);
      const MixingCoefficients& m = scheme.mixing();
      const double norm = std::sqrt(std::norm(m.beta) + std::norm(m.gamma));
      const cdouble w_plus = (a_r * m.beta + a_l * m.gamma) / norm;
      const cdouble w_minus = (a_l * m.beta + a_r * m.gamma) / norm;
      // The laser sits `detuning` above the excited-DE resonance.
      const double frame = -pulse.detuning_ev;
      // Round-off residue of a pure circular polarization is dropped.
      const double cut = 1e-12 * std::max(std::abs(w_plus), std::abs(w_minus));
      if (std::abs(w_plus) > cut) terms.push_back({Level::Vac, Level::DeExcitedPlus, w_plus, frame, pulse});
      if (std::abs(w_minus) > cut) terms.push_back({Level::Vac, Level::DeExcitedMinus, w_minus, frame, pulse});
      if (options.be_leakage) {
        const double rel = std::sqrt(transition_strength(scheme, Level::Vac, Level::BeExcitedPlus) /
                                     transition_strength(scheme, Level::Vac, Level::DeExcitedPlus));
        const double offset = scheme.state(Level::BeExcitedPlus).energy_ev - scheme.state(Level::DeExcitedPlus).energy_ev;
        if (std::abs(a_r) > 1e-12) terms.push_back({Level::Vac, Level::BeExcitedPlus, a_r * rel, offset + frame, pulse});
        if (std::abs(a_l) > 1e-12) terms.push_back({Level::Vac, Level::BeExcitedMinus, a_l * rel, offset + frame, pulse});
      }
      return terms;
    }

    case PulseKind::Probe: {
      const bool right = *pulse.circular == Circular::R;
      const Level from = right ? Level::DeGroundPlus : Level::DeGroundMinus;
      const Level to = right ? Level::XxPlus : Level::XxMinus;
      const cdouble d = transition_dipole(scheme, from, to, *pulse.circular);
      if (d == cdouble(0.0)) throw ValidationError("probe pulse: no DE -> XX transition for this polarization");
      terms.push_back({from, to, cdouble(std::abs(d)), -pulse.detuning_ev, pulse});
      return terms;
    }
  }
  throw ValidationError("build_drive: unknown pulse kind");
}

}  // namespace dexw
