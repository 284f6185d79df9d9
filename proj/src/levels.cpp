#include "dexwrite/levels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace dexw {

std::string_view label(Level l) {
  switch (l) {
    case Level::Vac: return "VAC";
    case Level::DeGroundPlus: return "DE_G(+2)";
    case Level::DeGroundMinus: return "DE_G(-2)";
    case Level::DeExcitedPlus: return "DE_E(+2)";
    case Level::DeExcitedMinus: return "DE_E(-2)";
    case Level::BeGroundPlus: return "BE_G(+1)";
    case Level::BeGroundMinus: return "BE_G(-1)";
    case Level::BeExcitedPlus: return "BE_E(+1)";
    case Level::BeExcitedMinus: return "BE_E(-1)";
    case Level::XxPlus: return "XX_T(+3)";
    case Level::XxMinus: return "XX_T(-3)";
  }
  return "?";
}

int angular_momentum(Level l) {
  switch (l) {
    case Level::Vac: return 0;
    case Level::DeGroundPlus:
    case Level::DeExcitedPlus: return +2;
    case Level::DeGroundMinus:
    case Level::DeExcitedMinus: return -2;
    case Level::BeGroundPlus:
    case Level::BeExcitedPlus: return +1;
    case Level::BeGroundMinus:
    case Level::BeExcitedMinus: return -1;
    case Level::XxPlus: return +3;
    case Level::XxMinus: return -3;
  }
  return 0;
}

Level spin_mirror(Level l) {
  switch (l) {
    case Level::Vac: return Level::Vac;
    case Level::DeGroundPlus: return Level::DeGroundMinus;
    case Level::DeGroundMinus: return Level::DeGroundPlus;
    case Level::DeExcitedPlus: return Level::DeExcitedMinus;
    case Level::DeExcitedMinus: return Level::DeExcitedPlus;
    case Level::BeGroundPlus: return Level::BeGroundMinus;
    case Level::BeGroundMinus: return Level::BeGroundPlus;
    case Level::BeExcitedPlus: return Level::BeExcitedMinus;
    case Level::BeExcitedMinus: return Level::BeExcitedPlus;
    case Level::XxPlus: return Level::XxMinus;
    case Level::XxMinus: return Level::XxPlus;
  }
  return l;
}

namespace {

constexpr double kMev = 1e-3;
constexpr double kUev = 1e-6;

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError("level scheme: " + what);
}

bool positive_finite(double x) { return std::isfinite(x) && x > 0; }

// Resolves the mixing magnitudes against the excited BE/DE strength ratio.
// Returns the resolved config (all optionals set unless the scheme is dark).
SchemeConfig resolve_mixing(SchemeConfig cfg) {
  const double g = cfg.gamma_abs.value_or(0.0);
  require(std::isfinite(g) && g >= 0, "gamma_abs must be a finite non-negative number");
  if (!cfg.beta_abs) {
    const double ratio = cfg.be_excited_over_de_excited.value_or(6.0);
    require(positive_finite(ratio), "be_excited_over_de_excited must be positive");
    const double admixture = 1.0 / ratio;
    require(g * g <= admixture, "gamma_abs exceeds the admixture implied by be_excited_over_de_excited");
    cfg.beta_abs = std::sqrt(admixture - g * g);
    cfg.gamma_abs = g;
    cfg.be_excited_over_de_excited = ratio;
    return cfg;
  }
  const double b = *cfg.beta_abs;
  require(std::isfinite(b) && b >= 0, "beta_abs must be a finite non-negative number");
  cfg.gamma_abs = g;
  const double admixture = b * b + g * g;
  if (admixture == 0.0) {
    // Optically dark: the ratio is undefined.
    cfg.be_excited_over_de_excited.reset();
    return cfg;
  }
  const double implied = 1.0 / admixture;
  if (cfg.be_excited_over_de_excited) {
    require(std::abs(*cfg.be_excited_over_de_excited - implied) <= 1e-9 * implied,
            "be_excited_over_de_excited inconsistent with beta_abs/gamma_abs");
  } else {
    cfg.be_excited_over_de_excited = implied;
  }
  return cfg;
}

void add_mirrored(std::vector<TransitionDipole>& out, TransitionDipole d) {
  out.push_back(d);
  TransitionDipole m = d;
  m.from = spin_mirror(d.from);
  m.to = spin_mirror(d.to);
  m.pol = opposite(d.pol);
  m.bright_jz = -d.bright_jz;
  out.push_back(m);
}

}  // namespace

double LevelScheme::de_excited_rad() const {
  return rates_.be_rad * transition_strength(*this, Level::Vac, Level::DeExcitedPlus) /
         transition_strength(*this, Level::Vac, Level::BeGroundPlus);
}

double LevelScheme::scan_energy_mev(Level l) const {
  return (state(l).energy_ev - source_.scan_origin_ev) / kMev;
}

LevelScheme build_scheme(const SchemeConfig& input) {
  const SchemeConfig cfg = resolve_mixing(input);

  for (double e : {cfg.scan_origin_ev, cfg.de_ground_mev, cfg.de_excited_mev, cfg.de_second_mev, cfg.be_offset_uev,
                   cfg.xx_offset_mev, cfg.beta_phase_rad, cfg.gamma_phase_rad}) {
    require(std::isfinite(e), "non-finite energy or phase");
  }
  require(positive_finite(cfg.delta_uev), "delta_uev must be > 0");
  require(positive_finite(cfg.be_ground_over_be_excited), "be_ground_over_be_excited must be > 0");
  require(positive_finite(cfg.de_excited_over_de_ground), "de_excited_over_de_ground must be > 0");
  require(positive_finite(cfg.de_second_over_de_excited), "de_second_over_de_excited must be > 0");

  LevelScheme s;
  s.source_ = cfg;
  s.delta_ev_ = cfg.delta_uev * kUev;

  RateSet& r = s.rates_;
  for (double t : {cfg.de_lifetime_ns, cfg.de_coherence_ns, cfg.relax_time_ns, cfg.be_lifetime_ns, cfg.xx_lifetime_ns}) {
    require(positive_finite(t), "lifetimes must be positive and finite (rates strictly positive)");
  }
  r.de_rad = 1.0 / cfg.de_lifetime_ns;
  r.de_deph = 1.0 / cfg.de_coherence_ns;
  r.relax = 1.0 / cfg.relax_time_ns;
  r.be_rad = 1.0 / cfg.be_lifetime_ns;
  r.xx_rad = 1.0 / cfg.xx_lifetime_ns;
  require(r.relax > r.be_rad, "timescale ordering: relaxation must be faster than BE radiative decay");
  require(r.relax > r.xx_rad, "timescale ordering: relaxation must be faster than XX radiative decay");
  require(r.be_rad > r.de_rad && r.xx_rad > r.de_rad,
          "timescale ordering: BE/XX radiative decay must be faster than DE radiative decay");

  const double b = *cfg.beta_abs;
  const double g = *cfg.gamma_abs;
  const double admixture = b * b + g * g;
  require(admixture < 1.0, "mixing admixture |beta|^2 + |gamma|^2 must be < 1");
  const double a = std::sqrt(1.0 - admixture);
  require(b < a && g < a, "|beta| and |gamma| must be smaller than |alpha|");
  s.mixing_ = {cdouble(a, 0.0), std::polar(b, cfg.beta_phase_rad), std::polar(g, cfg.gamma_phase_rad)};
  s.optically_dark_ = admixture == 0.0;

  s.ratios_.be_excited_over_de_excited =
      s.optically_dark_ ? std::numeric_limits<double>::infinity() : *cfg.be_excited_over_de_excited;
  s.ratios_.be_ground_over_be_excited = cfg.be_ground_over_be_excited;
  s.ratios_.de_excited_over_de_ground = cfg.de_excited_over_de_ground;
  s.ratios_.de_second_over_de_excited = cfg.de_second_over_de_excited;

  const double e_de_g = cfg.scan_origin_ev + cfg.de_ground_mev * kMev;
  const double e_de_e = cfg.scan_origin_ev + cfg.de_excited_mev * kMev;
  const double be_shift = cfg.be_offset_uev * kUev;
  const double e_xx = e_de_g + cfg.scan_origin_ev + cfg.xx_offset_mev * kMev;
  auto energy_of = [&](Level l) {
    switch (l) {
      case Level::Vac: return 0.0;
      case Level::DeGroundPlus:
      case Level::DeGroundMinus: return e_de_g;
      case Level::DeExcitedPlus:
      case Level::DeExcitedMinus: return e_de_e;
      case Level::BeGroundPlus:
      case Level::BeGroundMinus: return e_de_g + be_shift;
      case Level::BeExcitedPlus:
      case Level::BeExcitedMinus: return e_de_e + be_shift;
      case Level::XxPlus:
      case Level::XxMinus: return e_xx;
    }
    return 0.0;
  };
  s.states_.reserve(kNumLevels);
  for (Level l : kAllLevels) s.states_.push_back({l, energy_of(l), angular_momentum(l)});

  // Dipoles normalized to a unit ground-BE transition.
  const double be_excited_amp = 1.0 / std::sqrt(cfg.be_ground_over_be_excited);
  auto& d = s.dipoles_;
  add_mirrored(d, {Level::Vac, Level::BeGroundPlus, Circular::R, cdouble(1.0), +1, false});
  add_mirrored(d, {Level::Vac, Level::BeExcitedPlus, Circular::R, cdouble(be_excited_amp), +1, false});
  if (b > 0) add_mirrored(d, {Level::Vac, Level::DeExcitedPlus, Circular::R, s.mixing_.beta * be_excited_amp, +1, false});
  if (g > 0) add_mirrored(d, {Level::Vac, Level::DeExcitedPlus, Circular::L, s.mixing_.gamma * be_excited_amp, -1, false});
  add_mirrored(d, {Level::DeGroundPlus, Level::XxPlus, Circular::R, cdouble(1.0), +1, false});
  add_mirrored(d, {Level::XxPlus, Level::BeExcitedPlus, Circular::R, cdouble(1.0), +1, true});

  // Selection rule and spin-mirror closure.
  for (const auto& dip : d) {
    require(handedness_sign(dip.pol) * dip.bright_jz > 0, "selection rule violated for " + std::string(label(dip.to)));
    const bool mirrored = std::any_of(d.begin(), d.end(), [&](const TransitionDipole& m) {
      return m.from == spin_mirror(dip.from) && m.to == spin_mirror(dip.to) && m.pol == opposite(dip.pol) &&
             std::abs(std::abs(m.amplitude) - std::abs(dip.amplitude)) <= 1e-15;
    });
    require(mirrored, "missing spin-mirror dipole for " + std::string(label(dip.from)) + " -> " +
                          std::string(label(dip.to)));
  }
  return s;
}

SchemeConfig extract_config(const LevelScheme& scheme) { return scheme.source(); }

cdouble transition_dipole(const LevelScheme& scheme, Level from, Level to, Circular pol) {
  for (const auto& d : scheme.dipoles()) {
    if (d.pol != pol) continue;
    if ((d.from == from && d.to == to) || (d.from == to && d.to == from)) return d.amplitude;
  }
  return cdouble(0.0);
}

double transition_strength(const LevelScheme& scheme, Level from, Level to) {
  return std::norm(transition_dipole(scheme, from, to, Circular::R)) +
         std::norm(transition_dipole(scheme, from, to, Circular::L));
}

PleSpectrum synthesize_ple_spectrum(const LevelScheme& scheme, double line_width_ev, const VectorXd& grid_mev) {
  if (!positive_finite(line_width_ev)) throw ValidationError("synthesize_ple_spectrum: line width must be > 0");
  if (grid_mev.size() == 0) throw ValidationError("synthesize_ple_spectrum: empty energy grid");

  struct Resonance {
    double energy_mev;
    double strength;
    double h_fraction;  // share of the strength in the H channel
    bool dark_line;
  };
  const double s_be_g = transition_strength(scheme, Level::Vac, Level::BeGroundPlus);
  const double s_be_e = transition_strength(scheme, Level::Vac, Level::BeExcitedPlus);
  const double s_de_e = transition_strength(scheme, Level::Vac, Level::DeExcitedPlus);
  const auto& rat = scheme.ratios();
  const double be_shift_mev = scheme.source().be_offset_uev * 1e-3;
  const double e_de_g = scheme.scan_energy_mev(Level::DeGroundPlus);
  const double e_de_e = scheme.scan_energy_mev(Level::DeExcitedPlus);
  const double e_de_2 = scheme.source().de_second_mev;

  const std::vector<Resonance> lines = {
      {e_de_g, s_de_e / rat.de_excited_over_de_ground, 1.0, true},
      {e_de_e, s_de_e, 0.5, true},
      {e_de_2, s_de_e * rat.de_second_over_de_excited, 0.5, true},
      {e_de_g + be_shift_mev, s_be_g, 0.5, false},
      {e_de_e + be_shift_mev, s_be_e, 0.5, false},
      {e_de_2 + be_shift_mev, s_be_e * rat.de_second_over_de_excited, 0.5, false},
  };

  PleSpectrum out;
  const double lo = grid_mev.minCoeff();
  const double hi = grid_mev.maxCoeff();
  const bool covered =
      std::any_of(lines.begin(), lines.end(), [&](const Resonance& r) { return r.energy_mev >= lo && r.energy_mev <= hi; });
  if (!covered) {
    out.no_resonance_in_grid = true;
    return out;
  }

  const double half_width = 0.5 * line_width_ev / kMev;
  const auto n = grid_mev.size();
  out.energy_mev = grid_mev;
  out.de_h = out.de_v = out.be_h = out.be_v = VectorXd::Zero(n);
  for (const auto& r : lines) {
    const VectorXd shape =
        (half_width / constants::pi) / ((grid_mev.array() - r.energy_mev).square() + half_width * half_width);
    VectorXd& h = r.dark_line ? out.de_h : out.be_h;
    VectorXd& v = r.dark_line ? out.de_v : out.be_v;
    h += r.strength * r.h_fraction * shape;
    v += r.strength * (1.0 - r.h_fraction) * shape;
  }
  return out;
}

}  // namespace dexw
