#include "dexwrite/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "dexwrite/protocol.hpp"

namespace dexw {

namespace {

OracleCheck check(std::string name, double error, double tolerance) {
  return {std::move(name), error, tolerance, error < tolerance};
}

// Resonant gaussian pulse on VAC -> DE_E(+2) with the given channels.
double rabi_error(const LevelScheme& scheme, const std::vector<LindbladChannel>& channels) {
  double worst = 0.0;
  for (int q = 1; q <= 16; ++q) {
    const double theta = 0.25 * constants::pi * q;
    PulseSpec p;
    p.kind = PulseKind::Write;
    p.polarization = PolarizationState::right();
    p.area_rad = theta;
    const std::vector<DriveTerm> drive{{Level::Vac, Level::DeExcitedPlus, 1.0, 0.0, p}};
    VectorXd grid(2);
    grid << p.window_start(), p.window_end();
    const Trajectory t = evolve(StateMatrix::basis(Level::Vac), scheme, drive, channels, grid);
    worst = std::max(worst, std::abs(t.states.back().population(Level::DeExcitedPlus) - rabi_oracle(theta)));
  }
  return worst;
}

}  // namespace

std::vector<OracleCheck> run_oracles() {
  std::vector<OracleCheck> out;
  const LevelScheme scheme = build_scheme();
  const auto all = channels_from_scheme(scheme);

  out.push_back(check("rabi lossless, 0.25pi..4pi", rabi_error(scheme, {}), 1e-6));
  std::vector<LindbladChannel> radiative;
  for (const auto& c : all)
    if (c.name.rfind("de_excited_rad", 0) == 0) radiative.push_back(c);
  out.push_back(check("rabi with excited-DE radiative decay", rabi_error(scheme, radiative), 1e-3));

  {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g;
    const VectorXd grid = VectorXd::LinSpaced(41, 0.0, 20.0);
    double worst = 0.0;
    for (int n = 0; n < 10; ++n) {
      CVector2<double> a(cdouble(g(rng), g(rng)), cdouble(g(rng), g(rng)));
      a.normalize();
      const StateMatrix rho0 = StateMatrix::ground_de(a);
      const Trajectory t = evolve(rho0, scheme, {}, all, grid);
      const Bloch b0 = rho0.ground_de_bloch();
      for (Eigen::Index i = 0; i < grid.size(); ++i) {
        const Bloch ref = precession_oracle(b0, scheme.delta_ev(), scheme.rates().de_deph, scheme.rates().de_rad, grid(i));
        worst = std::max(worst, (t.states[static_cast<std::size_t>(i)].ground_de_bloch() - ref).norm());
      }
    }
    out.push_back(check("free precession, 10 random states over 20 ns", worst, 1e-6));
  }

  {
    DetectorModel det;
    det.bin_width_ns = 0.01;
    double worst = 0.0;
    for (double period : {1.0, 2.0, 3.1, 5.0, 10.0}) {
      const VectorXd t = VectorXd::LinSpaced(6001, -30.0, 30.0);
      ProbeSignal s{t, (1.0 + 0.5 * (constants::two_pi * t.array() / period).cos()).matrix(), VectorXd::Ones(t.size())};
      const ProbeSignal c = convolve_irf(s, det);
      // Centre sample, far from the edges.
      const double amp = (c.i_r(3000) - 1.0) / 0.5;
      worst = std::max(worst, std::abs(amp - det.irf_attenuation(period)));
    }
    out.push_back(check("IRF attenuation vs exp(-(2 pi sigma / T)^2 / 2)", worst, 1e-4));
  }

  {
    double worst = 0.0;
    for (double delta : {1.5, 1.334}) {
      ExperimentConfig c;
      apply_preset(c, Preset::Ideal);
      c.scheme.delta_uev = delta;
      const RunReport r = run_sequence(c);
      const double expected = period_from_splitting(delta * 1e-6);
      worst = std::max(worst, std::abs(r.result.fit.period / expected - 1.0));
    }
    out.push_back(check("fitted period vs h / delta (relative)", worst, 3e-3));
  }

  {
    ExperimentConfig c;
    apply_preset(c, Preset::Ideal);
    const RunReport r = run_sequence(c);
    const double period = build_scheme(c.scheme).precession_period_ns();
    double worst = 0.0;
    const DcpTrace& tr = r.result.trace;
    for (Eigen::Index i = 0; i < tr.times.size(); ++i)
      if (tr.valid(i) && tr.times(i) >= r.result.window.t_min && tr.times(i) <= r.result.window.t_max)
        worst = std::max(worst, std::abs(tr.dcp(i) - std::cos(constants::two_pi * tr.times(i) / period)));
    out.push_back(check("R-written DCP trace vs cos(2 pi t / T), ideal", worst, 1e-3));
  }

  {
    double worst = 0.0;
    for (int i = 1; i < 12; ++i)
      for (int j = 0; j < 12; ++j) {
        const double th = constants::pi * i / 12, ph = constants::two_pi * j / 12;
        const auto back = jones_to_poincare(poincare_to_jones(th, ph));
        worst = std::max({worst, std::abs(back.theta - th), std::abs(wrap_angle(back.phi - ph + constants::pi) - constants::pi)});
      }
    out.push_back(check("Poincare -> Jones -> Poincare round trip", worst, 1e-12));
  }
  return out;
}

std::string format_oracle_table(const std::vector<OracleCheck>& checks) {
  std::ostringstream o;
  char line[200];
  std::snprintf(line, sizeof line, "%-50s %12s %12s  %s\n", "oracle", "error", "tolerance", "result");
  o << line;
  for (const auto& c : checks) {
    std::snprintf(line, sizeof line, "%-50s %12.3e %12.3e  %s\n", c.name.c_str(), c.error, c.tolerance,
                  c.passed ? "PASS" : "FAIL");
    o << line;
  }
  return o.str();
}

}  // namespace dexw
