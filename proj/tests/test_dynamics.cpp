#include <doctest.h>

#include <random>

#include <Eigen/Eigenvalues>

#include "dexwrite/dynamics.hpp"

using namespace dexw;

namespace {

constexpr double pi = constants::pi;
constexpr double h_ev_ns = 4.135667696e-6;

PulseSpec gaussian(double area, double fwhm = 0.010) {
  PulseSpec p;
  p.kind = PulseKind::Write;
  p.polarization = PolarizationState::right();
  p.area_rad = area;
  p.duration_ns = fwhm;
  return p;
}

std::vector<DriveTerm> two_level(const PulseSpec& p) { return {{Level::Vac, Level::DeExcitedPlus, 1.0, 0.0, p}}; }

VectorXd endpoints(const PulseSpec& p) {
  VectorXd g(2);
  g << p.window_start(), p.window_end();
  return g;
}

// Independent precession reference: propagate the doublet amplitudes with
// exp(-i (w/2) sigma_x t), then damp populations and transverse spin.
Bloch reference_bloch(const CVector2<double>& c0, double delta_ev, double g_rad, double g_deph, double t) {
  const double w = 2 * pi * delta_ev / h_ev_ns;
  const cdouble co(std::cos(w * t / 2), 0.0), si(0.0, -std::sin(w * t / 2));
  const CVector2<double> c(co * c0(0) + si * c0(1), si * c0(0) + co * c0(1));
  const cdouble rho_pm = c(0) * std::conj(c(1));
  Bloch b(2 * rho_pm.real(), -2 * rho_pm.imag(), std::norm(c(0)) - std::norm(c(1)));
  b *= std::exp(-g_rad * t);
  b.y() *= std::exp(-g_deph * t);
  b.z() *= std::exp(-g_deph * t);
  return b;
}

CVector2<double> random_amplitudes(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  CVector2<double> a(cdouble(g(rng), g(rng)), cdouble(g(rng), g(rng)));
  return a.normalized();
}

}  // namespace

TEST_CASE("channels of the default scheme") {
  const LevelScheme s = build_scheme();
  const auto ch = channels_from_scheme(s);
  auto find = [&](const std::string& name) -> const LindbladChannel& {
    for (const auto& c : ch)
      if (c.name == name) return c;
    FAIL("missing channel " << name);
    return ch.front();
  };
  CHECK(find("relax_de").rate == doctest::Approx(10.0));
  CHECK(find("de_rad(+2)").rate == doctest::Approx(0.001));
  CHECK(find("xx_rad(-3)").rate == doctest::Approx(1.25));
  for (const auto& c : ch) {
    CHECK(c.rate >= 0.0);
    CHECK(c.jump.norm() > 0.0);
    const CMatrix j(c.jump);
    // Relaxation never flips the spin.
    CHECK(j(index(Level::DeGroundMinus), index(Level::DeExcitedPlus)) == cdouble(0.0));
    CHECK(j(index(Level::DeGroundPlus), index(Level::DeExcitedMinus)) == cdouble(0.0));
  }
}

TEST_CASE("free Hamiltonian of the ground doublet") {
  const LevelScheme s = build_scheme();
  const CMatrix h = free_hamiltonian(s);
  const int p = index(Level::DeGroundPlus), m = index(Level::DeGroundMinus);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(h.block(p, p, 2, 2).eval());
  const double gap_ev = (es.eigenvalues()(1) - es.eigenvalues()(0)) * h_ev_ns / (2 * pi);
  CHECK(gap_ev == doctest::Approx(1.5e-6).epsilon(1e-12));
  const double r = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(std::abs(es.eigenvectors()(0, 0)) - r) < 1e-14);
  CHECK(std::abs(es.eigenvectors()(0, 0) + es.eigenvectors()(1, 0)) < 1e-14);
  CHECK(std::abs(es.eigenvectors()(0, 1) - es.eigenvectors()(1, 1)) < 1e-14);
  CHECK((h - h.adjoint()).norm() == 0.0);
}

TEST_CASE("oracle values") {
  CHECK(rabi_oracle(pi) == doctest::Approx(1.0));
  CHECK(rabi_oracle(2 * pi) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(rabi_oracle(pi / 2) == doctest::Approx(0.5));
  // Generalized formula: max transfer w^2 / (w^2 + D^2).
  CHECK(rabi_oracle(pi, 1.0 * pi, 1.0) == doctest::Approx(0.5 * std::pow(std::sin(pi / std::sqrt(2.0)), 2)));

  const double period = h_ev_ns / 1.5e-6;
  CHECK(period == doctest::Approx(2.757).epsilon(3e-4));
  CHECK(period_from_splitting(1.5e-6) == doctest::Approx(period).epsilon(1e-14));
  CHECK(splitting_from_period(3.1) * 1e6 == doctest::Approx(1.334).epsilon(1e-3));
  const Bloch half = precession_oracle(Bloch(0, 0, 1), 1.5e-6, 0.0, 0.0, period / 2);
  CHECK((half - Bloch(0, 0, -1)).norm() < 1e-12);
}

TEST_CASE("area theorem on the write transition") {
  const LevelScheme s = build_scheme();
  for (int q = 1; q <= 16; ++q) {
    const double theta = 0.25 * pi * q;
    const PulseSpec g = gaussian(theta);
    const Trajectory t = evolve(StateMatrix::basis(Level::Vac), s, two_level(g), {}, endpoints(g));
    CHECK(std::abs(t.states.back().population(Level::DeExcitedPlus) - std::pow(std::sin(theta / 2), 2)) < 1e-6);

    PulseSpec flat = g;
    flat.envelope = EnvelopeShape::FlatTop;
    flat.duration_ns = 0.02;
    flat.edge_ns = 0.005;
    // The plateau area excludes the edges; each edge adds half its width.
    flat.area_rad = theta * flat.duration_ns / (flat.duration_ns + flat.edge_ns);
    const Trajectory tf = evolve(StateMatrix::basis(Level::Vac), s, two_level(flat), {}, endpoints(flat));
    CHECK(std::abs(tf.states.back().population(Level::DeExcitedPlus) - std::pow(std::sin(theta / 2), 2)) < 1e-6);
  }
}

TEST_CASE("Rabi flopping with excited-DE radiative decay") {
  const LevelScheme s = build_scheme();
  std::vector<LindbladChannel> ch;
  for (const auto& c : channels_from_scheme(s))
    if (c.name.rfind("de_excited_rad", 0) == 0) ch.push_back(c);
  REQUIRE(ch.size() == 2);
  for (int q = 1; q <= 16; ++q) {
    const double theta = 0.25 * pi * q;
    const PulseSpec g = gaussian(theta);
    const Trajectory t = evolve(StateMatrix::basis(Level::Vac), s, two_level(g), ch, endpoints(g));
    CHECK(std::abs(t.states.back().population(Level::DeExcitedPlus) - rabi_oracle(theta)) < 1e-3);
  }
}

TEST_CASE("free precession of |+2>") {
  SchemeConfig c;
  c.de_lifetime_ns = 1e12;
  c.de_coherence_ns = 1e12;
  const LevelScheme s = build_scheme(c);
  const double period = h_ev_ns / 1.5e-6;
  const VectorXd grid = VectorXd::LinSpaced(81, 0.0, 20.0);
  const Trajectory t = evolve(StateMatrix::basis(Level::DeGroundPlus), s, {}, channels_from_scheme(s), grid);
  for (Eigen::Index i = 0; i < grid.size(); ++i)
    CHECK(std::abs(t.states[static_cast<std::size_t>(i)].population(Level::DeGroundPlus) -
                   0.5 * (1 + std::cos(2 * pi * grid(i) / period))) < 1e-9);
}

TEST_CASE("eigenstates do not precess") {
  const LevelScheme s = build_scheme();
  const double r = 1.0 / std::sqrt(2.0);
  const VectorXd grid = VectorXd::LinSpaced(101, 0.0, 100.0);
  const Trajectory t =
      evolve(StateMatrix::ground_de(CVector2<double>(r, r)), s, {}, channels_from_scheme(s), grid);
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const auto& rho = t.states[static_cast<std::size_t>(i)];
    const double envelope = 0.5 * std::exp(-0.001 * grid(i));
    CHECK(std::abs(rho.population(Level::DeGroundPlus) - envelope) < 1e-8);
    CHECK(std::abs(rho.population(Level::DeGroundMinus) - envelope) < 1e-8);
  }
}

TEST_CASE("evolve matches the precession reference for random pure states") {
  const LevelScheme s = build_scheme();
  const auto ch = channels_from_scheme(s);
  const auto& r = s.rates();
  std::mt19937_64 rng(2024);
  const VectorXd grid = VectorXd::LinSpaced(101, 0.0, 20.0);
  double worst = 0.0, worst_lib = 0.0;
  for (int n = 0; n < 50; ++n) {
    const CVector2<double> a = random_amplitudes(rng);
    const StateMatrix rho0 = StateMatrix::ground_de(a);
    const Trajectory t = evolve(rho0, s, {}, ch, grid);
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      const Bloch ref = reference_bloch(a, s.delta_ev(), r.de_rad, r.de_deph, grid(i));
      worst = std::max(worst, (t.states[static_cast<std::size_t>(i)].ground_de_bloch() - ref).norm());
      const Bloch lib = precession_oracle(rho0.ground_de_bloch(), s.delta_ev(), r.de_deph, r.de_rad, grid(i));
      worst_lib = std::max(worst_lib, (lib - ref).norm());
    }
  }
  CHECK(worst < 1e-6);
  CHECK(worst_lib < 1e-12);
}

TEST_CASE("RK4 and exact propagation agree on free evolution") {
  const LevelScheme s = build_scheme();
  const auto ch = channels_from_scheme(s);
  std::mt19937_64 rng(1);
  const StateMatrix rho0 = StateMatrix::ground_de(random_amplitudes(rng));
  const VectorXd grid = VectorXd::LinSpaced(11, 0.0, 5.0);
  EvolveOptions rk;
  rk.exact_constant_segments = false;
  const Trajectory a = evolve(rho0, s, {}, ch, grid);
  const Trajectory b = evolve(rho0, s, {}, ch, grid, rk);
  CHECK(a.rk4_steps == 0);
  CHECK(b.exact_steps == 0);
  CHECK((a.states.back().elements - b.states.back().elements).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("step halving converges") {
  const LevelScheme s = build_scheme();
  const auto ch = channels_from_scheme(s);
  PulseSpec p = gaussian(pi);
  p.polarization = PolarizationState{1.0, 2.0};
  const auto drives = build_drive(s, p);
  const VectorXd grid = VectorXd::LinSpaced(41, -0.05, 1.0);
  EvolveOptions coarse;
  coarse.exact_constant_segments = false;
  coarse.max_step_ns = 0.002;
  coarse.pulse_resolution = 0.02;
  EvolveOptions fine = coarse;
  fine.max_step_ns = 0.001;
  fine.pulse_resolution = 0.01;
  const Trajectory a = evolve(StateMatrix::basis(Level::Vac), s, drives, ch, grid, coarse);
  const Trajectory b = evolve(StateMatrix::basis(Level::Vac), s, drives, ch, grid, fine);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.states.size(); ++i)
    for (Level l : kAllLevels) worst = std::max(worst, std::abs(a.states[i].population(l) - b.states[i].population(l)));
  CHECK(worst < 1e-8);
}

TEST_CASE("impulsive write agrees with the integrated pulse") {
  const LevelScheme s = build_scheme();
  for (const PolarizationState& pol : {PolarizationState::right(), PolarizationState{1.1, 0.7}}) {
    PulseSpec p = gaussian(pi);
    p.polarization = pol;
    const auto drives = build_drive(s, p);
    const VectorXd grid = VectorXd::LinSpaced(21, -0.1, 1.0);
    EvolveOptions imp;
    imp.impulsive_write = true;
    // No dissipation: the drive and the ground-doublet precession commute.
    const Trajectory a = evolve(StateMatrix::basis(Level::Vac), s, drives, {}, grid);
    const Trajectory b = evolve(StateMatrix::basis(Level::Vac), s, drives, {}, grid, imp);
    for (std::size_t i = 0; i < a.states.size(); ++i)
      if (grid(static_cast<Eigen::Index>(i)) > p.window_end())
        CHECK((a.states[i].elements - b.states[i].elements).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("impulsive unitary is unitary") {
  const LevelScheme s = build_scheme();
  PulseSpec p = gaussian(1.7);
  p.polarization = PolarizationState{0.4, 2.9};
  const CMatrix u = impulsive_unitary(build_drive(s, p));
  CHECK((u * u.adjoint() - CMatrix::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("physicality along a full write and relaxation") {
  const LevelScheme s = build_scheme();
  const auto ch = channels_from_scheme(s);
  PulseSpec p = gaussian(pi);
  p.polarization = PolarizationState{2.0, 0.3};
  const VectorXd grid = VectorXd::LinSpaced(201, -0.1, 100.0);
  const Trajectory t = evolve(StateMatrix::basis(Level::Vac), s, build_drive(s, p), ch, grid);
  for (const auto& rho : t.states) {
    CHECK(std::abs(rho.trace() - 1.0) < 1e-10);
    CHECK(rho.min_eigenvalue() >= -1e-9);
    CHECK(rho.hermiticity_error() == 0.0);
  }
  CHECK(t.max_hermiticity_correction < 1e-10);
  CHECK((t.emission_flux.array() >= 0).all());
  // Flux is rate times emitter population.
  const int col = t.flux_column("de_rad(+2)");
  for (Eigen::Index i = 0; i < grid.size(); ++i)
    CHECK(t.emission_flux(i, col) ==
          doctest::Approx(0.001 * t.states[static_cast<std::size_t>(i)].population(Level::DeGroundPlus)).epsilon(1e-12));
  CHECK_THROWS_AS(t.flux_column("nope"), ValidationError);
}

TEST_CASE("weak writes stay positive") {
  const LevelScheme s = build_scheme();
  const auto ch = channels_from_scheme(s);
  for (double area : {0.01, 0.05, 0.1, 0.3}) {
    PulseSpec p = gaussian(area * pi);
    const VectorXd grid = VectorXd::LinSpaced(51, -0.1, 1.0);
    const Trajectory t = evolve(StateMatrix::basis(Level::Vac), s, build_drive(s, p), ch, grid);
    for (const auto& rho : t.states) CHECK(rho.min_eigenvalue() >= -1e-12);
  }
}

TEST_CASE("input validation") {
  const LevelScheme s = build_scheme();
  const auto ch = channels_from_scheme(s);
  VectorXd bad(3);
  bad << 0.0, 1.0, 1.0;
  CHECK_THROWS_AS(evolve(StateMatrix::basis(Level::Vac), s, {}, ch, bad), ValidationError);
  StateMatrix rho = StateMatrix::basis(Level::Vac);
  rho.elements(0, 0) = 2.0;
  CHECK_THROWS_AS(evolve(rho, s, {}, ch, VectorXd::LinSpaced(3, 0.0, 1.0)), ValidationError);
  EvolveOptions coarse;
  coarse.max_step_ns = 0.05;
  CHECK_THROWS_AS(evolve(StateMatrix::basis(Level::Vac), s, {}, ch, VectorXd::LinSpaced(3, 0.0, 1.0), coarse),
                  ValidationError);
  PulseSpec flat = gaussian(pi);
  flat.envelope = EnvelopeShape::FlatTop;
  EvolveOptions imp;
  imp.impulsive_write = true;
  CHECK_THROWS_AS(evolve(StateMatrix::basis(Level::Vac), s, build_drive(s, flat), ch, VectorXd::LinSpaced(3, -1.0, 1.0), imp),
                  ValidationError);
}

TEST_CASE("timescale audit") {
  const LevelScheme s = build_scheme();
  const TimescaleAudit a = audit_timescales(s, {}, channels_from_scheme(s));
  CHECK(a.shortest_ns == doctest::Approx(0.1));
  CHECK(a.limiting == "relax_de");
  CHECK(a.step_ns <= a.shortest_ns / 20.0);
}
